//! The QELM model: readout feature evaluation, ridge training,
//! multi-output prediction, and the kernel-representation consistency
//! checks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::TransferMatrix;
use crate::decodability::{pinv, RankedSvd};
use crate::encoding::{encoded_state, feature_vector, EncodingScheme};
use crate::{QelmError, Result};

/// Condition number above which training reports an ill-conditioning
/// warning.
pub const COND_WARN: f64 = 1e14;

/// A trained QELM: fixed readout map plus learned linear weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QelmModel {
    /// `M_eff x D_out`; `M_eff` doubles when squares are appended.
    pub weights: DMatrix<f64>,
    pub effective_ptm: TransferMatrix,
    pub scheme: EncodingScheme,
    pub lambda: f64,
    /// Append squared readout components as extra features.
    pub add_squares: bool,
    pub provenance: String,
    /// Condition number of the training normal matrix.
    pub condition: f64,
}

impl QelmModel {
    /// `F(x) = R phi(x)`, with squares appended when configured.
    pub fn readout_features(&self, x: &[f64]) -> Result<DVector<f64>> {
        let phi = feature_vector(self.scheme, x)?;
        let f = &self.effective_ptm.matrix * phi;
        Ok(if self.add_squares { append_squares(&f) } else { f })
    }

    /// `f(x) = W^T F(x)`.
    pub fn predict(&self, x: &[f64]) -> Result<DVector<f64>> {
        let f = self.readout_features(x)?;
        Ok(self.weights.transpose() * f)
    }

    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<DVector<f64>>> {
        xs.par_iter().map(|x| self.predict(x)).collect()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<QelmModel> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn append_squares(f: &DVector<f64>) -> DVector<f64> {
    let m = f.len();
    DVector::from_fn(2 * m, |i, _| if i < m { f[i] } else { f[i - m].powi(2) })
}

/// Readout design matrix: column `i` is `R phi(x_i)` (plus squares when
/// requested).
pub fn readout_design(
    r: &TransferMatrix,
    scheme: EncodingScheme,
    add_squares: bool,
    inputs: &[Vec<f64>],
) -> Result<DMatrix<f64>> {
    let cols: Vec<DVector<f64>> = inputs
        .par_iter()
        .map(|x| {
            let f = &r.matrix * feature_vector(scheme, x)?;
            Ok(if add_squares { append_squares(&f) } else { f })
        })
        .collect::<Result<_>>()?;
    let m = cols[0].len();
    let mut g = DMatrix::zeros(m, inputs.len());
    for (i, c) in cols.iter().enumerate() {
        g.column_mut(i).copy_from(c);
    }
    Ok(g)
}

/// Feature and readout designs with their Gram matrices, ranks, and
/// condition numbers.
#[derive(Debug, Clone)]
pub struct DesignMatrices {
    /// `4^n x P` feature design.
    pub phi: DMatrix<f64>,
    /// `M_tot x P` readout design, `G = R Phi`.
    pub g: DMatrix<f64>,
    /// `Phi Phi^T`.
    pub c: DMatrix<f64>,
    /// `G G^T`.
    pub ggt: DMatrix<f64>,
    pub rank_phi: usize,
    pub rank_g: usize,
    pub cond_c: f64,
    pub cond_ggt: f64,
}

pub fn design_matrices(
    r: &TransferMatrix,
    scheme: EncodingScheme,
    inputs: &[Vec<f64>],
) -> Result<DesignMatrices> {
    let dim = r.matrix.ncols();
    let mut phi = DMatrix::zeros(dim, inputs.len());
    for (i, x) in inputs.iter().enumerate() {
        phi.column_mut(i).copy_from(&feature_vector(scheme, x)?);
    }
    let g = &r.matrix * &phi;
    let c = &phi * phi.transpose();
    let ggt = &g * g.transpose();
    let cond = |m: &DMatrix<f64>| {
        let s = m.clone().singular_values();
        let smin = s.min();
        if smin > 0.0 {
            s.max() / smin
        } else {
            f64::INFINITY
        }
    };
    Ok(DesignMatrices {
        rank_phi: RankedSvd::new(&phi, None)?.rank,
        rank_g: RankedSvd::new(&g, None)?.rank,
        cond_c: cond(&c),
        cond_ggt: cond(&ggt),
        phi,
        g,
        c,
        ggt,
    })
}

/// Ridge solution of `G^T W ~= Y`, choosing the smaller normal system
/// (primal `M x M` when `M <= P`, dual `P x P` otherwise). `lambda = 0`
/// falls back to the minimum-norm pseudoinverse solution. Returns the
/// weights and the condition number of the solved system.
pub fn train_weights(
    g: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
) -> Result<(DMatrix<f64>, f64)> {
    let (m, p) = (g.nrows(), g.ncols());
    if y.nrows() != p {
        return Err(QelmError::Dimension(format!(
            "target rows {} do not match sample count {p}",
            y.nrows()
        )));
    }
    if lambda < 0.0 {
        return Err(QelmError::Contract(format!("negative regularization {lambda}")));
    }
    if lambda == 0.0 {
        let w = pinv(&g.transpose(), None)? * y;
        return Ok((w, f64::INFINITY));
    }
    let solve_spd = |a: DMatrix<f64>, rhs: DMatrix<f64>| -> Result<(DMatrix<f64>, f64)> {
        let s = a.clone().singular_values();
        let cond = s.max() / s.min();
        let chol = a
            .cholesky()
            .ok_or_else(|| QelmError::Numeric("ridge normal matrix not positive definite".into()))?;
        Ok((chol.solve(&rhs), cond))
    };
    let (w, cond) = if m <= p {
        let mut a = g * g.transpose();
        for i in 0..m {
            a[(i, i)] += lambda;
        }
        solve_spd(a, g * y)?
    } else {
        let mut a = g.transpose() * g;
        for i in 0..p {
            a[(i, i)] += lambda;
        }
        let (alpha, cond) = solve_spd(a, y.clone())?;
        (g * alpha, cond)
    };
    if cond > COND_WARN {
        eprintln!("warning: ridge system condition number {cond:.3e} exceeds {COND_WARN:.0e}");
    }
    Ok((w, cond))
}

/// Trains a QELM end to end from input samples and targets.
#[allow(clippy::too_many_arguments)]
pub fn fit(
    effective_ptm: TransferMatrix,
    scheme: EncodingScheme,
    add_squares: bool,
    inputs: &[Vec<f64>],
    targets: &DMatrix<f64>,
    lambda: f64,
    provenance: &str,
) -> Result<QelmModel> {
    let g = readout_design(&effective_ptm, scheme, add_squares, inputs)?;
    let (weights, condition) = train_weights(&g, targets, lambda)?;
    Ok(QelmModel {
        weights,
        effective_ptm,
        scheme,
        lambda,
        add_squares,
        provenance: provenance.to_string(),
        condition,
    })
}

/// Encoded-state Gram matrix `K_ij = tr(rho(x_i) rho(x_j))`
/// `= |<psi_i|psi_j>|^2 = (1/d) phi(x_i)^T phi(x_j)`.
pub fn kernel_matrix(
    scheme: EncodingScheme,
    a: &[Vec<f64>],
    b: &[Vec<f64>],
) -> Result<DMatrix<f64>> {
    let states_a: Vec<DVector<Complex64>> = a
        .iter()
        .map(|x| encoded_state(scheme, x))
        .collect::<Result<_>>()?;
    let states_b: Vec<DVector<Complex64>> = b
        .iter()
        .map(|x| encoded_state(scheme, x))
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| {
        states_a[i].dotc(&states_b[j]).norm_sqr()
    }))
}

/// Kernel ridge regression in the encoded-state kernel.
///
/// Equivalent to a full-Pauli-basis QELM trained at regularization
/// `d * lambda`, since the linear-readout Gram is `d` times this kernel.
#[derive(Debug, Clone)]
pub struct KernelModel {
    pub alphas: DMatrix<f64>,
    pub train_inputs: Vec<Vec<f64>>,
    pub scheme: EncodingScheme,
    pub lambda: f64,
}

pub fn kernel_fit(
    scheme: EncodingScheme,
    inputs: &[Vec<f64>],
    targets: &DMatrix<f64>,
    lambda: f64,
) -> Result<KernelModel> {
    let mut k = kernel_matrix(scheme, inputs, inputs)?;
    for i in 0..k.nrows() {
        k[(i, i)] += lambda;
    }
    let chol = k
        .cholesky()
        .ok_or_else(|| QelmError::Numeric("kernel matrix not positive definite".into()))?;
    Ok(KernelModel {
        alphas: chol.solve(targets),
        train_inputs: inputs.to_vec(),
        scheme,
        lambda,
    })
}

impl KernelModel {
    pub fn predict(&self, x: &[f64]) -> Result<DVector<f64>> {
        let k = kernel_matrix(self.scheme, &[x.to_vec()], &self.train_inputs)?;
        Ok((k * &self.alphas).row(0).transpose())
    }

    /// The optimal measurement operator `M* = sum_j alpha_j rho(x_j)` for
    /// one output dimension; predictions are `tr(M* rho(x))`.
    pub fn optimal_measurement(&self, output: usize) -> Result<DMatrix<Complex64>> {
        let d = 1usize << self.train_inputs[0].len();
        let mut m = DMatrix::<Complex64>::zeros(d, d);
        for (j, x) in self.train_inputs.iter().enumerate() {
            let psi = encoded_state(self.scheme, x)?;
            let rho = &psi * psi.adjoint();
            m += rho.scale(self.alphas[(j, output)]);
        }
        Ok(m)
    }
}

/// `tr(M rho(x))` for a Hermitian measurement operator.
pub fn measure(
    m: &DMatrix<Complex64>,
    scheme: EncodingScheme,
    x: &[f64],
) -> Result<f64> {
    let psi = encoded_state(scheme, x)?;
    Ok((psi.adjoint() * m * psi)[(0, 0)].re)
}
