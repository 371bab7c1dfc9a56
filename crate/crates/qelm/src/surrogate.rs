//! The QELM's exact classical representation, the Taylor transform onto a
//! monomial library, the true flow map via Lie series, and
//! coefficient-level comparison.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decodability::{pinv, RankedSvd};
use crate::encoding::{feature_taylor_matrix, feature_vector, EncodingScheme};
use crate::model::QelmModel;
use crate::poly::{MonomialBasis, Poly};
use crate::{dynsys::DynSystem, QelmError, Result};

/// Predicts with the trained weights through the same arithmetic path as
/// the model itself, so quantum-side and classical-representation
/// predictions agree bit-for-bit.
pub fn classical_predict(model: &QelmModel, u: &[f64]) -> Result<DVector<f64>> {
    model.predict(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformMethod {
    /// Exact truncated Taylor coefficients from the encoding series.
    Analytic,
    /// Least-squares fit of feature samples over the domain.
    Collocation { seed: u64 },
}

/// Monomial-library expansion of the full feature vector:
/// `phi(u) ~= K B(u)` near the operating point.
#[derive(Debug, Clone)]
pub struct TaylorTransform {
    /// `4^n x b` coefficient matrix over the monomial basis (Y-feature
    /// rows are identically zero).
    pub k: DMatrix<f64>,
    pub basis: MonomialBasis,
    pub point: Vec<f64>,
    pub order: u32,
    /// Numerical rank of the non-constant columns of the nonzero-feature
    /// block (the constant monomial is excluded from the count).
    pub rank: usize,
    pub scheme: EncodingScheme,
}

/// Expands the feature map over raw monomials of total degree <= r.
pub fn taylor_transform(
    scheme: EncodingScheme,
    u0: &[f64],
    r: u32,
    method: TransformMethod,
) -> Result<TaylorTransform> {
    let n = u0.len();
    let dim = 1usize << (2 * n);
    let basis = MonomialBasis::total_degree(n, r);
    let (k, feature_indices) = match method {
        TransformMethod::Analytic => {
            let ft = feature_taylor_matrix(scheme, u0, r)?;
            let mut k = DMatrix::zeros(dim, basis.len());
            for (row, &idx) in ft.feature_indices.iter().enumerate() {
                k.row_mut(idx).copy_from(&ft.a.row(row));
            }
            (k, ft.feature_indices)
        }
        TransformMethod::Collocation { seed } => {
            let samples = 10 * basis.len();
            let (lo, hi) = scheme.domain();
            // keep away from endpoints where amp-sqrt derivatives blow up
            let pad = 0.02 * (hi - lo);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut design = DMatrix::zeros(samples, basis.len());
            let mut values = DMatrix::zeros(samples, dim);
            for i in 0..samples {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(lo + pad..hi - pad)).collect();
                design.row_mut(i).copy_from(&basis.eval(&x).transpose());
                values
                    .row_mut(i)
                    .copy_from(&feature_vector(scheme, &x)?.transpose());
            }
            let k = (pinv(&design, None)? * values).transpose();
            let feature_indices = crate::encoding::nonzero_feature_indices(n)?;
            (k, feature_indices)
        }
    };
    // rank over the non-constant columns of the nonzero-feature block
    let mut block = DMatrix::zeros(feature_indices.len(), basis.len() - 1);
    for (row, &idx) in feature_indices.iter().enumerate() {
        for c in 1..basis.len() {
            block[(row, c - 1)] = k[(idx, c)];
        }
    }
    let rank = RankedSvd::new(&block, Some(1e-9))?.rank;
    Ok(TaylorTransform {
        k,
        basis,
        point: u0.to_vec(),
        order: r,
        rank,
        scheme,
    })
}

/// Flow-map coefficients over a monomial basis: row per output dimension.
#[derive(Debug, Clone)]
pub struct FlowMapCoefficients {
    pub coeffs: DMatrix<f64>,
    pub basis: MonomialBasis,
    pub dt: f64,
    pub source: String,
}

impl FlowMapCoefficients {
    pub fn eval(&self, u: &[f64]) -> DVector<f64> {
        &self.coeffs * self.basis.eval(u)
    }
}

/// The trained predictor as a monomial-library polynomial:
/// coefficients `W^T R K`.
pub fn learned_flowmap(
    model: &QelmModel,
    transform: &TaylorTransform,
    dt: f64,
) -> Result<FlowMapCoefficients> {
    if model.add_squares {
        return Err(QelmError::Contract(
            "flow-map extraction requires a plain linear readout (no squared features)".into(),
        ));
    }
    if model.scheme != transform.scheme {
        return Err(QelmError::Contract("model and transform use different encodings".into()));
    }
    if model.effective_ptm.matrix.ncols() != transform.k.nrows() {
        return Err(QelmError::Dimension("transform size does not match the readout map".into()));
    }
    Ok(FlowMapCoefficients {
        coeffs: model.weights.transpose() * &model.effective_ptm.matrix * &transform.k,
        basis: transform.basis.clone(),
        dt,
        source: "learned".to_string(),
    })
}

/// Exact Lie-series flow map of a polynomial field:
/// `psi(u) = sum_k (dt^k / k!) L_g^k u`, truncated at `order` in `dt` and
/// at `basis_degree` in the state variables.
pub fn true_flowmap(
    sys: &DynSystem,
    dt: f64,
    order: u32,
    basis_degree: u32,
) -> Result<FlowMapCoefficients> {
    if order > 4 {
        return Err(QelmError::Contract(format!(
            "Lie-series order {order} above supported maximum 4"
        )));
    }
    let dim = sys.dim();
    let basis = MonomialBasis::total_degree(dim, basis_degree);
    let mut coeffs = DMatrix::zeros(dim, basis.len());
    for out in 0..dim {
        let mut term = Poly::var(dim, out); // L_g^0 u_out
        let mut total = term.clone();
        let mut factor = 1.0;
        for k in 1..=order {
            // L_g f = g . grad f
            let mut next = Poly::zero(dim);
            for j in 0..dim {
                next = next.add(&sys.field[j].mul(&term.partial(j)));
            }
            term = next.truncate_degree(basis_degree);
            factor *= dt / k as f64;
            total = total.add(&term.scale(factor));
        }
        coeffs
            .row_mut(out)
            .copy_from(&total.truncate_degree(basis_degree).coefficients(&basis)?.transpose());
    }
    Ok(FlowMapCoefficients {
        coeffs,
        basis,
        dt,
        source: format!("lie-series order {order}"),
    })
}

/// One row of a coefficient comparison table.
#[derive(Debug, Clone)]
pub struct CoefficientError {
    pub output: usize,
    pub exponents: Vec<u32>,
    pub degree: u32,
    pub learned: f64,
    pub truth: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

/// Per-coefficient comparison of a learned and a reference flow map on the
/// same monomial basis.
pub fn compare_flowmaps(
    learned: &FlowMapCoefficients,
    truth: &FlowMapCoefficients,
) -> Result<Vec<CoefficientError>> {
    if learned.basis != truth.basis || learned.coeffs.shape() != truth.coeffs.shape() {
        return Err(QelmError::Dimension("flow maps use different monomial bases".into()));
    }
    let mut rows = Vec::new();
    for out in 0..learned.coeffs.nrows() {
        for (j, exp) in learned.basis.exponents().iter().enumerate() {
            let l = learned.coeffs[(out, j)];
            let t = truth.coeffs[(out, j)];
            let abs_err = (l - t).abs();
            rows.push(CoefficientError {
                output: out,
                exponents: exp.clone(),
                degree: exp.iter().sum(),
                learned: l,
                truth: t,
                abs_err,
                rel_err: if t.abs() > 1e-14 { abs_err / t.abs() } else { abs_err },
            });
        }
    }
    rows.sort_by_key(|r| (r.output, r.degree, r.exponents.clone()));
    Ok(rows)
}
