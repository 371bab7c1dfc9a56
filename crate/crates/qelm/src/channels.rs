//! Hamiltonians, unitary evolution, and Pauli transfer matrices for
//! unitary and noisy channels.
//!
//! The matrix exponential goes through a Hermitian eigendecomposition so
//! the resulting propagator is unitary to machine precision at any time.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::pauli::{enumerate_basis, Letter, PauliString};
use crate::{QelmError, Result};

/// Residual tolerance before imaginary parts of a PTM are discarded.
const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// Transverse-field Ising model variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfimVariant {
    /// `-J sum Z_j Z_{j+1} - h sum X_j`
    ZzX,
    /// `-J sum X_j X_{j+1} - h sum Z_j`
    XxZ,
}

/// Dense Hermitian reservoir Hamiltonian.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    pub matrix: DMatrix<Complex64>,
    pub n: usize,
    pub label: String,
}

impl Hamiltonian {
    fn checked(matrix: DMatrix<Complex64>, n: usize, label: String) -> Result<Hamiltonian> {
        let herm = (&matrix - matrix.adjoint()).map(|c| c.norm()).max();
        if herm > 1e-12 {
            return Err(QelmError::Contract(format!(
                "Hamiltonian \"{label}\" not Hermitian (residual {herm:.2e})"
            )));
        }
        Ok(Hamiltonian { matrix, n, label })
    }

    /// Unitary propagator `U(t) = exp(-i t H)` via eigendecomposition.
    pub fn evolve(&self, t: f64) -> DMatrix<Complex64> {
        let eig = nalgebra::SymmetricEigen::new(self.matrix.clone());
        let d = self.matrix.nrows();
        let mut phases = DMatrix::zeros(d, d);
        for (i, lam) in eig.eigenvalues.iter().enumerate() {
            phases[(i, i)] = Complex64::from_polar(1.0, -t * lam);
        }
        &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
    }
}

/// Open-chain TFIM per the stated variant, with minus signs as written.
pub fn tfim_hamiltonian(variant: TfimVariant, n: usize, j: f64, h: f64) -> Result<Hamiltonian> {
    let basis_check = enumerate_basis(n)?; // validates n
    drop(basis_check);
    let d = 1usize << n;
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    let (coupling, field) = match variant {
        TfimVariant::ZzX => (Letter::Z, Letter::X),
        TfimVariant::XxZ => (Letter::X, Letter::Z),
    };
    for site in 0..n.saturating_sub(1) {
        let mut letters = vec![Letter::I; n];
        letters[site] = coupling;
        letters[site + 1] = coupling;
        m -= PauliString::from_letters(&letters)?.to_matrix().scale(j);
    }
    for site in 0..n {
        let mut letters = vec![Letter::I; n];
        letters[site] = field;
        m -= PauliString::from_letters(&letters)?.to_matrix().scale(h);
    }
    let tag = match variant {
        TfimVariant::ZzX => "tfim-zzx",
        TfimVariant::XxZ => "tfim-xxz",
    };
    Hamiltonian::checked(m, n, format!("{tag}:J={j},h={h}"))
}

/// GUE-distributed Hermitian matrix, normalized so the spectral radius is
/// close to sqrt(d); deterministic under the seed.
pub fn random_hamiltonian(n: usize, seed: u64) -> Result<Hamiltonian> {
    enumerate_basis(n)?;
    let d = 1usize << n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = DMatrix::<Complex64>::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            g[(r, c)] = Complex64::new(re, im) * 0.5;
        }
    }
    let h = (&g + g.adjoint()).scale(0.5);
    Hamiltonian::checked(h, n, format!("random:seed={seed}"))
}

/// Parses Hamiltonian config tokens: "tfim-zzx:J=1,h=1", "tfim-xxz:...",
/// "random:seed=N".
pub fn parse_hamiltonian_token(token: &str, n: usize) -> Result<Hamiltonian> {
    let (kind, rest) = token
        .split_once(':')
        .ok_or_else(|| QelmError::UnknownToken(format!("Hamiltonian token \"{token}\"")))?;
    let params: std::collections::HashMap<&str, &str> = rest
        .split(',')
        .filter_map(|kv| kv.split_once('='))
        .collect();
    let get = |key: &str| -> Result<f64> {
        params
            .get(key)
            .ok_or_else(|| QelmError::UnknownToken(format!("missing {key} in \"{token}\"")))?
            .parse()
            .map_err(|_| QelmError::UnknownToken(format!("bad {key} in \"{token}\"")))
    };
    match kind {
        "tfim-zzx" => tfim_hamiltonian(TfimVariant::ZzX, n, get("J")?, get("h")?),
        "tfim-xxz" => tfim_hamiltonian(TfimVariant::XxZ, n, get("J")?, get("h")?),
        "random" => random_hamiltonian(n, get("seed")? as u64),
        other => Err(QelmError::UnknownToken(format!(
            "unknown Hamiltonian kind \"{other}\""
        ))),
    }
}

/// Real linear map on Pauli feature vectors. Rows index output observables
/// (possibly stacked over multiplexing times), columns the full 4^n basis.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TransferMatrix {
    pub matrix: DMatrix<f64>,
    pub n: usize,
    pub meta: String,
}

impl TransferMatrix {
    pub fn dim(&self) -> usize {
        1usize << (2 * self.n)
    }
}

fn check_unitary(u: &DMatrix<Complex64>) -> Result<()> {
    let d = u.nrows();
    let eye = DMatrix::<Complex64>::identity(d, d);
    let res = (u * u.adjoint() - eye).map(|c| c.norm()).max();
    if res > 1e-10 {
        return Err(QelmError::Contract(format!(
            "matrix is not unitary (residual {res:.2e})"
        )));
    }
    Ok(())
}

/// `V_kj = (1/d) tr(P_k U P_j U^dag)`; orthogonal for unitary `U`.
pub fn ptm_of_unitary(u: &DMatrix<Complex64>) -> Result<TransferMatrix> {
    check_unitary(u)?;
    let d = u.nrows();
    let n = d.trailing_zeros() as usize;
    let basis = enumerate_basis(n)?;
    let dim = basis.len();
    let mut v = DMatrix::zeros(dim, dim);
    let u_adj = u.adjoint();
    let mut column = DMatrix::<Complex64>::zeros(d, d);
    for (jj, pj) in basis.iter().enumerate() {
        let mj = pj.masks();
        // column = U * P_j  (column permutation + phase of U's columns)
        for c in 0..d {
            let phase = mj.phase(c);
            for r in 0..d {
                column[(r, c)] = phase * u[(r, c ^ mj.xmask)];
            }
        }
        let heis = &column * &u_adj; // U P_j U^dag
        for (kk, pk) in basis.iter().enumerate() {
            let t = pk.trace_with(&heis) / d as f64;
            if t.im.abs() > IMAG_RESIDUE_TOL {
                return Err(QelmError::Numeric(format!(
                    "PTM entry ({kk},{jj}) has imaginary residue {:.2e}",
                    t.im
                )));
            }
            v[(kk, jj)] = t.re;
        }
    }
    Ok(TransferMatrix {
        matrix: v,
        n,
        meta: "unitary".to_string(),
    })
}

/// Kraus operators of a CPTP channel with checked completeness.
#[derive(Debug, Clone)]
pub struct KrausSet {
    pub operators: Vec<DMatrix<Complex64>>,
    pub n: usize,
}

impl KrausSet {
    pub fn new(operators: Vec<DMatrix<Complex64>>) -> Result<KrausSet> {
        let d = operators
            .first()
            .ok_or_else(|| QelmError::Contract("empty Kraus set".into()))?
            .nrows();
        let n = d.trailing_zeros() as usize;
        let mut acc = DMatrix::<Complex64>::zeros(d, d);
        for k in &operators {
            if k.nrows() != d || k.ncols() != d {
                return Err(QelmError::Dimension("ragged Kraus operators".into()));
            }
            acc += k.adjoint() * k;
        }
        let res = (acc - DMatrix::<Complex64>::identity(d, d))
            .map(|c| c.norm())
            .max();
        if res > 1e-10 {
            return Err(QelmError::Contract(format!(
                "Kraus completeness violated (residual {res:.2e})"
            )));
        }
        Ok(KrausSet { operators, n })
    }
}

/// `T_ab = (1/d) sum_l tr(P_a K_l P_b K_l^dag)`.
pub fn ptm_of_kraus(ks: &KrausSet) -> Result<TransferMatrix> {
    let basis = enumerate_basis(ks.n)?;
    let d = 1usize << ks.n;
    let dim = basis.len();
    let mut t = DMatrix::<f64>::zeros(dim, dim);
    let mut column = DMatrix::<Complex64>::zeros(d, d);
    for k_op in &ks.operators {
        let k_adj = k_op.adjoint();
        for (jj, pj) in basis.iter().enumerate() {
            let mj = pj.masks();
            for c in 0..d {
                let phase = mj.phase(c);
                for r in 0..d {
                    column[(r, c)] = phase * k_op[(r, c ^ mj.xmask)];
                }
            }
            let conj = &column * &k_adj;
            for (kk, pk) in basis.iter().enumerate() {
                let tr = pk.trace_with(&conj) / d as f64;
                if tr.im.abs() > IMAG_RESIDUE_TOL {
                    return Err(QelmError::Numeric(format!(
                        "Kraus PTM entry ({kk},{jj}) has imaginary residue {:.2e}",
                        tr.im
                    )));
                }
                t[(kk, jj)] += tr.re;
            }
        }
    }
    Ok(TransferMatrix {
        matrix: t,
        n: ks.n,
        meta: "kraus".to_string(),
    })
}

/// Single-qubit noise channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    Depolarizing { lambda: f64 },
    DephasingZ { p: f64 },
    AmplitudeDamping { gamma: f64, z_star: f64 },
}

impl NoiseKind {
    /// Parses noise tokens "dep:0.9", "dephz:0.1", "ad:0.2,1.0".
    pub fn parse(token: &str) -> Result<NoiseKind> {
        let (kind, rest) = token
            .split_once(':')
            .ok_or_else(|| QelmError::UnknownToken(format!("noise token \"{token}\"")))?;
        let nums: Vec<f64> = rest
            .split(',')
            .map(|s| {
                s.parse()
                    .map_err(|_| QelmError::UnknownToken(format!("bad number in \"{token}\"")))
            })
            .collect::<Result<_>>()?;
        match (kind, nums.as_slice()) {
            ("dep", [lambda]) => Ok(NoiseKind::Depolarizing { lambda: *lambda }),
            ("dephz", [p]) => Ok(NoiseKind::DephasingZ { p: *p }),
            ("ad", [gamma, z_star]) => Ok(NoiseKind::AmplitudeDamping {
                gamma: *gamma,
                z_star: *z_star,
            }),
            _ => Err(QelmError::UnknownToken(format!("noise token \"{token}\""))),
        }
    }
}

/// Exact closed-form single-qubit noise PTM (4x4).
pub fn noise_ptm(kind: NoiseKind) -> Result<TransferMatrix> {
    let in_unit = |v: f64, name: &str| -> Result<()> {
        if !(0.0..=1.0).contains(&v) {
            return Err(QelmError::Domain(format!("{name}={v} outside [0,1]")));
        }
        Ok(())
    };
    let mut m = DMatrix::<f64>::identity(4, 4);
    let meta;
    match kind {
        NoiseKind::Depolarizing { lambda } => {
            in_unit(lambda, "lambda")?;
            for i in 1..4 {
                m[(i, i)] = lambda;
            }
            meta = format!("dep:{lambda}");
        }
        NoiseKind::DephasingZ { p } => {
            in_unit(p, "p")?;
            m[(1, 1)] = 1.0 - 2.0 * p;
            m[(2, 2)] = 1.0 - 2.0 * p;
            meta = format!("dephz:{p}");
        }
        NoiseKind::AmplitudeDamping { gamma, z_star } => {
            in_unit(gamma, "gamma")?;
            if !(-1.0..=1.0).contains(&z_star) {
                return Err(QelmError::Domain(format!("z_star={z_star} outside [-1,1]")));
            }
            m[(1, 1)] = (1.0 - gamma).sqrt();
            m[(2, 2)] = (1.0 - gamma).sqrt();
            m[(3, 3)] = 1.0 - gamma;
            m[(3, 0)] = z_star * gamma;
            meta = format!("ad:{gamma},{z_star}");
        }
    }
    Ok(TransferMatrix { matrix: m, n: 1, meta })
}

/// Kronecker product of single-qubit PTMs in the basis ordering.
pub fn tensor_ptm(factors: &[TransferMatrix]) -> Result<TransferMatrix> {
    if factors.is_empty() {
        return Err(QelmError::Dimension("empty factor list".into()));
    }
    let mut out = factors[0].matrix.clone();
    let mut n = factors[0].n;
    for f in &factors[1..] {
        out = out.kronecker(&f.matrix);
        n += f.n;
    }
    let meta = factors
        .iter()
        .map(|f| f.meta.as_str())
        .collect::<Vec<_>>()
        .join(" (x) ");
    Ok(TransferMatrix { matrix: out, n, meta })
}

/// Affine block decomposition of a trace-preserving PTM: `s' = t + Omega s`.
#[derive(Debug, Clone)]
pub struct AffineParts {
    pub translation: DVector<f64>,
    pub linear: DMatrix<f64>,
    pub unital: bool,
    pub sv_min: f64,
    pub sv_max: f64,
}

pub fn affine_decompose(t: &TransferMatrix) -> Result<AffineParts> {
    let m = &t.matrix;
    if m.nrows() != m.ncols() {
        return Err(QelmError::Dimension("affine decomposition needs a square PTM".into()));
    }
    let dim = m.nrows();
    // trace preservation: first row must be e0
    for c in 0..dim {
        let want = if c == 0 { 1.0 } else { 0.0 };
        if (m[(0, c)] - want).abs() > 1e-10 {
            return Err(QelmError::Contract(format!(
                "first PTM row is not e0 (column {c}: {})",
                m[(0, c)]
            )));
        }
    }
    let translation = DVector::from_iterator(dim - 1, (1..dim).map(|r| m[(r, 0)]));
    let linear = m.view((1, 1), (dim - 1, dim - 1)).into_owned();
    let svals = linear.clone().singular_values();
    let sv_max = svals.max();
    let sv_min = svals.min();
    let unital = translation.norm() < 1e-12;
    Ok(AffineParts {
        translation,
        linear,
        unital,
        sv_min,
        sv_max,
    })
}

/// Depolarizing Kraus family: `sqrt(lambda) I` plus the uniform Pauli set
/// with weight `(1-lambda)/4` each.
pub fn depolarizing_kraus(lambda: f64) -> Result<KrausSet> {
    let eye = DMatrix::<Complex64>::identity(2, 2);
    let mut ops = vec![eye.scale(lambda.sqrt())];
    let w = ((1.0 - lambda) / 4.0).sqrt();
    for tok in ["I", "X", "Y", "Z"] {
        ops.push(PauliString::parse(tok)?.to_matrix().scale(w));
    }
    Ok(KrausSet::new(ops)?)
}
