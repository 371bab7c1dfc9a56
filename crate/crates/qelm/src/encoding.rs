//! Product-state encoding schemes and their Pauli feature vectors.
//!
//! Each scheme maps one scalar per qubit to a pure single-qubit state with
//! real amplitudes, so every feature containing a Pauli-Y letter vanishes
//! identically and the effective feature count is 3^n.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::pauli::{enumerate_basis, Letter};
use crate::poly::{MonomialBasis, Poly};
use crate::series::Series;
use crate::{QelmError, Result};

/// Product-state encoding scheme with its per-coordinate domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncodingScheme {
    /// `sqrt(u)|0> + sqrt(1-u)|1>` on [0, 1].
    AmplitudeSqrt,
    /// `u|0> + sqrt(1-u^2)|1>` on [-1, 1].
    AmplitudeSquare,
    /// Y-rotation encoding with features `(1, sin(pi u), 0, cos(pi u))` on [0, 1].
    RotationalY,
}

impl EncodingScheme {
    /// Parses the CLI/config token: "amp-sqrt" | "amp-sq" | "rot-y".
    pub fn parse(token: &str) -> Result<EncodingScheme> {
        match token {
            "amp-sqrt" => Ok(EncodingScheme::AmplitudeSqrt),
            "amp-sq" => Ok(EncodingScheme::AmplitudeSquare),
            "rot-y" => Ok(EncodingScheme::RotationalY),
            other => Err(QelmError::UnknownToken(format!(
                "unknown encoding token \"{other}\" (expected amp-sqrt, amp-sq, or rot-y)"
            ))),
        }
    }

    pub fn token(&self) -> &'static str {
        match self {
            EncodingScheme::AmplitudeSqrt => "amp-sqrt",
            EncodingScheme::AmplitudeSquare => "amp-sq",
            EncodingScheme::RotationalY => "rot-y",
        }
    }

    /// Per-coordinate closed domain interval.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            EncodingScheme::AmplitudeSqrt | EncodingScheme::RotationalY => (0.0, 1.0),
            EncodingScheme::AmplitudeSquare => (-1.0, 1.0),
        }
    }

    pub fn check_domain(&self, u: f64, coordinate: usize) -> Result<()> {
        let (lo, hi) = self.domain();
        if u < lo || u > hi || !u.is_finite() {
            return Err(QelmError::Domain(format!(
                "coordinate {coordinate}: value {u} outside encoding domain [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    /// Real amplitudes `(a0, a1)` of the encoded single-qubit state.
    pub fn amplitudes(&self, u: f64) -> (f64, f64) {
        match self {
            EncodingScheme::AmplitudeSqrt => (u.sqrt(), (1.0 - u).sqrt()),
            EncodingScheme::AmplitudeSquare => (u, (1.0 - u * u).max(0.0).sqrt()),
            EncodingScheme::RotationalY => {
                let half = std::f64::consts::PI * u / 2.0;
                (half.cos(), half.sin())
            }
        }
    }
}

/// Single-qubit Pauli features `(1, phi_x, phi_y, phi_z)` of the encoded state.
pub fn single_qubit_features(scheme: EncodingScheme, u: f64) -> Result<[f64; 4]> {
    scheme.check_domain(u, 0)?;
    Ok(single_qubit_features_unchecked(scheme, u))
}

fn single_qubit_features_unchecked(scheme: EncodingScheme, u: f64) -> [f64; 4] {
    match scheme {
        EncodingScheme::AmplitudeSqrt => {
            [1.0, 2.0 * ((1.0 - u) * u).max(0.0).sqrt(), 0.0, 2.0 * u - 1.0]
        }
        EncodingScheme::AmplitudeSquare => [
            1.0,
            2.0 * u * (1.0 - u * u).max(0.0).sqrt(),
            0.0,
            2.0 * u * u - 1.0,
        ],
        EncodingScheme::RotationalY => {
            let a = std::f64::consts::PI * u;
            [1.0, a.sin(), 0.0, a.cos()]
        }
    }
}

/// Full 4^n feature vector: Kronecker product of per-qubit 4-vectors in the
/// Pauli basis ordering (qubit 1 most significant).
pub fn feature_vector(scheme: EncodingScheme, x: &[f64]) -> Result<DVector<f64>> {
    let n = x.len();
    if n == 0 || n > crate::pauli::MAX_QUBITS {
        return Err(QelmError::SizeLimit(format!(
            "input dimension {n} outside supported range"
        )));
    }
    for (j, u) in x.iter().enumerate() {
        scheme.check_domain(*u, j)?;
    }
    let mut out = vec![1.0f64];
    for u in x {
        let f = single_qubit_features_unchecked(scheme, *u);
        let mut next = Vec::with_capacity(out.len() * 4);
        for v in &out {
            for fa in &f {
                next.push(v * fa);
            }
        }
        out = next;
    }
    Ok(DVector::from_vec(out))
}

/// Encoded n-qubit product state vector (for density-matrix oracles and the
/// kernel path).
pub fn encoded_state(scheme: EncodingScheme, x: &[f64]) -> Result<DVector<Complex64>> {
    for (j, u) in x.iter().enumerate() {
        scheme.check_domain(*u, j)?;
    }
    let mut amps = vec![Complex64::new(1.0, 0.0)];
    for u in x {
        let (a0, a1) = scheme.amplitudes(*u);
        let mut next = Vec::with_capacity(amps.len() * 2);
        for a in &amps {
            next.push(a * a0);
            next.push(a * a1);
        }
        amps = next;
    }
    Ok(DVector::from_vec(amps))
}

/// Indices of the basis strings with no Y letter, in ascending basis order.
/// These are the q = 3^n features that are not identically zero.
pub fn nonzero_feature_indices(n: usize) -> Result<Vec<usize>> {
    Ok(enumerate_basis(n)?
        .iter()
        .filter(|p| p.letters().iter().all(|l| *l != Letter::Y))
        .map(|p| p.index())
        .collect())
}

/// Taylor coefficients of the q nonzero Pauli features around `u0`, over the
/// raw monomial basis of total degree <= r.
#[derive(Debug, Clone)]
pub struct FeatureTaylor {
    /// q x b coefficient matrix; `phi(u) ~= a * B(u)` near `u0`.
    pub a: DMatrix<f64>,
    pub basis: MonomialBasis,
    /// Pauli basis index of each row.
    pub feature_indices: Vec<usize>,
    pub expansion_point: Vec<f64>,
}

/// Taylor series (in `delta = u - u0`) of the three non-vanishing
/// single-qubit features `[1, phi_x, phi_z]`.
fn single_qubit_feature_series(
    scheme: EncodingScheme,
    u0: f64,
    order: usize,
) -> Result<[Series; 3]> {
    let one = Series::constant(1.0, order);
    match scheme {
        EncodingScheme::AmplitudeSqrt => {
            // phi_x = 2 sqrt(u (1-u)), phi_z = 2u - 1
            let inner = Series::affine(u0, 1.0, order).mul(&Series::affine(1.0 - u0, -1.0, order));
            let phi_x = inner
                .sqrt()
                .map_err(|_| {
                    QelmError::Singularity(format!(
                        "amp-sqrt feature derivative singular at u0={u0}"
                    ))
                })?
                .scale(2.0);
            let phi_z = Series::affine(2.0 * u0 - 1.0, 2.0, order);
            Ok([one, phi_x, phi_z])
        }
        EncodingScheme::AmplitudeSquare => {
            // phi_x = 2u sqrt(1-u^2), phi_z = 2u^2 - 1
            let u = Series::affine(u0, 1.0, order);
            let mut one_minus_u2 = u.mul(&u).scale(-1.0);
            one_minus_u2.coeffs[0] += 1.0;
            let phi_x = one_minus_u2
                .sqrt()
                .map_err(|_| {
                    QelmError::Singularity(format!("amp-sq feature derivative singular at u0={u0}"))
                })?
                .mul(&u)
                .scale(2.0);
            let mut phi_z = u.mul(&u).scale(2.0);
            phi_z.coeffs[0] -= 1.0;
            Ok([one, phi_x, phi_z])
        }
        EncodingScheme::RotationalY => {
            let pi = std::f64::consts::PI;
            let phi_x = Series::sin_affine(pi * u0, pi, order);
            let phi_z = Series::cos_affine(pi * u0, pi, order);
            Ok([one, phi_x, phi_z])
        }
    }
}

/// Analytic Taylor expansion of the feature map: `phi(u) = A B(u)` near `u0`.
///
/// Rows are the q = 3^n nonzero features in basis order; columns are raw
/// monomials of total degree <= r (constant first).
pub fn feature_taylor_matrix(
    scheme: EncodingScheme,
    u0: &[f64],
    r: u32,
) -> Result<FeatureTaylor> {
    let n = u0.len();
    let (lo, hi) = scheme.domain();
    for (j, u) in u0.iter().enumerate() {
        if *u <= lo || *u >= hi {
            return Err(QelmError::Singularity(format!(
                "expansion point coordinate {j} = {u} not interior to [{lo}, {hi}]"
            )));
        }
    }
    let order = r as usize;
    let per_qubit: Vec<[Series; 3]> = u0
        .iter()
        .map(|u| single_qubit_feature_series(scheme, *u, order))
        .collect::<Result<_>>()?;

    let basis = MonomialBasis::total_degree(n, r);
    let feature_indices = nonzero_feature_indices(n)?;
    let full = enumerate_basis(n)?;
    let mut a = DMatrix::zeros(feature_indices.len(), basis.len());
    let neg_u0: Vec<f64> = u0.iter().map(|u| -u).collect();
    let ones = vec![1.0; n];

    for (row, &idx) in feature_indices.iter().enumerate() {
        let letters = full[idx].letters();
        // truncated product of per-qubit delta-series, as a poly in delta
        let mut delta_poly = Poly::zero(n);
        for exp in basis.exponents() {
            let mut coeff = 1.0;
            for (j, e) in exp.iter().enumerate() {
                let series_idx = match letters[j] {
                    Letter::I => 0,
                    Letter::X => 1,
                    Letter::Z => 2,
                    Letter::Y => unreachable!("Y rows are excluded"),
                };
                coeff *= per_qubit[j][series_idx].coeffs[*e as usize];
                if coeff == 0.0 {
                    break;
                }
            }
            delta_poly.add_term(exp, coeff);
        }
        // delta_j = u_j - u0_j: re-expand into raw monomials of u
        let raw = delta_poly.substitute_affine(&ones, &neg_u0);
        let coeffs = raw.coefficients(&basis)?;
        a.set_row(row, &coeffs.transpose());
    }

    Ok(FeatureTaylor {
        a,
        basis,
        feature_indices,
        expansion_point: u0.to_vec(),
    })
}
