//! Nonlinear information-processing capacity against orthogonal
//! polynomial target families, plus the closed-form and correlation-aware
//! expressions.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::decodability::pinv;
use crate::{QelmError, Result};

/// Input distribution tied to the orthogonal target family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputDistribution {
    /// Uniform on [0, 1], paired with shifted Legendre targets.
    UniformUnit,
    /// Uniform on [-1, 1], paired with Legendre targets.
    UniformSymmetric,
    /// Standard normal, paired with probabilists' Hermite targets.
    Gaussian,
}

impl InputDistribution {
    pub fn sample(&self, rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| match self {
                InputDistribution::UniformUnit => rng.gen_range(0.0..1.0),
                InputDistribution::UniformSymmetric => rng.gen_range(-1.0..1.0),
                InputDistribution::Gaussian => StandardNormal.sample(rng),
            })
            .collect()
    }

    /// Value of the j-th orthonormal polynomial of this family at `u`.
    pub fn ortho_poly(&self, j: u32, u: f64) -> f64 {
        match self {
            // sqrt(2j+1) P_j(2u - 1)
            InputDistribution::UniformUnit => {
                ((2 * j + 1) as f64).sqrt() * legendre(j, 2.0 * u - 1.0)
            }
            // sqrt(2j+1) P_j(u) under density 1/2 on [-1,1]
            InputDistribution::UniformSymmetric => ((2 * j + 1) as f64).sqrt() * legendre(j, u),
            // He_j(u) / sqrt(j!)
            InputDistribution::Gaussian => {
                hermite_prob(j, u) / factorial(j).sqrt()
            }
        }
    }
}

fn legendre(j: u32, x: f64) -> f64 {
    let mut p0 = 1.0;
    if j == 0 {
        return p0;
    }
    let mut p1 = x;
    for k in 1..j {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

fn hermite_prob(j: u32, x: f64) -> f64 {
    let mut h0 = 1.0;
    if j == 0 {
        return h0;
    }
    let mut h1 = x;
    for k in 1..j {
        let h2 = x * h1 - k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

fn factorial(j: u32) -> f64 {
    (1..=j).map(|k| k as f64).product()
}

/// All degree-k orthonormal product targets over n inputs.
#[derive(Debug, Clone)]
pub struct TargetFamily {
    pub degree: u32,
    pub multi_indices: Vec<Vec<u32>>,
    pub distribution: InputDistribution,
}

impl TargetFamily {
    pub fn len(&self) -> usize {
        self.multi_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multi_indices.is_empty()
    }

    /// Evaluates target `t` at input `u`.
    pub fn eval(&self, t: usize, u: &[f64]) -> f64 {
        self.multi_indices[t]
            .iter()
            .zip(u)
            .map(|(&e, &x)| self.distribution.ortho_poly(e, x))
            .product()
    }
}

/// Enumerates the C(n+k-1, k) exponent tuples with total degree exactly k.
pub fn build_targets(k: u32, n: usize, distribution: InputDistribution) -> Result<TargetFamily> {
    if k == 0 {
        return Err(QelmError::Contract("target degree must be at least 1".into()));
    }
    let mut multi_indices = Vec::new();
    let mut current = vec![0u32; n];
    fill_exact(&mut multi_indices, &mut current, 0, k);
    Ok(TargetFamily {
        degree: k,
        multi_indices,
        distribution,
    })
}

fn fill_exact(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, pos: usize, budget: u32) {
    if pos + 1 == current.len() {
        current[pos] = budget;
        out.push(current.clone());
        current[pos] = 0;
        return;
    }
    for e in 0..=budget {
        current[pos] = e;
        fill_exact(out, current, pos + 1, budget - e);
    }
    current[pos] = 0;
}

/// Capacity of one degree across a target family.
#[derive(Debug, Clone)]
pub struct DegreeScore {
    pub degree: u32,
    pub r2_mean: f64,
    pub r2_per_target: Vec<f64>,
}

/// A capacity curve over degrees with its sampling configuration.
#[derive(Debug, Clone)]
pub struct CapacityCurve {
    pub scores: Vec<DegreeScore>,
    pub samples: usize,
    pub lambda: f64,
}

impl CapacityCurve {
    pub fn integrated(&self) -> f64 {
        self.scores.iter().map(|s| s.r2_mean).sum()
    }
}

/// Ridge-regression capacity score against one target family.
///
/// `f_train` is `M x P_train` (readout features per column), `f_test` is
/// `M x P_test`; inputs must be the matching sample points drawn from the
/// family's distribution.
pub fn capacity_score(
    f_train: &DMatrix<f64>,
    inputs_train: &[Vec<f64>],
    f_test: &DMatrix<f64>,
    inputs_test: &[Vec<f64>],
    targets: &TargetFamily,
    lambda: f64,
) -> Result<DegreeScore> {
    let m = f_train.nrows();
    let p_train = f_train.ncols();
    if p_train != inputs_train.len() || f_test.ncols() != inputs_test.len() {
        return Err(QelmError::Dimension("feature/input sample count mismatch".into()));
    }
    // shared normal matrix for every target in the family
    let mut gram = f_train * f_train.transpose();
    for i in 0..m {
        gram[(i, i)] += lambda;
    }
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| QelmError::Numeric("ridge normal matrix not positive definite".into()))?;
    let r2_per_target: Vec<f64> = (0..targets.len())
        .into_par_iter()
        .map(|t| {
            let y_train =
                DVector::from_iterator(p_train, inputs_train.iter().map(|u| targets.eval(t, u)));
            let y_test = DVector::from_iterator(
                inputs_test.len(),
                inputs_test.iter().map(|u| targets.eval(t, u)),
            );
            let mean = y_test.mean();
            let var = y_test.iter().map(|y| (y - mean).powi(2)).sum::<f64>()
                / y_test.len() as f64;
            if var < 1e-12 {
                return Err(QelmError::DegenerateVariance(var));
            }
            let w = chol.solve(&(f_train * &y_train));
            let pred = f_test.transpose() * w;
            let mse = (&pred - &y_test).norm_squared() / y_test.len() as f64;
            Ok(1.0 - mse / var)
        })
        .collect::<Result<_>>()?;
    let r2_mean = r2_per_target.iter().sum::<f64>() / r2_per_target.len() as f64;
    Ok(DegreeScore {
        degree: targets.degree,
        r2_mean,
        r2_per_target,
    })
}

/// Draws train/test sample inputs from the distribution, deterministic
/// under the seed.
pub fn sample_inputs(
    distribution: InputDistribution,
    n: usize,
    p_train: usize,
    p_test: usize,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = (0..p_train).map(|_| distribution.sample(&mut rng, n)).collect();
    let test = (0..p_test).map(|_| distribution.sample(&mut rng, n)).collect();
    (train, test)
}

/// Exact degree-k capacity of an ideal single-time Z-only readout:
/// `C(n,k)/C(n+k-1,k)` for `k <= n`, zero above.
pub fn z_readout_capacity_closed_form(n: usize, k: u32) -> f64 {
    if k as usize > n {
        return 0.0;
    }
    binomial(n as u32, k) / binomial(n as u32 + k - 1, k)
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Correlation-aware closed form for a centered target:
/// `R^2 = b^T R^T (R C R^T)^+ R b / var`.
pub fn capacity_general(
    r: &DMatrix<f64>,
    c: &DMatrix<f64>,
    b: &DVector<f64>,
    var: f64,
) -> Result<f64> {
    if var < 1e-12 {
        return Err(QelmError::DegenerateVariance(var));
    }
    let rcr = r * c * r.transpose();
    let inv = pinv(&rcr, None)?;
    let rb = r * b;
    Ok((rb.transpose() * inv * rb)[(0, 0)] / var)
}

/// Pointwise `R^2(k) / (R^2_all(k) + delta)` with a cutoff that avoids
/// blow-up where the reference capacity vanishes.
pub fn relative_capacity(
    curve: &CapacityCurve,
    reference: &CapacityCurve,
    delta: f64,
) -> Result<Vec<(u32, f64)>> {
    if curve.scores.len() != reference.scores.len()
        || curve
            .scores
            .iter()
            .zip(&reference.scores)
            .any(|(a, b)| a.degree != b.degree)
    {
        return Err(QelmError::Dimension("degree grids do not match".into()));
    }
    Ok(curve
        .scores
        .iter()
        .zip(&reference.scores)
        .map(|(a, b)| (a.degree, a.r2_mean / (b.r2_mean + delta)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_legendre_first_degree() {
        // p1(u) = sqrt(3) (2u - 1)
        let d = InputDistribution::UniformUnit;
        for u in [0.0, 0.3, 0.5, 1.0] {
            let want = 3.0f64.sqrt() * (2.0 * u - 1.0);
            assert!((d.ortho_poly(1, u) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn hermite_second_degree() {
        // He_2(u)/sqrt(2) = (u^2 - 1)/sqrt(2)
        let d = InputDistribution::Gaussian;
        for u in [-1.5, 0.0, 0.7] {
            let want = (u * u - 1.0) / 2.0f64.sqrt();
            assert!((d.ortho_poly(2, u) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn family_sizes() {
        assert_eq!(
            build_targets(2, 5, InputDistribution::UniformUnit).unwrap().len(),
            15
        );
        assert_eq!(
            build_targets(3, 3, InputDistribution::UniformUnit).unwrap().len(),
            10
        );
        assert!(build_targets(0, 3, InputDistribution::UniformUnit).is_err());
    }

    #[test]
    fn monte_carlo_orthonormality() {
        // Gram matrix of a small family deviates from identity by < 0.05
        let fam = build_targets(2, 2, InputDistribution::UniformUnit).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let samples: Vec<Vec<f64>> = (0..100_000)
            .map(|_| fam.distribution.sample(&mut rng, 2))
            .collect();
        for a in 0..fam.len() {
            for b in 0..fam.len() {
                let dot: f64 = samples
                    .iter()
                    .map(|u| fam.eval(a, u) * fam.eval(b, u))
                    .sum::<f64>()
                    / samples.len() as f64;
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 0.05, "Gram[{a}][{b}] = {dot}");
            }
        }
    }

    #[test]
    fn closed_form_values() {
        assert!((z_readout_capacity_closed_form(5, 1) - 1.0).abs() < 1e-12);
        assert!((z_readout_capacity_closed_form(5, 2) - 10.0 / 15.0).abs() < 1e-12);
        assert_eq!(z_readout_capacity_closed_form(3, 4), 0.0);
    }

    #[test]
    fn perfectly_representable_target() {
        // feature row equal to the target itself gives R^2 ~ 1
        let fam = build_targets(2, 1, InputDistribution::UniformUnit).unwrap();
        let (train, test) = sample_inputs(InputDistribution::UniformUnit, 1, 2000, 500, 5);
        let fam1 = build_targets(1, 1, InputDistribution::UniformUnit).unwrap();
        let f_train = DMatrix::from_fn(2, train.len(), |r, c| {
            if r == 0 {
                1.0
            } else {
                fam1.eval(0, &train[c])
            }
        });
        let f_test = DMatrix::from_fn(2, test.len(), |r, c| {
            if r == 0 {
                1.0
            } else {
                fam1.eval(0, &test[c])
            }
        });
        let score = capacity_score(&f_train, &train, &f_test, &test, &fam1, 1e-8).unwrap();
        assert!(score.r2_mean > 0.999, "R2 = {}", score.r2_mean);
        drop(fam);
    }

    #[test]
    fn unrepresentable_target_scores_zero() {
        // constant feature cannot fit a degree-1 target
        let fam = build_targets(1, 1, InputDistribution::UniformUnit).unwrap();
        let (train, test) = sample_inputs(InputDistribution::UniformUnit, 1, 2000, 500, 6);
        let f_train = DMatrix::from_element(1, train.len(), 1.0);
        let f_test = DMatrix::from_element(1, test.len(), 1.0);
        let score = capacity_score(&f_train, &train, &f_test, &test, &fam, 1e-8).unwrap();
        assert!(score.r2_mean.abs() < 0.02);
    }

    #[test]
    fn general_formula_reduces_to_decodability() {
        // whitened features (C = I), target equal to feature k: R^2 = gamma_k^2
        let r = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.6, 0.8]);
        let c = DMatrix::identity(3, 3);
        let mut b = DVector::zeros(3);
        b[1] = 1.0; // y = phi_1, unit variance
        let r2 = capacity_general(&r, &c, &b, 1.0).unwrap();
        // gamma_1^2 = 0.6^2 = 0.36 for this row-orthonormal R
        assert!((r2 - 0.36).abs() < 1e-10);
        let zero = capacity_general(&r, &c, &DVector::zeros(3), 1.0).unwrap();
        assert!(zero.abs() < 1e-14);
    }

    #[test]
    fn relative_capacity_cutoff() {
        let mk = |vals: &[f64]| CapacityCurve {
            scores: vals
                .iter()
                .enumerate()
                .map(|(i, &v)| DegreeScore {
                    degree: (i + 1) as u32,
                    r2_mean: v,
                    r2_per_target: vec![v],
                })
                .collect(),
            samples: 0,
            lambda: 0.0,
        };
        let a = mk(&[0.5, 0.0]);
        let refc = mk(&[0.5, 0.0]);
        let rel = relative_capacity(&a, &refc, 0.1).unwrap();
        assert!((rel[0].1 - 0.5 / 0.6).abs() < 1e-12);
        assert_eq!(rel[1].1, 0.0);
        let mismatched = mk(&[0.1]);
        assert!(relative_capacity(&a, &mismatched, 0.1).is_err());
    }

    #[test]
    fn factorials_and_binomials() {
        assert_eq!(factorial(0), 1.0);
        assert_eq!(factorial(5), 120.0);
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(7, 0), 1.0);
        assert_eq!(binomial(3, 5), 0.0);
    }
}
