//! Geometric feature-decodability scores, minimum-norm decoding weights,
//! the exact null-space isolation criterion, and monomial decodability.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::channels::TransferMatrix;
use crate::encoding::{feature_taylor_matrix, EncodingScheme};
use crate::pauli::enumerate_basis;
use crate::poly::MonomialBasis;
use crate::{QelmError, Result};

/// SVD factorization with a consistent numerical-rank cutoff shared by the
/// pseudoinverse, rank, and null-space computations.
pub struct RankedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
    pub rank: usize,
    pub cutoff: f64,
}

impl RankedSvd {
    /// `rtol = None` uses the conventional `max(rows, cols) * eps` relative
    /// cutoff.
    pub fn new(m: &DMatrix<f64>, rtol: Option<f64>) -> Result<RankedSvd> {
        if let Some(r) = rtol {
            if r <= 0.0 {
                return Err(QelmError::Contract(format!("rtol must be positive, got {r}")));
            }
        }
        let svd = m.clone().svd(true, true);
        let u = svd
            .u
            .ok_or_else(|| QelmError::Numeric("SVD failed to produce U".into()))?;
        let v_t = svd
            .v_t
            .ok_or_else(|| QelmError::Numeric("SVD failed to produce V^T".into()))?;
        let s = svd.singular_values;
        let smax = s.max();
        let rtol = rtol.unwrap_or(m.nrows().max(m.ncols()) as f64 * f64::EPSILON);
        let cutoff = rtol * smax;
        let rank = s.iter().filter(|&&sv| sv > cutoff).count();
        Ok(RankedSvd {
            u,
            singular_values: s,
            v_t,
            rank,
            cutoff,
        })
    }

    /// Moore-Penrose pseudoinverse at this factorization's rank cutoff.
    pub fn pinv(&self) -> DMatrix<f64> {
        let mut sinv = DMatrix::zeros(self.v_t.nrows(), self.u.ncols());
        for (i, &sv) in self.singular_values.iter().enumerate() {
            if sv > self.cutoff {
                sinv[(i, i)] = 1.0 / sv;
            }
        }
        self.v_t.transpose() * sinv * self.u.transpose()
    }

    /// Orthonormal basis of the (right) null space, one column per vector.
    pub fn null_space(&self) -> DMatrix<f64> {
        let cols = self.v_t.nrows();
        let dim = self.v_t.ncols();
        let mut out = DMatrix::zeros(dim, cols - self.rank + dim.saturating_sub(cols));
        let mut j = 0;
        for i in self.rank..cols {
            out.column_mut(j).copy_from(&self.v_t.row(i).transpose());
            j += 1;
        }
        // thin SVD omits trailing right-singular vectors when rows < cols;
        // complete the null basis by orthogonalizing the residual space
        if dim > cols {
            let mut basis: Vec<DVector<f64>> = (0..cols)
                .map(|i| self.v_t.row(i).transpose())
                .collect();
            for k in 0..dim {
                let mut e = DVector::zeros(dim);
                e[k] = 1.0;
                for b in &basis {
                    let proj = b.dot(&e);
                    e -= b * proj;
                }
                let nrm = e.norm();
                if nrm > 1e-8 {
                    let e = e / nrm;
                    out.column_mut(j).copy_from(&e);
                    basis.push(e);
                    j += 1;
                }
            }
        }
        out.columns(0, j).into_owned()
    }
}

/// Moore-Penrose pseudoinverse; `rtol = None` uses the default cutoff.
pub fn pinv(m: &DMatrix<f64>, rtol: Option<f64>) -> Result<DMatrix<f64>> {
    Ok(RankedSvd::new(m, rtol)?.pinv())
}

/// Per-feature decodability of a readout matrix.
#[derive(Debug, Clone)]
pub struct DecodabilityReport {
    /// `gamma_r^2`, the diagonal of the row-space projector, per Pauli
    /// feature.
    pub scores: DVector<f64>,
    pub rank: usize,
    /// Mean score per Pauli weight sector 0..=n.
    pub sector_means: Vec<f64>,
    /// `gamma_r^2 > 0.5`.
    pub threshold_mask: Vec<bool>,
}

/// Diagonal of the row-space projector `R^+ R`.
pub fn decodability_scores(r: &TransferMatrix) -> Result<DecodabilityReport> {
    let svd = RankedSvd::new(&r.matrix, None)?;
    let dim = r.matrix.ncols();
    // (R^+ R)_rr = sum over kept right-singular vectors of v_ir^2
    let mut scores = DVector::zeros(dim);
    for i in 0..svd.rank {
        for c in 0..dim {
            scores[c] += svd.v_t[(i, c)].powi(2);
        }
    }
    let basis = enumerate_basis(r.n)?;
    let mut sums = vec![0.0; r.n + 1];
    let mut counts = vec![0usize; r.n + 1];
    for p in &basis {
        sums[p.weight()] += scores[p.index()];
        counts[p.weight()] += 1;
    }
    let sector_means = sums
        .iter()
        .zip(&counts)
        .map(|(s, c)| if *c > 0 { s / *c as f64 } else { 0.0 })
        .collect();
    let threshold_mask = scores.iter().map(|&g| g > 0.5).collect();
    Ok(DecodabilityReport {
        scores,
        rank: svd.rank,
        sector_means,
        threshold_mask,
    })
}

/// Minimum-norm weights that decode feature `r`: the r-th column of
/// `(R^+)^T`. When `gamma_r^2 = 1`, `w^T R = e_r^T`.
pub fn decoding_weights(r: &TransferMatrix, target: usize) -> Result<DVector<f64>> {
    if target >= r.matrix.ncols() {
        return Err(QelmError::Dimension(format!(
            "feature index {target} out of range for {} columns",
            r.matrix.ncols()
        )));
    }
    let p = pinv(&r.matrix, None)?;
    Ok(p.row(target).transpose())
}

/// Marks feature `r` isolatable iff `e_r` is orthogonal to the null space
/// of `R`; cross-checked against `|gamma_r^2 - 1| < tol`.
pub fn isolatable_features(r: &TransferMatrix, tol: f64) -> Result<Vec<bool>> {
    let svd = RankedSvd::new(&r.matrix, None)?;
    let null = svd.null_space();
    let report = decodability_scores(r)?;
    let dim = r.matrix.ncols();
    let mut out = Vec::with_capacity(dim);
    for feat in 0..dim {
        let null_ok = (0..null.ncols()).all(|c| null[(feat, c)].abs() < tol);
        let score_ok = (report.scores[feat] - 1.0).abs() < tol;
        if null_ok != score_ok {
            return Err(QelmError::Numeric(format!(
                "isolation criteria disagree for feature {feat}: null-space test {null_ok}, score {}",
                report.scores[feat]
            )));
        }
        out.push(null_ok);
    }
    Ok(out)
}

/// Grid-averaged monomial decodability.
#[derive(Debug, Clone)]
pub struct MonomialReport {
    /// Mean of `diag(A^+ A)` over expansion points.
    pub scores: DVector<f64>,
    /// Diagonal of the averaged projector (averaging before the diagonal).
    pub scores_of_mean_projector: DVector<f64>,
    pub basis: MonomialBasis,
    pub expansion_points: Vec<Vec<f64>>,
    /// Element-wise mean of `A^+ A` over the grid.
    pub projector: DMatrix<f64>,
    /// Per-point rank, for the sum-rule diagnostics.
    pub ranks: Vec<usize>,
}

/// Computes `kappa_j^2 = diag(A^+ A)` per expansion point and averages both
/// the scores and the projector over the grid.
pub fn monomial_decodability(
    scheme: EncodingScheme,
    n: usize,
    grid: &[Vec<f64>],
    order: u32,
) -> Result<MonomialReport> {
    if grid.is_empty() {
        return Err(QelmError::Contract("empty expansion-point grid".into()));
    }
    let per_point: Vec<Result<(DVector<f64>, DMatrix<f64>, usize)>> = grid
        .par_iter()
        .map(|u0| {
            let ft = feature_taylor_matrix(scheme, u0, order)?;
            let svd = RankedSvd::new(&ft.a, None)?;
            let b = ft.a.ncols();
            let mut proj = DMatrix::zeros(b, b);
            for i in 0..svd.rank {
                let v = svd.v_t.row(i);
                for r in 0..b {
                    for c in 0..b {
                        proj[(r, c)] += v[r] * v[c];
                    }
                }
            }
            let scores = DVector::from_iterator(b, (0..b).map(|j| proj[(j, j)]));
            Ok((scores, proj, svd.rank))
        })
        .collect();
    let basis = MonomialBasis::total_degree(n, order);
    let b = basis.len();
    let mut scores = DVector::zeros(b);
    let mut projector = DMatrix::zeros(b, b);
    let mut ranks = Vec::with_capacity(grid.len());
    for item in per_point {
        let (s, p, rank) = item?;
        scores += s;
        projector += p;
        ranks.push(rank);
    }
    let count = grid.len() as f64;
    scores /= count;
    projector /= count;
    let scores_of_mean_projector = DVector::from_iterator(b, (0..b).map(|j| projector[(j, j)]));
    Ok(MonomialReport {
        scores,
        scores_of_mean_projector,
        basis,
        expansion_points: grid.to_vec(),
        projector,
        ranks,
    })
}

/// Uniform per-axis grid over the interior of the scheme domain, matching
/// the published averaging ranges where they fit inside the domain.
pub fn default_kappa_grid(scheme: EncodingScheme, n: usize, per_axis: usize) -> Vec<Vec<f64>> {
    let (dlo, dhi) = scheme.domain();
    let lo = dlo.max(match scheme {
        EncodingScheme::AmplitudeSqrt => 0.1,
        EncodingScheme::AmplitudeSquare => -0.9,
        EncodingScheme::RotationalY => 0.1,
    });
    let hi = dhi.min(match scheme {
        EncodingScheme::AmplitudeSqrt => 0.9,
        EncodingScheme::AmplitudeSquare => 0.9,
        EncodingScheme::RotationalY => 0.9,
    });
    let axis: Vec<f64> = (0..per_axis)
        .map(|i| {
            if per_axis == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (per_axis - 1) as f64
            }
        })
        .collect();
    let mut grid = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::with_capacity(grid.len() * per_axis);
        for point in &grid {
            for &v in &axis {
                let mut p = point.clone();
                p.push(v);
                next.push(p);
            }
        }
        grid = next;
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{ptm_of_unitary, random_hamiltonian, tensor_ptm};
    use crate::pauli::PauliString;
    use crate::readout::{effective_ptm, select_observables, MultiplexPlan};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn penrose_ok(m: &DMatrix<f64>, p: &DMatrix<f64>) -> bool {
        let a = (m * p * m - m).abs().max() < 1e-8;
        let b = (p * m * p - p).abs().max() < 1e-8;
        let mp = m * p;
        let pm = p * m;
        let c = (&mp - mp.transpose()).abs().max() < 1e-8;
        let d = (&pm - pm.transpose()).abs().max() < 1e-8;
        a && b && c && d
    }

    #[test]
    fn pinv_trivial_cases() {
        let eye = DMatrix::<f64>::identity(3, 3);
        assert!((pinv(&eye, None).unwrap() - eye).abs().max() < 1e-14);
        let r1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((pinv(&r1, None).unwrap() - &r1).abs().max() < 1e-14);
    }

    #[test]
    fn pinv_penrose_conditions() {
        let m = random_matrix(20, 64, 1);
        let p = pinv(&m, None).unwrap();
        assert!(penrose_ok(&m, &p));
        let wide = random_matrix(64, 20, 2);
        let p = pinv(&wide, None).unwrap();
        assert!(penrose_ok(&wide, &p));
    }

    #[test]
    fn full_ptm_fully_decodable() {
        let h = random_hamiltonian(2, 3).unwrap();
        let v = ptm_of_unitary(&h.evolve(1.0)).unwrap();
        let rep = decodability_scores(&v).unwrap();
        assert_eq!(rep.rank, 16);
        for &g in rep.scores.iter() {
            assert!((g - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn score_sum_equals_rank() {
        let h = random_hamiltonian(3, 4).unwrap();
        let s = select_observables("weight1", 3).unwrap();
        let r = effective_ptm(&h, &s, &MultiplexPlan::unit_schedule(2, false).unwrap()).unwrap();
        let rep = decodability_scores(&r).unwrap();
        let total: f64 = rep.scores.iter().sum();
        assert!((total - rep.rank as f64).abs() < 1e-8);
        for &g in rep.scores.iter() {
            assert!((-1e-10..=1.0 + 1e-10).contains(&g));
        }
    }

    #[test]
    fn single_step_scores_match_column_norms() {
        // R = S V(t): gamma_r^2 = sum_{k in S} V_kr^2
        let h = random_hamiltonian(3, 9).unwrap();
        let s = select_observables("weight1", 3).unwrap();
        let r = effective_ptm(&h, &s, &MultiplexPlan::single(0.9)).unwrap();
        let v = ptm_of_unitary(&h.evolve(0.9)).unwrap();
        let rep = decodability_scores(&r).unwrap();
        for c in 0..64 {
            let direct: f64 = s.indices.iter().map(|&k| v.matrix[(k, c)].powi(2)).sum();
            assert!((rep.scores[c] - direct).abs() < 1e-8);
        }
    }

    #[test]
    fn projector_idempotent() {
        let m = random_matrix(10, 30, 7);
        let r = TransferMatrix {
            matrix: m,
            n: 2,
            meta: String::new(),
        };
        let p = pinv(&r.matrix, None).unwrap() * &r.matrix;
        assert!((&p * &p - &p).abs().max() < 1e-8);
    }

    #[test]
    fn tensor_factorization_of_scores() {
        // gamma^2 of a product feature is the product of factor scores
        let mk_factor = |seed| TransferMatrix {
            matrix: {
                let mut m = random_matrix(2, 4, seed);
                m.row_mut(0).copy_from_slice(&[1.0, 0.0, 0.0, 0.0]);
                m
            },
            n: 1,
            meta: String::new(),
        };
        let r1 = mk_factor(11);
        let r2 = mk_factor(12);
        let joint = tensor_ptm(&[r1.clone(), r2.clone()]).unwrap();
        let g1 = decodability_scores(&r1).unwrap().scores;
        let g2 = decodability_scores(&r2).unwrap().scores;
        let g = decodability_scores(&joint).unwrap().scores;
        for a in 0..4 {
            for b in 0..4 {
                assert!((g[4 * a + b] - g1[a] * g2[b]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn decoding_weights_exact_when_isolatable() {
        let h = random_hamiltonian(2, 21).unwrap();
        let v = ptm_of_unitary(&h.evolve(0.6)).unwrap();
        let r = PauliString::parse("XZ").unwrap().index();
        let w = decoding_weights(&v, r).unwrap();
        let recon = w.transpose() * &v.matrix;
        for c in 0..16 {
            let want = if c == r { 1.0 } else { 0.0 };
            assert!((recon[(0, c)] - want).abs() < 1e-8);
        }
    }

    #[test]
    fn decoding_residual_matches_score() {
        // squared residual of projecting e_r onto row(R) is 1 - gamma_r^2
        let m = random_matrix(5, 16, 31);
        let r = TransferMatrix {
            matrix: m,
            n: 2,
            meta: String::new(),
        };
        let rep = decodability_scores(&r).unwrap();
        let p = pinv(&r.matrix, None).unwrap() * &r.matrix;
        for feat in 0..16 {
            let mut e = DVector::<f64>::zeros(16);
            e[feat] = 1.0;
            let resid = (&e - &p * &e).norm_squared();
            assert!((resid - (1.0 - rep.scores[feat])).abs() < 1e-8);
        }
    }

    #[test]
    fn isolation_all_or_nothing() {
        let dense_tall = TransferMatrix {
            matrix: random_matrix(20, 16, 41),
            n: 2,
            meta: String::new(),
        };
        assert!(isolatable_features(&dense_tall, 1e-8)
            .unwrap()
            .iter()
            .all(|&b| b));
        let dense_wide = TransferMatrix {
            matrix: random_matrix(9, 16, 42),
            n: 2,
            meta: String::new(),
        };
        assert!(isolatable_features(&dense_wide, 1e-8)
            .unwrap()
            .iter()
            .all(|&b| !b));
    }

    #[test]
    fn isolation_counts_for_row_selection() {
        // a row-selection matrix isolates exactly rank(R) features
        let mut m = DMatrix::zeros(3, 16);
        m[(0, 2)] = 1.0;
        m[(1, 5)] = 1.0;
        m[(2, 9)] = 1.0;
        let r = TransferMatrix {
            matrix: m,
            n: 2,
            meta: String::new(),
        };
        let iso = isolatable_features(&r, 1e-8).unwrap();
        assert_eq!(iso.iter().filter(|&&b| b).count(), 3);
        assert!(iso[2] && iso[5] && iso[9]);
    }

    #[test]
    fn monomial_constant_always_decodable() {
        let grid = default_kappa_grid(EncodingScheme::AmplitudeSqrt, 2, 3);
        let rep = monomial_decodability(EncodingScheme::AmplitudeSqrt, 2, &grid, 3).unwrap();
        let idx = rep.basis.index_of(&[0, 0]).unwrap();
        assert!((rep.scores[idx] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn monomial_sum_rule_per_point() {
        let grid = vec![vec![0.3, 0.45, 0.6]];
        let rep = monomial_decodability(EncodingScheme::AmplitudeSqrt, 3, &grid, 3).unwrap();
        let total: f64 = rep.scores.iter().sum();
        assert!((total - rep.ranks[0] as f64).abs() < 1e-8);
        assert!(rep.ranks[0] <= 20.min(27));
    }

    #[test]
    fn amp_sqrt_stable_monomials() {
        // {1, x, y, z, xy, xz, yz, xyz} are exactly decodable at every point
        let grid = default_kappa_grid(EncodingScheme::AmplitudeSqrt, 3, 3);
        let rep = monomial_decodability(EncodingScheme::AmplitudeSqrt, 3, &grid, 4).unwrap();
        let stable = [
            vec![0, 0, 0],
            vec![1, 0, 0],
            vec![0, 1, 0],
            vec![0, 0, 1],
            vec![1, 1, 0],
            vec![1, 0, 1],
            vec![0, 1, 1],
            vec![1, 1, 1],
        ];
        for exp in stable {
            let idx = rep.basis.index_of(&exp).unwrap();
            assert!(
                (rep.scores[idx] - 1.0).abs() < 1e-6,
                "monomial {exp:?} score {}",
                rep.scores[idx]
            );
        }
    }
}
