//! Observable selection, the temporally multiplexed observability matrix,
//! and operator-spreading diagnostics.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::channels::{ptm_of_unitary, Hamiltonian, TransferMatrix};
use crate::pauli::{enumerate_basis, Letter, PauliString};
use crate::{QelmError, Result};

/// An ordered selection of Pauli basis indices to measure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservableSet {
    pub indices: Vec<usize>,
    pub descriptor: String,
    pub n: usize,
}

impl ObservableSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.indices
            .iter()
            .map(|&i| PauliString::from_index(self.n, i).unwrap().to_string())
            .collect()
    }
}

/// Ordered evolution times for temporal multiplexing.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplexPlan {
    pub times: Vec<f64>,
}

impl MultiplexPlan {
    pub fn new(times: Vec<f64>) -> Result<MultiplexPlan> {
        if times.is_empty() {
            return Err(QelmError::Contract("multiplex plan needs at least one time".into()));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(QelmError::Contract("multiplex times must be nondecreasing".into()));
        }
        Ok(MultiplexPlan { times })
    }

    /// Single measurement at time `t`.
    pub fn single(t: f64) -> MultiplexPlan {
        MultiplexPlan { times: vec![t] }
    }

    /// Default schedule `t_l = l` for `l = 1..=steps`, optionally prefixed
    /// with a `t = 0` block.
    pub fn unit_schedule(steps: usize, include_zero: bool) -> Result<MultiplexPlan> {
        let mut times: Vec<f64> = if include_zero { vec![0.0] } else { vec![] };
        times.extend((1..=steps).map(|l| l as f64));
        MultiplexPlan::new(times)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Builds a measurement selection from a token:
/// "z" (single-site Z's), "z+zz" (Z's plus open-chain nearest-neighbor
/// ZZ's), "weight1" (all 3n single-site Paulis), "all" (full basis).
pub fn select_observables(token: &str, n: usize) -> Result<ObservableSet> {
    enumerate_basis(n)?;
    let single = |site: usize, l: Letter| -> usize {
        let mut letters = vec![Letter::I; n];
        letters[site] = l;
        PauliString::from_letters(&letters).unwrap().index()
    };
    let indices = match token {
        "z" => (0..n).map(|s| single(s, Letter::Z)).collect(),
        "z+zz" => {
            let mut v: Vec<usize> = (0..n).map(|s| single(s, Letter::Z)).collect();
            for s in 0..n.saturating_sub(1) {
                let mut letters = vec![Letter::I; n];
                letters[s] = Letter::Z;
                letters[s + 1] = Letter::Z;
                v.push(PauliString::from_letters(&letters).unwrap().index());
            }
            v
        }
        "weight1" => {
            let mut v = Vec::with_capacity(3 * n);
            for s in 0..n {
                for l in [Letter::X, Letter::Y, Letter::Z] {
                    v.push(single(s, l));
                }
            }
            v
        }
        "all" => (0..(1usize << (2 * n))).collect(),
        other => {
            return Err(QelmError::UnknownToken(format!(
                "observable selection \"{other}\""
            )))
        }
    };
    Ok(ObservableSet {
        indices,
        descriptor: token.to_string(),
        n,
    })
}

/// Stacks the selected rows of `V(t_l)` over the multiplex schedule into
/// the `M*L x 4^n` observability matrix.
pub fn effective_ptm(
    h: &Hamiltonian,
    s: &ObservableSet,
    plan: &MultiplexPlan,
) -> Result<TransferMatrix> {
    if s.n != h.n {
        return Err(QelmError::Dimension(format!(
            "observable set for n={} but Hamiltonian has n={}",
            s.n, h.n
        )));
    }
    let dim = 1usize << (2 * h.n);
    let blocks: Vec<Result<DMatrix<f64>>> = plan
        .times
        .par_iter()
        .map(|&t| {
            let v = ptm_of_unitary(&h.evolve(t))?;
            let mut block = DMatrix::zeros(s.len(), dim);
            for (i, &k) in s.indices.iter().enumerate() {
                block.row_mut(i).copy_from(&v.matrix.row(k));
            }
            Ok(block)
        })
        .collect();
    let mut rows = DMatrix::zeros(s.len() * plan.len(), dim);
    for (l, block) in blocks.into_iter().enumerate() {
        let block = block?;
        rows.view_mut((l * s.len(), 0), (s.len(), dim)).copy_from(&block);
    }
    Ok(TransferMatrix {
        matrix: rows,
        n: h.n,
        meta: format!(
            "{} | S={} L={}",
            h.label,
            s.descriptor,
            plan.len()
        ),
    })
}

/// Coefficient-weighted average Pauli weight of the Heisenberg-evolved
/// observable `P_k`: `nu_bar = sum_j weight(P_j) V_kj^2`.
pub fn pauli_weight_average(v: &TransferMatrix, k: usize) -> Result<f64> {
    if v.matrix.nrows() != v.matrix.ncols() {
        return Err(QelmError::Dimension("weight average needs a square PTM".into()));
    }
    let basis = enumerate_basis(v.n)?;
    Ok(basis
        .iter()
        .map(|p| p.weight() as f64 * v.matrix[(k, p.index())].powi(2))
        .sum())
}

/// One row of a spreading table.
#[derive(Debug, Clone)]
pub struct SpreadingRow {
    pub t: f64,
    pub nu_bar: f64,
    /// Mass in each Pauli weight sector 0..=n; sums to 1.
    pub sector_mass: Vec<f64>,
}

/// Time-resolved weight-average and per-sector mass profile of `P_k`.
pub fn spreading_profile(h: &Hamiltonian, k: usize, times: &[f64]) -> Result<Vec<SpreadingRow>> {
    let basis = enumerate_basis(h.n)?;
    times
        .par_iter()
        .map(|&t| {
            let v = ptm_of_unitary(&h.evolve(t))?;
            let mut sector_mass = vec![0.0; h.n + 1];
            let mut nu_bar = 0.0;
            for p in &basis {
                let m = v.matrix[(k, p.index())].powi(2);
                sector_mass[p.weight()] += m;
                nu_bar += p.weight() as f64 * m;
            }
            Ok(SpreadingRow {
                t,
                nu_bar,
                sector_mass,
            })
        })
        .collect()
}
