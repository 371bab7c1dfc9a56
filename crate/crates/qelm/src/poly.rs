//! Multivariate monomial bases and sparse polynomials.
//!
//! Shared by the feature Taylor machinery, the benchmark vector fields, and
//! the flow-map comparison tables. Monomials are ordered by total degree,
//! then lexicographically by exponent tuple.

use nalgebra::DVector;
use std::collections::BTreeMap;
use std::fmt;

use crate::{QelmError, Result};

/// The monomial vector `B(u)` of all exponent tuples with total degree <= r.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialBasis {
    dim: usize,
    max_degree: u32,
    exps: Vec<Vec<u32>>,
}

impl MonomialBasis {
    pub fn total_degree(dim: usize, max_degree: u32) -> MonomialBasis {
        let mut exps = Vec::new();
        let mut current = vec![0u32; dim];
        collect(&mut exps, &mut current, 0, max_degree);
        exps.sort_by_key(|e| (e.iter().sum::<u32>(), e.clone()));
        MonomialBasis {
            dim,
            max_degree,
            exps,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exps
    }

    pub fn index_of(&self, exp: &[u32]) -> Option<usize> {
        self.exps.iter().position(|e| e == exp)
    }

    /// Evaluates every monomial at `u`.
    pub fn eval(&self, u: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.exps.len(),
            self.exps.iter().map(|e| {
                e.iter()
                    .zip(u)
                    .map(|(p, x)| x.powi(*p as i32))
                    .product::<f64>()
            }),
        )
    }

    /// Human-readable label like "1", "x", "x*z^2" for CSV output.
    pub fn label(&self, idx: usize) -> String {
        let names = ["x", "y", "z", "u4", "u5", "u6", "u7", "u8"];
        let e = &self.exps[idx];
        let mut parts = Vec::new();
        for (j, p) in e.iter().enumerate() {
            match p {
                0 => {}
                1 => parts.push(names[j].to_string()),
                _ => parts.push(format!("{}^{}", names[j], p)),
            }
        }
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }
}

fn collect(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, pos: usize, budget: u32) {
    if pos == current.len() {
        out.push(current.clone());
        return;
    }
    for p in 0..=budget {
        current[pos] = p;
        collect(out, current, pos + 1, budget - p);
    }
    current[pos] = 0;
}

/// Sparse multivariate polynomial with exponent-tuple keys.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    dim: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(dim: usize) -> Poly {
        Poly {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Poly {
        let mut p = Poly::zero(dim);
        p.add_term(&vec![0; dim], c);
        p
    }

    /// The coordinate polynomial `u_j`.
    pub fn var(dim: usize, j: usize) -> Poly {
        let mut e = vec![0u32; dim];
        e[j] = 1;
        let mut p = Poly::zero(dim);
        p.add_term(&e, 1.0);
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &f64)> {
        self.terms.iter()
    }

    pub fn add_term(&mut self, exp: &[u32], coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let entry = self.terms.entry(exp.to_vec()).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.terms.remove(exp);
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e, *c);
        }
        out
    }

    pub fn scale(&self, f: f64) -> Poly {
        let mut out = Poly::zero(self.dim);
        for (e, c) in &self.terms {
            out.add_term(e, c * f);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.dim);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(&e, c1 * c2);
            }
        }
        out
    }

    pub fn partial(&self, j: usize) -> Poly {
        let mut out = Poly::zero(self.dim);
        for (e, c) in &self.terms {
            if e[j] == 0 {
                continue;
            }
            let mut d = e.clone();
            d[j] -= 1;
            out.add_term(&d, c * e[j] as f64);
        }
        out
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                c * e
                    .iter()
                    .zip(u)
                    .map(|(p, x)| x.powi(*p as i32))
                    .product::<f64>()
            })
            .sum()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Substitutes `u_j -> s_j * u_j + t_j` in every variable.
    pub fn substitute_affine(&self, scale: &[f64], shift: &[f64]) -> Poly {
        let mut out = Poly::zero(self.dim);
        for (e, c) in &self.terms {
            let mut term = Poly::constant(self.dim, *c);
            for (j, p) in e.iter().enumerate() {
                let factor = {
                    let mut f = Poly::constant(self.dim, shift[j]);
                    f = f.add(&Poly::var(self.dim, j).scale(scale[j]));
                    f
                };
                for _ in 0..*p {
                    term = term.mul(&factor);
                }
            }
            out = out.add(&term);
        }
        out
    }

    /// Drops every term above the given total degree.
    pub fn truncate_degree(&self, max_degree: u32) -> Poly {
        let mut out = Poly::zero(self.dim);
        for (e, c) in &self.terms {
            if e.iter().sum::<u32>() <= max_degree {
                out.add_term(e, *c);
            }
        }
        out
    }

    /// Coefficient vector over `basis`; errors if a term falls outside it.
    pub fn coefficients(&self, basis: &MonomialBasis) -> Result<DVector<f64>> {
        let mut v = DVector::zeros(basis.len());
        for (e, c) in &self.terms {
            match basis.index_of(e) {
                Some(i) => v[i] = *c,
                None => {
                    return Err(QelmError::Dimension(format!(
                        "term {e:?} not representable in basis of degree {}",
                        basis.max_degree()
                    )))
                }
            }
        }
        Ok(v)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}*{e:?}")?;
        }
        Ok(())
    }
}
