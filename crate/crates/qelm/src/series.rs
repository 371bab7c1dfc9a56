//! Truncated univariate Taylor series arithmetic.
//!
//! Used to expand the single-qubit encoding features analytically around an
//! operating point; coefficients are exact up to floating-point rounding,
//! with no finite-difference noise.

use crate::{QelmError, Result};

/// Coefficients of a polynomial in the local variable `delta = u - u0`,
/// truncated at a fixed order (`coeffs.len() - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub coeffs: Vec<f64>,
}

impl Series {
    pub fn constant(c: f64, order: usize) -> Series {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = c;
        Series { coeffs }
    }

    /// `c0 + c1 * delta`.
    pub fn affine(c0: f64, c1: f64, order: usize) -> Series {
        let mut s = Series::constant(c0, order);
        if order >= 1 {
            s.coeffs[1] = c1;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn add(&self, other: &Series) -> Series {
        debug_assert_eq!(self.coeffs.len(), other.coeffs.len());
        Series {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn scale(&self, f: f64) -> Series {
        Series {
            coeffs: self.coeffs.iter().map(|c| c * f).collect(),
        }
    }

    pub fn mul(&self, other: &Series) -> Series {
        let ord = self.order();
        debug_assert_eq!(ord, other.order());
        let mut coeffs = vec![0.0; ord + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if i + j > ord {
                    break;
                }
                coeffs[i + j] += a * b;
            }
        }
        Series { coeffs }
    }

    /// Square root of a series with strictly positive constant term.
    pub fn sqrt(&self) -> Result<Series> {
        let a0 = self.coeffs[0];
        if a0 <= 0.0 {
            return Err(QelmError::Singularity(format!(
                "sqrt of series with nonpositive constant term {a0}"
            )));
        }
        let ord = self.order();
        let mut s = vec![0.0; ord + 1];
        s[0] = a0.sqrt();
        for k in 1..=ord {
            let mut conv = 0.0;
            for i in 1..k {
                conv += s[i] * s[k - i];
            }
            s[k] = (self.coeffs[k] - conv) / (2.0 * s[0]);
        }
        Ok(Series { coeffs: s })
    }

    /// `sin(a + b*delta)` as a series in `delta`.
    pub fn sin_affine(a: f64, b: f64, order: usize) -> Series {
        trig_affine(a, b, order, true)
    }

    /// `cos(a + b*delta)` as a series in `delta`.
    pub fn cos_affine(a: f64, b: f64, order: usize) -> Series {
        trig_affine(a, b, order, false)
    }

    /// Re-expands the series from powers of `u - u0` to raw powers of `u`.
    pub fn shift_to_raw(&self, u0: f64) -> Series {
        let ord = self.order();
        let mut out = vec![0.0; ord + 1];
        // (u - u0)^k = sum_j C(k,j) u^j (-u0)^{k-j}
        for (k, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let mut binom = 1.0f64;
            for j in 0..=k {
                // binom = C(k,j)
                out[j] += c * binom * (-u0).powi((k - j) as i32);
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
        }
        Series { coeffs: out }
    }

    pub fn eval(&self, delta: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * delta + c)
    }
}

fn trig_affine(a: f64, b: f64, order: usize, sin: bool) -> Series {
    let mut coeffs = vec![0.0; order + 1];
    let mut bk = 1.0f64; // b^k / k!
    for (k, c) in coeffs.iter_mut().enumerate() {
        let phase = a + (k as f64) * std::f64::consts::FRAC_PI_2;
        *c = bk * if sin { phase.sin() } else { phase.cos() };
        bk *= b / (k as f64 + 1.0);
    }
    Series { coeffs }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_recovers_function() {
        // sqrt(u(1-u)) around u0 = 0.3
        let u0 = 0.3;
        let inner = Series::affine(u0, 1.0, 8).mul(&Series::affine(1.0 - u0, -1.0, 8));
        let s = inner.sqrt().unwrap();
        // convergence radius is the distance to the branch point at u=0,
        // so keep |delta| well inside 0.3
        for delta in [-0.05, 0.0, 0.02, 0.05] {
            let u: f64 = u0 + delta;
            let exact = (u * (1.0 - u)).sqrt();
            assert!((s.eval(delta) - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn sqrt_singular_at_zero() {
        let inner = Series::affine(0.0, 1.0, 4);
        assert!(inner.sqrt().is_err());
    }

    #[test]
    fn trig_series() {
        let s = Series::sin_affine(0.7, std::f64::consts::PI, 10);
        let c = Series::cos_affine(0.7, std::f64::consts::PI, 10);
        for delta in [-0.1, 0.0, 0.13] {
            let arg = 0.7 + std::f64::consts::PI * delta;
            assert!((s.eval(delta) - arg.sin()).abs() < 1e-10);
            assert!((c.eval(delta) - arg.cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn shift_to_raw_matches() {
        // (2u - 1) expanded around 0.4 then re-expanded must be exactly [-1, 2]
        let s = Series::affine(2.0 * 0.4 - 1.0, 2.0, 3);
        let raw = s.shift_to_raw(0.4);
        assert!((raw.coeffs[0] + 1.0).abs() < 1e-14);
        assert!((raw.coeffs[1] - 2.0).abs() < 1e-14);
        assert!(raw.coeffs[2].abs() < 1e-14);
    }
}
