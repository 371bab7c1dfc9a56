//! Enumeration, indexing, and dense-matrix realization of the n-qubit
//! Pauli basis.
//!
//! The basis is ordered base-4 big-endian: qubit 1 is the most significant
//! digit, with digit map I=0, X=1, Y=2, Z=3. Index 0 is the all-identity
//! string. This makes tensor-product transfer matrices plain Kronecker
//! products with no permutation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::fmt;

use crate::{QelmError, Result};

/// Largest supported qubit count (dense matrices up to 256x256).
pub const MAX_QUBITS: usize = 8;

/// Single-site Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub fn from_digit(d: usize) -> Letter {
        match d & 3 {
            0 => Letter::I,
            1 => Letter::X,
            2 => Letter::Y,
            _ => Letter::Z,
        }
    }

    pub fn digit(self) -> usize {
        match self {
            Letter::I => 0,
            Letter::X => 1,
            Letter::Y => 2,
            Letter::Z => 3,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }
}

/// A length-n word over {I, X, Y, Z}, indexing the 4^n operator basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    index: usize,
}

impl PauliString {
    /// Builds the string with canonical base-4 index `index` (qubit 1 is
    /// the most significant digit).
    pub fn from_index(n: usize, index: usize) -> Result<PauliString> {
        check_qubit_count(n)?;
        let dim = 1usize << (2 * n);
        if index >= dim {
            return Err(QelmError::Dimension(format!(
                "Pauli index {index} out of range for n={n} (basis size {dim})"
            )));
        }
        Ok(PauliString { n, index })
    }

    pub fn from_letters(letters: &[Letter]) -> Result<PauliString> {
        check_qubit_count(letters.len())?;
        let mut index = 0usize;
        for l in letters {
            index = index * 4 + l.digit();
        }
        Ok(PauliString {
            n: letters.len(),
            index,
        })
    }

    /// Parses "XIZ"-style syntax, the same rendering used for CSV headers
    /// and CLI arguments.
    pub fn parse(s: &str) -> Result<PauliString> {
        let letters: Result<Vec<Letter>> = s
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Letter::I),
                'X' => Ok(Letter::X),
                'Y' => Ok(Letter::Y),
                'Z' => Ok(Letter::Z),
                other => Err(QelmError::UnknownToken(format!(
                    "invalid Pauli letter '{other}' in \"{s}\""
                ))),
            })
            .collect();
        PauliString::from_letters(&letters?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Letters in qubit order (qubit 1 first).
    pub fn letters(&self) -> Vec<Letter> {
        (0..self.n)
            .map(|j| Letter::from_digit(self.index >> (2 * (self.n - 1 - j))))
            .collect()
    }

    pub fn letter(&self, qubit: usize) -> Letter {
        Letter::from_digit(self.index >> (2 * (self.n - 1 - qubit)))
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> usize {
        self.letters().iter().filter(|l| **l != Letter::I).count()
    }

    /// Bit masks describing the action on computational basis states:
    /// `P|c> = i^{y} (-1)^{popcount(zmask & c)} |c ^ xmask>`, where qubit 1
    /// maps to the most significant state bit.
    pub fn masks(&self) -> PauliMasks {
        let mut xmask = 0usize;
        let mut zmask = 0usize;
        let mut ys = 0u32;
        for (j, l) in self.letters().iter().enumerate() {
            let bit = 1usize << (self.n - 1 - j);
            match l {
                Letter::I => {}
                Letter::X => xmask |= bit,
                Letter::Y => {
                    xmask |= bit;
                    zmask |= bit;
                    ys += 1;
                }
                Letter::Z => zmask |= bit,
            }
        }
        PauliMasks {
            xmask,
            zmask,
            y_count: ys,
        }
    }

    /// Dense 2^n x 2^n matrix: Kronecker product of single-site matrices.
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let d = 1usize << self.n;
        let m = self.masks();
        let mut out = DMatrix::zeros(d, d);
        for c in 0..d {
            out[(c ^ m.xmask, c)] = m.phase(c);
        }
        out
    }

    /// Trace of `P * a` using the sparse permutation structure of `P`.
    pub fn trace_with(&self, a: &DMatrix<Complex64>) -> Complex64 {
        let d = 1usize << self.n;
        debug_assert_eq!(a.nrows(), d);
        let m = self.masks();
        let mut acc = Complex64::new(0.0, 0.0);
        for c in 0..d {
            acc += m.phase(c) * a[(c, c ^ m.xmask)];
        }
        acc
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.letters() {
            write!(f, "{}", l.symbol())?;
        }
        Ok(())
    }
}

/// Sparse action of a Pauli string on computational basis states.
#[derive(Debug, Clone, Copy)]
pub struct PauliMasks {
    pub xmask: usize,
    pub zmask: usize,
    pub y_count: u32,
}

impl PauliMasks {
    /// Amplitude attached to `P|c>` (the target state is `|c ^ xmask>`).
    pub fn phase(&self, c: usize) -> Complex64 {
        let i_pow = match self.y_count % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        let sign = if ((self.zmask & c).count_ones()) % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        i_pow * sign
    }
}

fn check_qubit_count(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(QelmError::SizeLimit(format!(
            "qubit count {n} outside supported range 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

/// Ordered list of all 4^n Pauli strings; position k has index k.
pub fn enumerate_basis(n: usize) -> Result<Vec<PauliString>> {
    check_qubit_count(n)?;
    let dim = 1usize << (2 * n);
    Ok((0..dim).map(|k| PauliString { n, index: k }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_qubit_basis() {
        let basis = enumerate_basis(1).unwrap();
        assert_eq!(basis.len(), 4);
        let symbols: Vec<String> = basis.iter().map(|p| p.to_string()).collect();
        assert_eq!(symbols, vec!["I", "X", "Y", "Z"]);
    }

    #[test]
    fn basis_size_n3() {
        assert_eq!(enumerate_basis(3).unwrap().len(), 64);
    }

    #[test]
    fn ordering_convention_n2() {
        // position 7 = X (x) Z: base-4 digits 1,3
        let basis = enumerate_basis(2).unwrap();
        assert_eq!(basis[7].to_string(), "XZ");
    }

    #[test]
    fn qubit_count_limits() {
        assert!(enumerate_basis(0).is_err());
        assert!(enumerate_basis(9).is_err());
        assert!(enumerate_basis(8).is_ok());
    }

    #[test]
    fn weights() {
        assert_eq!(PauliString::parse("III").unwrap().weight(), 0);
        assert_eq!(PauliString::parse("XIZ").unwrap().weight(), 2);
        assert_eq!(PauliString::parse("ZZZ").unwrap().weight(), 3);
    }

    #[test]
    fn index_letter_roundtrip() {
        for n in 1..=3 {
            for p in enumerate_basis(n).unwrap() {
                let back = PauliString::from_letters(&p.letters()).unwrap();
                assert_eq!(back.index(), p.index());
            }
        }
    }

    #[test]
    fn parse_display_roundtrip() {
        let p = PauliString::parse("xiZ").unwrap();
        assert_eq!(p.to_string(), "XIZ");
        assert!(PauliString::parse("XQ").is_err());
    }

    #[test]
    fn x_matrix() {
        let x = PauliString::parse("X").unwrap().to_matrix();
        assert_eq!(x[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(x[(1, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(x[(0, 0)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn zz_matrix_is_diag() {
        let zz = PauliString::parse("ZZ").unwrap().to_matrix();
        for (i, want) in [1.0, -1.0, -1.0, 1.0].iter().enumerate() {
            assert_eq!(zz[(i, i)], Complex64::new(*want, 0.0));
        }
    }

    #[test]
    fn orthonormality_n2() {
        // tr(P_k P_l) = d delta_kl over all 256 pairs
        let basis = enumerate_basis(2).unwrap();
        for pk in &basis {
            let mk = pk.to_matrix();
            for pl in &basis {
                let t = pl.trace_with(&mk);
                let want = if pk.index() == pl.index() { 4.0 } else { 0.0 };
                assert!((t.re - want).abs() < 1e-10 && t.im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn hermitian_and_involutory() {
        for p in enumerate_basis(2).unwrap() {
            let m = p.to_matrix();
            let diff = (&m - m.adjoint()).map(|c| c.norm()).max();
            assert!(diff < 1e-12);
            let sq = &m * &m;
            let eye = DMatrix::<Complex64>::identity(4, 4);
            assert!((sq - eye).map(|c| c.norm()).max() < 1e-12);
        }
    }

    #[test]
    fn weight_sector_counts() {
        // sum over basis of indicator(weight = w) = C(n,w) * 3^w
        let n = 3;
        let mut counts = [0usize; 4];
        for p in enumerate_basis(n).unwrap() {
            counts[p.weight()] += 1;
        }
        assert_eq!(counts, [1, 9, 27, 27]);
    }
}
