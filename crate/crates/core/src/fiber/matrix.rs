use crate::error::{LabError, Result};
use nalgebra::DMatrix;

/// Determinants below this are treated as singular.
pub const SINGULAR_GUARD: f64 = 1e-12;

/// An element of `GL_d(ℝ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixElement {
    pub entries: DMatrix<f64>,
}

impl MatrixElement {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(LabError::Invalid("matrix must be square".into()));
        }
        let det = entries.determinant();
        if !(det.abs() > SINGULAR_GUARD) {
            return Err(LabError::Invalid(format!(
                "singular matrix: det = {det:.3e}"
            )));
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
        if flat.len() != d * d {
            return Err(LabError::Invalid("matrix rows must form a square".into()));
        }
        Self::new(DMatrix::from_row_slice(d, d, &flat))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            entries: &self.entries * &other.entries,
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            entries: self
                .entries
                .clone()
                .try_inverse()
                .expect("invertibility is a type invariant"),
        }
    }

    /// Matrix exponential.
    pub fn exp(generator: &DMatrix<f64>) -> Self {
        Self {
            entries: generator.clone().exp(),
        }
    }

    /// Largest entrywise difference.
    pub fn distance(&self, other: &Self) -> f64 {
        (&self.entries - &other.entries).amax()
    }

    /// Largest and smallest singular values.
    pub fn singular_range(&self) -> (f64, f64) {
        let sv = self.entries.clone().singular_values();
        let max = sv.iter().cloned().fold(0.0, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        (max, min)
    }

    pub fn norm(&self) -> f64 {
        self.singular_range().0
    }

    /// `‖A⁻¹‖⁻¹`.
    pub fn conorm(&self) -> f64 {
        self.singular_range().1
    }

    pub fn condition(&self) -> f64 {
        let (a, b) = self.singular_range();
        a / b
    }

    /// Moduli of the eigenvalues, in decreasing order.
    pub fn eigen_moduli(&self) -> Vec<f64> {
        let ev = self.entries.complex_eigenvalues();
        let mut m: Vec<f64> = ev.iter().map(|z| z.norm()).collect();
        m.sort_by(|a, b| b.partial_cmp(a).unwrap());
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guards_singular() {
        assert!(MatrixElement::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).is_err());
    }

    #[test]
    fn exp_of_rotation_generator() {
        let g = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let r = MatrixElement::exp(&(g * std::f64::consts::FRAC_PI_2));
        let expect = MatrixElement::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        assert!(r.distance(&expect) < 1e-12);
        assert!((r.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_moduli_of_cat() {
        let a = MatrixElement::from_rows(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let m = a.eigen_moduli();
        assert!((m[0] - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!((m[0] * m[1] - 1.0).abs() < 1e-12);
    }
}
