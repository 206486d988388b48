//! Dense Cholesky factorisation for the small SPD systems of the designer.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Lower-triangular factor `L` with `A = L·Lᵀ`, row-major.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    dim: usize,
    l: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factors the row-major `dim × dim` matrix `a`. Only the lower triangle
    /// is read.
    pub fn factor(a: &[T], dim: usize) -> Result<Self> {
        if a.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                got: a.len(),
            });
        }
        let mut l = vec![T::zero(); dim * dim];
        let max_diag = (0..dim)
            .map(|i| a[i * dim + i].abs())
            .fold(T::zero(), T::max);
        for i in 0..dim {
            for j in 0..=i {
                let mut s = a[i * dim + j];
                for k in 0..j {
                    s = s - l[i * dim + k] * l[j * dim + k];
                }
                if i == j {
                    if !(s > T::zero()) || !s.is_finite() {
                        let pivot = s.as_f64();
                        let condition = if pivot > 0.0 {
                            max_diag.as_f64() / pivot
                        } else {
                            f64::INFINITY
                        };
                        return Err(Error::Conditioning {
                            row: i,
                            pivot,
                            condition,
                        });
                    }
                    l[i * dim + i] = s.sqrt();
                } else {
                    l[i * dim + j] = s / l[j * dim + j];
                }
            }
        }
        Ok(Self { dim, l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Rough 2-norm condition estimate `(max Lii / min Lii)²`.
    pub fn condition_estimate(&self) -> f64 {
        let diag = (0..self.dim).map(|i| self.l[i * self.dim + i].as_f64());
        let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
        (hi / lo).powi(2)
    }

    /// Solves `A·x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim;
        assert_eq!(b.len(), n, "right-hand side length");
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s = s - self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let x_true = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| a[i * 3 + j] * x_true[j]).sum())
            .collect();
        let chol = Cholesky::factor(&a, 3).unwrap();
        let x = chol.solve(&b);
        for (u, v) in x.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-14);
        }
        assert!(chol.condition_estimate() >= 1.0);
    }

    #[test]
    fn indefinite_matrix_reports_conditioning() {
        let a = [1.0, 2.0, 2.0, 1.0];
        match Cholesky::factor(&a, 2) {
            Err(Error::Conditioning { row, pivot, .. }) => {
                assert_eq!(row, 1);
                assert!(pivot < 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
