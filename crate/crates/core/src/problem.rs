//! Problem container: the data matrix, right-hand side, and their augmentation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A total least squares instance `min ||(E|f)||_F s.t. (A+E)x = b+f`.
///
/// Holds the augmented matrix `C = (A|b)` alongside `A` and `b` so that
/// consumers that work on `C` (SVD analysis, power iteration) and consumers
/// that work on `A` (step subproblems) share one immutable source of truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DMatrix<f64>,
    m: usize,
    n: usize,
}

impl ProblemData {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let (m, n) = a.shape();
        if n < 1 {
            return Err(Error::Dimension("data matrix needs at least one column".into()));
        }
        if m < n {
            return Err(Error::Dimension(format!(
                "data matrix must have at least as many rows as columns, got {m}x{n}"
            )));
        }
        if b.len() != m {
            return Err(Error::Dimension(format!(
                "right-hand side length {} does not match row count {m}",
                b.len()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("non-finite entries in problem data".into()));
        }
        let mut c = DMatrix::zeros(m, n + 1);
        c.view_mut((0, 0), (m, n)).copy_from(&a);
        c.set_column(n, &b);
        Ok(Self { a, b, c, m, n })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Augmented matrix (A|b); columns are bit-identical to `a` and `b`.
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Residual A x - b.
    pub fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x - &self.b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn augmentation_is_bit_exact() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = DVector::from_vec(vec![0.1, 0.2, 0.3]);
        let p = ProblemData::new(a.clone(), b.clone()).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                assert!(p.c()[(i, j)] == a[(i, j)]);
            }
            assert!(p.c()[(i, 2)] == b[i]);
        }
        assert_eq!((p.m(), p.n()), (3, 2));
    }

    #[test]
    fn rejects_bad_shapes() {
        let wide = DMatrix::from_element(2, 3, 1.0);
        assert!(ProblemData::new(wide, DVector::from_element(2, 1.0)).is_err());
        let a = DMatrix::from_element(3, 2, 1.0);
        assert!(ProblemData::new(a.clone(), DVector::from_element(4, 1.0)).is_err());
        let mut nan = a;
        nan[(0, 0)] = f64::NAN;
        assert!(ProblemData::new(nan, DVector::from_element(3, 1.0)).is_err());
    }

    #[test]
    fn square_data_matrix_is_allowed() {
        let a = DMatrix::identity(2, 2);
        let p = ProblemData::new(a, DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert_eq!((p.m(), p.n()), (2, 2));
    }
}
