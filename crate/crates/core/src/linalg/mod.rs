//! Dense kernels the solver is built on: Householder QR with a carried
//! orthogonal factor, Givens-based rank-one updating of that factorization,
//! least squares and linearly constrained least squares, and a thin wrapper
//! around a trusted SVD kernel.

mod constrained;
mod qr;
mod svd;
mod update;

pub use constrained::{constrained_ls_solve, constrained_ls_solve_prefactored, ConstrainedLs};
pub use qr::{ls_solve, qr_factor, solve_upper, solve_upper_transpose, ThinQr};
pub use svd::{svd_factor, SvdFactors};
pub use update::{qr_rank_one_update, qr_rank_one_update_counted};

/// Relative threshold below which a triangular diagonal counts as singular.
pub const SINGULAR_RTOL: f64 = 1e-14;

/// Relative Frobenius tolerance for factorization residuals (used by tests
/// and by the reconstruction checks in the acceptance suite).
pub const TOL_FACTORIZATION: f64 = 1e-12;

/// A plane rotation acting on coordinates `i` and `j`.
///
/// Applied from the left it maps rows `i`, `j` to
/// `(c*row_i + s*row_j, -s*row_i + c*row_j)`; `apply_right_transpose`
/// performs the matching column operation so that `G^T G = I` round-trips.
#[derive(Debug, Clone, Copy)]
pub struct GivensRotation {
    pub i: usize,
    pub j: usize,
    pub c: f64,
    pub s: f64,
}

impl GivensRotation {
    /// Rotation that zeroes `b` against `a`; returns the rotation together
    /// with the resulting leading value `r = hypot(a, b)`.
    pub fn zeroing(i: usize, j: usize, a: f64, b: f64) -> (Self, f64) {
        if b == 0.0 {
            return (Self { i, j, c: 1.0, s: 0.0 }, a);
        }
        let r = a.hypot(b);
        (Self { i, j, c: a / r, s: b / r }, r)
    }

    pub fn is_identity(&self) -> bool {
        self.s == 0.0 && self.c == 1.0
    }

    /// Rotate rows `i`, `j` of `m` over the column range `lo..hi`.
    pub fn apply_left_cols(&self, m: &mut nalgebra::DMatrix<f64>, lo: usize, hi: usize) {
        for col in lo..hi {
            let x = m[(self.i, col)];
            let y = m[(self.j, col)];
            m[(self.i, col)] = self.c * x + self.s * y;
            m[(self.j, col)] = -self.s * x + self.c * y;
        }
    }

    pub fn apply_left(&self, m: &mut nalgebra::DMatrix<f64>) {
        let ncols = m.ncols();
        self.apply_left_cols(m, 0, ncols);
    }

    /// Right-multiply `m` by the transpose of this rotation (column update).
    pub fn apply_right_transpose(&self, m: &mut nalgebra::DMatrix<f64>) {
        for row in 0..m.nrows() {
            let x = m[(row, self.i)];
            let y = m[(row, self.j)];
            m[(row, self.i)] = self.c * x + self.s * y;
            m[(row, self.j)] = -self.s * x + self.c * y;
        }
    }

    pub fn apply_to_vector(&self, v: &mut nalgebra::DVector<f64>) {
        let x = v[self.i];
        let y = v[self.j];
        v[self.i] = self.c * x + self.s * y;
        v[self.j] = -self.s * x + self.c * y;
    }
}
