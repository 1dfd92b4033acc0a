use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::SINGULAR_RTOL;

/// QR factorization of a tall matrix `A = Q [R; 0]`.
///
/// The full m-by-m orthogonal factor is carried, not just the thin slice:
/// the rank-one update sweeps rotations through all m coordinates and the
/// least-squares residual lives in the trailing columns. Memory is m^2,
/// acceptable at the scales this crate targets.
///
/// The diagonal of `R` is kept nonnegative, which pins the otherwise free
/// signs and makes factorizations comparable across code paths.
#[derive(Debug, Clone)]
pub struct ThinQr {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl ThinQr {
    pub(crate) fn from_parts(q: DMatrix<f64>, r: DMatrix<f64>) -> Self {
        debug_assert_eq!(q.nrows(), q.ncols());
        debug_assert_eq!(r.nrows(), r.ncols());
        debug_assert!(q.nrows() >= r.nrows());
        Self { q, r }
    }

    pub fn nrows(&self) -> usize {
        self.q.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.r.ncols()
    }

    /// Full m-by-m orthogonal factor.
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// First n columns of `q`, the orthonormal basis of the column space.
    pub fn thin_q(&self) -> DMatrix<f64> {
        self.q.columns(0, self.ncols()).into_owned()
    }

    /// n-by-n upper triangular factor.
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Reassemble the factored matrix (test and diagnostic use).
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.thin_q() * &self.r
    }

    /// True when every diagonal of `R` clears the relative singularity
    /// threshold, i.e. the factored matrix has full column rank.
    pub fn is_full_rank(&self) -> bool {
        let scale = self.r.diagonal().amax();
        if scale == 0.0 {
            return false;
        }
        (0..self.ncols()).all(|i| self.r[(i, i)].abs() > SINGULAR_RTOL * scale)
    }
}

/// Householder QR with accumulation of the full orthogonal factor.
///
/// Requires m >= n. Cost is O(m^2 n) because of the full-Q accumulation.
pub fn qr_factor(a: &DMatrix<f64>) -> Result<ThinQr> {
    let (m, n) = a.shape();
    if m < n || n == 0 {
        return Err(Error::Dimension(format!(
            "qr_factor expects a tall matrix, got {m}x{n}"
        )));
    }

    let mut work = a.clone();
    let mut q = DMatrix::<f64>::identity(m, m);
    let mut v = DVector::<f64>::zeros(m);

    for k in 0..n {
        let tail = m - k;
        let norm_x = work.view((k, k), (tail, 1)).norm();
        if norm_x == 0.0 {
            continue;
        }
        // Reflector v = x + sign(x0)*||x|| e1 avoids cancellation in v[0].
        let alpha = if work[(k, k)] >= 0.0 { -norm_x } else { norm_x };
        for i in 0..tail {
            v[i] = work[(k + i, k)];
        }
        v[0] -= alpha;
        let vtv = v.rows(0, tail).norm_squared();
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;

        // work[k.., k..] -= beta * v (v^T work[k.., k..])
        for j in k..n {
            let mut dot = 0.0;
            for i in 0..tail {
                dot += v[i] * work[(k + i, j)];
            }
            let coef = beta * dot;
            for i in 0..tail {
                work[(k + i, j)] -= coef * v[i];
            }
        }
        work[(k, k)] = alpha;
        for i in 1..tail {
            work[(k + i, k)] = 0.0;
        }

        // q[:, k..] -= beta * (q[:, k..] v) v^T
        for row in 0..m {
            let mut dot = 0.0;
            for i in 0..tail {
                dot += q[(row, k + i)] * v[i];
            }
            let coef = beta * dot;
            for i in 0..tail {
                q[(row, k + i)] -= coef * v[i];
            }
        }
    }

    let mut r = work.view((0, 0), (n, n)).into_owned();
    for i in 0..n {
        if r[(i, i)] < 0.0 {
            for j in i..n {
                r[(i, j)] = -r[(i, j)];
            }
            for row in 0..m {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }

    Ok(ThinQr::from_parts(q, r))
}

/// Solve `R x = b` by back substitution. `R` must be square upper triangular.
pub fn solve_upper(r: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = r.nrows();
    if r.ncols() != n || b.len() != n {
        return Err(Error::Dimension(format!(
            "solve_upper: R is {}x{}, rhs has length {}",
            r.nrows(),
            r.ncols(),
            b.len()
        )));
    }
    check_diagonal(r)?;
    let mut x = b.clone();
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in i + 1..n {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / r[(i, i)];
    }
    Ok(x)
}

/// Solve `R^T x = b` by forward substitution.
pub fn solve_upper_transpose(r: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = r.nrows();
    if r.ncols() != n || b.len() != n {
        return Err(Error::Dimension(format!(
            "solve_upper_transpose: R is {}x{}, rhs has length {}",
            r.nrows(),
            r.ncols(),
            b.len()
        )));
    }
    check_diagonal(r)?;
    let mut x = b.clone();
    for i in 0..n {
        let mut acc = x[i];
        for j in 0..i {
            acc -= r[(j, i)] * x[j];
        }
        x[i] = acc / r[(i, i)];
    }
    Ok(x)
}

fn check_diagonal(r: &DMatrix<f64>) -> Result<()> {
    let scale = r.diagonal().amax();
    for i in 0..r.nrows() {
        if r[(i, i)].abs() <= SINGULAR_RTOL * scale || r[(i, i)] == 0.0 {
            return Err(Error::SingularFactor { index: i });
        }
    }
    Ok(())
}

/// Minimize `||A x - rhs||` given a factorization of `A`.
pub fn ls_solve(qr: &ThinQr, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, n) = (qr.nrows(), qr.ncols());
    if rhs.len() != m {
        return Err(Error::Dimension(format!(
            "ls_solve: factored matrix is {m}x{n}, rhs has length {}",
            rhs.len()
        )));
    }
    let qtb = qr.q().tr_mul(rhs);
    let head = qtb.rows(0, n).into_owned();
    solve_upper(qr.r(), &head)
}
