use nalgebra::DMatrix;
use nalgebra::DVector;

use crate::error::{Error, Result};

/// Singular value decomposition `M = U diag(sigma) V^T` with
/// `sigma[0] >= sigma[1] >= ... >= 0` and orthonormal columns in both
/// factors. For a p-by-q input, k = min(p, q); `u` is p-by-k and `v` is
/// q-by-k (columns are right singular vectors).
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.sigma) * self.v.transpose()
    }
}

/// Compute the SVD, delegating the kernel to nalgebra's implicit-shift
/// bidiagonal QR. Ordering and factor orientation are normalized here so
/// the rest of the crate can rely on them.
pub fn svd_factor(m: &DMatrix<f64>) -> Result<SvdFactors> {
    let (p, q) = m.shape();
    if p == 0 || q == 0 {
        return Err(Error::Dimension("svd_factor: empty matrix".into()));
    }
    let cap = 300 * p.max(q).max(10);
    let svd = nalgebra::SVD::try_new(m.clone(), true, true, f64::EPSILON, cap)
        .ok_or(Error::SvdNonConvergence { iterations: cap })?;
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let sigma = svd.singular_values;

    // Defensive descending sort; the kernel already orders, but downstream
    // indexing (smallest pair, trailing vector) must never depend on that.
    let k = sigma.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap());

    let mut u_sorted = DMatrix::<f64>::zeros(p, k);
    let mut v_sorted = DMatrix::<f64>::zeros(q, k);
    let mut s_sorted = DVector::<f64>::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u.column(src));
        v_sorted.set_column(dst, &v_t.transpose().column(src));
        s_sorted[dst] = sigma[src];
    }

    Ok(SvdFactors { u: u_sorted, sigma: s_sorted, v: v_sorted })
}
