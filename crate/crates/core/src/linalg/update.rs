use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{GivensRotation, ThinQr};

/// Update a factorization of `A` to one of `A + u v^T` using plane
/// rotations instead of refactoring.
///
/// With `w = Q^T u`, a bottom-up sweep of rotations compresses `w` onto the
/// first coordinate while turning `[R; 0]` upper Hessenberg; adding the
/// compressed rank-one term touches only row 0, and a short top-down sweep
/// restores triangularity. Both sweeps are accumulated into `Q`. The work
/// is dominated by the column rotations on `Q`; everything downstream of
/// `w` is independent of how `A + u v^T` relates to the original factored
/// matrix, so the same kernel serves every iteration from one cached
/// factorization of `A`.
pub fn qr_rank_one_update(qr: &ThinQr, u: &DVector<f64>, v: &DVector<f64>) -> Result<ThinQr> {
    qr_rank_one_update_counted(qr, u, v).map(|(qr, _)| qr)
}

/// Same as [`qr_rank_one_update`] but also reports the number of floating
/// point operations performed, counted where the work happens (used to
/// verify the cost scaling without relying on wall-clock noise).
pub fn qr_rank_one_update_counted(
    qr: &ThinQr,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<(ThinQr, u64)> {
    let (m, n) = (qr.nrows(), qr.ncols());
    if u.len() != m || v.len() != n {
        return Err(Error::Dimension(format!(
            "qr_rank_one_update: factors are {m}x{n}, update vectors have lengths {} and {}",
            u.len(),
            v.len()
        )));
    }

    let mut flops: u64 = 0;
    let mut q = qr.q().clone();

    // Full-height triangular factor; rows n..m start zero.
    let mut h = DMatrix::<f64>::zeros(m, n);
    h.view_mut((0, 0), (n, n)).copy_from(qr.r());

    let mut w = q.tr_mul(u);
    flops += 2 * (m as u64) * (m as u64);

    // Bottom-up sweep: zero w[i+1] against w[i]. Row i of h holds columns
    // i.. and row i+1 columns i+1.., so each rotation touches n-i entries
    // per row at most; rows at or below n are still zero and are skipped.
    for i in (0..m.saturating_sub(1)).rev() {
        let (g, r) = GivensRotation::zeroing(i, i + 1, w[i], w[i + 1]);
        if g.is_identity() {
            continue;
        }
        w[i] = r;
        w[i + 1] = 0.0;
        flops += 8;
        if i < n {
            g.apply_left_cols(&mut h, i, n);
            flops += 6 * (n - i) as u64;
        }
        g.apply_right_transpose(&mut q);
        flops += 6 * m as u64;
    }

    // h is upper Hessenberg; add the compressed rank-one term to row 0.
    let omega = w[0];
    if omega != 0.0 {
        for j in 0..n {
            h[(0, j)] += omega * v[j];
        }
        flops += 2 * n as u64;
    }

    // Top-down sweep: restore triangularity by zeroing each subdiagonal.
    for i in 0..n.min(m - 1) {
        let (g, r) = GivensRotation::zeroing(i, i + 1, h[(i, i)], h[(i + 1, i)]);
        if g.is_identity() {
            continue;
        }
        h[(i, i)] = r;
        h[(i + 1, i)] = 0.0;
        flops += 8;
        if i + 1 < n {
            g.apply_left_cols(&mut h, i + 1, n);
            flops += 6 * (n - i - 1) as u64;
        }
        g.apply_right_transpose(&mut q);
        flops += 6 * m as u64;
    }

    let mut r1 = h.view((0, 0), (n, n)).into_owned();
    for i in 0..n {
        if r1[(i, i)] < 0.0 {
            for j in i..n {
                r1[(i, j)] = -r1[(i, j)];
            }
            for row in 0..m {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }

    Ok((ThinQr::from_parts(q, r1), flops))
}
