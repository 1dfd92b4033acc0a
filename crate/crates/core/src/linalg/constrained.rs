use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{ls_solve, qr_factor, solve_upper, solve_upper_transpose, ThinQr};

/// Solution of a least-squares problem restricted to the hyperplane
/// `v^T x = 0`.
#[derive(Debug, Clone)]
pub struct ConstrainedLs {
    /// Minimizer of `||A x - rhs||` subject to `v^T x = 0`.
    pub x_bar: DVector<f64>,
    /// Lagrange multiplier: `A^T A x_bar - A^T rhs + multiplier * v = 0`.
    pub multiplier: f64,
}

/// Minimize `||A x - rhs||` subject to `v^T x = 0`.
///
/// The unconstrained minimizer is projected back onto the hyperplane along
/// the `(A^T A)^-1 v` direction:
///
///   x_bar = x_ls - (v^T x_ls / v^T w) w,   w = (A^T A)^-1 v.
///
/// `w` comes from two triangular solves against the R factor, so no normal
/// matrix is ever formed. Requires A of full column rank and v != 0.
pub fn constrained_ls_solve(
    a: &DMatrix<f64>,
    rhs: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<ConstrainedLs> {
    let qr = qr_factor(a)?;
    constrained_ls_solve_prefactored(&qr, rhs, v)
}

/// [`constrained_ls_solve`] against an already computed factorization.
pub fn constrained_ls_solve_prefactored(
    qr: &ThinQr,
    rhs: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<ConstrainedLs> {
    let n = qr.ncols();
    if v.len() != n {
        return Err(Error::Dimension(format!(
            "constrained_ls_solve: matrix has {n} columns, constraint has length {}",
            v.len()
        )));
    }
    if v.iter().all(|&c| c == 0.0) {
        return Err(Error::ZeroConstraint);
    }

    let x_ls = ls_solve(qr, rhs)?;
    // w = (A^T A)^-1 v = R^-1 R^-T v
    let w = solve_upper(qr.r(), &solve_upper_transpose(qr.r(), v)?)?;
    let vtw = v.dot(&w);
    // v^T (A^T A)^-1 v > 0 for any v != 0; a nonpositive value means the
    // factorization itself is unusable.
    if vtw <= 0.0 || !vtw.is_finite() {
        return Err(Error::RankDeficient { what: "constrained least-squares matrix" });
    }
    let multiplier = v.dot(&x_ls) / vtw;
    let x_bar = &x_ls - &w * multiplier;
    Ok(ConstrainedLs { x_bar, multiplier })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_case_has_closed_form() {
        // A = I, rhs = (1,1), v = e1: minimizer on the plane x_0 = 0 is (0,1),
        // with gradient residual A^T A x - A^T rhs = (-1, 0) = -multiplier * v.
        let a = DMatrix::<f64>::identity(2, 2);
        let rhs = DVector::from_vec(vec![1.0, 1.0]);
        let v = DVector::from_vec(vec![1.0, 0.0]);
        let sol = constrained_ls_solve(&a, &rhs, &v).unwrap();
        assert!((sol.x_bar[0]).abs() < 1e-15);
        assert!((sol.x_bar[1] - 1.0).abs() < 1e-15);
        assert!((sol.multiplier - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constraint_holds_and_beats_other_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let m = rng.gen_range(4..10);
            let n = rng.gen_range(2..=m.min(5));
            let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
            let rhs = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
            let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let sol = match constrained_ls_solve(&a, &rhs, &v) {
                Ok(s) => s,
                Err(Error::SingularFactor { .. }) => continue,
                Err(e) => panic!("unexpected error {e:?}"),
            };
            let xbar = &sol.x_bar;
            assert!(v.dot(xbar).abs() < 1e-12 * v.norm() * xbar.norm().max(1.0));

            // stationarity: gradient must be parallel to the constraint normal
            let grad = a.tr_mul(&(&a * xbar - &rhs));
            assert!((&grad + &v * sol.multiplier).norm() < 1e-10 * grad.norm().max(1.0));

            // any feasible perturbation must not improve the objective
            let base = (&a * xbar - &rhs).norm();
            for _ in 0..5 {
                let mut d = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                // project d onto the constraint plane
                d -= &v * (v.dot(&d) / v.norm_squared());
                let trial = (&a * (xbar + d * 1e-3) - &rhs).norm();
                assert!(trial >= base - 1e-12);
            }
        }
    }

    #[test]
    fn zero_constraint_rejected() {
        let a = DMatrix::<f64>::identity(3, 2);
        let rhs = DVector::zeros(3);
        let v = DVector::zeros(2);
        assert!(matches!(constrained_ls_solve(&a, &rhs, &v), Err(Error::ZeroConstraint)));
    }
}
