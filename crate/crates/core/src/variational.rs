//! Smooth reformulation of the TLS objective.
//!
//! The backward error of a candidate solution x is
//! eta(x) = ||Ax - b|| / sqrt(1 + x'x), and the machinery here treats it as
//! the norm of the smooth map f(x) = mu(x) (Ax - b) with mu = (1 + x'x)^{-1/2}.
//! Everything the iterative solvers need lives here: f, its Jacobian, the
//! exact step-length decomposition f(x+h) = tau (f(x) + theta J h), and the
//! rank-one perturbation certifying eta(x) as a backward error.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{ls_solve, qr_factor, ThinQr};
use crate::problem::ProblemData;

/// Step-length degeneracy guard: |1 - mu^2 x'h| at or below this makes the
/// rescaled step undefined in double precision.
pub const EPS_ALPHA: f64 = 1e-12;

/// Hemisphere guard for inverting f-space points back to x: the trailing
/// coefficient of the preimage must be strictly below -EPS_HEMISPHERE.
pub const EPS_HEMISPHERE: f64 = 1e-14;

/// Absolute tolerance for residual identities on unit-scale quantities.
pub const TOL_RESIDUAL: f64 = 1e-10;

/// f, its Jacobian, and derived scalars at one point x.
#[derive(Debug, Clone)]
pub struct VariationalPoint {
    pub x: DVector<f64>,
    /// mu(x) = (1 + x'x)^{-1/2}, in (0, 1], equal to 1 iff x = 0.
    pub mu: f64,
    /// f(x) = mu(x) (Ax - b).
    pub f: DVector<f64>,
    /// eta(x) = ||f(x)||.
    pub eta: f64,
    /// J(x) = mu A - mu^3 (Ax - b) x'.
    pub jac: DMatrix<f64>,
    /// ||J(x)' f(x)||, the stationarity measure.
    pub grad_norm: f64,
}

/// Evaluates f, J, eta, and the gradient norm at x.
pub fn evaluate(problem: &ProblemData, x: &DVector<f64>) -> VariationalPoint {
    assert_eq!(x.len(), problem.n(), "point dimension mismatch");
    let r = problem.residual(x);
    let mu = (1.0 + x.dot(x)).sqrt().recip();
    let f = &r * mu;
    let eta = f.norm();
    // J = mu A - mu^3 r x' = mu A - mu^2 f x'
    let mut jac = problem.a() * mu;
    jac.ger(-mu * mu, &f, x, 1.0);
    let grad_norm = (jac.transpose() * &f).norm();
    VariationalPoint { x: x.clone(), mu, f, eta, jac, grad_norm }
}

/// Rank-one perturbation (E|f) with (A+E)x = b+f and ||(E|f)||_F = eta(x).
///
/// Stored in factored form: the stacked matrix (E|f) equals
/// `left * right'` with `left` the residual Ax - b and `right` the
/// (n+1)-vector (-x, 1) / (1 + x'x).
#[derive(Debug, Clone)]
pub struct BackwardPerturbation {
    left: DVector<f64>,
    right: DVector<f64>,
    frob_norm: f64,
}

impl BackwardPerturbation {
    /// The matrix perturbation, densified.
    pub fn e_bar(&self) -> DMatrix<f64> {
        let n = self.right.len() - 1;
        let mut e = DMatrix::zeros(self.left.len(), n);
        e.ger(1.0, &self.left, &self.right.rows(0, n).clone_owned(), 0.0);
        e
    }

    /// The right-hand-side perturbation, densified.
    pub fn f_bar(&self) -> DVector<f64> {
        &self.left * self.right[self.right.len() - 1]
    }

    /// Frobenius norm of the stacked perturbation (E|f); equals eta(x).
    pub fn frob_norm(&self) -> f64 {
        self.frob_norm
    }

    /// The two rank-one factors: the stacked (E|f) equals left * right'.
    pub fn factors(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.left, &self.right)
    }
}

/// Builds the optimal backward perturbation for x: E = -r x'/(1+x'x),
/// f = r/(1+x'x) with r = Ax - b. Its Frobenius norm is eta(x), and no
/// feasible perturbation is smaller.
pub fn backward_certificate(problem: &ProblemData, x: &DVector<f64>) -> BackwardPerturbation {
    assert_eq!(x.len(), problem.n(), "point dimension mismatch");
    let r = problem.residual(x);
    let scale = (1.0 + x.dot(x)).recip();
    let mut right = DVector::zeros(x.len() + 1);
    right.rows_mut(0, x.len()).copy_from(&(-x * scale));
    right[x.len()] = scale;
    // ||left|| ||right|| = ||r|| sqrt(1+x'x) / (1+x'x) = mu ||r|| = eta
    let frob_norm = r.norm() * right.norm();
    BackwardPerturbation { left: r, right, frob_norm }
}

/// Scalars of the exact step decomposition f(x+h) = tau (f(x) + theta J h).
#[derive(Debug, Clone)]
pub struct StepComputation {
    pub h: DVector<f64>,
    /// theta = 1 / (1 + mu^2 x'h).
    pub theta: f64,
    /// tau = (mu(x+h)/mu(x)) (1 + mu^2 x'h); tau^2 <= 1 always.
    pub tau: f64,
    /// alpha = 1 / (1 - mu^2 x'h), the rescaling that turns the step into a
    /// retraction of the full linearized point f + J h.
    pub alpha: f64,
}

/// Computes (theta, tau, alpha) for a step h from the given point.
///
/// Errors with `StepDegenerate` when the alpha denominator 1 - mu^2 x'h is
/// within EPS_ALPHA of zero; callers fall back to the unscaled step.
pub fn gauss_newton_decomposition(
    point: &VariationalPoint,
    h: &DVector<f64>,
) -> Result<StepComputation> {
    assert_eq!(h.len(), point.x.len(), "step dimension mismatch");
    let s = point.mu * point.mu * point.x.dot(h);
    let denom = 1.0 - s;
    if denom.abs() <= EPS_ALPHA {
        return Err(Error::StepDegenerate { denom, limit: EPS_ALPHA });
    }
    let xh = &point.x + h;
    let mu_next = (1.0 + xh.dot(&xh)).sqrt().recip();
    Ok(StepComputation {
        h: h.clone(),
        theta: (1.0 + s).recip(),
        tau: (mu_next / point.mu) * (1.0 + s),
        alpha: denom.recip(),
    })
}

/// Inverts a point of f-space back to solution space.
///
/// Writes f_point = C y; the preimage x exists iff the trailing coordinate of
/// y is strictly negative, in which case x = -(y_1..y_n)/y_{n+1}. Errors with
/// `HemisphereViolation` otherwise.
pub fn lift_to_x(problem: &ProblemData, f_point: &DVector<f64>) -> Result<DVector<f64>> {
    let qr_c = qr_factor(problem.c())?;
    lift_to_x_prefactored(&qr_c, f_point)
}

/// As `lift_to_x`, reusing a factorization of C.
pub fn lift_to_x_prefactored(qr_c: &ThinQr, f_point: &DVector<f64>) -> Result<DVector<f64>> {
    let y = ls_solve(qr_c, f_point)?;
    lift_coefficients(&y)
}

/// Inverts coefficient space directly: x = -(y_1..y_n)/y_{n+1}.
pub(crate) fn lift_coefficients(y: &DVector<f64>) -> Result<DVector<f64>> {
    let n = y.len() - 1;
    let last = y[n];
    if last >= -EPS_HEMISPHERE {
        return Err(Error::HemisphereViolation { value: last });
    }
    Ok(y.rows(0, n).clone_owned() / -last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svd_factor;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn slim_problem() -> ProblemData {
        // A = [[1],[0]], b = (1,1)
        ProblemData::new(
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        )
        .unwrap()
    }

    fn random_problem(rng: &mut ChaCha8Rng, m: usize, n: usize) -> ProblemData {
        let a = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        ProblemData::new(a, b).unwrap()
    }

    fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn evaluate_at_origin_reduces_to_rhs() {
        let p = ProblemData::new(
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
        )
        .unwrap();
        let pt = evaluate(&p, &DVector::zeros(1));
        assert!(pt.mu == 1.0);
        assert!(pt.f[0] == 0.0 && pt.f[1] == -1.0);
        assert!(pt.eta == 1.0);
    }

    #[test]
    fn evaluate_matches_hand_values_at_unit_point() {
        let pt = evaluate(&slim_problem(), &DVector::from_vec(vec![1.0]));
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert!((pt.mu - inv_sqrt2).abs() < 1e-15);
        assert!(pt.f[0].abs() < 1e-15);
        assert!((pt.f[1] + inv_sqrt2).abs() < 1e-15);
        assert!((pt.eta - inv_sqrt2).abs() < 1e-15);
    }

    #[test]
    fn consistent_point_has_zero_residual_and_scaled_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DMatrix::from_fn(8, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x_star = random_vector(&mut rng, 3);
        let b = &a * &x_star;
        let p = ProblemData::new(a.clone(), b).unwrap();
        let pt = evaluate(&p, &x_star);
        assert!(pt.eta <= 1e-14 * a.norm(), "eta = {}", pt.eta);
        let diff = (&pt.jac - &a * pt.mu).norm();
        assert!(diff <= 1e-12 * a.norm(), "jacobian deviates by {diff}");
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..10 {
            let p = random_problem(&mut rng, 9, 4);
            for _ in 0..2 {
                let x = random_vector(&mut rng, 4);
                let pt = evaluate(&p, &x);
                let step = 1e-5 * (1.0 + x.norm());
                let mut fd = DMatrix::zeros(9, 4);
                for j in 0..4 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[j] += step;
                    xm[j] -= step;
                    let col = (evaluate(&p, &xp).f - evaluate(&p, &xm).f) / (2.0 * step);
                    fd.set_column(j, &col);
                }
                let rel = (&fd - &pt.jac).norm() / pt.jac.norm();
                assert!(rel <= 1e-6, "trial {trial}: fd mismatch {rel}");
            }
        }
    }

    #[test]
    fn certificate_hand_example() {
        let p = slim_problem();
        let cert = backward_certificate(&p, &DVector::from_vec(vec![1.0]));
        let e = cert.e_bar();
        let f = cert.f_bar();
        assert!(e[(0, 0)].abs() < 1e-15 && (e[(1, 0)] - 0.5).abs() < 1e-15);
        assert!(f[0].abs() < 1e-15 && (f[1] + 0.5).abs() < 1e-15);
        assert!((cert.frob_norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        // perturbed system is exactly consistent at x = 1
        let lhs = (p.a() + e) * DVector::from_vec(vec![1.0]);
        let rhs = p.b() + f;
        assert!((lhs - rhs).norm() < 1e-15);
    }

    #[test]
    fn certificate_degenerate_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a = DMatrix::from_fn(6, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x_star = random_vector(&mut rng, 2);
        let b = &a * &x_star;
        let consistent = ProblemData::new(a, b).unwrap();
        let cert = backward_certificate(&consistent, &x_star);
        assert!(cert.frob_norm() <= 1e-13);
        assert!(cert.e_bar().norm() <= 1e-13 && cert.f_bar().norm() <= 1e-13);

        let p = random_problem(&mut rng, 6, 2);
        let at_zero = backward_certificate(&p, &DVector::zeros(2));
        assert!(at_zero.e_bar().norm() == 0.0);
        assert!((at_zero.f_bar() + p.b()).norm() < 1e-15);
        assert!((at_zero.frob_norm() - p.b().norm()).abs() < 1e-14);
    }

    #[test]
    fn certificate_is_feasible_and_matches_eta() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..50 {
            let p = random_problem(&mut rng, 10, 3);
            let x = random_vector(&mut rng, 3);
            let cert = backward_certificate(&p, &x);
            let scale = p.c().norm();
            let feas = ((p.a() + cert.e_bar()) * &x - (p.b() + cert.f_bar())).norm();
            assert!(feas <= 1e-12 * scale, "feasibility residual {feas}");
            let eta = evaluate(&p, &x).eta;
            assert!((cert.frob_norm() - eta).abs() <= 1e-12 * (1.0 + eta));
            // stored norm agrees with the densified matrices
            let dense: f64 =
                (cert.e_bar().norm_squared() + cert.f_bar().norm_squared()).sqrt();
            assert!((dense - cert.frob_norm()).abs() <= 1e-13 * (1.0 + dense));
        }
    }

    #[test]
    fn certificate_never_beaten_by_feasible_competitors() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let p = random_problem(&mut rng, 8, 3);
        let x = random_vector(&mut rng, 3);
        let best = backward_certificate(&p, &x).frob_norm();
        for _ in 0..100 {
            // any E determines the unique f making (A+E)x = b+f consistent
            let e = DMatrix::from_fn(8, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let f = (p.a() + &e) * &x - p.b();
            let competitor = (e.norm_squared() + f.norm_squared()).sqrt();
            assert!(
                competitor >= best - 1e-12,
                "feasible competitor {competitor} beats certificate {best}"
            );
        }
    }

    #[test]
    fn decomposition_identity_componentwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..50 {
            let p = random_problem(&mut rng, 12, 5);
            let x = random_vector(&mut rng, 5);
            let h = random_vector(&mut rng, 5);
            let pt = evaluate(&p, &x);
            let step = gauss_newton_decomposition(&pt, &h).unwrap();
            let lhs = evaluate(&p, &(&x + &h)).f;
            let rhs = (&pt.f + &pt.jac * &h * step.theta) * step.tau;
            let err = (lhs - rhs).amax();
            assert!(err <= 1e-12 * (1.0 + p.c().norm()), "identity off by {err}");
            assert!((step.theta * (1.0 + pt.mu * pt.mu * x.dot(&h)) - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn orthogonal_step_has_unit_scalars() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let p = random_problem(&mut rng, 7, 3);
        let x = random_vector(&mut rng, 3);
        // x'h cancels exactly: h swaps the first two coordinates with a sign
        let h = DVector::from_vec(vec![x[1], -x[0], 0.0]);
        assert!(x.dot(&h) == 0.0);
        let pt = evaluate(&p, &x);
        let step = gauss_newton_decomposition(&pt, &h).unwrap();
        assert!(step.theta == 1.0);
        assert!(step.alpha == 1.0);
        let mu_next = evaluate(&p, &(&x + &h)).mu;
        assert!((step.tau - mu_next / pt.mu).abs() < 1e-15);
    }

    #[test]
    fn degenerate_alpha_denominator_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let p = random_problem(&mut rng, 6, 2);
        let x = DVector::from_vec(vec![1.0, 1.0]);
        let pt = evaluate(&p, &x);
        // mu^2 x'h = 1 exactly for h = x (mu^2 = 1/3, x'x = ... pick h = x * (1/(mu^2 x'x)))
        let h = &x * ((pt.mu * pt.mu * x.dot(&x)).recip());
        match gauss_newton_decomposition(&pt, &h) {
            Err(Error::StepDegenerate { denom, .. }) => assert!(denom.abs() <= EPS_ALPHA),
            other => panic!("expected step degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn tau_never_exceeds_one_and_equality_needs_zero_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let p = random_problem(&mut rng, 6, 4);
        for _ in 0..2000 {
            let x = random_vector(&mut rng, 4) * rng.gen_range(0.1..3.0);
            let h = random_vector(&mut rng, 4) * rng.gen_range(0.0..3.0);
            let pt = evaluate(&p, &x);
            let Ok(step) = gauss_newton_decomposition(&pt, &h) else { continue };
            assert!(step.tau * step.tau <= 1.0 + 1e-14, "tau^2 = {}", step.tau * step.tau);
            // tau^2 is the squared cosine between (x,1) and (x+h,1); it equals
            // 1 exactly when the lifted vectors align, i.e. h = 0
            let num = 1.0 + x.dot(&(&x + &h));
            let den = (1.0 + x.dot(&x)) * (1.0 + (&x + &h).dot(&(&x + &h)));
            let cos2 = num * num / den;
            assert!((step.tau * step.tau - cos2).abs() <= 1e-13);
        }
        let x = random_vector(&mut rng, 4);
        let pt = evaluate(&p, &x);
        let at_zero = gauss_newton_decomposition(&pt, &DVector::zeros(4)).unwrap();
        assert!(at_zero.tau == 1.0 && at_zero.theta == 1.0 && at_zero.alpha == 1.0);
    }

    #[test]
    fn f_points_live_on_the_residual_ellipsoid() {
        // |f' (CC')^+ f - 1| small, with the pseudoinverse applied via SVD
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..20 {
            let p = random_problem(&mut rng, 9, 4);
            let x = random_vector(&mut rng, 4);
            let f = evaluate(&p, &x).f;
            let svd = svd_factor(p.c()).unwrap();
            let g = svd.u.transpose() * &f;
            let quad: f64 = g
                .iter()
                .zip(svd.sigma.iter())
                .map(|(gi, si)| (gi / si) * (gi / si))
                .sum();
            assert!((quad - 1.0).abs() <= 1e-10, "ellipsoid residual {}", (quad - 1.0).abs());
        }
    }

    #[test]
    fn lift_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let p = random_problem(&mut rng, 10, 4);
        let zero = DVector::zeros(4);
        let f0 = evaluate(&p, &zero).f;
        assert!(lift_to_x(&p, &f0).unwrap().norm() <= 1e-12);
        for _ in 0..20 {
            let x = random_vector(&mut rng, 4);
            let f = evaluate(&p, &x).f;
            let back = lift_to_x(&p, &f).unwrap();
            assert!((&back - &x).norm() <= 1e-12 * (1.0 + x.norm()));
            let f_back = evaluate(&p, &back).f;
            assert!((&f_back - &f).norm() <= TOL_RESIDUAL);
        }
    }

    #[test]
    fn lift_rejects_wrong_hemisphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let p = random_problem(&mut rng, 8, 3);
        let mut y = random_vector(&mut rng, 4);
        y[3] = 0.5;
        let f_point = p.c() * &y;
        match lift_to_x(&p, &f_point) {
            Err(Error::HemisphereViolation { value }) => {
                assert!((value - 0.5).abs() <= 1e-10)
            }
            other => panic!("expected hemisphere violation, got {other:?}"),
        }
    }
}
