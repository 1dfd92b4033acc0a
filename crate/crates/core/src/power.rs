//! Normalized inverse power iteration on C'C, plus the ellipsoid-geometry
//! formulation that provably collapses to it.
//!
//! The iteration s <- (C'C)^{-1} s / || . || drives C s to the smallest
//! singular pair of C. The geometric route reaches the same next iterate by
//! minimizing the norm over the tangent plane of the residual ellipsoid at
//! C s and retracting; both code paths are kept and cross-checked against
//! each other, and the optimal-step solver sequence is checked against the
//! power sequence started from the same point.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{constrained_ls_solve_prefactored, qr_factor, solve_upper, solve_upper_transpose, ThinQr};
use crate::problem::ProblemData;
use crate::solver::{IterationTrace, StepMode};
use crate::svd_reference::SvdBundle;

/// Deviations inside this band enter geometric-rate fits; outside it the
/// sequence is either pre-asymptotic or at the rounding floor.
pub const RATE_WINDOW: (f64, f64) = (1e-12, 1e-2);

/// One iterate of the power sequence.
#[derive(Debug, Clone)]
pub struct PowerState {
    /// Unit coefficient vector s_k.
    pub s: DVector<f64>,
    /// f_k = C s_k.
    pub f: DVector<f64>,
    /// beta_k = 1 / ||(C'C)^{-1} s_k||, the normalizer of the next step.
    pub beta: f64,
    /// Position in the sequence; single-shot steps report 0 and sequence
    /// drivers renumber.
    pub k: usize,
}

/// Result of one geometric step: the retracted state plus the tangent-plane
/// solution it was retracted from.
#[derive(Debug, Clone)]
pub struct EllipsoidStep {
    pub state: PowerState,
    /// w_k with s_k'w_k = 0 minimizing ||C (s_k + w)||.
    pub tangent_solution: DVector<f64>,
}

/// Fitted convergence-rate summary of a power sequence.
#[derive(Debug, Clone)]
pub struct RateReport {
    /// (sigma_{n+1} / sigma_n)^2, the predicted rate of f-deviations.
    pub rho: f64,
    /// Fitted geometric rate of ||f_k - sigma u||.
    pub fitted_rate_f: f64,
    /// Fitted geometric rate of | ||f_k|| - sigma |, predicted rho^2.
    pub fitted_rate_eta: f64,
}

fn make_state(problem: &ProblemData, qr_c: &ThinQr, s: &DVector<f64>, k: usize) -> Result<PowerState> {
    let w = inverse_gram_apply(qr_c, s)?;
    Ok(PowerState { s: s.clone(), f: problem.c() * s, beta: w.norm().recip(), k })
}

/// (C'C)^{-1} s through two triangular solves on R; C'C is never formed.
fn inverse_gram_apply(qr_c: &ThinQr, s: &DVector<f64>) -> Result<DVector<f64>> {
    solve_upper(qr_c.r(), &solve_upper_transpose(qr_c.r(), s)?)
}

/// State at a given (not necessarily unit) coefficient vector, normalized.
pub fn initial_state(problem: &ProblemData, s0: &DVector<f64>) -> Result<PowerState> {
    if s0.len() != problem.n() + 1 {
        return Err(Error::Dimension("coefficient vector must have length n+1".into()));
    }
    let norm = s0.norm();
    if norm == 0.0 {
        return Err(Error::Dimension("coefficient vector must be nonzero".into()));
    }
    let qr_c = qr_factor(problem.c())?;
    make_state(problem, &qr_c, &(s0 / norm), 0)
}

/// The sequence start matching a solver run from x: s_0 = C^+ f(x), which
/// collapses to the closed form mu(x) (x, -1) and needs no solve.
fn start_vector(n: usize, x: &DVector<f64>) -> DVector<f64> {
    assert_eq!(x.len(), n, "point dimension mismatch");
    let mu = (1.0 + x.dot(x)).sqrt().recip();
    let mut s0 = DVector::zeros(n + 1);
    s0.rows_mut(0, n).copy_from(&(x * mu));
    s0[n] = -mu;
    s0
}

/// State at s_0 = C^+ f(x), the power-sequence start matching a solver run
/// from x.
pub fn initial_state_from_x(problem: &ProblemData, x: &DVector<f64>) -> Result<PowerState> {
    let s0 = start_vector(problem.n(), x);
    let qr_c = qr_factor(problem.c())?;
    make_state(problem, &qr_c, &s0, 0)
}

/// One inverse power step from s: returns the state at
/// (C'C)^{-1} s / ||(C'C)^{-1} s||.
pub fn power_step(problem: &ProblemData, s: &DVector<f64>) -> Result<PowerState> {
    let qr_c = qr_factor(problem.c())?;
    power_step_prefactored(problem, &qr_c, s)
}

pub(crate) fn power_step_prefactored(
    problem: &ProblemData,
    qr_c: &ThinQr,
    s: &DVector<f64>,
) -> Result<PowerState> {
    let w = inverse_gram_apply(qr_c, s)?;
    let norm = w.norm();
    if norm == 0.0 {
        return Err(Error::RankDeficient { what: "augmented matrix" });
    }
    make_state(problem, qr_c, &(w / norm), 0)
}

/// One step of the geometric iteration: minimum-norm point of the tangent
/// plane at C s, radially retracted onto the ellipsoid. Must agree with
/// `power_step` to working accuracy; both are kept on purpose.
pub fn ellipsoid_step_explicit(problem: &ProblemData, s: &DVector<f64>) -> Result<EllipsoidStep> {
    let qr_c = qr_factor(problem.c())?;
    let s_unit = s / s.norm();
    let f = problem.c() * &s_unit;
    // min ||f + C w|| subject to s'w = 0, i.e. the tangent-plane point
    let sol = constrained_ls_solve_prefactored(&qr_c, &-f, &s_unit)?;
    let t = &s_unit + &sol.x_bar;
    let t_norm = t.norm();
    if t_norm == 0.0 {
        return Err(Error::RankDeficient { what: "tangent solution" });
    }
    let state = make_state(problem, &qr_c, &(t / t_norm), 0)?;
    Ok(EllipsoidStep { state, tangent_solution: sol.x_bar })
}

/// Runs `steps` power steps from s0, returning all states including the
/// initial one, numbered 0..=steps.
pub fn run(problem: &ProblemData, s0: &DVector<f64>, steps: usize) -> Result<Vec<PowerState>> {
    let qr_c = qr_factor(problem.c())?;
    let norm = s0.norm();
    if norm == 0.0 {
        return Err(Error::Dimension("coefficient vector must be nonzero".into()));
    }
    let mut states = Vec::with_capacity(steps + 1);
    states.push(make_state(problem, &qr_c, &(s0 / norm), 0)?);
    for k in 1..=steps {
        let prev = states.last().unwrap();
        let mut next = power_step_prefactored(problem, &qr_c, &prev.s)?;
        next.k = k;
        states.push(next);
    }
    Ok(states)
}

/// Largest deviation ||f_k(solver) - f_k(power)|| between an optimal-mode
/// solver trace and the power sequence launched from the same start point.
///
/// The two sequences coincide in exact arithmetic; fallback steps break the
/// correspondence and make the trace incompatible.
pub fn check_equivalence(trace: &IterationTrace, problem: &ProblemData) -> Result<f64> {
    if trace.step_mode != StepMode::Optimal {
        return Err(Error::TraceIncompatible {
            reason: "power sequence matches the rescaled-step mode only".into(),
        });
    }
    if trace.rows.iter().any(|row| row.fallback) {
        return Err(Error::TraceIncompatible { reason: "trace contains fallback steps".into() });
    }
    let x0 = trace
        .x_history
        .first()
        .ok_or_else(|| Error::TraceIncompatible { reason: "empty trace".into() })?;
    let s0 = start_vector(problem.n(), x0);
    let steps = trace.f_history.len() - 1;
    if steps == 0 {
        // no power step needed, so this works even when C is rank deficient
        return Ok((&trace.f_history[0] - problem.c() * &s0).norm());
    }
    let states = run(problem, &s0, steps)?;
    let mut worst: f64 = 0.0;
    for (f_solver, state) in trace.f_history.iter().zip(&states) {
        worst = worst.max((f_solver - &state.f).norm());
    }
    Ok(worst)
}

/// Least squares slope of log-deviations over the RATE_WINDOW band.
/// Needs at least two in-band points.
pub fn fit_geometric_rate(deviations: &[f64]) -> Result<f64> {
    let points: Vec<(f64, f64)> = deviations
        .iter()
        .enumerate()
        .filter(|(_, d)| **d >= RATE_WINDOW.0 && **d <= RATE_WINDOW.1)
        .map(|(k, d)| (k as f64, d.ln()))
        .collect();
    if points.len() < 2 {
        return Err(Error::InsufficientData {
            reason: format!(
                "{} deviation(s) inside the fit window, need at least 2",
                points.len()
            ),
        });
    }
    let n = points.len() as f64;
    let mean_k = points.iter().map(|(k, _)| k).sum::<f64>() / n;
    let mean_l = points.iter().map(|(_, l)| l).sum::<f64>() / n;
    let cov: f64 = points.iter().map(|(k, l)| (k - mean_k) * (l - mean_l)).sum();
    let var: f64 = points.iter().map(|(k, _)| (k - mean_k) * (k - mean_k)).sum();
    Ok((cov / var).exp())
}

/// Fits the observed convergence rates of a power sequence against the
/// spectral prediction. The reference direction u is oriented by u'f_0 > 0.
pub fn measure_rates(states: &[PowerState], bundle: &SvdBundle) -> Result<RateReport> {
    if states.len() < 2 {
        return Err(Error::InsufficientData { reason: "need at least two states".into() });
    }
    let sigma = bundle.sigma_np1;
    let gap = bundle.sigma_n - sigma;
    if gap <= 1e-12 * bundle.sigma_1() {
        return Err(Error::InsufficientData {
            reason: "spectral gap too small for a rate prediction".into(),
        });
    }
    let mut u = bundle.u_last().ok_or_else(|| Error::InsufficientData {
        reason: "no left singular direction available".into(),
    })?;
    if u.dot(&states[0].f) < 0.0 {
        u.neg_mut();
    }
    let target = &u * sigma;
    let devs_f: Vec<f64> = states.iter().map(|st| (&st.f - &target).norm()).collect();
    let devs_eta: Vec<f64> = states.iter().map(|st| (st.f.norm() - sigma).abs()).collect();
    Ok(RateReport {
        rho: (sigma / bundle.sigma_n).powi(2),
        fitted_rate_f: fit_geometric_rate(&devs_f)?,
        fitted_rate_eta: fit_geometric_rate(&devs_eta)?,
    })
}
