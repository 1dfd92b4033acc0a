//! Iterative TLS solvers: plain Gauss-Newton steps on f, and the variant
//! that rescales each step so the new residual is an exact retraction of the
//! linearized one. Both start from the ordinary least squares solution and
//! share the termination logic; tracing is always on.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{ls_solve, qr_factor, qr_rank_one_update, ThinQr};
use crate::problem::ProblemData;
use crate::variational::{evaluate, gauss_newton_decomposition, VariationalPoint};

/// Default iteration cap.
pub const DEFAULT_MAXIT: usize = 200;

/// Default gradient tolerance, relative to the spectral norm of C so the
/// test is invariant under C -> cC.
pub const DEFAULT_EPSILON_REL: f64 = 1e-10;

/// Halvings attempted after alpha = 1 when the step rescaling degenerates.
const FALLBACK_HALVINGS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    /// x_{k+1} = x_k + h_k.
    Basic,
    /// x_{k+1} = x_k + alpha_k h_k with alpha_k = 1/(1 - mu^2 x'h).
    Optimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubproblemMode {
    /// Factor J_k from scratch every iteration.
    FreshQr,
    /// Reuse the QR of A and apply a rank-one update per iteration; the
    /// scalar mu_k stays outside the factorization.
    RankOneUpdate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxitReached,
    /// The eta guard saw the backward error increase, or the fallback
    /// ladder could not find a decreasing step.
    StagnatedRounding,
    /// Reserved: the step rescaling degenerated and no fallback was
    /// attempted. The driver always runs the fallback ladder, which reports
    /// StagnatedRounding instead, so this is never produced by `solve`.
    StepDegenerate,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, out: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        out.write_str(match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxitReached => "maxit_reached",
            SolveStatus::StagnatedRounding => "stagnated_rounding",
            SolveStatus::StepDegenerate => "step_degenerate",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub step_mode: StepMode,
    pub subproblem_mode: SubproblemMode,
    /// Gradient tolerance on ||J'f||; None means DEFAULT_EPSILON_REL times
    /// an estimate of sigma_1(C), resolved per problem.
    pub epsilon: Option<f64>,
    pub maxit: usize,
    /// Stop as soon as eta strictly increases; None means on in optimal
    /// mode (where non-increase is guaranteed) and off in basic mode.
    pub eta_guard: Option<bool>,
}

impl SolverConfig {
    pub fn optimal() -> Self {
        SolverConfig {
            step_mode: StepMode::Optimal,
            subproblem_mode: SubproblemMode::FreshQr,
            epsilon: None,
            maxit: DEFAULT_MAXIT,
            eta_guard: None,
        }
    }

    pub fn basic() -> Self {
        SolverConfig { step_mode: StepMode::Basic, ..Self::optimal() }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::optimal()
    }
}

/// One completed step: the state at iterate k plus the transition to k+1.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub k: usize,
    pub eta: f64,
    pub grad_norm: f64,
    pub alpha: f64,
    /// ||h_k||, the unscaled step.
    pub step_norm: f64,
    /// | f_k'(CC')^+ f_k - 1 |, NaN when C is numerically rank deficient.
    pub ellipsoid_residual: f64,
    /// |f_{k+1}' J_k h_k| / (||f_{k+1}|| ||J_k h_k||), 0 when degenerate.
    pub orthogonality_residual: f64,
    /// tau of the executed step alpha_k h_k.
    pub tau: f64,
    pub fallback: bool,
}

/// Full solve history: per-step rows plus the iterate/residual sequences
/// the cross-checking oracles consume.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub step_mode: StepMode,
    pub rows: Vec<TraceRow>,
    pub x_history: Vec<DVector<f64>>,
    pub f_history: Vec<DVector<f64>>,
    pub eta_history: Vec<f64>,
    pub grad_history: Vec<f64>,
}

impl IterationTrace {
    fn new(step_mode: StepMode, start: &VariationalPoint) -> Self {
        let mut trace = IterationTrace {
            step_mode,
            rows: Vec::new(),
            x_history: Vec::new(),
            f_history: Vec::new(),
            eta_history: Vec::new(),
            grad_history: Vec::new(),
        };
        trace.push_point(start);
        trace
    }

    fn push_point(&mut self, point: &VariationalPoint) {
        self.x_history.push(point.x.clone());
        self.f_history.push(point.f.clone());
        self.eta_history.push(point.eta);
        self.grad_history.push(point.grad_norm);
    }

    fn pop_point(&mut self) {
        self.x_history.pop();
        self.f_history.pop();
        self.eta_history.pop();
        self.grad_history.pop();
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x_hat: DVector<f64>,
    pub eta_final: f64,
    pub grad_norm_final: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub trace: IterationTrace,
}

/// Factorizations shared across iterations: the QR of A seeds both the
/// start point and the rank-one update path.
pub struct SubproblemCache {
    qr_a: ThinQr,
}

impl SubproblemCache {
    pub fn new(problem: &ProblemData) -> Result<Self> {
        let qr_a = qr_factor(problem.a())?;
        if !qr_a.is_full_rank() {
            return Err(Error::RankDeficient { what: "data matrix" });
        }
        Ok(SubproblemCache { qr_a })
    }

    pub fn qr_a(&self) -> &ThinQr {
        &self.qr_a
    }
}

/// Gauss-Newton step h = argmin ||J h + f|| at the given point.
///
/// The two modes are independent routes to the same minimizer and are
/// cross-checked in tests: fresh_qr factors J directly, rank_one_update
/// rewrites J = mu (A + uv') with u = -mu f, v = x and updates the cached
/// factorization of A (mu cancels from the minimizer).
pub fn subproblem_solve(
    point: &VariationalPoint,
    mode: SubproblemMode,
    cache: &SubproblemCache,
) -> Result<DVector<f64>> {
    match mode {
        SubproblemMode::FreshQr => {
            let qr = qr_factor(&point.jac)?;
            ls_solve(&qr, &(-&point.f))
        }
        SubproblemMode::RankOneUpdate => {
            let u = &point.f * -point.mu;
            let updated = qr_rank_one_update(cache.qr_a(), &u, &point.x)?;
            ls_solve(&updated, &(&point.f * -point.mu.recip()))
        }
    }
}

/// Checks the stored history against the stopping rules, in precedence
/// order: eta stagnation (guard on), gradient convergence, iteration cap.
/// The history may end with a provisional candidate not yet accepted.
pub fn termination_check(
    trace: &IterationTrace,
    epsilon: f64,
    eta_guard: bool,
    maxit: usize,
) -> Option<SolveStatus> {
    let etas = &trace.eta_history;
    assert!(!etas.is_empty(), "termination check needs a start point");
    let k = etas.len() - 1;
    // strict increase only: an exact plateau at the rounding floor of eta is
    // harmless and x keeps improving through it
    if eta_guard && k >= 1 && etas[k] > etas[k - 1] {
        return Some(SolveStatus::StagnatedRounding);
    }
    if *trace.grad_history.last().unwrap() < epsilon {
        return Some(SolveStatus::Converged);
    }
    if k >= maxit {
        return Some(SolveStatus::MaxitReached);
    }
    None
}

/// Power-iteration estimate of the largest singular value, used only to
/// scale the default gradient tolerance.
pub fn spectral_norm_estimate(m: &DMatrix<f64>) -> f64 {
    let n = m.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(n, (n as f64).sqrt().recip());
    let mut lambda: f64 = 0.0;
    for _ in 0..80 {
        let w = m.transpose() * (m * &v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = w / norm;
    }
    lambda.sqrt()
}

/// Runs the configured iteration from the least squares start point.
///
/// Errors only on structural problems (rank-deficient A, singular
/// subproblem factors); everything the iteration itself can run into is
/// reported through `SolveResult::status`.
pub fn solve(problem: &ProblemData, config: &SolverConfig) -> Result<SolveResult> {
    let cache = SubproblemCache::new(problem)?;
    let qr_c = qr_factor(problem.c())?;
    let x0 = ls_solve(cache.qr_a(), problem.b())?;
    let epsilon = config
        .epsilon
        .unwrap_or_else(|| DEFAULT_EPSILON_REL * spectral_norm_estimate(problem.c()));
    let eta_guard = config.eta_guard.unwrap_or(config.step_mode == StepMode::Optimal);

    let mut point = evaluate(problem, &x0);
    let mut trace = IterationTrace::new(config.step_mode, &point);
    loop {
        if let Some(status) = termination_check(&trace, epsilon, eta_guard, config.maxit) {
            return Ok(finish(point, trace, status));
        }
        let h = subproblem_solve(&point, config.subproblem_mode, &cache)?;
        let step_norm = h.norm();
        let jh = &point.jac * &h;

        let (alpha, fallback, next) = match config.step_mode {
            StepMode::Basic => (1.0, false, evaluate(problem, &(&point.x + &h))),
            StepMode::Optimal => match gauss_newton_decomposition(&point, &h) {
                Ok(step) => {
                    let next = evaluate(problem, &(&point.x + &h * step.alpha));
                    (step.alpha, false, next)
                }
                Err(Error::StepDegenerate { .. }) => {
                    match fallback_ladder(problem, &point, &h) {
                        Some((alpha, next)) => (alpha, true, next),
                        None => return Ok(finish(point, trace, SolveStatus::StagnatedRounding)),
                    }
                }
                Err(other) => return Err(other),
            },
        };

        // guard runs against the candidate before it is recorded, so an
        // eta-increasing step is discarded rather than traced
        trace.push_point(&next);
        if eta_guard
            && termination_check(&trace, epsilon, eta_guard, config.maxit)
                == Some(SolveStatus::StagnatedRounding)
        {
            trace.pop_point();
            return Ok(finish(point, trace, SolveStatus::StagnatedRounding));
        }

        let executed = &h * alpha;
        let s = point.mu * point.mu * point.x.dot(&executed);
        let tau = (next.mu / point.mu) * (1.0 + s);
        let denom = next.f.norm() * jh.norm();
        let orthogonality_residual =
            if denom > f64::MIN_POSITIVE { next.f.dot(&jh).abs() / denom } else { 0.0 };
        trace.rows.push(TraceRow {
            k: trace.rows.len(),
            eta: point.eta,
            grad_norm: point.grad_norm,
            alpha,
            step_norm,
            ellipsoid_residual: ellipsoid_residual(&qr_c, &point.f),
            orthogonality_residual,
            tau,
            fallback,
        });
        point = next;
    }
}

fn finish(point: VariationalPoint, trace: IterationTrace, status: SolveStatus) -> SolveResult {
    SolveResult {
        x_hat: point.x,
        eta_final: point.eta,
        grad_norm_final: point.grad_norm,
        status,
        iterations: trace.rows.len(),
        trace,
    }
}

/// |f'(CC')^+ f - 1| through the factorization of C; for f = f(x) the
/// pseudoinverse quadratic form reduces to ||C^+ f||^2.
fn ellipsoid_residual(qr_c: &ThinQr, f: &DVector<f64>) -> f64 {
    match ls_solve(qr_c, f) {
        Ok(y) => (y.norm_squared() - 1.0).abs(),
        Err(_) => f64::NAN,
    }
}

/// Degenerate-alpha recovery: try the unscaled step, then halve it up to
/// FALLBACK_HALVINGS times, accepting the first eta decrease.
fn fallback_ladder(
    problem: &ProblemData,
    point: &VariationalPoint,
    h: &DVector<f64>,
) -> Option<(f64, VariationalPoint)> {
    let mut alpha = 1.0;
    for _ in 0..=FALLBACK_HALVINGS {
        let candidate = evaluate(problem, &(&point.x + h * alpha));
        if candidate.eta < point.eta {
            return Some((alpha, candidate));
        }
        alpha *= 0.5;
    }
    None
}
