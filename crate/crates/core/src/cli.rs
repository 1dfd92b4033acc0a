//! Command-line front end: one flat flag set, no subcommands.
//!
//! Input is either a pair of files (`--a`, `--b`) or a generated instance
//! (`--gen "m=100,n=10,gap=4"`). Results go to stdout as `key value` lines;
//! diagnostics go to stderr. Exit codes: 0 converged, 2 problem not well
//! posed, 3 iteration limit, 4 I/O or parse error, 5 stagnated at the
//! rounding floor. `TLSGN_LOG` (quiet|info|trace) controls stderr
//! verbosity; error diagnostics are printed regardless.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use nalgebra::DVector;

use crate::error::Error;
use crate::io;
use crate::linalg::{ls_solve, qr_factor};
use crate::power;
use crate::probgen::SpectrumSpec;
use crate::problem::ProblemData;
use crate::solver::{
    solve, spectral_norm_estimate, SolveStatus, SolverConfig, StepMode, SubproblemMode, TraceRow,
    DEFAULT_EPSILON_REL, DEFAULT_MAXIT,
};
use crate::svd_reference::solve_tls_svd;
use crate::variational::{evaluate, lift_coefficients};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_WELL_POSED: i32 = 2;
pub const EXIT_MAXIT: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_STAGNATED: i32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Gauss-Newton with unit steps.
    GnBasic,
    /// Gauss-Newton with the optimal step rescaling.
    GnOptimal,
    /// Direct solution from the trailing singular pair.
    Svd,
    /// Normalized inverse power iteration.
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subproblem {
    /// Factor the Jacobian from scratch every iteration.
    FreshQr,
    /// Update the cached factorization of A by a rank-one correction.
    RankOneUpdate,
}

/// Everything one invocation needs. Field defaults mirror the library
/// defaults; every one can be overridden.
#[derive(Debug, Parser)]
#[command(
    name = "tlsgn",
    about = "Total least squares: min ||(E|f)||_F s.t. (A+E)x = b+f",
    after_help = "Input is --a/--b (files, .mtx or .csv) or --gen \"m=..,n=..,gap=..[,seed=..]\"."
)]
pub struct RunSpec {
    /// Coefficient matrix file (.mtx or .csv)
    #[arg(long, requires = "b", conflicts_with = "gen")]
    pub a: Option<PathBuf>,

    /// Right-hand side vector file (.mtx or .csv)
    #[arg(long, requires = "a", conflicts_with = "gen")]
    pub b: Option<PathBuf>,

    /// Generated instance: "m=100,n=10,gap=4" with optional seed=N
    #[arg(long)]
    pub gen: Option<String>,

    #[arg(long, value_enum, default_value_t = Method::GnOptimal)]
    pub method: Method,

    #[arg(long, value_enum, default_value_t = Subproblem::FreshQr)]
    pub subproblem: Subproblem,

    /// Gradient tolerance; default is 1e-10 times an estimate of sigma_1
    #[arg(long)]
    pub epsilon: Option<f64>,

    #[arg(long, default_value_t = DEFAULT_MAXIT)]
    pub maxit: usize,

    /// Stop when the backward error strictly increases (default: on for
    /// gn-optimal, off for gn-basic)
    #[arg(long)]
    pub eta_guard: Option<bool>,

    /// Write the per-iteration trace as CSV
    #[arg(long)]
    pub trace: Option<PathBuf>,

    /// Write the solution vector to a file (.mtx or .csv)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum LogLevel {
    Quiet,
    Info,
    Trace,
}

fn log_level() -> LogLevel {
    match std::env::var("TLSGN_LOG").as_deref() {
        Ok("quiet") => LogLevel::Quiet,
        Ok("trace") => LogLevel::Trace,
        _ => LogLevel::Info,
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::NotWellPosed(_)
        | Error::RankDeficient { .. }
        | Error::SingularFactor { .. }
        | Error::SvdNonConvergence { .. }
        | Error::ResampleCapExceeded { .. } => EXIT_NOT_WELL_POSED,
        _ => EXIT_IO,
    }
}

/// Executes one run and returns the process exit code.
pub fn run(spec: &RunSpec) -> i32 {
    let level = log_level();
    let problem = match load_problem(spec) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("tlsgn: {e}");
            return exit_code_for(&e);
        }
    };
    if level >= LogLevel::Info {
        let method = spec.method.to_possible_value().map(|v| v.get_name().to_owned());
        eprintln!(
            "tlsgn: m={} n={} method={}",
            problem.m(),
            problem.n(),
            method.as_deref().unwrap_or("?")
        );
    }
    let outcome = match spec.method {
        Method::Svd => run_svd(&problem),
        Method::GnBasic | Method::GnOptimal => run_gauss_newton(spec, &problem, level),
        Method::Power => run_power(spec, &problem, level),
    };
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            eprintln!("tlsgn: {e}");
            return exit_code_for(&e);
        }
    };

    println!("status {}", outcome.status);
    println!("iterations {}", outcome.iterations);
    println!("eta {:.16e}", outcome.eta);
    let xs: Vec<String> = outcome.x.iter().map(|v| format!("{v:.16e}")).collect();
    println!("x {}", xs.join(" "));

    if let Some(path) = &spec.out {
        if let Err(e) = io::write_vector(path, &outcome.x) {
            eprintln!("tlsgn: {e}");
            return EXIT_IO;
        }
    }
    if let Some(path) = &spec.trace {
        if let Err(e) = write_trace(path, &outcome.trace_rows) {
            eprintln!("tlsgn: {e}");
            return EXIT_IO;
        }
    }
    if level >= LogLevel::Info {
        eprintln!(
            "tlsgn: status={} iterations={} eta={:.6e}",
            outcome.status, outcome.iterations, outcome.eta
        );
    }
    match outcome.status {
        SolveStatus::Converged => EXIT_OK,
        SolveStatus::MaxitReached => EXIT_MAXIT,
        SolveStatus::StagnatedRounding | SolveStatus::StepDegenerate => EXIT_STAGNATED,
    }
}

struct Outcome {
    status: SolveStatus,
    iterations: usize,
    eta: f64,
    x: DVector<f64>,
    trace_rows: Vec<TraceRow>,
}

fn load_problem(spec: &RunSpec) -> crate::error::Result<ProblemData> {
    match (&spec.a, &spec.b, &spec.gen) {
        (Some(a_path), Some(b_path), None) => {
            let a = io::read_matrix(a_path)?;
            let b = io::read_vector(b_path)?;
            ProblemData::new(a, b)
        }
        (None, None, Some(gen)) => crate::probgen::generate(&parse_gen(gen)?),
        _ => Err(Error::Parse {
            path: "arguments".into(),
            message: "give either --a and --b, or --gen".into(),
        }),
    }
}

/// Parses "m=100,n=10,gap=4,seed=7" (seed optional).
fn parse_gen(text: &str) -> crate::error::Result<SpectrumSpec> {
    let bad = |message: String| Error::Parse { path: "--gen".into(), message };
    let (mut m, mut n, mut gap, mut seed) = (None, None, None, 0u64);
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, got '{part}'")))?;
        match key.trim() {
            "m" => m = Some(value.trim().parse::<usize>().map_err(|e| bad(format!("m: {e}")))?),
            "n" => n = Some(value.trim().parse::<usize>().map_err(|e| bad(format!("n: {e}")))?),
            "gap" => {
                gap = Some(value.trim().parse::<f64>().map_err(|e| bad(format!("gap: {e}")))?)
            }
            "seed" => seed = value.trim().parse::<u64>().map_err(|e| bad(format!("seed: {e}")))?,
            other => return Err(bad(format!("unknown key '{other}'"))),
        }
    }
    let m = m.ok_or_else(|| bad("missing m".into()))?;
    let n = n.ok_or_else(|| bad("missing n".into()))?;
    let gap = gap.ok_or_else(|| bad("missing gap".into()))?;
    if !(gap > 1.0) {
        return Err(bad(format!("gap must exceed 1, got {gap}")));
    }
    Ok(SpectrumSpec::with_gap(m, n, gap, seed))
}

fn run_svd(problem: &ProblemData) -> crate::error::Result<Outcome> {
    let (x, eta) = solve_tls_svd(problem)?;
    Ok(Outcome {
        status: SolveStatus::Converged,
        iterations: 0,
        eta,
        x,
        trace_rows: Vec::new(),
    })
}

fn run_gauss_newton(
    spec: &RunSpec,
    problem: &ProblemData,
    level: LogLevel,
) -> crate::error::Result<Outcome> {
    let config = SolverConfig {
        step_mode: if spec.method == Method::GnBasic { StepMode::Basic } else { StepMode::Optimal },
        subproblem_mode: match spec.subproblem {
            Subproblem::FreshQr => SubproblemMode::FreshQr,
            Subproblem::RankOneUpdate => SubproblemMode::RankOneUpdate,
        },
        epsilon: spec.epsilon,
        maxit: spec.maxit,
        eta_guard: spec.eta_guard,
    };
    let result = solve(problem, &config)?;
    if level >= LogLevel::Trace {
        for row in &result.trace.rows {
            eprintln!(
                "tlsgn: k={} eta={:.6e} grad={:.6e} alpha={:.3e} fallback={}",
                row.k, row.eta, row.grad_norm, row.alpha, row.fallback as u8
            );
        }
    }
    Ok(Outcome {
        status: result.status,
        iterations: result.iterations,
        eta: result.eta_final,
        x: result.x_hat,
        trace_rows: result.trace.rows,
    })
}

/// Inverse power iteration driven to the same gradient tolerance as the
/// Gauss-Newton methods, from the same start point.
fn run_power(
    spec: &RunSpec,
    problem: &ProblemData,
    level: LogLevel,
) -> crate::error::Result<Outcome> {
    let epsilon = spec
        .epsilon
        .unwrap_or_else(|| DEFAULT_EPSILON_REL * spectral_norm_estimate(problem.c()));
    let qr_c = qr_factor(problem.c())?;
    let qr_a = qr_factor(problem.a())?;
    let x0 = ls_solve(&qr_a, problem.b())?;
    let mut state = power::initial_state_from_x(problem, &x0)?;
    let mut rows = Vec::new();
    let mut best: Option<(DVector<f64>, f64, f64)> = None; // (x, eta, grad)

    for k in 0..=spec.maxit {
        // lift s to a point estimate when it points into the right
        // hemisphere; near the equator we keep iterating instead
        let mut s = state.s.clone();
        if s[problem.n()] > 0.0 {
            s.neg_mut();
        }
        let lifted = lift_coefficients(&s).ok().map(|x| {
            let point = evaluate(problem, &x);
            (x, point.eta, point.grad_norm)
        });
        if let Some((x, eta, grad)) = &lifted {
            best = Some((x.clone(), *eta, *grad));
            rows.push(TraceRow {
                k,
                eta: *eta,
                grad_norm: *grad,
                alpha: f64::NAN,
                step_norm: f64::NAN,
                ellipsoid_residual: (state.s.norm_squared() - 1.0).abs(),
                orthogonality_residual: f64::NAN,
                tau: f64::NAN,
                fallback: false,
            });
            if level >= LogLevel::Trace {
                eprintln!("tlsgn: k={k} eta={eta:.6e} grad={grad:.6e}");
            }
            if *grad < epsilon {
                return Ok(Outcome {
                    status: SolveStatus::Converged,
                    iterations: k,
                    eta: *eta,
                    x: x.clone(),
                    trace_rows: rows,
                });
            }
        }
        if k < spec.maxit {
            state = power::power_step_prefactored(problem, &qr_c, &state.s)?;
        }
    }
    let (x, eta, grad) = best.ok_or(Error::HemisphereViolation { value: state.s[problem.n()] })?;
    let _ = grad;
    Ok(Outcome {
        status: SolveStatus::MaxitReached,
        iterations: spec.maxit,
        eta,
        x,
        trace_rows: rows,
    })
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> crate::error::Result<()> {
    let mut text = String::from(
        "k,eta,grad_norm,alpha,step_norm,ellipsoid_residual,orthogonality_residual,tau,fallback\n",
    );
    for r in rows {
        text.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            r.k,
            r.eta,
            r.grad_norm,
            r.alpha,
            r.step_norm,
            r.ellipsoid_residual,
            r.orthogonality_residual,
            r.tau,
            r.fallback as u8
        ));
    }
    std::fs::write(path, text)
        .map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}
