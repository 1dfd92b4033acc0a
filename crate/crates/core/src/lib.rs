pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod power;
pub mod probgen;
pub mod problem;
pub mod solver;
pub mod svd_reference;
pub mod variational;

pub use error::{Error, Result};
pub use linalg::{qr_factor, svd_factor, SvdFactors, ThinQr};
pub use power::{
    check_equivalence, ellipsoid_step_explicit, fit_geometric_rate, initial_state,
    initial_state_from_x, measure_rates, power_step, run as power_run, EllipsoidStep,
    PowerState, RateReport,
};
pub use probgen::{generate, SpectrumSpec};
pub use problem::ProblemData;
pub use solver::{
    solve, subproblem_solve, termination_check, IterationTrace, SolveResult, SolveStatus,
    SolverConfig, StepMode, SubproblemCache, SubproblemMode, TraceRow,
};
pub use svd_reference::{analyze, solve_tls_svd, SvdBundle, Verdict, WellPosedness};
pub use variational::{
    backward_certificate, evaluate, gauss_newton_decomposition, lift_to_x,
    BackwardPerturbation, StepComputation, VariationalPoint,
};
