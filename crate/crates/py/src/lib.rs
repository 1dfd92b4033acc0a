//! Python bindings: plain lists in, plain types out. Matrices are lists of
//! rows. Numerical failures surface as ValueError with the library's
//! diagnostic text.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use nalgebra::{DMatrix, DVector};
use tlsgn::solver::{SolverConfig, StepMode, SubproblemMode};
use tlsgn::{ProblemData, SpectrumSpec};

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(PyValueError::new_err("matrix must be nonempty"));
    }
    let (m, n) = (rows.len(), rows[0].len());
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix rows must have equal length"));
    }
    Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn problem(a: Vec<Vec<f64>>, b: Vec<f64>) -> PyResult<ProblemData> {
    ProblemData::new(to_matrix(a)?, DVector::from_vec(b)).map_err(value_err)
}

fn value_err(e: tlsgn::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Outcome of a solver run.
#[pyclass]
#[derive(Clone)]
struct Solution {
    #[pyo3(get)]
    x: Vec<f64>,
    #[pyo3(get)]
    eta: f64,
    #[pyo3(get)]
    grad_norm: f64,
    #[pyo3(get)]
    status: String,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    eta_history: Vec<f64>,
}

#[pymethods]
impl Solution {
    fn __repr__(&self) -> String {
        format!(
            "Solution(status='{}', iterations={}, eta={:.6e})",
            self.status, self.iterations, self.eta
        )
    }
}

/// Gauss-Newton iteration on the backward error; `optimal` switches the
/// step rescaling on (the default) or off.
#[pyfunction]
#[pyo3(signature = (a, b, *, optimal = true, epsilon = None, maxit = 200, subproblem = "fresh-qr", eta_guard = None))]
#[allow(clippy::too_many_arguments)]
fn solve_gauss_newton(
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    optimal: bool,
    epsilon: Option<f64>,
    maxit: usize,
    subproblem: &str,
    eta_guard: Option<bool>,
) -> PyResult<Solution> {
    let p = problem(a, b)?;
    let config = SolverConfig {
        step_mode: if optimal { StepMode::Optimal } else { StepMode::Basic },
        subproblem_mode: match subproblem {
            "fresh-qr" => SubproblemMode::FreshQr,
            "rank-one-update" => SubproblemMode::RankOneUpdate,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown subproblem '{other}', expected 'fresh-qr' or 'rank-one-update'"
                )))
            }
        },
        epsilon,
        maxit,
        eta_guard,
    };
    let r = tlsgn::solve(&p, &config).map_err(value_err)?;
    Ok(Solution {
        x: r.x_hat.iter().copied().collect(),
        eta: r.eta_final,
        grad_norm: r.grad_norm_final,
        status: r.status.to_string(),
        iterations: r.iterations,
        eta_history: r.trace.eta_history.clone(),
    })
}

/// Direct solution from the trailing singular pair of (A|b).
#[pyfunction]
fn solve_svd(a: Vec<Vec<f64>>, b: Vec<f64>) -> PyResult<Solution> {
    let p = problem(a, b)?;
    let (x, eta) = tlsgn::solve_tls_svd(&p).map_err(value_err)?;
    let grad_norm = tlsgn::evaluate(&p, &x).grad_norm;
    Ok(Solution {
        x: x.iter().copied().collect(),
        eta,
        grad_norm,
        status: "converged".into(),
        iterations: 0,
        eta_history: vec![eta],
    })
}

/// eta(x) = ||Ax - b|| / sqrt(1 + x'x), the backward error of x.
#[pyfunction]
fn backward_error(a: Vec<Vec<f64>>, b: Vec<f64>, x: Vec<f64>) -> PyResult<f64> {
    let p = problem(a, b)?;
    if x.len() != p.n() {
        return Err(PyValueError::new_err("x has the wrong length"));
    }
    Ok(tlsgn::evaluate(&p, &DVector::from_vec(x)).eta)
}

/// The minimal perturbation (E, f) making x an exact solution:
/// returns (E rows, f, Frobenius norm).
#[pyfunction]
fn certificate(
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    x: Vec<f64>,
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>, f64)> {
    let p = problem(a, b)?;
    if x.len() != p.n() {
        return Err(PyValueError::new_err("x has the wrong length"));
    }
    let cert = tlsgn::backward_certificate(&p, &DVector::from_vec(x));
    Ok((to_rows(&cert.e_bar()), cert.f_bar().iter().copied().collect(), cert.frob_norm()))
}

/// Classification of the problem: (verdict, gamma, spectral gap).
#[pyfunction]
fn analyze(a: Vec<Vec<f64>>, b: Vec<f64>) -> PyResult<(String, f64, f64)> {
    let p = problem(a, b)?;
    let (bundle, wp) = tlsgn::analyze(&p).map_err(value_err)?;
    Ok((wp.verdict.to_string(), bundle.gamma, bundle.sigma_n - bundle.sigma_np1))
}

/// Random instance with prescribed singular values of (A|b);
/// returns (A rows, b).
#[pyfunction]
#[pyo3(signature = (m, n, sigmas, seed = 0, ensure_generic = true))]
fn generate(
    m: usize,
    n: usize,
    sigmas: Vec<f64>,
    seed: u64,
    ensure_generic: bool,
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let spec = SpectrumSpec { m, n, sigmas, seed, ensure_generic };
    let p = tlsgn::generate(&spec).map_err(value_err)?;
    Ok((to_rows(p.a()), p.b().iter().copied().collect()))
}

#[pymodule]
fn tlsgn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(solve_gauss_newton, m)?)?;
    m.add_function(wrap_pyfunction!(solve_svd, m)?)?;
    m.add_function(wrap_pyfunction!(backward_error, m)?)?;
    m.add_function(wrap_pyfunction!(certificate, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    Ok(())
}
