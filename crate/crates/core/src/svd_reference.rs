//! Closed-form TLS solution through the SVD of the augmented matrix.
//!
//! The smallest singular pair of C = (A|b) both classifies the problem and
//! solves it: with v the trailing right singular vector split as (v_hat, gamma),
//! a unique solution exists iff gamma != 0 and sigma_n > sigma_{n+1}, and then
//! x = -v_hat/gamma with backward error sigma_{n+1}. The iterative solvers use
//! this module as their oracle; the CLI exposes it as the `svd` method.

use std::fmt;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{qr_factor, svd_factor, SvdFactors};
use crate::problem::ProblemData;

/// |gamma| at or below this (times ||v||, which is 1) counts as zero.
pub const TOL_GAMMA: f64 = 1e-12;

/// Gap below this fraction of sigma_1 counts as a tie.
pub const TOL_GAP: f64 = 1e-12;

/// Spectral data of C needed by the solvers and their cross-checks.
#[derive(Debug, Clone)]
pub struct SvdBundle {
    /// Factors of C. When A is square this is the wide thin factorization
    /// with n values; the trailing null direction is then reconstructed
    /// separately into `v_last` and `sigma_np1` is exactly zero.
    pub svd: SvdFactors,
    pub sigma_n: f64,
    pub sigma_np1: f64,
    /// Trailing right singular vector of C, oriented so `gamma < 0`
    /// (when nonzero).
    pub v_last: DVector<f64>,
    /// Leading n components of `v_last`.
    pub v_hat: DVector<f64>,
    /// Trailing component of `v_last`.
    pub gamma: f64,
    /// Smallest singular value of A alone; exceeds sigma_np1 exactly when
    /// the problem is well posed.
    pub sigma_prime_n: f64,
}

impl SvdBundle {
    pub fn sigma_1(&self) -> f64 {
        self.svd.sigma[0]
    }

    /// Left singular vector paired with sigma_np1, if the factorization
    /// carries it (it does not for square A, where sigma_np1 = 0).
    pub fn u_last(&self) -> Option<DVector<f64>> {
        let k = self.svd.sigma.len();
        (k == self.v_last.len()).then(|| self.svd.u.column(k - 1).clone_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// gamma != 0 and sigma_n > sigma_{n+1}: exactly one solution.
    Unique,
    /// gamma = 0: no solution exists.
    NonGeneric,
    /// sigma_n = sigma_{n+1}: minimizer not unique; reported before the
    /// gamma test since the trailing singular vector itself is ambiguous.
    DegenerateGap,
}

impl fmt::Display for Verdict {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        out.write_str(match self {
            Verdict::Unique => "unique",
            Verdict::NonGeneric => "non_generic",
            Verdict::DegenerateGap => "degenerate_gap",
        })
    }
}

/// Existence/uniqueness classification with the margins it was based on.
#[derive(Debug, Clone)]
pub struct WellPosedness {
    pub gamma_nonzero: bool,
    /// |gamma|, the margin behind `gamma_nonzero`.
    pub gamma_margin: f64,
    /// sigma_n - sigma_{n+1}.
    pub gap: f64,
    pub verdict: Verdict,
}

impl fmt::Display for WellPosedness {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            out,
            "verdict={} |gamma|={:.3e} gap={:.3e}",
            self.verdict, self.gamma_margin, self.gap
        )
    }
}

/// Computes the spectral bundle of C and classifies well-posedness.
///
/// Tie detection runs before the gamma test: when sigma_n and sigma_{n+1}
/// coincide the trailing singular vector is arbitrary within a subspace, so
/// its last component carries no information.
pub fn analyze(problem: &ProblemData) -> Result<(SvdBundle, WellPosedness)> {
    let (m, n) = (problem.m(), problem.n());
    let svd = svd_factor(problem.c())?;
    let (sigma_n, sigma_np1, mut v_last) = if m >= n + 1 {
        (svd.sigma[n - 1], svd.sigma[n], svd.v.column(n).clone_owned())
    } else {
        // A square: C is n x (n+1), so sigma_{n+1} = 0 and the trailing
        // right singular vector spans the null space of C. Take it from the
        // orthogonal complement of the rows, i.e. the last column of the
        // full Q of C'.
        let qr_ct = qr_factor(&problem.c().transpose())?;
        (svd.sigma[n - 1], 0.0, qr_ct.q().column(n).clone_owned())
    };
    if v_last[n] > 0.0 {
        v_last.neg_mut();
    }
    let gamma = v_last[n];
    let v_hat = v_last.rows(0, n).clone_owned();
    let sigma_prime_n = svd_factor(problem.a())?.sigma[n - 1];

    let sigma_1 = svd.sigma[0];
    let gap = sigma_n - sigma_np1;
    let gamma_margin = gamma.abs();
    let verdict = if gap <= TOL_GAP * sigma_1 {
        Verdict::DegenerateGap
    } else if gamma_margin <= TOL_GAMMA * v_last.norm() {
        Verdict::NonGeneric
    } else {
        Verdict::Unique
    };
    let posedness = WellPosedness {
        gamma_nonzero: gamma_margin > TOL_GAMMA * v_last.norm(),
        gamma_margin,
        gap,
        verdict,
    };
    let bundle = SvdBundle { svd, sigma_n, sigma_np1, v_last, v_hat, gamma, sigma_prime_n };
    if posedness.verdict == Verdict::Unique {
        // equivalent uniqueness characterization through A's spectrum
        debug_assert!(
            bundle.sigma_prime_n > bundle.sigma_np1 - 1e-13 * sigma_1,
            "well-posed problem must have sigma'_n ({:.17e}) above sigma_np1 ({:.17e})",
            bundle.sigma_prime_n,
            bundle.sigma_np1,
        );
    }
    Ok((bundle, posedness))
}

/// Solves the TLS problem through the SVD of C.
///
/// Returns (x, eta(x)) where eta(x) = sigma_{n+1}. Errors with
/// `NotWellPosed` carrying the classification when no unique solution exists.
pub fn solve_tls_svd(problem: &ProblemData) -> Result<(DVector<f64>, f64)> {
    let (bundle, posedness) = analyze(problem)?;
    if posedness.verdict != Verdict::Unique {
        return Err(Error::NotWellPosed(posedness));
    }
    let x = &bundle.v_hat * (-bundle.gamma).recip();
    Ok((x, bundle.sigma_np1))
}
