//! Exact solvers for the LAD and least-squares fused lasso signal
//! approximators.
//!
//! The objective is
//!
//! ```text
//! sum_i loss(y_i, mu_i) + lambda1 * sum_i |mu_i|
//!                       + lambda2 * sum_{i>=2} |mu_i - mu_{i-1}|
//! ```
//!
//! with `loss` either `|y - mu|` or `(y - mu)^2`. Both are solved by a
//! forward-backward dynamic program over one-dimensional convex messages:
//! the forward pass folds each per-point loss into the running message and
//! clips its derivative at `[-lambda2, +lambda2]` (the inf-convolution with
//! the fusion penalty); the backward pass recovers the minimizer from the
//! stored clip intervals. The result is an exact global minimizer up to
//! floating-point rounding.
//!
//! LAD objectives can have interval-valued minimizer sets. Ties are broken
//! deterministically toward zero: the returned coordinate is the point of
//! the optimal interval closest to zero, so an exactly-zero solution is
//! preferred whenever it is optimal.

pub mod piecewise;

use crate::error::{Error, Result};
use crate::model::{
    blocks_of, FitResult, LossKind, Signal, TuningParams, JUMP_TOL_EXACT, ZERO_TOL_DEFAULT,
};
use piecewise::{backward_select, ClipInterval, PiecewiseConvexFn};

/// Default absolute tolerance for collapsing coincident breakpoints.
pub const MERGE_TOL_DEFAULT: f64 = 1e-12;

/// Solver configuration.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub loss_kind: LossKind,
    /// Absolute tolerance for collapsing coincident message breakpoints.
    pub merge_tol: f64,
    /// Optional diagnostic cap on message size; exceeding it is an error.
    pub max_breakpoints: Option<usize>,
}

impl SolverOptions {
    pub fn new(loss_kind: LossKind) -> Self {
        Self {
            loss_kind,
            merge_tol: MERGE_TOL_DEFAULT,
            max_breakpoints: None,
        }
    }
}

/// Minimize the LAD fused lasso objective.
pub fn solve_lad_flsa(y: &Signal, params: &TuningParams) -> Result<FitResult> {
    solve_with_options(y, params, &SolverOptions::new(LossKind::Lad))
}

/// Minimize the least-squares fused lasso objective.
pub fn solve_ls_flsa(y: &Signal, params: &TuningParams) -> Result<FitResult> {
    solve_with_options(y, params, &SolverOptions::new(LossKind::Ls))
}

/// Fusion-only LAD fit (lambda1 = 0).
pub fn solve_lad_fsa(y: &Signal, lambda2: f64) -> Result<FitResult> {
    solve_lad_flsa(y, &TuningParams::new(0.0, lambda2)?)
}

pub fn solve_with_options(
    y: &Signal,
    params: &TuningParams,
    opts: &SolverOptions,
) -> Result<FitResult> {
    let vals = y.values();
    let n = vals.len();
    let lambda1 = params.lambda1();
    let lambda2 = params.lambda2();

    let mut f = PiecewiseConvexFn::constant(0.0, opts.merge_tol);
    add_point_loss(&mut f, vals[0], lambda1, opts.loss_kind);
    let mut clips: Vec<ClipInterval> = Vec::with_capacity(n.saturating_sub(1));
    for &v in &vals[1..] {
        clips.push(f.clip(lambda2));
        add_point_loss(&mut f, v, lambda1, opts.loss_kind);
        if let Some(cap) = opts.max_breakpoints {
            if f.num_breakpoints() > cap {
                return Err(Error::NonConvergence(format!(
                    "message grew past the breakpoint cap ({} > {cap})",
                    f.num_breakpoints()
                )));
            }
        }
    }

    let mut mu = vec![0.0; n];
    mu[n - 1] = f.argmin_zero_pref();
    for i in (0..n - 1).rev() {
        mu[i] = backward_select(&clips[i], mu[i + 1]);
    }
    fit_from_values(y, mu, *params, opts.loss_kind)
}

fn add_point_loss(f: &mut PiecewiseConvexFn, y_i: f64, lambda1: f64, loss: LossKind) {
    match loss {
        LossKind::Lad => f.add_abs(y_i, 1.0),
        LossKind::Ls => f.add_quadratic(1.0, -2.0 * y_i, y_i * y_i),
    }
    if lambda1 > 0.0 {
        f.add_abs(0.0, lambda1);
    }
}

/// Evaluate the fused lasso objective at `mu`.
pub fn objective(y: &Signal, mu: &[f64], params: &TuningParams, loss: LossKind) -> Result<f64> {
    let vals = y.values();
    if vals.len() != mu.len() {
        return Err(Error::LengthMismatch {
            left: vals.len(),
            right: mu.len(),
        });
    }
    let mut acc = 0.0;
    for (v, m) in vals.iter().zip(mu) {
        acc += match loss {
            LossKind::Lad => (v - m).abs(),
            LossKind::Ls => (v - m) * (v - m),
        };
    }
    let lambda1 = params.lambda1();
    if lambda1 > 0.0 {
        acc += lambda1 * mu.iter().map(|m| m.abs()).sum::<f64>();
    }
    let lambda2 = params.lambda2();
    if lambda2 > 0.0 {
        acc += lambda2
            * mu.windows(2)
                .map(|w| (w[1] - w[0]).abs())
                .sum::<f64>();
    }
    Ok(acc)
}

/// Package a fitted vector as a `FitResult`, deriving its exact block
/// partition and re-evaluating the objective.
pub fn fit_from_values(
    y: &Signal,
    mu: Vec<f64>,
    params: TuningParams,
    loss: LossKind,
) -> Result<FitResult> {
    for (index, v) in mu.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "fitted value",
                index,
            });
        }
    }
    let partition = blocks_of(&mu, JUMP_TOL_EXACT, ZERO_TOL_DEFAULT)?;
    let obj = objective(y, &mu, &params, loss)?;
    Ok(FitResult::from_parts(mu, partition, obj, params, loss))
}
