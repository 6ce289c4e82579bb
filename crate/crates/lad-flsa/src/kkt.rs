//! Subgradient optimality verification for fused lasso fits.
//!
//! A fitted vector is optimal exactly when, block by block, per-index
//! subgradient pulls can be chosen inside their admissible intervals so
//! that every within-block partial sum stays within `lambda2` of the
//! incoming fusion sign and the block total matches the fusion
//! subdifferential (plus, for nonzero blocks, the lasso term). The checker
//! propagates the reachable interval of those partial sums and reports the
//! worst gap, so exact-fit points (where the sign of `y_k - mu_k` is free
//! in [-1, 1]) and zero blocks (where the sign of `mu_k` is free) never
//! cause spurious failures: the residual is the distance to the feasible
//! subgradient set, not a pointwise sign choice.
//!
//! Residuals are scaled by block size before comparison with the
//! tolerance.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{FitResult, LossKind, Signal, TuningParams};

/// Default residual tolerance for certification.
pub const KKT_TOL_DEFAULT: f64 = 1e-6;

/// Outcome of a KKT residual check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KktReport {
    /// Worst violation of the active-set (block total) equalities.
    pub max_equality_residual: f64,
    /// Worst violation of the strict-inequality conditions (interior
    /// partial sums; zero-block totals).
    pub max_inequality_slack_violation: f64,
    pub passed: bool,
    pub tolerance: f64,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Distance from the interval `[lo, hi]` to the interval `[c_lo, c_hi]`.
fn interval_gap(lo: f64, hi: f64, c_lo: f64, c_hi: f64) -> f64 {
    if hi < c_lo {
        c_lo - hi
    } else if lo > c_hi {
        lo - c_hi
    } else {
        0.0
    }
}

fn residual_chain(
    y: &Signal,
    fit: &FitResult,
    params: &TuningParams,
    loss: LossKind,
    tol: f64,
) -> Result<KktReport> {
    let vals = y.values();
    let mu = fit.mu_hat();
    if vals.len() != mu.len() {
        return Err(Error::LengthMismatch {
            left: vals.len(),
            right: mu.len(),
        });
    }
    let part = fit.partition();
    if part.n() != vals.len() {
        return Err(Error::CoverageMismatch {
            partition_n: part.n(),
            expected: vals.len(),
        });
    }
    let lambda1 = params.lambda1();
    let lambda2 = params.lambda2();
    let levels = part.levels();
    let blocks = part.block_count();

    let mut max_eq = 0.0f64;
    let mut max_ineq = 0.0f64;

    for j in 0..blocks {
        let range = part.block_range(j);
        let b = range.len() as f64;
        let level = levels[j];
        let zero_block = level.abs() <= part.zero_tol();
        let t_in = if j == 0 {
            0.0
        } else {
            sign(level - levels[j - 1])
        };
        let t_out = if j == blocks - 1 {
            0.0
        } else {
            sign(levels[j + 1] - level)
        };
        let window_lo = lambda2 * (t_in - 1.0);
        let window_hi = lambda2 * (t_in + 1.0);
        let target = lambda2 * (t_in - t_out);

        // Reachable interval of the partial sums of the per-index pulls
        // s_k - lambda1 * v_k.
        let mut lo = 0.0f64;
        let mut hi = 0.0f64;
        let last = range.end - 1;
        for k in range {
            let r = vals[k] - mu[k];
            let (s_lo, s_hi) = match loss {
                LossKind::Lad => {
                    if r == 0.0 {
                        (-1.0, 1.0)
                    } else {
                        (sign(r), sign(r))
                    }
                }
                LossKind::Ls => (2.0 * r, 2.0 * r),
            };
            let (v_lo, v_hi) = if lambda1 == 0.0 {
                (0.0, 0.0)
            } else if zero_block {
                (-1.0, 1.0)
            } else {
                (sign(level), sign(level))
            };
            lo += s_lo - lambda1 * v_hi;
            hi += s_hi - lambda1 * v_lo;

            if k < last {
                let gap = interval_gap(lo, hi, window_lo, window_hi);
                if gap > 0.0 {
                    max_ineq = max_ineq.max(gap / b);
                }
                lo = lo.clamp(window_lo, window_hi);
                hi = hi.clamp(window_lo, window_hi);
            } else {
                let gap = interval_gap(lo, hi, target, target);
                if lambda1 > 0.0 && zero_block {
                    if gap > 0.0 {
                        max_ineq = max_ineq.max(gap / b);
                    }
                } else if gap > 0.0 {
                    max_eq = max_eq.max(gap / b);
                }
            }
        }
    }

    Ok(KktReport {
        max_equality_residual: max_eq,
        max_inequality_slack_violation: max_ineq,
        passed: max_eq <= tol && max_ineq <= tol,
        tolerance: tol,
    })
}

/// KKT residual of a fusion-only LAD fit (lambda1 = 0).
pub fn kkt_residual_lad_fsa(
    y: &Signal,
    fit: &FitResult,
    lambda2: f64,
    tol: f64,
) -> Result<KktReport> {
    let params = TuningParams::new(0.0, lambda2)?;
    residual_chain(y, fit, &params, LossKind::Lad, tol)
}

/// KKT residual of a LAD fused lasso fit. With lambda1 = 0 this reduces to
/// the fusion-only check.
pub fn kkt_residual_lad_flsa(
    y: &Signal,
    fit: &FitResult,
    params: &TuningParams,
    tol: f64,
) -> Result<KktReport> {
    residual_chain(y, fit, params, LossKind::Lad, tol)
}

/// KKT residual of a least-squares fused lasso fit.
pub fn kkt_residual_ls_flsa(
    y: &Signal,
    fit: &FitResult,
    params: &TuningParams,
    tol: f64,
) -> Result<KktReport> {
    residual_chain(y, fit, params, LossKind::Ls, tol)
}

/// Fitted-block-count bound check: whenever `lambda2 > n * lambda1` the
/// number of blocks of an exact LAD-FLSA solution is at most
/// `n / (lambda2 - n*lambda1) + 1`. For least-squares fits the analogous
/// bound `16n / (lambda2^2 - 2n^2*lambda1^2) + 1` is reported as a
/// non-asserting diagnostic.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Lemma1Report {
    pub applicable: bool,
    pub bound: Option<f64>,
    pub block_count: usize,
    /// Whether the LAD bound holds; `None` when not applicable.
    pub holds: Option<bool>,
    /// Diagnostic-only bound for least-squares fits.
    pub ls_bound: Option<f64>,
    pub ls_within: Option<bool>,
}

pub fn check_lemma1_bounds(fit: &FitResult, params: &TuningParams, n: usize) -> Lemma1Report {
    let nf = n as f64;
    let lambda1 = params.lambda1();
    let lambda2 = params.lambda2();
    let block_count = fit.partition().block_count();

    let (applicable, bound, holds) = if lambda2 > nf * lambda1 {
        let bound = nf / (lambda2 - nf * lambda1) + 1.0;
        (true, Some(bound), Some(block_count as f64 <= bound))
    } else {
        (false, None, None)
    };

    let (ls_bound, ls_within) = if fit.loss_kind() == LossKind::Ls
        && lambda2 * lambda2 > 2.0 * nf * nf * lambda1 * lambda1
    {
        let b = 16.0 * nf / (lambda2 * lambda2 - 2.0 * nf * nf * lambda1 * lambda1) + 1.0;
        (Some(b), Some(block_count as f64 <= b))
    } else {
        (None, None)
    };

    Lemma1Report {
        applicable,
        bound,
        block_count,
        holds,
        ls_bound,
        ls_within,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TuningParams;
    use crate::solver::{fit_from_values, solve_lad_flsa, solve_lad_fsa, solve_ls_flsa};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn sig(v: &[f64]) -> Signal {
        Signal::new(v.to_vec()).unwrap()
    }

    fn tp(l1: f64, l2: f64) -> TuningParams {
        TuningParams::new(l1, l2).unwrap()
    }

    fn random_signal(n: usize, seed: u64) -> Signal {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        Signal::new((0..n).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap()
    }

    #[test]
    fn solver_output_passes_fsa_check() {
        let y = random_signal(50, 7);
        let fit = solve_lad_fsa(&y, 3.0).unwrap();
        let rep = kkt_residual_lad_fsa(&y, &fit, 3.0, KKT_TOL_DEFAULT).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn perturbed_block_fails_fsa_check() {
        let y = random_signal(50, 8);
        let fit = solve_lad_fsa(&y, 3.0).unwrap();
        let mut mu = fit.mu_hat().to_vec();
        let range = fit.partition().block_range(0);
        for v in &mut mu[range] {
            *v += 0.5;
        }
        let bad = fit_from_values(&y, mu, tp(0.0, 3.0), LossKind::Lad).unwrap();
        let rep = kkt_residual_lad_fsa(&y, &bad, 3.0, KKT_TOL_DEFAULT).unwrap();
        assert!(!rep.passed, "{rep:?}");
    }

    #[test]
    fn constant_median_fit_passes_for_huge_lambda2() {
        let y = sig(&[1.0, 2.0, 10.0, 2.0, 1.0]);
        let fit = solve_lad_fsa(&y, 100.0).unwrap();
        assert!(fit.mu_hat().iter().all(|&m| m == 2.0));
        let rep = kkt_residual_lad_fsa(&y, &fit, 100.0, KKT_TOL_DEFAULT).unwrap();
        assert!(rep.passed);
    }

    #[test]
    fn solver_output_passes_flsa_check() {
        let y = random_signal(100, 9);
        let p = tp(0.2, 2.0);
        let fit = solve_lad_flsa(&y, &p).unwrap();
        let rep = kkt_residual_lad_flsa(&y, &fit, &p, KKT_TOL_DEFAULT).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn zero_block_with_unanimous_signs_fails() {
        // A block fitted to zero while every observation in it is strictly
        // positive: the lasso subgradient cannot absorb the pull when
        // lambda1 is small and the block is large.
        let y = sig(&[2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0]);
        let p = tp(0.1, 0.05);
        let bad = fit_from_values(&y, vec![0.0; 8], p, LossKind::Lad).unwrap();
        let rep = kkt_residual_lad_flsa(&y, &bad, &p, KKT_TOL_DEFAULT).unwrap();
        assert!(!rep.passed);
        assert!(rep.max_inequality_slack_violation > 0.1);
    }

    #[test]
    fn all_zero_signal_passes_for_any_lambda() {
        let y = sig(&[0.0, 0.0, 0.0, 0.0]);
        for (l1, l2) in [(0.0, 0.0), (0.3, 0.0), (2.0, 5.0)] {
            let p = tp(l1, l2);
            let fit = solve_lad_flsa(&y, &p).unwrap();
            assert!(fit.mu_hat().iter().all(|&m| m == 0.0));
            let rep = kkt_residual_lad_flsa(&y, &fit, &p, KKT_TOL_DEFAULT).unwrap();
            assert!(rep.passed, "l1={l1} l2={l2} {rep:?}");
        }
    }

    #[test]
    fn ls_solver_output_passes_ls_check() {
        let y = random_signal(80, 10);
        let p = tp(0.15, 1.0);
        let fit = solve_ls_flsa(&y, &p).unwrap();
        let rep = kkt_residual_ls_flsa(&y, &fit, &p, KKT_TOL_DEFAULT).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn lemma1_bound_arithmetic() {
        let y = random_signal(100, 11);
        let p = tp(0.0, 20.0);
        let fit = solve_lad_flsa(&y, &p).unwrap();
        let rep = check_lemma1_bounds(&fit, &p, 100);
        assert!(rep.applicable);
        assert_eq!(rep.bound, Some(6.0));
        assert_eq!(rep.holds, Some(true));
        // lambda2 <= n*lambda1: not applicable.
        let p2 = tp(0.5, 20.0);
        let rep2 = check_lemma1_bounds(&fit, &p2, 100);
        assert!(!rep2.applicable);
        assert_eq!(rep2.holds, None);
    }
}
