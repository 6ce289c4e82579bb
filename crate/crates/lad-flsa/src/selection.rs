//! Tuning parameter selection: the nonzero-block degrees-of-freedom
//! count, AICR / BIC / GCV criteria, exhaustive grid search, and the
//! perturbation Monte-Carlo estimator of the generalized degrees of
//! freedom.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FitResult, LossKind, Signal, TuningParams};
use crate::solver::{solve_lad_flsa, solve_ls_flsa};

/// Default number of Monte-Carlo perturbation samples.
pub const DF_MC_DEFAULT_SAMPLES: usize = 500;

/// Number of nonzero fitted blocks, the unbiased degrees-of-freedom
/// estimate of the fit.
pub fn df_hat(fit: &FitResult) -> usize {
    fit.partition().nonzero_blocks().len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    Aicr,
    Bic,
    Gcv,
}

impl std::fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CriterionKind::Aicr => write!(f, "aicr"),
            CriterionKind::Bic => write!(f, "bic"),
            CriterionKind::Gcv => write!(f, "gcv"),
        }
    }
}

/// A model-selection criterion evaluated at one fit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CriterionValue {
    pub kind: CriterionKind,
    pub value: f64,
    pub df_hat: usize,
    pub residual_l1: f64,
}

/// Pure criterion arithmetic from (residual, df, n):
/// AICR = r + df, BIC = r + df*log(n)/2, GCV = r / (1 - df/n).
pub fn criterion_value(
    kind: CriterionKind,
    residual_l1: f64,
    df: usize,
    n: usize,
) -> Result<f64> {
    let df = df as f64;
    let n = n as f64;
    Ok(match kind {
        CriterionKind::Aicr => residual_l1 + df,
        CriterionKind::Bic => residual_l1 + df * n.ln() / 2.0,
        CriterionKind::Gcv => {
            if df >= n {
                return Err(Error::GcvUndefined);
            }
            residual_l1 / (1.0 - df / n)
        }
    })
}

/// Evaluate a criterion for a fit of `y`.
pub fn criterion(y: &Signal, fit: &FitResult, kind: CriterionKind) -> Result<CriterionValue> {
    let vals = y.values();
    if vals.len() != fit.n() {
        return Err(Error::LengthMismatch {
            left: vals.len(),
            right: fit.n(),
        });
    }
    let residual_l1 = vals
        .iter()
        .zip(fit.mu_hat())
        .map(|(v, m)| (v - m).abs())
        .sum::<f64>();
    let df = df_hat(fit);
    let value = criterion_value(kind, residual_l1, df, vals.len())?;
    Ok(CriterionValue {
        kind,
        value,
        df_hat: df,
        residual_l1,
    })
}

/// Inclusive arithmetic progression `start, start+step, ..., stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridRange {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "invalid grid range ({start}, {stop}, {step})"
            )));
        }
        if stop < start {
            return Err(Error::InvalidParam(format!(
                "empty grid range ({start}..{stop})"
            )));
        }
        Ok(Self { start, stop, step })
    }

    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| self.start + k as f64 * self.step).collect()
    }
}

/// The two-dimensional tuning grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lambda1: GridRange,
    pub lambda2: GridRange,
}

impl GridSpec {
    pub fn new(lambda1: GridRange, lambda2: GridRange) -> Self {
        Self { lambda1, lambda2 }
    }

    /// The benchmark protocol's default grid for sample size `n`:
    /// lambda1 over (0, 0.5] in steps of 0.01 and lambda2 over
    /// [sqrt(n/log n), sqrt(n)] in steps of 0.1.
    pub fn paper_default(n: usize) -> Self {
        let nf = n as f64;
        let l2_lo = (nf / nf.ln()).sqrt();
        let l2_hi = nf.sqrt();
        Self {
            lambda1: GridRange {
                start: 0.01,
                stop: 0.5,
                step: 0.01,
            },
            lambda2: GridRange {
                start: l2_lo,
                stop: l2_hi,
                step: 0.1,
            },
        }
    }
}

fn solve(y: &Signal, params: &TuningParams, loss: LossKind) -> Result<FitResult> {
    match loss {
        LossKind::Lad => solve_lad_flsa(y, params),
        LossKind::Ls => solve_ls_flsa(y, params),
    }
}

/// Exhaustive search over the grid, returning the cell minimizing the
/// criterion. Ties go to the smaller lambda1, then the smaller lambda2.
/// Cells where GCV is undefined (saturated fits) are skipped; if every
/// cell is skipped the search fails.
pub fn grid_select(
    y: &Signal,
    grid: &GridSpec,
    kind: CriterionKind,
    loss: LossKind,
) -> Result<(TuningParams, FitResult, CriterionValue)> {
    let l1s = grid.lambda1.values();
    let l2s = grid.lambda2.values();
    if l1s.is_empty() || l2s.is_empty() {
        return Err(Error::EmptyGrid);
    }

    let cells: Vec<(f64, f64)> = l1s
        .iter()
        .flat_map(|&l1| l2s.iter().map(move |&l2| (l1, l2)))
        .collect();
    let evals: Vec<Result<Option<(f64, f64, f64)>>> = cells
        .par_iter()
        .map(|&(l1, l2)| {
            let params = TuningParams::new(l1, l2)?;
            let fit = solve(y, &params, loss)?;
            match criterion(y, &fit, kind) {
                Ok(c) => Ok(Some((c.value, l1, l2))),
                Err(Error::GcvUndefined) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut best: Option<(f64, f64, f64)> = None;
    for ev in evals {
        match ev? {
            None => {}
            Some((value, l1, l2)) => {
                // Cells are in lambda1-major, lambda2-minor order, so a
                // strict comparison implements the tie-breaking rule.
                if best.map_or(true, |(bv, _, _)| value < bv) {
                    best = Some((value, l1, l2));
                }
            }
        }
    }
    let (_, l1, l2) = best.ok_or(Error::EmptyGrid)?;
    let params = TuningParams::new(l1, l2)?;
    let fit = solve(y, &params, loss)?;
    let crit = criterion(y, &fit, kind)?;
    Ok((params, fit, crit))
}

/// One line of the criterion sweep export.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepRow {
    pub lambda1: f64,
    pub lambda2: f64,
    pub residual_l1: f64,
    pub df_hat: usize,
    pub aicr: f64,
    pub bic: f64,
    /// `None` when the fit is saturated (df = n).
    pub gcv: Option<f64>,
}

/// Evaluate every cell of the grid and report all three criteria per cell.
pub fn criterion_sweep(y: &Signal, grid: &GridSpec, loss: LossKind) -> Result<Vec<SweepRow>> {
    let l1s = grid.lambda1.values();
    let l2s = grid.lambda2.values();
    let cells: Vec<(f64, f64)> = l1s
        .iter()
        .flat_map(|&l1| l2s.iter().map(move |&l2| (l1, l2)))
        .collect();
    cells
        .par_iter()
        .map(|&(l1, l2)| {
            let params = TuningParams::new(l1, l2)?;
            let fit = solve(y, &params, loss)?;
            let c = criterion(y, &fit, CriterionKind::Aicr)?;
            let n = y.len();
            Ok(SweepRow {
                lambda1: l1,
                lambda2: l2,
                residual_l1: c.residual_l1,
                df_hat: c.df_hat,
                aicr: c.value,
                bic: criterion_value(CriterionKind::Bic, c.residual_l1, c.df_hat, n)?,
                gcv: match criterion_value(CriterionKind::Gcv, c.residual_l1, c.df_hat, n) {
                    Ok(v) => Some(v),
                    Err(Error::GcvUndefined) => None,
                    Err(e) => return Err(e),
                },
            })
        })
        .collect()
}

/// Monte-Carlo estimate of the generalized degrees of freedom at fixed
/// tuning parameters.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McDfEstimate {
    pub df: f64,
    pub std_error: f64,
    pub samples: usize,
    pub tau: f64,
}

/// `McDfEstimate` plus the average nonzero-block count over the same
/// perturbations, for comparing the two df estimates on identical draws.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McDfDetail {
    pub estimate: McDfEstimate,
    pub mean_df_hat: f64,
}

/// Perturbation Monte Carlo for the generalized degrees of freedom of the
/// LAD-FLSA at `params`: draw `delta_t ~ N(0, tau^2 I)`, fit `y + delta_t`,
/// and estimate `df = sum_i cov(mu_hat_i, delta_i) / tau^2` with sample
/// covariances over the `samples` draws. The standard error aggregates the
/// per-coordinate covariance sampling variances as if independent.
pub fn mc_df(
    y: &Signal,
    params: &TuningParams,
    tau: f64,
    samples: usize,
    seed: u64,
) -> Result<McDfEstimate> {
    Ok(mc_df_detailed(y, params, tau, samples, seed)?.estimate)
}

pub fn mc_df_detailed(
    y: &Signal,
    params: &TuningParams,
    tau: f64,
    samples: usize,
    seed: u64,
) -> Result<McDfDetail> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParam(format!("tau must be > 0, got {tau}")));
    }
    if samples < 2 {
        return Err(Error::InvalidParam(format!(
            "need at least 2 Monte-Carlo samples, got {samples}"
        )));
    }
    let vals = y.values();
    let n = vals.len();

    struct Draw {
        delta: Vec<f64>,
        mu: Vec<f64>,
        df: usize,
    }

    let draws: Vec<Result<Draw>> = (0..samples)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(t as u64 + 1);
            let normal = Normal::new(0.0, tau).expect("tau > 0");
            let delta: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            let perturbed =
                Signal::new(vals.iter().zip(&delta).map(|(v, d)| v + d).collect())?;
            let fit = solve_lad_flsa(&perturbed, params)?;
            Ok(Draw {
                delta,
                mu: fit.mu_hat().to_vec(),
                df: df_hat(&fit),
            })
        })
        .collect();
    let draws: Vec<Draw> = draws.into_iter().collect::<Result<_>>()?;

    let t = samples as f64;
    let mut cov_sum = 0.0;
    let mut var_sum = 0.0;
    for i in 0..n {
        let mu_mean = draws.iter().map(|d| d.mu[i]).sum::<f64>() / t;
        let de_mean = draws.iter().map(|d| d.delta[i]).sum::<f64>() / t;
        let prods: Vec<f64> = draws
            .iter()
            .map(|d| (d.mu[i] - mu_mean) * (d.delta[i] - de_mean))
            .collect();
        let cov = prods.iter().sum::<f64>() / (t - 1.0);
        let p_mean = prods.iter().sum::<f64>() / t;
        let p_var = prods.iter().map(|p| (p - p_mean) * (p - p_mean)).sum::<f64>() / (t - 1.0);
        cov_sum += cov;
        var_sum += p_var / t;
    }
    let tau2 = tau * tau;
    let mean_df_hat = draws.iter().map(|d| d.df as f64).sum::<f64>() / t;
    Ok(McDfDetail {
        estimate: McDfEstimate {
            df: cov_sum / tau2,
            std_error: var_sum.sqrt() / tau2,
            samples,
            tau,
        },
        mean_df_hat,
    })
}

/// The protocol default perturbation scale, 0.1 times the sample standard
/// deviation of the data.
pub fn default_tau(y: &Signal) -> f64 {
    0.1 * y.sample_sd()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(v: &[f64]) -> Signal {
        Signal::new(v.to_vec()).unwrap()
    }

    fn tp(l1: f64, l2: f64) -> TuningParams {
        TuningParams::new(l1, l2).unwrap()
    }

    #[test]
    fn df_counts_nonzero_blocks() {
        let y = sig(&[0.0, 2.0, 2.0, -1.0]);
        let fit = solve_lad_flsa(&y, &tp(0.0, 0.0)).unwrap();
        assert_eq!(df_hat(&fit), 2);
        let zero = solve_lad_flsa(&sig(&[0.0, 0.0, 0.0]), &tp(0.0, 0.0)).unwrap();
        assert_eq!(df_hat(&zero), 0);
        // Saturated fit: all-distinct nonzero data, zero penalties.
        let sat = solve_lad_flsa(&sig(&[1.0, 2.0, 3.0]), &tp(0.0, 0.0)).unwrap();
        assert_eq!(df_hat(&sat), 3);
    }

    #[test]
    fn criterion_arithmetic() {
        let n = 100;
        let bic = criterion_value(CriterionKind::Bic, 10.0, 3, n).unwrap();
        assert!((bic - (10.0 + 3.0 * (100.0f64).ln() / 2.0)).abs() < 1e-12);
        assert!((bic - 16.9078).abs() < 5e-5);
        let aicr = criterion_value(CriterionKind::Aicr, 10.0, 3, n).unwrap();
        assert_eq!(aicr, 13.0);
        let gcv = criterion_value(CriterionKind::Gcv, 10.0, 3, n).unwrap();
        assert!((gcv - 10.0 / 0.97).abs() < 1e-12);
        assert!((gcv - 10.3093).abs() < 5e-5);
        assert!(matches!(
            criterion_value(CriterionKind::Gcv, 10.0, n, n),
            Err(Error::GcvUndefined)
        ));
    }

    #[test]
    fn grid_range_values() {
        let r = GridRange::new(0.01, 0.5, 0.01).unwrap();
        let v = r.values();
        assert_eq!(v.len(), 50);
        assert!((v[0] - 0.01).abs() < 1e-15);
        assert!((v[49] - 0.5).abs() < 1e-12);
        assert!(GridRange::new(0.5, 0.1, 0.1).is_err());
        assert!(GridRange::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn grid_select_matches_full_rescan() {
        let y = sig(&[0.1, -0.2, 2.1, 1.9, 2.0, 0.0, 0.1, -0.1]);
        let grid = GridSpec {
            lambda1: GridRange::new(0.05, 0.25, 0.05).unwrap(),
            lambda2: GridRange::new(0.5, 2.0, 0.5).unwrap(),
        };
        let (params, fit, crit) =
            grid_select(&y, &grid, CriterionKind::Bic, LossKind::Lad).unwrap();
        // Independent re-scan.
        let mut best = f64::INFINITY;
        let mut arg = (0.0, 0.0);
        for l1 in grid.lambda1.values() {
            for l2 in grid.lambda2.values() {
                let f = solve_lad_flsa(&y, &tp(l1, l2)).unwrap();
                let c = criterion(&y, &f, CriterionKind::Bic).unwrap();
                if c.value < best {
                    best = c.value;
                    arg = (l1, l2);
                }
            }
        }
        assert_eq!(crit.value, best);
        assert_eq!((params.lambda1(), params.lambda2()), arg);
        assert_eq!(fit.n(), y.len());
    }

    #[test]
    fn grid_select_tie_breaks_to_smallest_lambdas() {
        // Constant zero data: every cell fits zero with criterion 0.
        let y = sig(&[0.0, 0.0, 0.0, 0.0]);
        let grid = GridSpec {
            lambda1: GridRange::new(0.1, 0.3, 0.1).unwrap(),
            lambda2: GridRange::new(1.0, 2.0, 0.5).unwrap(),
        };
        let (params, _, crit) =
            grid_select(&y, &grid, CriterionKind::Bic, LossKind::Lad).unwrap();
        assert_eq!(crit.value, 0.0);
        assert_eq!(params.lambda1(), 0.1);
        assert_eq!(params.lambda2(), 1.0);
    }

    #[test]
    fn mc_df_identity_map() {
        // lambda1 = lambda2 = 0: the fit is the data, sensitivity 1 per
        // coordinate, so df should estimate n.
        let y = sig(&[0.4, -1.0, 2.0, 0.3, -0.7, 1.1, 0.0, 0.9]);
        let d = mc_df_detailed(&y, &tp(0.0, 0.0), 0.1, 200, 42).unwrap();
        let n = y.len() as f64;
        assert!(
            (d.estimate.df - n).abs() <= 3.0 * d.estimate.std_error.max(1e-6),
            "df {} vs n {} (se {})",
            d.estimate.df,
            n,
            d.estimate.std_error
        );
        assert_eq!(d.mean_df_hat, n);
    }

    #[test]
    fn mc_df_constant_zero_map() {
        let y = sig(&[0.4, -1.0, 2.0, 0.3, -0.7, 1.1, 0.0, 0.9]);
        let d = mc_df_detailed(&y, &tp(1.5, 0.0), 0.05, 200, 43).unwrap();
        assert!(d.estimate.df.abs() <= 1e-9, "df {}", d.estimate.df);
        assert_eq!(d.mean_df_hat, 0.0);
    }

    #[test]
    fn mc_df_validates_inputs() {
        let y = sig(&[1.0, 2.0]);
        assert!(mc_df(&y, &tp(0.0, 0.0), 0.0, 10, 1).is_err());
        assert!(mc_df(&y, &tp(0.0, 0.0), 0.1, 1, 1).is_err());
    }

    #[test]
    fn sweep_reports_all_criteria() {
        let y = sig(&[0.0, 0.0, 1.0, 1.0]);
        let grid = GridSpec {
            lambda1: GridRange::new(0.1, 0.2, 0.1).unwrap(),
            lambda2: GridRange::new(0.5, 0.5, 0.1).unwrap(),
        };
        let rows = criterion_sweep(&y, &grid, LossKind::Lad).unwrap();
        assert_eq!(rows.len(), 2);
        for row in rows {
            let aicr =
                criterion_value(CriterionKind::Aicr, row.residual_l1, row.df_hat, 4).unwrap();
            assert_eq!(row.aicr, aicr);
        }
    }
}
