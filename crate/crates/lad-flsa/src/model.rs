//! Shared domain types: signals, tuning parameters, block partitions and
//! fitted results.
//!
//! A vector is *blocky* when it is piecewise constant; a maximal constant
//! run is a block, the per-block value is its level, and an index where
//! adjacent values differ is a jump. Everything downstream (solvers, KKT
//! checks, model selection, metrics) works on these structures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Jump tolerance used when reporting jump counts (benchmark metrics).
pub const JUMP_TOL_REPORT: f64 = 0.1;
/// Jump tolerance for exact work (KKT verification, oracles).
pub const JUMP_TOL_EXACT: f64 = 0.0;
/// Default tolerance under which a fitted block level counts as zero.
pub const ZERO_TOL_DEFAULT: f64 = 1e-8;

/// Which data-fidelity term an objective uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Least absolute deviations, sum of |y_i - mu_i|.
    Lad,
    /// Least squares, sum of (y_i - mu_i)^2.
    Ls,
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LossKind::Lad => write!(f, "lad"),
            LossKind::Ls => write!(f, "ls"),
        }
    }
}

/// Ordered sequence of finite observations y_1..y_n, n >= 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    values: Vec<f64>,
}

impl Signal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySignal);
        }
        for (index, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "signal value",
                    index,
                });
            }
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// max(y) - min(y).
    pub fn range(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi - lo
    }

    /// Sample standard deviation with denominator n - 1.
    pub fn sample_sd(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.values.iter().sum::<f64>() / n as f64;
        let ss = self
            .values
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>();
        (ss / (n - 1) as f64).sqrt()
    }

    /// Lower median (the ceil(n/2)-th order statistic).
    pub fn lower_median(&self) -> f64 {
        let mut sorted = self.values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted[(sorted.len() - 1) / 2]
    }
}

/// The nonnegative penalty weights (lambda1 for signal sparsity, lambda2
/// for fusion).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningParams {
    lambda1: f64,
    lambda2: f64,
}

impl TuningParams {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !lambda1.is_finite() || lambda1 < 0.0 {
            return Err(Error::InvalidParam(format!(
                "lambda1 must be finite and >= 0, got {lambda1}"
            )));
        }
        if !lambda2.is_finite() || lambda2 < 0.0 {
            return Err(Error::InvalidParam(format!(
                "lambda2 must be finite and >= 0, got {lambda2}"
            )));
        }
        Ok(Self { lambda1, lambda2 })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }
}

/// Contiguous block decomposition of a vector of length `n`.
///
/// Block `j` covers the half-open index range `starts[j] .. starts[j+1]`
/// (0-based; the last block ends at `n`) and carries the level `levels[j]`.
/// `nonzero` lists the block ids whose level exceeds the zero tolerance in
/// magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPartition {
    starts: Vec<usize>,
    levels: Vec<f64>,
    nonzero: Vec<usize>,
    n: usize,
    zero_tol: f64,
}

/// Decompose `mu` into maximal runs: consecutive entries whose difference
/// is at most `jump_tol` in magnitude are merged, the run level being the
/// run's first value. A block is nonzero when |level| > `zero_tol`.
pub fn blocks_of(mu: &[f64], jump_tol: f64, zero_tol: f64) -> Result<BlockPartition> {
    if mu.is_empty() {
        return Err(Error::EmptySignal);
    }
    for (index, v) in mu.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "block input",
                index,
            });
        }
    }
    if jump_tol < 0.0 || zero_tol < 0.0 {
        return Err(Error::InvalidParam(
            "jump_tol and zero_tol must be >= 0".into(),
        ));
    }
    let mut starts = vec![0usize];
    let mut levels = vec![mu[0]];
    for i in 1..mu.len() {
        if (mu[i] - mu[i - 1]).abs() > jump_tol {
            starts.push(i);
            levels.push(mu[i]);
        }
    }
    let nonzero = levels
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > zero_tol)
        .map(|(j, _)| j)
        .collect();
    Ok(BlockPartition {
        starts,
        levels,
        nonzero,
        n: mu.len(),
        zero_tol,
    })
}

impl BlockPartition {
    /// Build a partition directly from per-block sizes and levels.
    pub fn from_blocks(sizes: &[usize], levels: &[f64], zero_tol: f64) -> Result<Self> {
        if sizes.is_empty() || sizes.len() != levels.len() {
            return Err(Error::InvalidParam(
                "sizes and levels must be nonempty and of equal length".into(),
            ));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidParam("block sizes must be >= 1".into()));
        }
        let mut starts = Vec::with_capacity(sizes.len());
        let mut acc = 0usize;
        for &s in sizes {
            starts.push(acc);
            acc += s;
        }
        let nonzero = levels
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > zero_tol)
            .map(|(j, _)| j)
            .collect();
        Ok(Self {
            starts,
            levels: levels.to_vec(),
            nonzero,
            n: acc,
            zero_tol,
        })
    }

    pub fn block_count(&self) -> usize {
        self.levels.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    /// Block ids (0-based) whose level is nonzero under the partition's
    /// zero tolerance; |K| of this set is the degrees-of-freedom count.
    pub fn nonzero_blocks(&self) -> &[usize] {
        &self.nonzero
    }

    /// 0-based indices i >= 1 at which a jump occurs (mu[i] != mu[i-1]).
    pub fn jump_indices(&self) -> &[usize] {
        &self.starts[1..]
    }

    /// Half-open index range of block `j`.
    pub fn block_range(&self, j: usize) -> std::ops::Range<usize> {
        let end = if j + 1 < self.starts.len() {
            self.starts[j + 1]
        } else {
            self.n
        };
        self.starts[j]..end
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        (0..self.block_count())
            .map(|j| self.block_range(j).len())
            .collect()
    }

    pub fn min_block_size(&self) -> usize {
        self.block_sizes().into_iter().min().unwrap_or(0)
    }

    /// Reconstruct the length-`n` vector with each block at its level.
    pub fn expand(&self, n: usize) -> Result<Vec<f64>> {
        if n != self.n {
            return Err(Error::CoverageMismatch {
                partition_n: self.n,
                expected: n,
            });
        }
        let mut out = vec![0.0; n];
        for j in 0..self.block_count() {
            let level = self.levels[j];
            for v in &mut out[self.block_range(j)] {
                *v = level;
            }
        }
        Ok(out)
    }
}

/// A noiseless blocky signal together with the quantities that the
/// consistency conditions are phrased in: the smallest jump magnitude and
/// the smallest nonzero level magnitude.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrueModel {
    partition: BlockPartition,
    mu0: Vec<f64>,
    a_n: Option<f64>,
    rho_n: Option<f64>,
}

impl TrueModel {
    pub fn new(partition: BlockPartition) -> Result<Self> {
        let mu0 = partition.expand(partition.n())?;
        let levels = partition.levels();
        let a_n = (1..levels.len())
            .map(|j| (levels[j] - levels[j - 1]).abs())
            .fold(None, |acc: Option<f64>, d| {
                Some(acc.map_or(d, |a| a.min(d)))
            });
        let rho_n = partition
            .nonzero_blocks()
            .iter()
            .map(|&j| levels[j].abs())
            .fold(None, |acc: Option<f64>, d| {
                Some(acc.map_or(d, |a| a.min(d)))
            });
        Ok(Self {
            partition,
            mu0,
            a_n,
            rho_n,
        })
    }

    /// Derive the true model from an exact blocky vector.
    pub fn from_values(mu0: &[f64]) -> Result<Self> {
        Self::new(blocks_of(mu0, JUMP_TOL_EXACT, 0.0)?)
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn mu0(&self) -> &[f64] {
        &self.mu0
    }

    pub fn n(&self) -> usize {
        self.mu0.len()
    }

    /// Smallest jump magnitude, `None` when the signal has no jumps.
    pub fn a_n(&self) -> Option<f64> {
        self.a_n
    }

    /// Smallest nonzero level magnitude, `None` when all blocks are zero.
    pub fn rho_n(&self) -> Option<f64> {
        self.rho_n
    }
}

/// A fitted vector with its derived block structure and objective value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    mu_hat: Vec<f64>,
    partition: BlockPartition,
    objective: f64,
    params: TuningParams,
    loss_kind: LossKind,
}

impl FitResult {
    pub(crate) fn from_parts(
        mu_hat: Vec<f64>,
        partition: BlockPartition,
        objective: f64,
        params: TuningParams,
        loss_kind: LossKind,
    ) -> Self {
        Self {
            mu_hat,
            partition,
            objective,
            params,
            loss_kind,
        }
    }

    pub fn mu_hat(&self) -> &[f64] {
        &self.mu_hat
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn params(&self) -> &TuningParams {
        &self.params
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss_kind
    }

    pub fn n(&self) -> usize {
        self.mu_hat.len()
    }
}

/// Elementwise sign with |x_i| <= zero_tol mapped to 0.
pub fn sign_vector(x: &[f64], zero_tol: f64) -> Vec<i8> {
    x.iter()
        .map(|&v| {
            if v.abs() <= zero_tol {
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect()
}
