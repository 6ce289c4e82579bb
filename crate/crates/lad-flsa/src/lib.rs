//! LAD and least-squares fused lasso signal approximation.
//!
//! Recovers sparse, blocky one-dimensional signals by minimizing an
//! absolute-deviation or squared loss plus the fused lasso penalty
//! `lambda1 * ||mu||_1 + lambda2 * ||mu||_TV`. The crate provides exact
//! dynamic-programming solvers, brute-force oracles and KKT residual
//! verifiers for certifying them, degrees-of-freedom based tuning
//! parameter selection (AICR / BIC / GCV plus a Monte-Carlo generalized-df
//! estimator), evaluators for the block/jump consistency conditions, and a
//! reproducible simulation benchmark harness.

pub mod error;
pub mod io;
pub mod kkt;
pub mod model;
pub mod oracle;
pub mod selection;
pub mod sim;
pub mod solver;
pub mod theory;

pub use error::{Error, Result};
pub use kkt::{
    check_lemma1_bounds, kkt_residual_lad_flsa, kkt_residual_lad_fsa, kkt_residual_ls_flsa,
    KktReport, Lemma1Report, KKT_TOL_DEFAULT,
};
pub use model::{
    blocks_of, sign_vector, BlockPartition, FitResult, LossKind, Signal, TrueModel, TuningParams,
    JUMP_TOL_EXACT, JUMP_TOL_REPORT, ZERO_TOL_DEFAULT,
};
pub use oracle::{brute_force_lad_flsa, brute_force_ls_flsa, OracleRecord, ORACLE_MAX_N};
pub use selection::{
    criterion, criterion_sweep, df_hat, grid_select, mc_df, mc_df_detailed, CriterionKind,
    CriterionValue, GridRange, GridSpec, McDfDetail, McDfEstimate, SweepRow,
    DF_MC_DEFAULT_SAMPLES,
};
pub use sim::{
    cfr_plus_k, gen_blocks_signal, gen_noise, jump_count, lare, run_benchmark, standardize,
    BenchConfig, CfrOutcome, MetricsRow, NoiseFamily, NoiseSpec,
};
pub use solver::{
    fit_from_values, objective, solve_lad_flsa, solve_lad_fsa, solve_ls_flsa, solve_with_options,
    SolverOptions,
};
pub use theory::{
    check_conditions_b, check_conditions_c, consistency_outcome, lambda_n, ClauseStatus,
    ConditionClause, ConditionReport, ConsistencyOutcome,
};
