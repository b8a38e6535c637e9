//! Replicated experiments comparing waiting-time estimators with exact
//! oracles.

mod experiments;
mod plan;
mod report;
pub mod stats;

pub use experiments::{
    fit_delta_log_delta, run, run_clt, run_expolaw, run_girsanov, run_ldp_empirical, run_lln,
    run_lln_schedule, run_naive_return, run_shadow, DeltaLogDeltaFit, GirsanovCheck,
    DEGENERATE_VARIANCE, MIN_ESS,
};
pub use plan::{DeltaRule, ExperimentKind, ExperimentPlan, GammaSource, LDP_P_LIMIT};
pub use report::{EstimateReport, ExperimentOutput, Table};
