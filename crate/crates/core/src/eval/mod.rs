//! Structure metrics, temporal hold-out evaluation and benchmark sweeps.
//!
//! SHD counts a reversed intra edge as a removal plus an addition by
//! default; [`ReversalCost::One`] gives the common one-step convention.

mod benchmark;
mod metrics;
mod split;

pub use benchmark::{
    mean_sd, render_table, run_benchmark, write_csv, BenchmarkRow, BenchmarkSpec, CellStatus, LearnerEntry, Metric,
    Summary, CSV_HEADER,
};
pub use metrics::{auroc, auroc_by_class, edge_scores, shd, shd_with, Auroc, Edge, EdgeClass, EdgeUniverse, ReversalCost};
pub use split::{
    fit_parameters, holdout_loglik, learner_lag, score_split, temporal_split, HoldoutResult, LoglikMode, TemporalSplit,
    DEFAULT_TRAIN_FRACTION,
};
