//! Per-frame prediction, MSE/PCC, leave-one-subject-out cross-validation,
//! the static-baseline comparison and throughput.

mod compare;
mod loso;
mod metrics;
mod predict;
mod report;
mod throughput;

pub use compare::{compare_static_baseline, static_config, ComparisonReport, ModelScore};
pub use loso::{evaluate_by_subject, evaluate_group, loso_crossval, loso_folds, Fold, LosoOptions};
pub use metrics::{mse_metric, pcc_metric, pcc_or_undefined};
pub use predict::{predict_sequence, Timeline, TimelineRow, PREDICT_BATCH};
pub use report::{score_fold, EvalReport, FoldResult};
pub use throughput::{measure_throughput, median, Throughput};
