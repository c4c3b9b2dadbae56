//! Saliency evaluation scores and reports.

mod auc;
mod maps;
mod report;

pub use auc::{auc_borji, auc_judd, auc_shuffled, roc_auc};
pub use maps::{cc, fixation_map, similarity, Correlation, DEFAULT_FIXATION_SIGMA};
pub use report::{evaluate, rank_models, ranking_table, EvalConfig, ImageRecord, MetricReport, METRIC_NAMES};
