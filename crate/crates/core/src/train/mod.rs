//! Optimization, cross-validation and ablation orchestration.

mod adam;
mod config;
mod cv;
mod trainer;

pub use adam::{adam_step, Adam, AdamConfig};
pub use config::ExperimentConfig;
pub use cv::{cross_validate, holdout, stratified_folds, CvReport, MetricSummary, RunResult};
pub use trainer::{evaluate, train_one, EpochRecord, TrainHistory};
