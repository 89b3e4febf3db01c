//! Datasets, standardization, fold plans and scoring.

mod dataset;
mod folds;
mod metrics;
mod scaler;
mod toy;

pub use dataset::{create_with_comment, load_csv, load_features, CategoricalEncoding, CsvSchema, Dataset};
pub use folds::{stratified_holdout, stratified_kfold, FoldPlan};
pub use metrics::{compute_metrics, Confusion, Metrics, MetricsReport};
pub use scaler::{apply_scaler, fit_scaler, Scaler};
pub use toy::{make_circles, make_moons};
