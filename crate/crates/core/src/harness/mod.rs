//! Cross-validation, experiments and reports.

mod experiment;
mod folds;
mod grids;
mod report;
mod source;

pub use experiment::{
    cross_validate, run_experiment, CvResult, ExperimentConfig, GridRow, Report, Tally,
};
pub use folds::stratified_folds;
pub use grids::{
    default_c_grid, default_kernel_grid, default_scale_grid, median_pairwise_distance, sigma_grid,
};
pub use report::{render_cv_kv, render_cv_table};
pub use source::{
    CountSource, DescriptorSource, FeatureSet, FoldFeatures, FoldSource, PyramidSource, TokenSource,
};
