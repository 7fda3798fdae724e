//! Synthetic data, experiment drivers and sweep output.

mod data;
mod experiments;
mod sweep;

pub use data::{
    curl_field, div_field, field_potential, jaakkola_sigma, mean_column_variance, synth_dec,
    synth_fields, Dataset, DatasetMeta, DecConfig, DecTruth, FIELD_BANDWIDTH, FIELD_CENTERS,
    FIELD_HALF_WIDTH, JAAKKOLA_MAX_PAIRS,
};
pub use experiments::{
    decade_grid, power_grid, run_approx_error, run_field_comparison, run_learning_curve,
    run_timing, run_variance, ApproxErrorConfig, DecLearner, FieldComparisonConfig,
    LearningCurveConfig, TimingConfig, VarianceConfig,
};
pub use sweep::{SweepResult, SweepRow};
