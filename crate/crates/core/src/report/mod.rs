//! Pipeline orchestration and report output.

mod compare;
mod pipeline;
mod render;

pub use compare::{
    area_comparison_csv, compare_areas, compare_periods, period_comparison_csv, AreaComparison,
    CoefficientComparison, CompareError, MetricComparison,
};
pub use pipeline::{
    compare_period_dirs, load_area_profiles_csv, load_regression_csv, load_run_meta, run_meta,
    run_pipeline, Coverage, PipelineArtifacts, PipelineError, RegressionDirection, RunConfig,
    PERIOD_VARIABLE_KEYS,
};
pub use render::{
    area_profiles_csv, area_profiles_geojson, atomic_write, fmt_report, fmt_sig, regression_csv,
    regression_table, round_report, significance_stars, AREA_CSV_HEADER, REPORT_SIG_DIGITS,
};
