//! The numerical-statistics kernel: OLS with inference, Student-t p-values,
//! and the regression assemblies run by the pipeline.

mod models;
mod ols;
mod student_t;

pub use models::{
    equity_regression, purpose_regression, reversed_regressions, EQUITY_LABELS, INTERCEPT_LABEL,
    METRIC_KEYS, MIN_AREAS, PURPOSE_LABELS,
};
pub use ols::{ols_fit, CoefficientRow, DesignMatrix, RegressionResult, StatsError};
pub use student_t::{inc_beta_reg, ln_gamma, p_value};
