//! The two regression assemblies run over area profiles: the equity model
//! (low-income share on the five convenience measures) and the trip-purpose
//! model, plus the reversed per-metric simple regressions kept behind a
//! configuration switch.

use super::ols::{ols_fit, DesignMatrix, RegressionResult, StatsError};
use crate::scalar::Scalar;
use crate::spatial::AreaProfile;

/// Minimum number of area observations accepted by the assemblies.
pub const MIN_AREAS: usize = 10;

pub const INTERCEPT_LABEL: &str = "Intercept";
/// Display labels for the five convenience regressors, in report row order.
pub const EQUITY_LABELS: [&str; 5] = [
    "Time by Distance (min/mile)",
    "Transfers by Distance (#/mile)",
    "Transfer Wait Time (min)",
    "Distance (mile)",
    "Rail Mode Share (%)",
];
/// Trip-purpose labels; `Other (not a home trip)` is the dropped reference
/// category, so it never appears as a row.
pub const PURPOSE_LABELS: [&str; 4] = [
    "Home to Work / Work to Home",
    "Home to Other / Other to Home",
    "Home to Social / Social to Home",
    "Home to School / School to Home",
];

fn geoids<T: Scalar>(areas: &[AreaProfile<T>]) -> Vec<String> {
    areas.iter().map(|a| a.geoid.clone()).collect()
}

fn ridership_weights<T: Scalar>(areas: &[AreaProfile<T>]) -> Vec<T> {
    areas
        .iter()
        .map(|a| T::from_f64_const(a.ridership as f64))
        .collect()
}

fn check_area_count<T: Scalar>(areas: &[AreaProfile<T>]) -> Result<(), StatsError> {
    if areas.len() < MIN_AREAS {
        return Err(StatsError::InsufficientAreas {
            got: areas.len(),
            need: MIN_AREAS,
        });
    }
    Ok(())
}

/// Equity model: `low_income_share ~ intercept + the five convenience
/// measures`. Set `ridership_weighted` for weighted least squares.
pub fn equity_regression<T: Scalar>(
    areas: &[AreaProfile<T>],
    ridership_weighted: bool,
) -> Result<RegressionResult<T>, StatsError> {
    check_area_count(areas)?;
    let n = areas.len();
    let columns: Vec<Vec<T>> = vec![
        vec![T::one(); n],
        areas.iter().map(|a| a.metrics.time_per_mile).collect(),
        areas.iter().map(|a| a.metrics.transfers_per_mile).collect(),
        areas
            .iter()
            .map(|a| a.metrics.transfer_wait_minutes)
            .collect(),
        areas.iter().map(|a| a.metrics.network_miles).collect(),
        areas.iter().map(|a| a.metrics.rail_share).collect(),
    ];
    let mut names = vec![INTERCEPT_LABEL.to_string()];
    names.extend(EQUITY_LABELS.iter().map(|s| s.to_string()));
    let response = areas.iter().map(|a| a.low_income_share).collect();
    let mut design = DesignMatrix::new(geoids(areas), names, columns, response)?;
    if ridership_weighted {
        design = design.with_weights(ridership_weights(areas))?;
    }
    ols_fit(&design)
}

/// Trip-purpose model: `low_income_share ~ intercept + four purpose shares`,
/// with the non-home `other` share dropped as the reference category (the
/// five shares sum to one, so all five cannot sit next to an intercept).
pub fn purpose_regression<T: Scalar>(
    areas: &[AreaProfile<T>],
    ridership_weighted: bool,
) -> Result<RegressionResult<T>, StatsError> {
    check_area_count(areas)?;
    let n = areas.len();
    let columns: Vec<Vec<T>> = vec![
        vec![T::one(); n],
        areas.iter().map(|a| a.purposes.home_work).collect(),
        areas.iter().map(|a| a.purposes.home_other).collect(),
        areas.iter().map(|a| a.purposes.home_social).collect(),
        areas.iter().map(|a| a.purposes.home_school).collect(),
    ];
    let mut names = vec![INTERCEPT_LABEL.to_string()];
    names.extend(PURPOSE_LABELS.iter().map(|s| s.to_string()));
    let response = areas.iter().map(|a| a.low_income_share).collect();
    let mut design = DesignMatrix::new(geoids(areas), names, columns, response)?;
    if ridership_weighted {
        design = design.with_weights(ridership_weights(areas))?;
    }
    ols_fit(&design)
}

/// Metric field keys used to name the reversed regression outputs.
pub const METRIC_KEYS: [&str; 5] = [
    "time_per_mile",
    "transfers_per_mile",
    "transfer_wait_minutes",
    "network_miles",
    "rail_share",
];

/// Reversed-direction simple regressions, one per convenience measure:
/// `metric ~ intercept + low_income_share`.
pub fn reversed_regressions<T: Scalar>(
    areas: &[AreaProfile<T>],
    ridership_weighted: bool,
) -> Result<Vec<(String, RegressionResult<T>)>, StatsError> {
    check_area_count(areas)?;
    let n = areas.len();
    let lis: Vec<T> = areas.iter().map(|a| a.low_income_share).collect();
    let mut out = Vec::with_capacity(METRIC_KEYS.len());
    for key in METRIC_KEYS {
        let response: Vec<T> = areas
            .iter()
            .map(|a| match key {
                "time_per_mile" => a.metrics.time_per_mile,
                "transfers_per_mile" => a.metrics.transfers_per_mile,
                "transfer_wait_minutes" => a.metrics.transfer_wait_minutes,
                "network_miles" => a.metrics.network_miles,
                _ => a.metrics.rail_share,
            })
            .collect();
        let mut design = DesignMatrix::new(
            geoids(areas),
            vec![INTERCEPT_LABEL.to_string(), "Low-Income Share".to_string()],
            vec![vec![T::one(); n], lis.clone()],
            response,
        )?;
        if ridership_weighted {
            design = design.with_weights(ridership_weights(areas))?;
        }
        out.push((key.to_string(), ols_fit(&design)?));
    }
    Ok(out)
}
