//! Area-pair and period-pair comparisons.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::render::fmt_report;
use crate::scalar::Scalar;
use crate::spatial::AreaProfile;
use crate::stats::RegressionResult;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompareError {
    #[error("profiles are at different levels: {0} vs {1}")]
    LevelMismatch(String, String),
    #[error("regression specifications do not match: {0}")]
    SpecMismatch(String),
}

/// One metric's absolute and percent difference; percent is undefined when
/// the baseline is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison<T> {
    pub metric: String,
    pub a: T,
    pub b: T,
    pub difference: T,
    pub percent: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaComparison<T> {
    pub geoid_a: String,
    pub geoid_b: String,
    pub rows: Vec<MetricComparison<T>>,
}

fn diff_row<T: Scalar>(metric: &str, a: T, b: T) -> MetricComparison<T> {
    let difference = a - b;
    let percent = if b == T::zero() {
        None
    } else {
        Some(difference / b * T::from_f64_const(100.0))
    };
    MetricComparison {
        metric: metric.to_string(),
        a,
        b,
        difference,
        percent,
    }
}

/// Per-metric differences between two area profiles, `a` relative to `b`.
pub fn compare_areas<T: Scalar>(
    a: &AreaProfile<T>,
    b: &AreaProfile<T>,
) -> Result<AreaComparison<T>, CompareError> {
    if a.level != b.level {
        return Err(CompareError::LevelMismatch(
            a.level.to_string(),
            b.level.to_string(),
        ));
    }
    let rows = vec![
        diff_row(
            "time_per_mile",
            a.metrics.time_per_mile,
            b.metrics.time_per_mile,
        ),
        diff_row(
            "transfers_per_mile",
            a.metrics.transfers_per_mile,
            b.metrics.transfers_per_mile,
        ),
        diff_row(
            "transfer_wait_minutes",
            a.metrics.transfer_wait_minutes,
            b.metrics.transfer_wait_minutes,
        ),
        diff_row(
            "network_miles",
            a.metrics.network_miles,
            b.metrics.network_miles,
        ),
        diff_row("rail_share", a.metrics.rail_share, b.metrics.rail_share),
        diff_row("low_income_share", a.low_income_share, b.low_income_share),
        diff_row(
            "ridership",
            T::from_f64_const(a.ridership as f64),
            T::from_f64_const(b.ridership as f64),
        ),
    ];
    Ok(AreaComparison {
        geoid_a: a.geoid.clone(),
        geoid_b: b.geoid.clone(),
        rows,
    })
}

pub fn area_comparison_csv<T: Scalar>(cmp: &AreaComparison<T>) -> String {
    let mut out = String::from("metric,a,b,difference,percent\n");
    for row in &cmp.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.metric,
            fmt_report(row.a),
            fmt_report(row.b),
            fmt_report(row.difference),
            row.percent.map(fmt_report).unwrap_or_default(),
        ));
    }
    out
}

/// One coefficient's shift between two period runs, with both p-values
/// carried through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientComparison<T> {
    pub name: String,
    pub coefficient_1: T,
    pub coefficient_2: T,
    pub difference: T,
    pub std_error_1: T,
    pub std_error_2: T,
    pub p_value_1: T,
    pub p_value_2: T,
}

/// Compare one regression across two period runs. The regressor sets must
/// match exactly; callers verify the rest of the run configuration.
pub fn compare_periods<T: Scalar>(
    run1: &RegressionResult<T>,
    run2: &RegressionResult<T>,
) -> Result<Vec<CoefficientComparison<T>>, CompareError> {
    let names1: Vec<&str> = run1.rows.iter().map(|r| r.name.as_str()).collect();
    let names2: Vec<&str> = run2.rows.iter().map(|r| r.name.as_str()).collect();
    if names1 != names2 {
        return Err(CompareError::SpecMismatch(format!(
            "regressors [{}] vs [{}]",
            names1.join("; "),
            names2.join("; ")
        )));
    }
    Ok(run1
        .rows
        .iter()
        .zip(&run2.rows)
        .map(|(r1, r2)| CoefficientComparison {
            name: r1.name.clone(),
            coefficient_1: r1.coefficient,
            coefficient_2: r2.coefficient,
            difference: r1.coefficient - r2.coefficient,
            std_error_1: r1.std_error,
            std_error_2: r2.std_error,
            p_value_1: r1.p_value,
            p_value_2: r2.p_value,
        })
        .collect())
}

pub fn period_comparison_csv<T: Scalar>(rows: &[CoefficientComparison<T>]) -> String {
    let mut out =
        String::from("variable,coefficient_1,coefficient_2,difference,p_value_1,p_value_2\n");
    for row in rows {
        let name = if row.name.contains(',') {
            format!("\"{}\"", row.name)
        } else {
            row.name.clone()
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            name,
            fmt_report(row.coefficient_1),
            fmt_report(row.coefficient_2),
            fmt_report(row.difference),
            fmt_report(row.p_value_1),
            fmt_report(row.p_value_2),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demographics::{IncomeClass, PurposeShares};
    use crate::journeys::ConvenienceMetrics;
    use crate::spatial::AreaLevel;

    fn profile(geoid: &str, time_per_mile: f64, transfers_per_mile: f64) -> AreaProfile<f64> {
        AreaProfile {
            geoid: geoid.to_string(),
            level: AreaLevel::Tract,
            ridership: 100,
            metrics: ConvenienceMetrics {
                time_per_mile,
                transfers_per_mile,
                transfer_wait_minutes: 3.0,
                network_miles: 2.0,
                rail_share: 0.4,
            },
            low_income_share: 0.3,
            purposes: PurposeShares {
                home_work: 0.5,
                home_other: 0.2,
                other_nonhome: 0.1,
                home_social: 0.1,
                home_school: 0.1,
            },
            income_class: IncomeClass::Middle,
            assigned_stops: vec![],
        }
    }

    #[test]
    fn identical_profiles_have_zero_differences() {
        let a = profile("T1", 10.0, 0.5);
        let cmp = compare_areas(&a, &a.clone()).unwrap();
        for row in &cmp.rows {
            assert_eq!(row.difference, 0.0);
            assert_eq!(row.percent, Some(0.0));
        }
    }

    #[test]
    fn low_vs_high_income_travel_time_gap() {
        // 84 vs 43 min/mile: 41 more, about 95% higher
        let a = profile("T1", 84.0, 0.5);
        let b = profile("T2", 43.0, 0.5);
        let cmp = compare_areas(&a, &b).unwrap();
        let row = &cmp.rows[0];
        assert_eq!(row.metric, "time_per_mile");
        assert_eq!(row.difference, 41.0);
        let pct = row.percent.unwrap();
        assert!((pct - 95.348_837_209_302_32).abs() < 1e-9);
    }

    #[test]
    fn zero_baseline_reports_null_percent() {
        let a = profile("T1", 10.0, 0.5);
        let b = profile("T2", 10.0, 0.0);
        let cmp = compare_areas(&a, &b).unwrap();
        let row = cmp
            .rows
            .iter()
            .find(|r| r.metric == "transfers_per_mile")
            .unwrap();
        assert_eq!(row.percent, None);
        let csv = area_comparison_csv(&cmp);
        let line = csv
            .lines()
            .find(|l| l.starts_with("transfers_per_mile"))
            .unwrap();
        assert!(line.ends_with(','), "percent column empty: {line}");
    }

    #[test]
    fn level_mismatch_is_an_error() {
        let a = profile("T1", 10.0, 0.5);
        let mut b = profile("B1", 10.0, 0.5);
        b.level = AreaLevel::Block;
        assert!(matches!(
            compare_areas(&a, &b),
            Err(CompareError::LevelMismatch(_, _))
        ));
    }

    #[test]
    fn period_comparison_requires_matching_regressors() {
        use crate::stats::CoefficientRow;
        let mk = |names: &[&str], coefs: &[f64]| RegressionResult::<f64> {
            rows: names
                .iter()
                .zip(coefs)
                .map(|(n, c)| CoefficientRow {
                    name: n.to_string(),
                    coefficient: *c,
                    std_error: 0.1,
                    t_value: *c / 0.1,
                    p_value: 0.01,
                })
                .collect(),
            r_squared: 0.1,
            adjusted_r_squared: 0.09,
            n: 100,
            degrees_of_freedom: 98,
        };
        let r1 = mk(&["Intercept", "x"], &[0.68, 0.1]);
        let r2 = mk(&["Intercept", "x"], &[0.72, 0.1]);
        let rows = compare_periods(&r1, &r2).unwrap();
        assert!((rows[0].difference + 0.04).abs() < 1e-12);

        let r3 = mk(&["Intercept", "y"], &[0.72, 0.1]);
        assert!(matches!(
            compare_periods(&r1, &r3),
            Err(CompareError::SpecMismatch(_))
        ));
    }
}
