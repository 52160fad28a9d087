//! Deterministic output rendering: fixed 6-significant-digit numbers, atomic
//! file writes, and the CSV/GeoJSON/plain-table formats the pipeline emits.

use std::path::Path;

use crate::scalar::Scalar;
use crate::spatial::AreaProfile;
use crate::stats::RegressionResult;

/// Significant digits used for every number in report outputs.
pub const REPORT_SIG_DIGITS: usize = 6;

/// Format with `sig` significant digits, `%g`-style: fixed notation for
/// moderate exponents, scientific otherwise, trailing zeros trimmed.
pub fn fmt_sig(value: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if value.is_nan() {
        return "NaN".to_string();
    }
    if value.is_infinite() {
        return if value > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if value == 0.0 {
        return "0".to_string();
    }
    let formatted = format!("{:.*e}", sig - 1, value);
    let (mantissa, exp) = formatted.split_once('e').expect("exponent part");
    let exp: i32 = exp.parse().expect("numeric exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if negative { "-" } else { "" };

    let body = if exp >= -4 && (exp as i64) < sig as i64 {
        if exp >= 0 {
            let split = (exp as usize) + 1;
            let int_part = &digits[..split];
            let frac = digits[split..].trim_end_matches('0');
            if frac.is_empty() {
                int_part.to_string()
            } else {
                format!("{int_part}.{frac}")
            }
        } else {
            let zeros = "0".repeat((-exp - 1) as usize);
            let frac = format!("{zeros}{digits}");
            let frac = frac.trim_end_matches('0');
            format!("0.{frac}")
        }
    } else {
        let head = &digits[..1];
        let tail = digits[1..].trim_end_matches('0');
        if tail.is_empty() {
            format!("{head}e{exp}")
        } else {
            format!("{head}.{tail}e{exp}")
        }
    };
    format!("{sign}{body}")
}

/// Format a scalar with the report precision.
pub fn fmt_report<T: Scalar>(value: T) -> String {
    fmt_sig(value.to_f64().unwrap_or(f64::NAN), REPORT_SIG_DIGITS)
}

/// Round to the report precision, for numbers embedded in GeoJSON.
pub fn round_report<T: Scalar>(value: T) -> f64 {
    let v = value.to_f64().unwrap_or(f64::NAN);
    if !v.is_finite() {
        return 0.0;
    }
    fmt_sig(v, REPORT_SIG_DIGITS).parse().unwrap_or(v)
}

/// Write a file atomically: temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)
}

/// Significance stars at the conventional 0.05 / 0.01 / 0.001 levels.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

fn fmt_p(p: f64) -> String {
    // R-style floor for vanishing p-values
    if p < 2.2e-16 {
        "< 2.2e-16".to_string()
    } else {
        fmt_sig(p, REPORT_SIG_DIGITS)
    }
}

/// The area-profile CSV header.
pub const AREA_CSV_HEADER: &str = "geoid,level,ridership,time_per_mile,transfers_per_mile,\
transfer_wait_minutes,network_miles,rail_share,low_income_share,p_home_work,p_home_other,\
p_other,p_home_social,p_home_school,income_class,n_stops,assigned_stops";

pub fn area_profiles_csv<T: Scalar>(profiles: &[AreaProfile<T>]) -> String {
    let mut out = String::from(AREA_CSV_HEADER);
    out.push('\n');
    for p in profiles {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            p.geoid,
            p.level,
            p.ridership,
            fmt_report(p.metrics.time_per_mile),
            fmt_report(p.metrics.transfers_per_mile),
            fmt_report(p.metrics.transfer_wait_minutes),
            fmt_report(p.metrics.network_miles),
            fmt_report(p.metrics.rail_share),
            fmt_report(p.low_income_share),
            fmt_report(p.purposes.home_work),
            fmt_report(p.purposes.home_other),
            fmt_report(p.purposes.other_nonhome),
            fmt_report(p.purposes.home_social),
            fmt_report(p.purposes.home_school),
            p.income_class,
            p.assigned_stops.len(),
            p.assigned_stops.join(";"),
        ));
    }
    out
}

/// GeoJSON FeatureCollection carrying the computed choropleth attributes on
/// the source geometries. Property keys are alphabetical and numbers are
/// pre-rounded, so output bytes are deterministic.
pub fn area_profiles_geojson<T: Scalar>(
    profiles: &[AreaProfile<T>],
    geometries: &std::collections::BTreeMap<String, serde_json::Value>,
) -> String {
    let features: Vec<serde_json::Value> = profiles
        .iter()
        .filter_map(|p| {
            let geometry = geometries.get(&p.geoid)?;
            Some(serde_json::json!({
                "type": "Feature",
                "properties": {
                    "geoid": p.geoid,
                    "level": p.level.as_str(),
                    "ridership": p.ridership,
                    "time_per_mile": round_report(p.metrics.time_per_mile),
                    "transfers_per_mile": round_report(p.metrics.transfers_per_mile),
                    "transfer_wait_minutes": round_report(p.metrics.transfer_wait_minutes),
                    "network_miles": round_report(p.metrics.network_miles),
                    "rail_share": round_report(p.metrics.rail_share),
                    "low_income_share": round_report(p.low_income_share),
                    "income_class": p.income_class.as_str(),
                    "n_stops": p.assigned_stops.len(),
                },
                "geometry": geometry,
            }))
        })
        .collect();
    let doc = serde_json::json!({"type": "FeatureCollection", "features": features});
    serde_json::to_string_pretty(&doc).expect("geojson serialization")
}

/// Regression result as CSV: coefficient rows, then summary rows.
pub fn regression_csv<T: Scalar>(result: &RegressionResult<T>) -> String {
    let mut out = String::from("variable,parameter,std_error,t_value,p_value\n");
    for row in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            csv_quote(&row.name),
            fmt_report(row.coefficient),
            fmt_report(row.std_error),
            fmt_report(row.t_value),
            fmt_report(row.p_value),
        ));
    }
    out.push_str(&format!("R-squared,{},,,\n", fmt_report(result.r_squared)));
    out.push_str(&format!(
        "Adjusted R-squared,{},,,\n",
        fmt_report(result.adjusted_r_squared)
    ));
    out.push_str(&format!("Observations,{},,,\n", result.n));
    out.push_str(&format!(
        "Degrees of Freedom,{},,,\n",
        result.degrees_of_freedom
    ));
    out
}

fn csv_quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Aligned plain-text table in the familiar journal layout: explanatory
/// variables, parameter, t-value, p-value with significance stars.
pub fn regression_table<T: Scalar>(title: &str, result: &RegressionResult<T>) -> String {
    let name_width = result
        .rows
        .iter()
        .map(|r| r.name.len())
        .chain(["Explanatory Variables".len()])
        .max()
        .unwrap_or(24)
        + 2;
    let mut out = String::new();
    out.push_str(title);
    out.push('\n');
    out.push_str(&format!(
        "{:<name_width$}{:>14}{:>14}{:>16}\n",
        "Explanatory Variables", "Parameter", "t-value", "p-value"
    ));
    out.push_str(&"-".repeat(name_width + 44));
    out.push('\n');
    for row in &result.rows {
        let p = row.p_value.to_f64().unwrap_or(f64::NAN);
        out.push_str(&format!(
            "{:<name_width$}{:>14}{:>14}{:>16}{}\n",
            row.name,
            fmt_report(row.coefficient),
            fmt_report(row.t_value),
            fmt_p(p),
            significance_stars(p),
        ));
    }
    out.push_str(&"-".repeat(name_width + 44));
    out.push('\n');
    out.push_str(&format!(
        "Adjusted R-squared: {}    R-squared: {}    n = {}\n",
        fmt_report(result.adjusted_r_squared),
        fmt_report(result.r_squared),
        result.n,
    ));
    out.push_str("Significance: *p <0.05, **p <0.01, ***p <0.001\n");
    out
}
