//! On-board survey ingestion and the spreading of route-level demographics
//! onto stops.
//!
//! Rail responses arrive aggregated by station and are used directly; bus
//! responses arrive aggregated by route and are spread to every stop the
//! route serves, combining overlapping routes by a respondent-weighted mean.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gtfs::TransitNetwork;
use crate::scalar::Scalar;

/// Household income below this many dollars marks a rider low-income;
/// 60% of the service-area median. Documentation only, never computed on.
pub const DEFAULT_LOW_INCOME_THRESHOLD_DOLLARS: f64 = 43_500.0;

/// Trip-purpose share breakdown; the five categories partition each row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurposeShares<T> {
    pub home_work: T,
    pub home_other: T,
    pub other_nonhome: T,
    pub home_social: T,
    pub home_school: T,
}

impl<T: Scalar> PurposeShares<T> {
    pub fn sum(&self) -> T {
        self.home_work + self.home_other + self.other_nonhome + self.home_social + self.home_school
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemographicShares<T> {
    pub low_income_share: T,
    pub purposes: PurposeShares<T>,
    pub respondent_count: u64,
}

/// Survey aggregates keyed by rail station and bus route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyTable<T> {
    pub rail_rows: BTreeMap<String, DemographicShares<T>>,
    pub bus_rows: BTreeMap<String, DemographicShares<T>>,
    pub low_income_threshold_dollars: f64,
}

impl<T> Default for SurveyTable<T> {
    fn default() -> Self {
        SurveyTable {
            rail_rows: BTreeMap::new(),
            bus_rows: BTreeMap::new(),
            low_income_threshold_dollars: DEFAULT_LOW_INCOME_THRESHOLD_DOLLARS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurveyRejectReason {
    MalformedRow,
    BadNumber,
    /// A share lies outside [0, 1].
    ShareRange,
    /// Purpose shares fail to sum to 1 within 1e-6.
    PurposeSum,
    /// Fewer than one respondent.
    NoRespondents,
}

impl SurveyRejectReason {
    pub fn code(&self) -> &'static str {
        match self {
            SurveyRejectReason::MalformedRow => "malformed_row",
            SurveyRejectReason::BadNumber => "bad_number",
            SurveyRejectReason::ShareRange => "share_range",
            SurveyRejectReason::PurposeSum => "purpose_sum",
            SurveyRejectReason::NoRespondents => "no_respondents",
        }
    }
}

impl fmt::Display for SurveyRejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyReject {
    /// The stop or route key of the offending row.
    pub key: String,
    pub reason: SurveyRejectReason,
}

#[derive(Debug, Error)]
pub enum SurveyIngestError {
    #[error("reading {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error("{file} has a malformed header: missing column {column}")]
    MalformedHeader { file: String, column: String },
}

const SHARE_COLUMNS: [&str; 6] = [
    "low_income_share",
    "p_home_work",
    "p_home_other",
    "p_other",
    "p_home_social",
    "p_home_school",
];

fn load_one<T: Scalar>(
    path: &Path,
    key_column: &str,
    rows: &mut BTreeMap<String, DemographicShares<T>>,
    rejects: &mut Vec<SurveyReject>,
) -> Result<(), SurveyIngestError> {
    let file_name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| SurveyIngestError::Io {
        file: file_name.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let headers = reader.headers().map_err(|source| SurveyIngestError::Csv {
        file: file_name.clone(),
        source,
    })?;
    let col: BTreeMap<String, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_string(), i))
        .collect();
    let need = |name: &str| {
        col.get(name)
            .copied()
            .ok_or_else(|| SurveyIngestError::MalformedHeader {
                file: file_name.clone(),
                column: name.to_string(),
            })
    };
    let c_key = need(key_column)?;
    let c_respondents = need("respondents")?;
    let c_shares: Vec<usize> = SHARE_COLUMNS
        .iter()
        .map(|name| need(name))
        .collect::<Result<_, _>>()?;

    for (row_no, record) in reader.records().enumerate() {
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                rejects.push(SurveyReject {
                    key: format!("#row{}", row_no + 1),
                    reason: SurveyRejectReason::MalformedRow,
                });
                continue;
            }
        };
        let key = record.get(c_key).unwrap_or("").trim().to_string();
        if key.is_empty() {
            rejects.push(SurveyReject {
                key: format!("#row{}", row_no + 1),
                reason: SurveyRejectReason::MalformedRow,
            });
            continue;
        }
        let respondents: u64 = match record.get(c_respondents).unwrap_or("").trim().parse() {
            Ok(v) => v,
            Err(_) => {
                rejects.push(SurveyReject {
                    key,
                    reason: SurveyRejectReason::BadNumber,
                });
                continue;
            }
        };
        if respondents == 0 {
            rejects.push(SurveyReject {
                key,
                reason: SurveyRejectReason::NoRespondents,
            });
            continue;
        }
        let mut shares = [0.0f64; 6];
        let mut bad = false;
        for (slot, &c) in shares.iter_mut().zip(&c_shares) {
            match record.get(c).unwrap_or("").trim().parse::<f64>() {
                Ok(v) => *slot = v,
                Err(_) => {
                    bad = true;
                    break;
                }
            }
        }
        if bad {
            rejects.push(SurveyReject {
                key,
                reason: SurveyRejectReason::BadNumber,
            });
            continue;
        }
        if shares.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
            rejects.push(SurveyReject {
                key,
                reason: SurveyRejectReason::ShareRange,
            });
            continue;
        }
        let purpose_sum: f64 = shares[1..].iter().sum();
        if (purpose_sum - 1.0).abs() > 1e-6 {
            rejects.push(SurveyReject {
                key,
                reason: SurveyRejectReason::PurposeSum,
            });
            continue;
        }
        rows.insert(
            key,
            DemographicShares {
                low_income_share: T::from_f64_const(shares[0]),
                purposes: PurposeShares {
                    home_work: T::from_f64_const(shares[1]),
                    home_other: T::from_f64_const(shares[2]),
                    other_nonhome: T::from_f64_const(shares[3]),
                    home_social: T::from_f64_const(shares[4]),
                    home_school: T::from_f64_const(shares[5]),
                },
                respondent_count: respondents,
            },
        );
    }
    Ok(())
}

/// Load the rail (station-keyed) and bus (route-keyed) survey files.
pub fn load_survey<T: Scalar>(
    rail_path: impl AsRef<Path>,
    bus_path: impl AsRef<Path>,
) -> Result<(SurveyTable<T>, Vec<SurveyReject>), SurveyIngestError> {
    let mut table = SurveyTable::default();
    let mut rejects = Vec::new();
    load_one(
        rail_path.as_ref(),
        "stop_id",
        &mut table.rail_rows,
        &mut rejects,
    )?;
    load_one(
        bus_path.as_ref(),
        "route_id",
        &mut table.bus_rows,
        &mut rejects,
    )?;
    Ok((table, rejects))
}

/// A stop that no surveyed route or station covers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no demographics for stop {0}")]
pub struct NoDemographics(pub String);

fn weighted_mean_shares<T: Scalar>(rows: &[&DemographicShares<T>]) -> DemographicShares<T> {
    if rows.len() == 1 {
        return *rows[0];
    }
    let mut total: u64 = 0;
    let mut lis = T::zero();
    let mut p = PurposeShares {
        home_work: T::zero(),
        home_other: T::zero(),
        other_nonhome: T::zero(),
        home_social: T::zero(),
        home_school: T::zero(),
    };
    for row in rows {
        let w = T::from_f64_const(row.respondent_count as f64);
        total += row.respondent_count;
        lis = lis + w * row.low_income_share;
        p.home_work = p.home_work + w * row.purposes.home_work;
        p.home_other = p.home_other + w * row.purposes.home_other;
        p.other_nonhome = p.other_nonhome + w * row.purposes.other_nonhome;
        p.home_social = p.home_social + w * row.purposes.home_social;
        p.home_school = p.home_school + w * row.purposes.home_school;
    }
    let denom = T::from_f64_const(total as f64);
    DemographicShares {
        low_income_share: lis / denom,
        purposes: PurposeShares {
            home_work: p.home_work / denom,
            home_other: p.home_other / denom,
            other_nonhome: p.other_nonhome / denom,
            home_social: p.home_social / denom,
            home_school: p.home_school / denom,
        },
        respondent_count: total,
    }
}

/// Demographic shares for one stop: the station's own rail row when present
/// (direct measurement wins), otherwise the respondent-weighted mean over the
/// surveyed bus routes serving the stop.
pub fn stop_shares<T: Scalar>(
    survey: &SurveyTable<T>,
    bus_routes_by_stop: &BTreeMap<String, BTreeSet<String>>,
    stop_id: &str,
) -> Result<DemographicShares<T>, NoDemographics> {
    if let Some(row) = survey.rail_rows.get(stop_id) {
        return Ok(*row);
    }
    let routes = bus_routes_by_stop.get(stop_id);
    let rows: Vec<&DemographicShares<T>> = routes
        .into_iter()
        .flatten()
        .filter_map(|route_id| survey.bus_rows.get(route_id))
        .collect();
    if rows.is_empty() {
        return Err(NoDemographics(stop_id.to_string()));
    }
    Ok(weighted_mean_shares(&rows))
}

/// Attach demographics to stop profiles in place; returns the stops left
/// uncovered, for the coverage report.
pub fn attach_demographics<T: Scalar>(
    profiles: &mut BTreeMap<String, crate::journeys::StopProfile<T>>,
    survey: &SurveyTable<T>,
    network: &TransitNetwork<T>,
) -> Vec<String> {
    let index = network.bus_routes_by_stop();
    let mut missing = Vec::new();
    for (stop_id, profile) in profiles.iter_mut() {
        match stop_shares(survey, &index, stop_id) {
            Ok(shares) => profile.demographics = Some(shares),
            Err(NoDemographics(id)) => missing.push(id),
        }
    }
    missing
}

/// Income classification of an area by its low-income ridership share.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncomeClass {
    HighIncome,
    Middle,
    LowIncome,
}

impl IncomeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            IncomeClass::HighIncome => "high_income",
            IncomeClass::Middle => "middle",
            IncomeClass::LowIncome => "low_income",
        }
    }
}

impl fmt::Display for IncomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Strict-inequality classification: under `low_cut` is high-income, over
/// `high_cut` is low-income, boundary values land in the middle band.
/// Defaults are `low_cut = 0.25`, `high_cut = 0.50`.
pub fn classify_income<T: Scalar>(low_income_share: T, low_cut: T, high_cut: T) -> IncomeClass {
    debug_assert!(T::zero() <= low_cut && low_cut < high_cut && high_cut <= T::one());
    if low_income_share < low_cut {
        IncomeClass::HighIncome
    } else if low_income_share > high_cut {
        IncomeClass::LowIncome
    } else {
        IncomeClass::Middle
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const RAIL_HEADER: &str = "stop_id,respondents,low_income_share,p_home_work,p_home_other,p_other,p_home_social,p_home_school\n";
    const BUS_HEADER: &str = "route_id,respondents,low_income_share,p_home_work,p_home_other,p_other,p_home_social,p_home_school\n";

    fn write_temp(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    fn shares(lis: f64, respondents: u64) -> DemographicShares<f64> {
        DemographicShares {
            low_income_share: lis,
            purposes: PurposeShares {
                home_work: 0.5,
                home_other: 0.2,
                other_nonhome: 0.1,
                home_social: 0.1,
                home_school: 0.1,
            },
            respondent_count: respondents,
        }
    }

    #[test]
    fn valid_rows_load() {
        let rail = write_temp(&format!("{RAIL_HEADER}S1,120,0.3,0.5,0.2,0.1,0.1,0.1\n"));
        let bus = write_temp(BUS_HEADER);
        let (table, rejects) = load_survey::<f64>(rail.path(), bus.path()).unwrap();
        assert!(rejects.is_empty());
        assert_eq!(table.rail_rows["S1"].low_income_share, 0.3);
        assert_eq!(table.rail_rows["S1"].respondent_count, 120);
        assert!(table.bus_rows.is_empty());
        assert_eq!(table.low_income_threshold_dollars, 43_500.0);
    }

    #[test]
    fn out_of_range_share_rejects() {
        let rail = write_temp(&format!("{RAIL_HEADER}S1,120,1.2,0.5,0.2,0.1,0.1,0.1\n"));
        let bus = write_temp(BUS_HEADER);
        let (table, rejects) = load_survey::<f64>(rail.path(), bus.path()).unwrap();
        assert!(table.rail_rows.is_empty());
        assert_eq!(rejects[0].reason, SurveyRejectReason::ShareRange);
        assert_eq!(rejects[0].key, "S1");
    }

    #[test]
    fn purpose_sum_off_by_more_than_epsilon_rejects() {
        let rail = write_temp(&format!("{RAIL_HEADER}S1,120,0.3,0.5,0.2,0.1,0.1,0.2\n"));
        let bus = write_temp(BUS_HEADER);
        let (_, rejects) = load_survey::<f64>(rail.path(), bus.path()).unwrap();
        assert_eq!(rejects[0].reason, SurveyRejectReason::PurposeSum);
    }

    #[test]
    fn multi_route_stop_takes_respondent_weighted_mean() {
        let mut survey = SurveyTable::default();
        survey.bus_rows.insert("R1".into(), shares(0.5, 100));
        survey.bus_rows.insert("R2".into(), shares(0.2, 300));
        let mut index = BTreeMap::new();
        index.insert(
            "S1".to_string(),
            BTreeSet::from(["R1".to_string(), "R2".to_string()]),
        );
        let got = stop_shares(&survey, &index, "S1").unwrap();
        assert!((got.low_income_share - 0.275).abs() < 1e-12);
        assert_eq!(got.respondent_count, 400);
    }

    #[test]
    fn rail_row_wins_over_bus_routes() {
        let mut survey = SurveyTable::default();
        survey.rail_rows.insert("S1".into(), shares(0.26, 50));
        survey.bus_rows.insert("R1".into(), shares(0.9, 1000));
        let mut index = BTreeMap::new();
        index.insert("S1".to_string(), BTreeSet::from(["R1".to_string()]));
        let got = stop_shares(&survey, &index, "S1").unwrap();
        assert_eq!(got.low_income_share, 0.26);
    }

    #[test]
    fn unsurveyed_stop_is_no_demographics() {
        let survey: SurveyTable<f64> = SurveyTable::default();
        let index = BTreeMap::new();
        assert_eq!(
            stop_shares(&survey, &index, "S1"),
            Err(NoDemographics("S1".to_string()))
        );
    }

    #[test]
    fn single_route_stops_all_carry_the_route_share() {
        let mut survey = SurveyTable::default();
        survey.bus_rows.insert("R1".into(), shares(0.42, 77));
        let mut index = BTreeMap::new();
        for stop in ["S1", "S2", "S3"] {
            index.insert(stop.to_string(), BTreeSet::from(["R1".to_string()]));
        }
        for stop in ["S1", "S2", "S3"] {
            let got = stop_shares(&survey, &index, stop).unwrap();
            assert_eq!(got.low_income_share, 0.42);
        }
    }

    #[test]
    fn spreading_is_idempotent() {
        let mut survey = SurveyTable::default();
        survey.bus_rows.insert("R1".into(), shares(0.5, 100));
        survey.bus_rows.insert("R2".into(), shares(0.2, 300));
        let mut index = BTreeMap::new();
        index.insert(
            "S1".to_string(),
            BTreeSet::from(["R1".to_string(), "R2".to_string()]),
        );

        let first = stop_shares(&survey, &index, "S1").unwrap();
        // materialize the spread value as a direct per-stop row and re-query
        let mut survey2 = SurveyTable::default();
        survey2.rail_rows.insert("S1".into(), first);
        let second = stop_shares(&survey2, &index, "S1").unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn income_classification_boundaries() {
        assert_eq!(classify_income(0.24, 0.25, 0.50), IncomeClass::HighIncome);
        assert_eq!(classify_income(0.25, 0.25, 0.50), IncomeClass::Middle);
        assert_eq!(classify_income(0.50, 0.25, 0.50), IncomeClass::Middle);
        assert_eq!(classify_income(0.51, 0.25, 0.50), IncomeClass::LowIncome);
    }

    #[test]
    fn income_classification_is_monotone() {
        let mut last = IncomeClass::HighIncome;
        for i in 0..=100 {
            let class = classify_income(i as f64 / 100.0, 0.25, 0.50);
            assert!(
                class >= last,
                "classification regressed at share {}",
                i as f64 / 100.0
            );
            last = class;
        }
    }
}
