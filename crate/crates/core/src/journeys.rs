//! Ride-leg ingestion, journey linking, and per-journey convenience metrics.
//!
//! Fare-system OD data is dirty; anything violating an invariant is
//! quarantined into a rejects report with a machine-readable reason instead
//! of aborting the pipeline.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demographics::DemographicShares;
use crate::gtfs::{DistanceError, Mode, TransitNetwork};
use crate::scalar::Scalar;

/// One ride on one vehicle: a single leg of a passenger journey.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RideLeg {
    pub passenger_id: String,
    pub journey_id: String,
    pub trip_id: String,
    pub route_id: String,
    pub mode: Mode,
    pub board_stop: String,
    pub alight_stop: String,
    /// Civil timestamps as seconds since the Unix epoch.
    pub board_time: i64,
    pub alight_time: i64,
}

/// A linked passenger journey: ordered legs plus time-derived fields.
/// Distance-derived fields need the network and live on [`ConvenienceMetrics`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Journey<T> {
    pub id: String,
    pub legs: Vec<RideLeg>,
    pub n_transfers: usize,
    pub in_vehicle_minutes: T,
    pub transfer_wait_minutes: T,
    pub origin_stop: String,
}

/// The journey-level service-quality measures, normalized by network distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvenienceMetrics<T> {
    pub time_per_mile: T,
    pub transfers_per_mile: T,
    pub transfer_wait_minutes: T,
    pub network_miles: T,
    pub rail_share: T,
}

impl<T: Scalar> ConvenienceMetrics<T> {
    pub(crate) fn zero() -> Self {
        ConvenienceMetrics {
            time_per_mile: T::zero(),
            transfers_per_mile: T::zero(),
            transfer_wait_minutes: T::zero(),
            network_miles: T::zero(),
            rail_share: T::zero(),
        }
    }
}

/// Why a row or journey was quarantined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Row could not be split into the expected fields.
    MalformedRow,
    /// Unparseable board or alight timestamp.
    BadTimestamp,
    /// Alight time earlier than board time.
    TimeOrder,
    /// Board and alight stop identical.
    SameStop,
    /// Mode not `bus` or `rail`.
    BadMode,
    /// Empty journey, passenger, trip, or stop identifier.
    MissingField,
    /// Consecutive legs overlap in time after sorting.
    LegOverlap,
    /// Legs of one journey carry different passenger ids.
    PassengerMismatch,
    /// Leg references a trip absent from the network.
    TripLookup,
    /// Leg's stop is not on the referenced trip.
    StopNotOnTrip,
    /// Alight stop does not follow board stop on the trip.
    LegOrder,
    /// Leg or journey spans zero network distance.
    ZeroDistance,
}

impl RejectReason {
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::MalformedRow => "malformed_row",
            RejectReason::BadTimestamp => "bad_timestamp",
            RejectReason::TimeOrder => "time_order",
            RejectReason::SameStop => "same_stop",
            RejectReason::BadMode => "bad_mode",
            RejectReason::MissingField => "missing_field",
            RejectReason::LegOverlap => "leg_overlap",
            RejectReason::PassengerMismatch => "passenger_mismatch",
            RejectReason::TripLookup => "trip_lookup",
            RejectReason::StopNotOnTrip => "stop_not_on_trip",
            RejectReason::LegOrder => "leg_order",
            RejectReason::ZeroDistance => "zero_distance",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One rejected journey (or unattributable row) and the first reason hit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub journey_id: String,
    pub reason: RejectReason,
}

#[derive(Debug, Error)]
pub enum LegIngestError {
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

/// Outcome of [`load_legs`]: validated legs plus row-level rejects.
#[derive(Debug, Clone, Default)]
pub struct LegLoad {
    pub legs: Vec<RideLeg>,
    pub rejects: Vec<Reject>,
}

const LEG_COLUMNS: [&str; 9] = [
    "passenger_id",
    "journey_id",
    "trip_id",
    "route_id",
    "mode",
    "board_stop",
    "alight_stop",
    "board_time",
    "alight_time",
];

/// Parse an ISO-8601 timestamp; offset-less values are taken as UTC.
pub fn parse_timestamp(value: &str) -> Option<i64> {
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(value) {
        return Some(dt.timestamp());
    }
    chrono::NaiveDateTime::parse_from_str(value, "%Y-%m-%dT%H:%M:%S")
        .ok()
        .map(|dt| dt.and_utc().timestamp())
}

pub fn format_timestamp(epoch_secs: i64) -> String {
    chrono::DateTime::from_timestamp(epoch_secs, 0)
        .expect("timestamp in range")
        .naive_utc()
        .format("%Y-%m-%dT%H:%M:%S")
        .to_string()
}

/// Load a ride-leg CSV. Rows violating leg invariants become rejects keyed by
/// their journey id; rows where even the journey id is unreadable are keyed
/// `#row<N>` so the accounting still balances.
pub fn load_legs(path: impl AsRef<Path>) -> Result<LegLoad, LegIngestError> {
    let path = path.as_ref();
    let file_name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| LegIngestError::Io {
        file: file_name.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let headers = reader.headers().map_err(|source| LegIngestError::Csv {
        file: file_name.clone(),
        source,
    })?;
    let mut col = BTreeMap::new();
    for (i, h) in headers.iter().enumerate() {
        col.insert(h.trim().to_string(), i);
    }
    let mut idx = [0usize; 9];
    for (slot, name) in idx.iter_mut().zip(LEG_COLUMNS) {
        *slot = *col
            .get(name)
            .ok_or_else(|| LegIngestError::MalformedHeader {
                file: file_name.clone(),
                column: name.to_string(),
            })?;
    }

    let mut out = LegLoad::default();
    for (row_no, record) in reader.records().enumerate() {
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                out.rejects.push(Reject {
                    journey_id: format!("#row{}", row_no + 1),
                    reason: RejectReason::MalformedRow,
                });
                continue;
            }
        };
        let get = |i: usize| record.get(idx[i]).unwrap_or("").trim().to_string();
        let journey_id = get(1);
        let journey_key = if journey_id.is_empty() {
            format!("#row{}", row_no + 1)
        } else {
            journey_id.clone()
        };
        let reject = |reason: RejectReason, out: &mut LegLoad| {
            out.rejects.push(Reject {
                journey_id: journey_key.clone(),
                reason,
            });
        };
        if record.len() < LEG_COLUMNS.len() {
            reject(RejectReason::MalformedRow, &mut out);
            continue;
        }
        let (passenger_id, trip_id, route_id) = (get(0), get(2), get(3));
        let (board_stop, alight_stop) = (get(5), get(6));
        if journey_id.is_empty()
            || passenger_id.is_empty()
            || trip_id.is_empty()
            || route_id.is_empty()
            || board_stop.is_empty()
            || alight_stop.is_empty()
        {
            reject(RejectReason::MissingField, &mut out);
            continue;
        }
        let mode = match get(4).parse::<Mode>() {
            Ok(m) => m,
            Err(_) => {
                reject(RejectReason::BadMode, &mut out);
                continue;
            }
        };
        let board_time = match parse_timestamp(&get(7)) {
            Some(t) => t,
            None => {
                reject(RejectReason::BadTimestamp, &mut out);
                continue;
            }
        };
        let alight_time = match parse_timestamp(&get(8)) {
            Some(t) => t,
            None => {
                reject(RejectReason::BadTimestamp, &mut out);
                continue;
            }
        };
        if alight_time < board_time {
            reject(RejectReason::TimeOrder, &mut out);
            continue;
        }
        if board_stop == alight_stop {
            reject(RejectReason::SameStop, &mut out);
            continue;
        }
        out.legs.push(RideLeg {
            passenger_id,
            journey_id,
            trip_id,
            route_id,
            mode,
            board_stop,
            alight_stop,
            board_time,
            alight_time,
        });
    }
    Ok(out)
}

fn seconds_to_minutes<T: Scalar>(secs: i64) -> T {
    T::from_f64_const(secs as f64 / 60.0)
}

/// Group validated legs into journeys. Journeys whose sorted legs overlap in
/// time, or whose legs disagree on the passenger, are rejected.
pub fn link_journeys<T: Scalar>(legs: &[RideLeg]) -> (Vec<Journey<T>>, Vec<Reject>) {
    let mut groups: BTreeMap<String, Vec<RideLeg>> = BTreeMap::new();
    for leg in legs {
        groups
            .entry(leg.journey_id.clone())
            .or_default()
            .push(leg.clone());
    }
    let mut journeys = Vec::new();
    let mut rejects = Vec::new();
    'group: for (id, mut group) in groups {
        group.sort_by(|a, b| {
            (a.board_time, a.alight_time, a.trip_id.clone()).cmp(&(
                b.board_time,
                b.alight_time,
                b.trip_id.clone(),
            ))
        });
        if group
            .iter()
            .any(|l| l.passenger_id != group[0].passenger_id)
        {
            rejects.push(Reject {
                journey_id: id,
                reason: RejectReason::PassengerMismatch,
            });
            continue;
        }
        let mut in_vehicle_secs = 0i64;
        let mut wait_secs = 0i64;
        for (i, leg) in group.iter().enumerate() {
            in_vehicle_secs += leg.alight_time - leg.board_time;
            if i > 0 {
                let gap = leg.board_time - group[i - 1].alight_time;
                if gap < 0 {
                    rejects.push(Reject {
                        journey_id: id,
                        reason: RejectReason::LegOverlap,
                    });
                    continue 'group;
                }
                wait_secs += gap;
            }
        }
        journeys.push(Journey {
            id,
            n_transfers: group.len() - 1,
            in_vehicle_minutes: seconds_to_minutes(in_vehicle_secs),
            transfer_wait_minutes: seconds_to_minutes(wait_secs),
            origin_stop: group[0].board_stop.clone(),
            legs: group,
        });
    }
    (journeys, rejects)
}

/// Switches that change how metrics are derived; defaults follow the headline
/// definitions (transfer wait in minutes, unnormalized).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsOptions {
    /// Report transfer wait per network mile instead of raw minutes.
    pub normalize_transfer_wait: bool,
}

/// Compute one journey's convenience metrics against the network.
pub fn journey_metrics<T: Scalar>(
    journey: &Journey<T>,
    network: &TransitNetwork<T>,
    options: MetricsOptions,
) -> Result<ConvenienceMetrics<T>, DistanceError> {
    let mut network_miles = T::zero();
    let mut rail_miles = T::zero();
    for leg in &journey.legs {
        let miles = network.leg_distance(&leg.trip_id, &leg.board_stop, &leg.alight_stop)?;
        network_miles = network_miles + miles;
        if leg.mode == Mode::Rail {
            rail_miles = rail_miles + miles;
        }
    }
    if network_miles <= T::zero() {
        // unreachable with leg_distance's positivity guarantee; kept as a guard
        return Err(DistanceError::DegenerateSpan {
            trip_id: journey.legs[0].trip_id.clone(),
            board: journey.origin_stop.clone(),
            alight: journey.legs.last().unwrap().alight_stop.clone(),
        });
    }
    let transfer_wait = if options.normalize_transfer_wait {
        journey.transfer_wait_minutes / network_miles
    } else {
        journey.transfer_wait_minutes
    };
    Ok(ConvenienceMetrics {
        time_per_mile: journey.in_vehicle_minutes / network_miles,
        transfers_per_mile: T::from_usize_const(journey.n_transfers) / network_miles,
        transfer_wait_minutes: transfer_wait,
        network_miles,
        rail_share: rail_miles / network_miles,
    })
}

fn reason_for(err: &DistanceError) -> RejectReason {
    match err {
        DistanceError::TripNotFound(_) => RejectReason::TripLookup,
        DistanceError::StopNotOnTrip { .. } => RejectReason::StopNotOnTrip,
        DistanceError::OrderViolation { .. } => RejectReason::LegOrder,
        DistanceError::DegenerateSpan { .. } => RejectReason::ZeroDistance,
    }
}

/// A journey paired with its computed metrics.
pub type ScoredJourney<T> = (Journey<T>, ConvenienceMetrics<T>);

/// Metrics for every journey that resolves against the network; failures
/// become rejects.
pub fn compute_metrics<T: Scalar>(
    journeys: Vec<Journey<T>>,
    network: &TransitNetwork<T>,
    options: MetricsOptions,
) -> (Vec<ScoredJourney<T>>, Vec<Reject>) {
    let mut scored = Vec::with_capacity(journeys.len());
    let mut rejects = Vec::new();
    for journey in journeys {
        match journey_metrics(&journey, network, options) {
            Ok(m) => scored.push((journey, m)),
            Err(e) => rejects.push(Reject {
                journey_id: journey.id.clone(),
                reason: reason_for(&e),
            }),
        }
    }
    (scored, rejects)
}

/// Per-origin-stop aggregate: journey count plus unweighted metric means,
/// with demographics attached later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopProfile<T> {
    pub ridership: u64,
    pub metrics: ConvenienceMetrics<T>,
    pub demographics: Option<DemographicShares<T>>,
}

/// Aggregate scored journeys by origin stop. Each journey counts once;
/// ridership weighting happens later, at the census-area step.
pub fn stop_profiles<T: Scalar>(scored: &[ScoredJourney<T>]) -> BTreeMap<String, StopProfile<T>> {
    let mut sums: BTreeMap<String, (u64, ConvenienceMetrics<T>)> = BTreeMap::new();
    for (journey, metrics) in scored {
        let entry = sums
            .entry(journey.origin_stop.clone())
            .or_insert((0, ConvenienceMetrics::zero()));
        entry.0 += 1;
        entry.1.time_per_mile = entry.1.time_per_mile + metrics.time_per_mile;
        entry.1.transfers_per_mile = entry.1.transfers_per_mile + metrics.transfers_per_mile;
        entry.1.transfer_wait_minutes =
            entry.1.transfer_wait_minutes + metrics.transfer_wait_minutes;
        entry.1.network_miles = entry.1.network_miles + metrics.network_miles;
        entry.1.rail_share = entry.1.rail_share + metrics.rail_share;
    }
    sums.into_iter()
        .map(|(stop, (count, sum))| {
            let n = T::from_f64_const(count as f64);
            (
                stop,
                StopProfile {
                    ridership: count,
                    metrics: ConvenienceMetrics {
                        time_per_mile: sum.time_per_mile / n,
                        transfers_per_mile: sum.transfers_per_mile / n,
                        transfer_wait_minutes: sum.transfer_wait_minutes / n,
                        network_miles: sum.network_miles / n,
                        rail_share: sum.rail_share / n,
                    },
                    demographics: None,
                },
            )
        })
        .collect()
}
