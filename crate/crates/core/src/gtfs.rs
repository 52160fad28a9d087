//! GTFS static-feed ingestion and in-network distances.
//!
//! A feed is reduced to the pieces the journey metrics need: stops, routes
//! with a bus/rail mode, and per-trip stop sequences carrying cumulative
//! distance in miles. Cumulative distances come from `shape_dist_traveled`
//! (meters) when every row of a trip has one, otherwise from chained
//! great-circle distances between consecutive stops.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{Scalar, EARTH_RADIUS_FEET, FEET_PER_MILE, METERS_PER_MILE};

/// Travel mode, derived from GTFS `route_type` (3 = bus; 0, 1, 2 = rail).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Bus,
    Rail,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Bus => write!(f, "bus"),
            Mode::Rail => write!(f, "rail"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bus" => Ok(Mode::Bus),
            "rail" => Ok(Mode::Rail),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop<T> {
    pub name: String,
    pub lat: T,
    pub lon: T,
    /// Rail when any rail trip serves the stop, bus otherwise.
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub short_name: String,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripStop<T> {
    pub stop_id: String,
    /// Distance travelled from the trip's first stop, in miles.
    pub cumulative_miles: T,
    pub arrival_secs: u32,
    pub departure_secs: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip<T> {
    pub route_id: String,
    pub stops: Vec<TripStop<T>>,
}

/// Immutable transit network; all lookups are pure reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitNetwork<T> {
    pub stops: BTreeMap<String, Stop<T>>,
    pub routes: BTreeMap<String, Route>,
    pub trips: BTreeMap<String, Trip<T>>,
    /// Mean stop coordinate, the origin for planar projection.
    pub region_origin: (T, T),
}

#[derive(Debug, Error)]
pub enum FeedError {
    #[error("missing required feed file {0}")]
    MissingFile(String),
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
    #[error("{file} is missing required column {column}")]
    MissingColumn { file: String, column: String },
    #[error("{file} row {row}: bad {column} value `{value}`")]
    BadValue {
        file: String,
        row: u64,
        column: String,
        value: String,
    },
    #[error("trip {trip_id} references unknown stop {stop_id}")]
    DanglingStop { trip_id: String, stop_id: String },
    #[error("trip {trip_id} references unknown route {route_id}")]
    UnknownRoute { trip_id: String, route_id: String },
    #[error("route {route_id} has unsupported route_type {route_type}")]
    UnsupportedRouteType {
        route_id: String,
        route_type: String,
    },
    #[error("trip {trip_id} has non-monotone shape_dist_traveled")]
    NonMonotoneDistance { trip_id: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DistanceError {
    #[error("trip {0} not in network")]
    TripNotFound(String),
    #[error("stop {stop_id} not on trip {trip_id}")]
    StopNotOnTrip { trip_id: String, stop_id: String },
    #[error("alighting at {alight} does not follow boarding at {board} on trip {trip_id}")]
    OrderViolation {
        trip_id: String,
        board: String,
        alight: String,
    },
    #[error("zero-length span from {board} to {alight} on trip {trip_id}")]
    DegenerateSpan {
        trip_id: String,
        board: String,
        alight: String,
    },
}

/// Great-circle distance between two (lat, lon) degree pairs, in miles.
pub fn great_circle_miles<T: Scalar>(lat1: T, lon1: T, lat2: T, lon2: T) -> T {
    let two = T::from_f64_const(2.0);
    let radius = T::from_f64_const(EARTH_RADIUS_FEET / FEET_PER_MILE);
    let to_rad = T::from_f64_const(std::f64::consts::PI / 180.0);
    let phi1 = lat1 * to_rad;
    let phi2 = lat2 * to_rad;
    let dphi = (lat2 - lat1) * to_rad;
    let dlambda = (lon2 - lon1) * to_rad;
    let s1 = (dphi / two).sin();
    let s2 = (dlambda / two).sin();
    let a = s1 * s1 + phi1.cos() * phi2.cos() * s2 * s2;
    two * radius * a.sqrt().min(T::one()).asin()
}

struct RawStopTime {
    trip_id: String,
    stop_id: String,
    sequence: u32,
    arrival_secs: u32,
    departure_secs: u32,
    shape_dist_m: Option<f64>,
}

fn open_reader(dir: &Path, name: &str) -> Result<csv::Reader<std::fs::File>, FeedError> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(FeedError::MissingFile(name.to_string()));
    }
    let file = std::fs::File::open(&path).map_err(|source| FeedError::Io {
        file: name.to_string(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file))
}

struct Columns {
    file: String,
    index: BTreeMap<String, usize>,
}

impl Columns {
    fn from_reader<R: std::io::Read>(
        file: &str,
        reader: &mut csv::Reader<R>,
    ) -> Result<Self, FeedError> {
        let headers = reader.headers().map_err(|source| FeedError::Csv {
            file: file.to_string(),
            source,
        })?;
        let index = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        Ok(Columns {
            file: file.to_string(),
            index,
        })
    }

    fn required(&self, column: &str) -> Result<usize, FeedError> {
        self.index
            .get(column)
            .copied()
            .ok_or_else(|| FeedError::MissingColumn {
                file: self.file.clone(),
                column: column.to_string(),
            })
    }

    fn optional(&self, column: &str) -> Option<usize> {
        self.index.get(column).copied()
    }
}

fn field(record: &csv::StringRecord, idx: usize) -> &str {
    record.get(idx).unwrap_or("").trim()
}

fn parse_gtfs_time(value: &str) -> Option<u32> {
    let mut parts = value.split(':');
    let h: u32 = parts.next()?.trim().parse().ok()?;
    let m: u32 = parts.next()?.trim().parse().ok()?;
    let s: u32 = parts.next()?.trim().parse().ok()?;
    if parts.next().is_some() || m > 59 || s > 59 {
        return None;
    }
    Some(h * 3600 + m * 60 + s)
}

/// Parse a GTFS directory (`stops.txt`, `routes.txt`, `trips.txt`,
/// `stop_times.txt`) into a validated [`TransitNetwork`].
pub fn parse_feed<T: Scalar>(dir: impl AsRef<Path>) -> Result<TransitNetwork<T>, FeedError> {
    let dir = dir.as_ref();

    // stops.txt
    let mut stops: BTreeMap<String, Stop<T>> = BTreeMap::new();
    {
        let file = "stops.txt";
        let mut reader = open_reader(dir, file)?;
        let cols = Columns::from_reader(file, &mut reader)?;
        let (c_id, c_lat, c_lon) = (
            cols.required("stop_id")?,
            cols.required("stop_lat")?,
            cols.required("stop_lon")?,
        );
        let c_name = cols.optional("stop_name");
        for (row_no, record) in reader.records().enumerate() {
            let record = record.map_err(|source| FeedError::Csv {
                file: file.to_string(),
                source,
            })?;
            let bad = |column: &str, value: &str| FeedError::BadValue {
                file: file.to_string(),
                row: row_no as u64 + 2,
                column: column.to_string(),
                value: value.to_string(),
            };
            let id = field(&record, c_id).to_string();
            if id.is_empty() {
                return Err(bad("stop_id", ""));
            }
            let lat_s = field(&record, c_lat);
            let lon_s = field(&record, c_lon);
            let lat: f64 = lat_s.parse().map_err(|_| bad("stop_lat", lat_s))?;
            let lon: f64 = lon_s.parse().map_err(|_| bad("stop_lon", lon_s))?;
            if !(-90.0..=90.0).contains(&lat) {
                return Err(bad("stop_lat", lat_s));
            }
            if !(-180.0..=180.0).contains(&lon) {
                return Err(bad("stop_lon", lon_s));
            }
            let name = c_name
                .map(|c| field(&record, c).to_string())
                .unwrap_or_default();
            stops.insert(
                id,
                Stop {
                    name,
                    lat: T::from_f64_const(lat),
                    lon: T::from_f64_const(lon),
                    mode: Mode::Bus,
                },
            );
        }
    }

    // routes.txt
    let mut routes: BTreeMap<String, Route> = BTreeMap::new();
    {
        let file = "routes.txt";
        let mut reader = open_reader(dir, file)?;
        let cols = Columns::from_reader(file, &mut reader)?;
        let (c_id, c_type) = (cols.required("route_id")?, cols.required("route_type")?);
        let c_short = cols.optional("route_short_name");
        let c_long = cols.optional("route_long_name");
        for record in reader.records() {
            let record = record.map_err(|source| FeedError::Csv {
                file: file.to_string(),
                source,
            })?;
            let id = field(&record, c_id).to_string();
            let type_s = field(&record, c_type).to_string();
            let mode = match type_s.as_str() {
                "0" | "1" | "2" => Mode::Rail,
                "3" => Mode::Bus,
                _ => {
                    return Err(FeedError::UnsupportedRouteType {
                        route_id: id,
                        route_type: type_s,
                    })
                }
            };
            let mut short_name = c_short
                .map(|c| field(&record, c).to_string())
                .unwrap_or_default();
            if short_name.is_empty() {
                short_name = c_long
                    .map(|c| field(&record, c).to_string())
                    .unwrap_or_default();
            }
            routes.insert(id, Route { short_name, mode });
        }
    }

    // trips.txt
    let mut trip_routes: BTreeMap<String, String> = BTreeMap::new();
    {
        let file = "trips.txt";
        let mut reader = open_reader(dir, file)?;
        let cols = Columns::from_reader(file, &mut reader)?;
        let (c_trip, c_route) = (cols.required("trip_id")?, cols.required("route_id")?);
        for record in reader.records() {
            let record = record.map_err(|source| FeedError::Csv {
                file: file.to_string(),
                source,
            })?;
            let trip_id = field(&record, c_trip).to_string();
            let route_id = field(&record, c_route).to_string();
            if !routes.contains_key(&route_id) {
                return Err(FeedError::UnknownRoute { trip_id, route_id });
            }
            trip_routes.insert(trip_id, route_id);
        }
    }

    // stop_times.txt
    let mut by_trip: BTreeMap<String, Vec<RawStopTime>> = BTreeMap::new();
    {
        let file = "stop_times.txt";
        let mut reader = open_reader(dir, file)?;
        let cols = Columns::from_reader(file, &mut reader)?;
        let c_trip = cols.required("trip_id")?;
        let c_stop = cols.required("stop_id")?;
        let c_seq = cols.required("stop_sequence")?;
        let c_arr = cols.required("arrival_time")?;
        let c_dep = cols.required("departure_time")?;
        let c_dist = cols.optional("shape_dist_traveled");
        for (row_no, record) in reader.records().enumerate() {
            let record = record.map_err(|source| FeedError::Csv {
                file: file.to_string(),
                source,
            })?;
            let bad = |column: &str, value: &str| FeedError::BadValue {
                file: file.to_string(),
                row: row_no as u64 + 2,
                column: column.to_string(),
                value: value.to_string(),
            };
            let trip_id = field(&record, c_trip).to_string();
            let stop_id = field(&record, c_stop).to_string();
            let seq_s = field(&record, c_seq);
            let sequence: u32 = seq_s.parse().map_err(|_| bad("stop_sequence", seq_s))?;
            let arr_s = field(&record, c_arr);
            let dep_s = field(&record, c_dep);
            let arrival_secs = parse_gtfs_time(arr_s).ok_or_else(|| bad("arrival_time", arr_s))?;
            let departure_secs =
                parse_gtfs_time(dep_s).ok_or_else(|| bad("departure_time", dep_s))?;
            let shape_dist_m = match c_dist {
                Some(c) => {
                    let raw = field(&record, c);
                    if raw.is_empty() {
                        None
                    } else {
                        Some(
                            raw.parse::<f64>()
                                .map_err(|_| bad("shape_dist_traveled", raw))?,
                        )
                    }
                }
                None => None,
            };
            if !trip_routes.contains_key(&trip_id) {
                return Err(bad("trip_id", &trip_id));
            }
            by_trip
                .entry(trip_id.clone())
                .or_default()
                .push(RawStopTime {
                    trip_id,
                    stop_id,
                    sequence,
                    arrival_secs,
                    departure_secs,
                    shape_dist_m,
                });
        }
    }

    // assemble trips with cumulative miles
    let mut trips: BTreeMap<String, Trip<T>> = BTreeMap::new();
    for (trip_id, route_id) in &trip_routes {
        let mut raw = by_trip.remove(trip_id).unwrap_or_default();
        raw.sort_by_key(|r| r.sequence);
        for r in &raw {
            if !stops.contains_key(&r.stop_id) {
                return Err(FeedError::DanglingStop {
                    trip_id: r.trip_id.clone(),
                    stop_id: r.stop_id.clone(),
                });
            }
        }
        let use_shape_dist = !raw.is_empty() && raw.iter().all(|r| r.shape_dist_m.is_some());
        let mut cumulative: Vec<T> = Vec::with_capacity(raw.len());
        if use_shape_dist {
            let base = raw[0].shape_dist_m.unwrap();
            let mut prev = f64::NEG_INFINITY;
            for r in &raw {
                let d = r.shape_dist_m.unwrap();
                if d < prev {
                    return Err(FeedError::NonMonotoneDistance {
                        trip_id: trip_id.clone(),
                    });
                }
                prev = d;
                cumulative.push(T::from_f64_const((d - base) / METERS_PER_MILE));
            }
        } else {
            let mut acc = T::zero();
            for (i, r) in raw.iter().enumerate() {
                if i > 0 {
                    let a = &stops[&raw[i - 1].stop_id];
                    let b = &stops[&r.stop_id];
                    acc = acc + great_circle_miles(a.lat, a.lon, b.lat, b.lon);
                }
                cumulative.push(acc);
            }
        }
        let trip_stops = raw
            .into_iter()
            .zip(cumulative)
            .map(|(r, cumulative_miles)| TripStop {
                stop_id: r.stop_id,
                cumulative_miles,
                arrival_secs: r.arrival_secs,
                departure_secs: r.departure_secs,
            })
            .collect();
        trips.insert(
            trip_id.clone(),
            Trip {
                route_id: route_id.clone(),
                stops: trip_stops,
            },
        );
    }

    // stop modes: rail wherever any rail trip calls
    let mut rail_stops: BTreeSet<String> = BTreeSet::new();
    for trip in trips.values() {
        if routes[&trip.route_id].mode == Mode::Rail {
            rail_stops.extend(trip.stops.iter().map(|s| s.stop_id.clone()));
        }
    }
    for (id, stop) in stops.iter_mut() {
        stop.mode = if rail_stops.contains(id) {
            Mode::Rail
        } else {
            Mode::Bus
        };
    }

    // projection origin: mean stop coordinate
    let region_origin = if stops.is_empty() {
        (T::zero(), T::zero())
    } else {
        let n = T::from_usize_const(stops.len());
        let (sum_lat, sum_lon) = stops.values().fold((T::zero(), T::zero()), |(la, lo), s| {
            (la + s.lat, lo + s.lon)
        });
        (sum_lat / n, sum_lon / n)
    };

    Ok(TransitNetwork {
        stops,
        routes,
        trips,
        region_origin,
    })
}

impl<T: Scalar> TransitNetwork<T> {
    /// In-network miles travelled between boarding and alighting on one trip.
    pub fn leg_distance(
        &self,
        trip_id: &str,
        board_stop: &str,
        alight_stop: &str,
    ) -> Result<T, DistanceError> {
        let trip = self
            .trips
            .get(trip_id)
            .ok_or_else(|| DistanceError::TripNotFound(trip_id.to_string()))?;
        let board_idx = trip
            .stops
            .iter()
            .position(|s| s.stop_id == board_stop)
            .ok_or_else(|| DistanceError::StopNotOnTrip {
                trip_id: trip_id.to_string(),
                stop_id: board_stop.to_string(),
            })?;
        if !trip.stops.iter().any(|s| s.stop_id == alight_stop) {
            return Err(DistanceError::StopNotOnTrip {
                trip_id: trip_id.to_string(),
                stop_id: alight_stop.to_string(),
            });
        }
        let alight_idx = trip.stops[board_idx + 1..]
            .iter()
            .position(|s| s.stop_id == alight_stop)
            .map(|i| i + board_idx + 1)
            .ok_or_else(|| DistanceError::OrderViolation {
                trip_id: trip_id.to_string(),
                board: board_stop.to_string(),
                alight: alight_stop.to_string(),
            })?;
        let d = trip.stops[alight_idx].cumulative_miles - trip.stops[board_idx].cumulative_miles;
        if d <= T::zero() {
            return Err(DistanceError::DegenerateSpan {
                trip_id: trip_id.to_string(),
                board: board_stop.to_string(),
                alight: alight_stop.to_string(),
            });
        }
        Ok(d)
    }

    /// Bus routes serving each stop via any trip, for survey spreading.
    pub fn bus_routes_by_stop(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut index: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for trip in self.trips.values() {
            if self.routes[&trip.route_id].mode != Mode::Bus {
                continue;
            }
            for ts in &trip.stops {
                index
                    .entry(ts.stop_id.clone())
                    .or_default()
                    .insert(trip.route_id.clone());
            }
        }
        index
    }

    /// Summary counts for the `validate` diagnostic, as key/value pairs.
    pub fn summary(&self) -> Vec<(String, String)> {
        let rail_routes = self
            .routes
            .values()
            .filter(|r| r.mode == Mode::Rail)
            .count();
        let bus_routes = self.routes.len() - rail_routes;
        let rail_stops = self.stops.values().filter(|s| s.mode == Mode::Rail).count();
        let stop_events: usize = self.trips.values().map(|t| t.stops.len()).sum();
        vec![
            ("stops".into(), self.stops.len().to_string()),
            ("stops_rail".into(), rail_stops.to_string()),
            (
                "stops_bus".into(),
                (self.stops.len() - rail_stops).to_string(),
            ),
            ("routes".into(), self.routes.len().to_string()),
            ("routes_rail".into(), rail_routes.to_string()),
            ("routes_bus".into(), bus_routes.to_string()),
            ("trips".into(), self.trips.len().to_string()),
            ("stop_events".into(), stop_events.to_string()),
        ]
    }
}
