//! Census-area geometry and the buffer method: assign stops to areas within a
//! walking-distance threshold of the boundary, then take ridership-weighted
//! means of stop-level metrics and demographics.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demographics::{classify_income, IncomeClass, PurposeShares};
use crate::geometry::{
    point_rings_distance, project, ring_self_intersects, ring_signed_area, rings_centroid, Point,
};
use crate::journeys::{ConvenienceMetrics, StopProfile};
use crate::scalar::Scalar;

/// Default walking-access buffer around an area boundary, in feet.
pub const DEFAULT_BUFFER_FEET: f64 = 500.0;
/// Alternate buffer used for sensitivity runs, in feet.
pub const SENSITIVITY_BUFFER_FEET: f64 = 1_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AreaLevel {
    Block,
    BlockGroup,
    Tract,
}

impl AreaLevel {
    pub fn as_str(&self) -> &'static str {
        match self {
            AreaLevel::Block => "block",
            AreaLevel::BlockGroup => "block_group",
            AreaLevel::Tract => "tract",
        }
    }
}

impl std::str::FromStr for AreaLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "block" => Ok(AreaLevel::Block),
            "block_group" => Ok(AreaLevel::BlockGroup),
            "tract" => Ok(AreaLevel::Tract),
            other => Err(format!("unknown area level `{other}`")),
        }
    }
}

impl std::fmt::Display for AreaLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One census geography, projected into the local planar frame (feet).
/// `rings` holds exterior rings and holes together; point membership uses
/// the even-odd rule, so nesting order does not matter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusArea<T> {
    pub geoid: String,
    pub level: AreaLevel,
    pub rings: Vec<Vec<Point<T>>>,
    pub centroid: Point<T>,
    /// Source WGS84 geometry, kept verbatim for GeoJSON re-emission.
    pub geometry_wgs84: serde_json::Value,
}

/// Area-level aggregate of the assigned stops' profiles; the regression
/// observation unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaProfile<T> {
    pub geoid: String,
    pub level: AreaLevel,
    pub ridership: u64,
    pub metrics: ConvenienceMetrics<T>,
    pub low_income_share: T,
    pub purposes: PurposeShares<T>,
    pub income_class: IncomeClass,
    pub assigned_stops: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AreaReject {
    pub geoid: String,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum AreaIngestError {
    #[error("reading {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {file}: {source}")]
    Json {
        file: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{file}: expected a GeoJSON FeatureCollection")]
    NotFeatureCollection { file: String },
}

fn ring_from_coords<T: Scalar>(
    coords: &serde_json::Value,
    origin: (T, T),
) -> Result<Vec<Point<T>>, String> {
    let pairs = coords.as_array().ok_or("ring is not an array")?;
    let mut ring = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let xy = pair.as_array().ok_or("coordinate is not an array")?;
        if xy.len() < 2 {
            return Err("coordinate has fewer than two components".into());
        }
        let lon = xy[0].as_f64().ok_or("longitude is not a number")?;
        let lat = xy[1].as_f64().ok_or("latitude is not a number")?;
        let p = project(T::from_f64_const(lat), T::from_f64_const(lon), origin)
            .map_err(|e| e.to_string())?;
        ring.push(p);
    }
    Ok(ring)
}

fn validate_rings<T: Scalar>(rings: &[Vec<Point<T>>]) -> Result<(), String> {
    if rings.is_empty() {
        return Err("no rings".into());
    }
    for ring in rings {
        if ring.len() < 4 {
            return Err("ring has fewer than four points".into());
        }
        if ring.first() != ring.last() {
            return Err("ring not closed".into());
        }
        if ring_self_intersects(ring) {
            return Err("self-intersecting ring".into());
        }
    }
    let total: T = rings
        .iter()
        .fold(T::zero(), |acc, ring| acc + ring_signed_area(ring));
    if total.abs() <= T::zero() {
        return Err("zero area".into());
    }
    Ok(())
}

/// Load census geographies from a GeoJSON FeatureCollection with `geoid` and
/// `level` properties and WGS84 Polygon/MultiPolygon geometry. Invalid
/// features are rejected by geoid, not repaired.
pub fn load_areas<T: Scalar>(
    path: impl AsRef<Path>,
    origin: (T, T),
) -> Result<(Vec<CensusArea<T>>, Vec<AreaReject>), AreaIngestError> {
    let path = path.as_ref();
    let file_name = path.display().to_string();
    let raw = std::fs::read_to_string(path).map_err(|source| AreaIngestError::Io {
        file: file_name.clone(),
        source,
    })?;
    let doc: serde_json::Value =
        serde_json::from_str(&raw).map_err(|source| AreaIngestError::Json {
            file: file_name.clone(),
            source,
        })?;
    if doc.get("type").and_then(|t| t.as_str()) != Some("FeatureCollection") {
        return Err(AreaIngestError::NotFeatureCollection { file: file_name });
    }
    let features = doc
        .get("features")
        .and_then(|f| f.as_array())
        .cloned()
        .unwrap_or_default();

    let mut areas = Vec::new();
    let mut rejects = Vec::new();
    for (i, feature) in features.iter().enumerate() {
        let props = feature.get("properties").cloned().unwrap_or_default();
        let geoid = match props.get("geoid").and_then(|g| g.as_str()) {
            Some(g) if !g.is_empty() => g.to_string(),
            _ => {
                rejects.push(AreaReject {
                    geoid: format!("#feature{i}"),
                    reason: "missing_geoid".into(),
                });
                continue;
            }
        };
        let level = match props
            .get("level")
            .and_then(|l| l.as_str())
            .and_then(|l| l.parse::<AreaLevel>().ok())
        {
            Some(l) => l,
            None => {
                rejects.push(AreaReject {
                    geoid,
                    reason: "bad_level".into(),
                });
                continue;
            }
        };
        let geometry = match feature.get("geometry") {
            Some(g) => g.clone(),
            None => {
                rejects.push(AreaReject {
                    geoid,
                    reason: "missing_geometry".into(),
                });
                continue;
            }
        };
        let geom_type = geometry.get("type").and_then(|t| t.as_str()).unwrap_or("");
        let coords = geometry.get("coordinates").cloned().unwrap_or_default();
        let ring_values: Vec<serde_json::Value> = match geom_type {
            "Polygon" => coords.as_array().cloned().unwrap_or_default(),
            "MultiPolygon" => coords
                .as_array()
                .cloned()
                .unwrap_or_default()
                .into_iter()
                .flat_map(|poly| poly.as_array().cloned().unwrap_or_default())
                .collect(),
            _ => {
                rejects.push(AreaReject {
                    geoid,
                    reason: "bad_geometry_type".into(),
                });
                continue;
            }
        };
        let mut rings = Vec::with_capacity(ring_values.len());
        let mut failed = None;
        for rv in &ring_values {
            match ring_from_coords(rv, origin) {
                Ok(r) => rings.push(r),
                Err(reason) => {
                    failed = Some(reason);
                    break;
                }
            }
        }
        if let Some(reason) = failed {
            rejects.push(AreaReject { geoid, reason });
            continue;
        }
        if let Err(reason) = validate_rings(&rings) {
            rejects.push(AreaReject { geoid, reason });
            continue;
        }
        let centroid = rings_centroid(&rings);
        areas.push(CensusArea {
            geoid,
            level,
            rings,
            centroid,
            geometry_wgs84: geometry,
        });
    }
    areas.sort_by_key(|a| (a.level, a.geoid.clone()));
    Ok((areas, rejects))
}

/// Stops within `radius_feet` of the area (boundary buffer, interior included).
pub fn stops_within_buffer<T: Scalar>(
    area: &CensusArea<T>,
    stops: &BTreeMap<String, Point<T>>,
    radius_feet: T,
) -> BTreeSet<String> {
    stops
        .iter()
        .filter(|(_, p)| point_rings_distance(**p, &area.rings) <= radius_feet)
        .map(|(id, _)| id.clone())
        .collect()
}

/// Ridership-weighted aggregation of the buffered stops' profiles onto one
/// area. Stops without demographics are excluded before weighting; when no
/// eligible stop remains the area yields `None` rather than a fabricated
/// observation.
pub fn aggregate_area<T: Scalar>(
    area: &CensusArea<T>,
    stop_points: &BTreeMap<String, Point<T>>,
    profiles: &BTreeMap<String, StopProfile<T>>,
    radius_feet: T,
    income_cuts: (T, T),
) -> Option<AreaProfile<T>> {
    let buffered = stops_within_buffer(area, stop_points, radius_feet);
    let eligible: Vec<(&String, &StopProfile<T>)> = buffered
        .iter()
        .filter_map(|id| profiles.get(id).map(|p| (id, p)))
        .filter(|(_, p)| p.demographics.is_some())
        .collect();
    if eligible.is_empty() {
        return None;
    }

    let mut ridership: u64 = 0;
    let mut m: ConvenienceMetrics<T> = ConvenienceMetrics::zero();
    let mut lis = T::zero();
    let mut purposes = PurposeShares {
        home_work: T::zero(),
        home_other: T::zero(),
        other_nonhome: T::zero(),
        home_social: T::zero(),
        home_school: T::zero(),
    };
    for (_, p) in &eligible {
        let w = T::from_f64_const(p.ridership as f64);
        let d = p.demographics.as_ref().unwrap();
        ridership += p.ridership;
        m.time_per_mile = m.time_per_mile + w * p.metrics.time_per_mile;
        m.transfers_per_mile = m.transfers_per_mile + w * p.metrics.transfers_per_mile;
        m.transfer_wait_minutes = m.transfer_wait_minutes + w * p.metrics.transfer_wait_minutes;
        m.network_miles = m.network_miles + w * p.metrics.network_miles;
        m.rail_share = m.rail_share + w * p.metrics.rail_share;
        lis = lis + w * d.low_income_share;
        purposes.home_work = purposes.home_work + w * d.purposes.home_work;
        purposes.home_other = purposes.home_other + w * d.purposes.home_other;
        purposes.other_nonhome = purposes.other_nonhome + w * d.purposes.other_nonhome;
        purposes.home_social = purposes.home_social + w * d.purposes.home_social;
        purposes.home_school = purposes.home_school + w * d.purposes.home_school;
    }
    let total = T::from_f64_const(ridership as f64);
    let lis = lis / total;
    Some(AreaProfile {
        geoid: area.geoid.clone(),
        level: area.level,
        ridership,
        metrics: ConvenienceMetrics {
            time_per_mile: m.time_per_mile / total,
            transfers_per_mile: m.transfers_per_mile / total,
            transfer_wait_minutes: m.transfer_wait_minutes / total,
            network_miles: m.network_miles / total,
            rail_share: m.rail_share / total,
        },
        low_income_share: lis,
        purposes: PurposeShares {
            home_work: purposes.home_work / total,
            home_other: purposes.home_other / total,
            other_nonhome: purposes.other_nonhome / total,
            home_social: purposes.home_social / total,
            home_school: purposes.home_school / total,
        },
        income_class: classify_income(lis, income_cuts.0, income_cuts.1),
        assigned_stops: eligible.into_iter().map(|(id, _)| id.clone()).collect(),
    })
}

/// Tract geoid prefix of a standard 15-digit block geoid.
pub fn tract_prefix(geoid: &str) -> &str {
    if geoid.len() >= 11 {
        &geoid[..11]
    } else {
        geoid
    }
}

/// Display-level rollup of block profiles into tracts, using the same
/// ridership-weighted mean rule with block ridership as the weight.
pub fn rollup_tracts<T: Scalar>(
    block_profiles: &[AreaProfile<T>],
    income_cuts: (T, T),
) -> Vec<AreaProfile<T>> {
    let mut groups: BTreeMap<String, Vec<&AreaProfile<T>>> = BTreeMap::new();
    for p in block_profiles {
        groups
            .entry(tract_prefix(&p.geoid).to_string())
            .or_default()
            .push(p);
    }
    groups
        .into_iter()
        .map(|(geoid, members)| {
            let mut ridership: u64 = 0;
            let mut m: ConvenienceMetrics<T> = ConvenienceMetrics::zero();
            let mut lis = T::zero();
            let mut purposes = PurposeShares {
                home_work: T::zero(),
                home_other: T::zero(),
                other_nonhome: T::zero(),
                home_social: T::zero(),
                home_school: T::zero(),
            };
            let mut stops: BTreeSet<String> = BTreeSet::new();
            for p in &members {
                let w = T::from_f64_const(p.ridership as f64);
                ridership += p.ridership;
                m.time_per_mile = m.time_per_mile + w * p.metrics.time_per_mile;
                m.transfers_per_mile = m.transfers_per_mile + w * p.metrics.transfers_per_mile;
                m.transfer_wait_minutes =
                    m.transfer_wait_minutes + w * p.metrics.transfer_wait_minutes;
                m.network_miles = m.network_miles + w * p.metrics.network_miles;
                m.rail_share = m.rail_share + w * p.metrics.rail_share;
                lis = lis + w * p.low_income_share;
                purposes.home_work = purposes.home_work + w * p.purposes.home_work;
                purposes.home_other = purposes.home_other + w * p.purposes.home_other;
                purposes.other_nonhome = purposes.other_nonhome + w * p.purposes.other_nonhome;
                purposes.home_social = purposes.home_social + w * p.purposes.home_social;
                purposes.home_school = purposes.home_school + w * p.purposes.home_school;
                stops.extend(p.assigned_stops.iter().cloned());
            }
            let total = T::from_f64_const(ridership as f64);
            let lis = lis / total;
            AreaProfile {
                geoid,
                level: AreaLevel::Tract,
                ridership,
                metrics: ConvenienceMetrics {
                    time_per_mile: m.time_per_mile / total,
                    transfers_per_mile: m.transfers_per_mile / total,
                    transfer_wait_minutes: m.transfer_wait_minutes / total,
                    network_miles: m.network_miles / total,
                    rail_share: m.rail_share / total,
                },
                low_income_share: lis,
                purposes: PurposeShares {
                    home_work: purposes.home_work / total,
                    home_other: purposes.home_other / total,
                    other_nonhome: purposes.other_nonhome / total,
                    home_social: purposes.home_social / total,
                    home_school: purposes.home_school / total,
                },
                income_class: classify_income(lis, income_cuts.0, income_cuts.1),
                assigned_stops: stops.into_iter().collect(),
            }
        })
        .collect()
}
