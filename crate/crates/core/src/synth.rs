//! Deterministic synthetic-city generator.
//!
//! Emits a complete, internally consistent input bundle (GTFS feed, ride
//! legs, survey files, census GeoJSON) with planted ground-truth
//! relationships between stop-level convenience metrics and low-income
//! share, so the whole pipeline can be verified without any proprietary
//! data.
//!
//! Generation is single-threaded and driven by one seeded ChaCha8 stream;
//! identical seed and config produce a byte-identical bundle. Every numeric
//! written to the bundle uses full round-trip precision so the pipeline
//! re-reads exactly the values generation used.
//!
//! Layout: a rows x cols grid of square census blocks (2x2 blocks per block
//! group, 4x4 per tract), straight bus and rail routes along grid lanes, and
//! journeys that always originate on a rail route so every origin stop has a
//! direct station-level survey row. Each stop's low-income share is
//! `clamp(intercept + sum(effect * realized stop metric) + noise, 0, 1)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demographics::{DemographicShares, PurposeShares};
use crate::geometry::unproject;
use crate::gtfs::{parse_feed, Mode};
use crate::journeys::{
    compute_metrics, format_timestamp, link_journeys, load_legs, stop_profiles, ConvenienceMetrics,
    MetricsOptions,
};
use crate::spatial::{load_areas, stops_within_buffer, AreaLevel, DEFAULT_BUFFER_FEET};
use crate::stats::METRIC_KEYS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub block_side_feet: f64,
    /// Routes alternate rail, bus, rail, ... so index 0 is always rail.
    pub n_routes: usize,
    pub stops_per_route: usize,
    pub n_journeys: usize,
    pub transfer_probability: f64,
    /// Linear construction of stop-level low-income share from realized
    /// stop metrics: intercept plus one slope per metric key.
    pub planted_intercept: f64,
    pub planted_effects: BTreeMap<String, f64>,
    pub noise_sigma: f64,
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub service_date: String,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let mut planted_effects = BTreeMap::new();
        planted_effects.insert("time_per_mile".to_string(), 0.68);
        planted_effects.insert("transfers_per_mile".to_string(), 0.04);
        ScenarioConfig {
            seed: 7,
            grid_rows: 25,
            grid_cols: 25,
            block_side_feet: 1320.0,
            n_routes: 16,
            stops_per_route: 12,
            n_journeys: 6_000,
            transfer_probability: 0.45,
            // centers shares near 0.35 for speeds around 8 min/mile
            planted_intercept: -5.11,
            planted_effects,
            noise_sigma: 0.01,
            origin_lat: 42.36,
            origin_lon: -71.06,
            service_date: "2019-01-15".to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("generated bundle failed self-validation: {0}")]
    Bundle(String),
}

/// What the generator knows to be true about the bundle it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: ScenarioConfig,
    /// Realized metrics of every journey, recomputed through the real
    /// ingestion modules from the written files.
    pub journey_metrics: BTreeMap<String, ConvenienceMetrics<f64>>,
    /// Realized per-origin-stop metric means.
    pub stop_metrics: BTreeMap<String, ConvenienceMetrics<f64>>,
    /// The constructed demographic shares written to the rail survey.
    pub stop_shares: BTreeMap<String, DemographicShares<f64>>,
    pub n_blocks: usize,
    pub covered_blocks_500ft: usize,
    pub covered_blocks_1000ft: usize,
}

fn validate(config: &ScenarioConfig) -> Result<(), SynthError> {
    let fail = |msg: &str| Err(SynthError::InvalidConfig(msg.to_string()));
    if config.grid_rows == 0 || config.grid_cols == 0 {
        return fail("grid must have at least one row and column");
    }
    if !config.block_side_feet.is_finite() || config.block_side_feet <= 0.0 {
        return fail("block side must be positive");
    }
    if config.n_routes == 0 {
        return fail("need at least one route");
    }
    if config.stops_per_route < 2 {
        return fail("routes need at least two stops");
    }
    if config.stops_per_route > config.grid_rows.min(config.grid_cols) {
        return fail("stops_per_route must not exceed the grid dimension");
    }
    if config.n_journeys == 0 {
        return fail("need at least one journey");
    }
    if !(0.0..=1.0).contains(&config.transfer_probability) {
        return fail("transfer probability must lie in [0, 1]");
    }
    if config.noise_sigma < 0.0 {
        return fail("noise sigma must be non-negative");
    }
    for key in config.planted_effects.keys() {
        if !METRIC_KEYS.contains(&key.as_str()) {
            return Err(SynthError::InvalidConfig(format!(
                "unknown planted metric `{key}`"
            )));
        }
    }
    if chrono::NaiveDate::parse_from_str(&config.service_date, "%Y-%m-%d").is_err() {
        return fail("service_date must be YYYY-MM-DD");
    }
    Ok(())
}

struct RouteSpec {
    id: String,
    mode: Mode,
    minutes_per_mile: f64,
    /// chance that a journey starting here adds another leg; varies by route
    /// so transfer rates carry real cross-stop signal
    transfer_probability: f64,
    /// chance a transfer leg continues on rail; varies independently of the
    /// transfer rate so rail share is not a proxy for leg count
    rail_affinity: f64,
    /// transfer-wait draw `lo + U(0, width)` seconds; per-route so wait time
    /// is not a fixed multiple of transfer count
    wait_lo_secs: i64,
    wait_width_secs: i64,
    /// stop ids in forward order
    stops: Vec<String>,
    /// distance of each stop along the route axis, feet, strictly increasing
    positions: Vec<f64>,
}

impl RouteSpec {
    /// Miles between two stop indices of the forward sequence.
    fn span_miles(&self, from: usize, to: usize) -> f64 {
        (self.positions[to] - self.positions[from]).abs() / crate::scalar::FEET_PER_MILE
    }
}

fn fmt_gtfs_time(secs: u32) -> String {
    format!(
        "{:02}:{:02}:{:02}",
        secs / 3600,
        (secs % 3600) / 60,
        secs % 60
    )
}

fn write_file(path: &Path, body: &str) -> Result<(), SynthError> {
    std::fs::write(path, body).map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn block_geoid(rows_of_tracts_cols: usize, r: usize, c: usize) -> String {
    let tract = (r / 4) * rows_of_tracts_cols + (c / 4) + 1;
    let bg = ((r % 4) / 2) * 2 + ((c % 4) / 2) + 1;
    let block = (r % 2) * 2 + (c % 2) + 1;
    format!("25025{tract:06}{bg:01}{block:03}")
}

fn rect_ring_wgs84(x0: f64, y0: f64, x1: f64, y1: f64, origin: (f64, f64)) -> Vec<[f64; 2]> {
    let corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)];
    corners
        .iter()
        .map(|&(x, y)| {
            let (lat, lon) = unproject(crate::geometry::Point::new(x, y), origin);
            [lon, lat]
        })
        .collect()
}

/// Generate the bundle into `out_dir` and return the ground truth, which is
/// also written alongside as `ground_truth.json`.
pub fn generate(
    config: &ScenarioConfig,
    out_dir: impl AsRef<Path>,
) -> Result<GroundTruth, SynthError> {
    validate(config)?;
    let out_dir = out_dir.as_ref();
    let gtfs_dir = out_dir.join("gtfs");
    std::fs::create_dir_all(&gtfs_dir).map_err(|source| SynthError::Io {
        path: gtfs_dir.display().to_string(),
        source,
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let origin = (config.origin_lat, config.origin_lon);
    let side = config.block_side_feet;
    let width = config.grid_cols as f64 * side;
    let height = config.grid_rows as f64 * side;
    let x_min = -width / 2.0;
    let y_min = -height / 2.0;

    // --- routes and stops ---------------------------------------------------
    // Stops snap to block centers (with jitter well under half a block minus
    // the default buffer) so at a 500 ft radius each stop belongs to exactly
    // one block and block-level observations stay independent.
    let mut routes = Vec::with_capacity(config.n_routes);
    for k in 0..config.n_routes {
        let mode = if k % 2 == 0 { Mode::Rail } else { Mode::Bus };
        let horizontal = (k / 2) % 2 == 0;
        let cells = if horizontal {
            config.grid_cols
        } else {
            config.grid_rows
        };
        let stride = if (config.stops_per_route - 1) * 2 < cells && rng.random::<bool>() {
            2
        } else {
            1
        };
        let start_cell = rng.random_range(0..=(cells - 1 - (config.stops_per_route - 1) * stride));
        let lane = if horizontal {
            y_min + side * (rng.random_range(0..config.grid_rows) as f64 + 0.5)
        } else {
            x_min + side * (rng.random_range(0..config.grid_cols) as f64 + 0.5)
        };
        let axis_min = if horizontal { x_min } else { y_min };
        let jitter_limit = (side / 2.0 - DEFAULT_BUFFER_FEET - 60.0).clamp(0.0, 100.0);
        let positions: Vec<f64> = (0..config.stops_per_route)
            .map(|i| {
                let cell = start_cell + i * stride;
                let jitter = (rng.random::<f64>() * 2.0 - 1.0) * jitter_limit;
                axis_min + side * (cell as f64 + 0.5) + jitter
            })
            .collect();
        let minutes_per_mile = 7.9 + 0.2 * rng.random::<f64>();
        let transfer_probability =
            (config.transfer_probability * (0.25 + 1.5 * rng.random::<f64>())).min(0.95);
        let rail_affinity = 0.2 + 0.6 * rng.random::<f64>();
        let wait_lo_secs = 60 + rng.random_range(0..300);
        let wait_width_secs = 120 + rng.random_range(0..240);
        let stops = (0..config.stops_per_route)
            .map(|i| format!("S{k:02}-{i:02}"))
            .collect::<Vec<_>>();
        routes.push((
            RouteSpec {
                id: format!("R{k:02}"),
                mode,
                minutes_per_mile,
                transfer_probability,
                rail_affinity,
                wait_lo_secs,
                wait_width_secs,
                stops,
                positions,
            },
            horizontal,
            lane,
        ));
    }

    // stop planar positions and WGS84 coordinates
    let mut stop_coords: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for (route, horizontal, lane) in &routes {
        for (i, stop_id) in route.stops.iter().enumerate() {
            let pos = route.positions[i];
            let (x, y) = if *horizontal {
                (pos, *lane)
            } else {
                (*lane, pos)
            };
            let (lat, lon) = unproject(crate::geometry::Point::new(x, y), origin);
            stop_coords.insert(stop_id.clone(), (lat, lon));
        }
    }

    // --- GTFS files ----------------------------------------------------------
    let mut stops_txt = String::from("stop_id,stop_name,stop_lat,stop_lon\n");
    for (stop_id, (lat, lon)) in &stop_coords {
        writeln!(stops_txt, "{stop_id},Stop {stop_id},{lat},{lon}").unwrap();
    }
    write_file(&gtfs_dir.join("stops.txt"), &stops_txt)?;

    let mut routes_txt = String::from("route_id,route_short_name,route_type\n");
    for (route, ..) in &routes {
        let route_type = match route.mode {
            Mode::Rail => 1,
            Mode::Bus => 3,
        };
        writeln!(routes_txt, "{},{},{}", route.id, route.id, route_type).unwrap();
    }
    write_file(&gtfs_dir.join("routes.txt"), &routes_txt)?;

    let mut trips_txt = String::from("trip_id,route_id\n");
    let mut stop_times_txt = String::from(
        "trip_id,stop_id,stop_sequence,arrival_time,departure_time,shape_dist_traveled\n",
    );
    for (route, ..) in &routes {
        let last = *route.positions.last().unwrap();
        let forward: Vec<(String, f64)> = route
            .stops
            .iter()
            .zip(&route.positions)
            .map(|(s, p)| (s.clone(), (p - route.positions[0]) * 0.3048))
            .collect();
        let reverse: Vec<(String, f64)> = route
            .stops
            .iter()
            .zip(&route.positions)
            .rev()
            .map(|(s, p)| (s.clone(), (last - p) * 0.3048))
            .collect();
        for (suffix, ordered) in [("F", forward), ("R", reverse)] {
            let trip_id = format!("T{}{suffix}", &route.id[1..]);
            writeln!(trips_txt, "{trip_id},{}", route.id).unwrap();
            for (i, (stop_id, dist_m)) in ordered.iter().enumerate() {
                let t = fmt_gtfs_time(6 * 3600 + i as u32 * 120);
                writeln!(
                    stop_times_txt,
                    "{trip_id},{stop_id},{},{t},{t},{dist_m}",
                    i + 1
                )
                .unwrap();
            }
        }
    }
    write_file(&gtfs_dir.join("trips.txt"), &trips_txt)?;
    write_file(&gtfs_dir.join("stop_times.txt"), &stop_times_txt)?;

    // --- journeys -------------------------------------------------------------
    let day_epoch = chrono::NaiveDate::parse_from_str(&config.service_date, "%Y-%m-%d")
        .expect("validated date")
        .and_hms_opt(0, 0, 0)
        .unwrap()
        .and_utc()
        .timestamp();
    let rail_route_idx: Vec<usize> = routes
        .iter()
        .enumerate()
        .filter(|(_, (r, ..))| r.mode == Mode::Rail)
        .map(|(i, _)| i)
        .collect();
    let bus_route_idx: Vec<usize> = routes
        .iter()
        .enumerate()
        .filter(|(_, (r, ..))| r.mode == Mode::Bus)
        .map(|(i, _)| i)
        .collect();

    let mut legs_csv = String::from(
        "passenger_id,journey_id,trip_id,route_id,mode,board_stop,alight_stop,board_time,alight_time\n",
    );
    for j in 0..config.n_journeys {
        let journey_id = format!("J{j:06}");
        let passenger_id = format!("P{j:06}");
        let origin_route = rail_route_idx[rng.random_range(0..rail_route_idx.len())];
        let mut n_legs = 1usize;
        while n_legs < 3 && rng.random::<f64>() < routes[origin_route].0.transfer_probability {
            n_legs += 1;
        }
        let mut clock = day_epoch + rng.random_range(6 * 3600..20 * 3600);
        for leg in 0..n_legs {
            let route_idx = if leg == 0 {
                origin_route
            } else if !bus_route_idx.is_empty()
                && rng.random::<f64>() >= routes[origin_route].0.rail_affinity
            {
                bus_route_idx[rng.random_range(0..bus_route_idx.len())]
            } else {
                rail_route_idx[rng.random_range(0..rail_route_idx.len())]
            };
            let (route, ..) = &routes[route_idx];
            let reverse = rng.random::<bool>();
            let n_stops = route.stops.len();
            let board_idx = rng.random_range(0..n_stops - 1);
            let span = rng.random_range(1..=(n_stops - 1 - board_idx).min(4));
            let ordered: Vec<&String> = if reverse {
                route.stops.iter().rev().collect()
            } else {
                route.stops.iter().collect()
            };
            let board_stop = ordered[board_idx];
            let alight_stop = ordered[board_idx + span];
            let trip_id = format!("T{}{}", &route.id[1..], if reverse { "R" } else { "F" });
            let (from, to) = if reverse {
                (n_stops - 1 - board_idx, n_stops - 1 - board_idx - span)
            } else {
                (board_idx, board_idx + span)
            };
            let miles = route.span_miles(from, to);
            let jitter = 0.95 + 0.1 * rng.random::<f64>();
            let ride_secs = (miles * route.minutes_per_mile * 60.0 * jitter)
                .round()
                .max(60.0) as i64;
            if leg > 0 {
                let origin = &routes[origin_route].0;
                clock += origin.wait_lo_secs + rng.random_range(0..origin.wait_width_secs);
            }
            let board_time = clock;
            let alight_time = clock + ride_secs;
            clock = alight_time;
            writeln!(
                legs_csv,
                "{passenger_id},{journey_id},{trip_id},{},{},{board_stop},{alight_stop},{},{}",
                route.id,
                route.mode,
                format_timestamp(board_time),
                format_timestamp(alight_time),
            )
            .unwrap();
        }
    }
    let legs_path = out_dir.join("legs.csv");
    write_file(&legs_path, &legs_csv)?;

    // --- census areas ----------------------------------------------------------
    let tracts_per_row = config.grid_cols.div_ceil(4);
    let mut features: Vec<serde_json::Value> = Vec::new();
    let mut push_rect = |geoid: String, level: AreaLevel, x0: f64, y0: f64, x1: f64, y1: f64| {
        let ring = rect_ring_wgs84(x0, y0, x1, y1, origin);
        features.push(serde_json::json!({
            "type": "Feature",
            "properties": {"geoid": geoid, "level": level.as_str()},
            "geometry": {"type": "Polygon", "coordinates": [ring]},
        }));
    };
    for r in 0..config.grid_rows {
        for c in 0..config.grid_cols {
            let x0 = x_min + c as f64 * side;
            let y0 = y_min + r as f64 * side;
            push_rect(
                block_geoid(tracts_per_row, r, c),
                AreaLevel::Block,
                x0,
                y0,
                x0 + side,
                y0 + side,
            );
        }
    }
    for r0 in (0..config.grid_rows).step_by(2) {
        for c0 in (0..config.grid_cols).step_by(2) {
            let r1 = (r0 + 2).min(config.grid_rows);
            let c1 = (c0 + 2).min(config.grid_cols);
            let geoid = block_geoid(tracts_per_row, r0, c0)[..12].to_string();
            push_rect(
                geoid,
                AreaLevel::BlockGroup,
                x_min + c0 as f64 * side,
                y_min + r0 as f64 * side,
                x_min + c1 as f64 * side,
                y_min + r1 as f64 * side,
            );
        }
    }
    for r0 in (0..config.grid_rows).step_by(4) {
        for c0 in (0..config.grid_cols).step_by(4) {
            let r1 = (r0 + 4).min(config.grid_rows);
            let c1 = (c0 + 4).min(config.grid_cols);
            let geoid = block_geoid(tracts_per_row, r0, c0)[..11].to_string();
            push_rect(
                geoid,
                AreaLevel::Tract,
                x_min + c0 as f64 * side,
                y_min + r0 as f64 * side,
                x_min + c1 as f64 * side,
                y_min + r1 as f64 * side,
            );
        }
    }
    let areas_doc = serde_json::json!({"type": "FeatureCollection", "features": features});
    let areas_path = out_dir.join("areas.geojson");
    write_file(&areas_path, &serde_json::to_string(&areas_doc).unwrap())?;

    // --- reload through the real ingestion path --------------------------------
    let network: crate::gtfs::TransitNetwork<f64> =
        parse_feed(&gtfs_dir).map_err(|e| SynthError::Bundle(format!("gtfs reload: {e}")))?;
    let load =
        load_legs(&legs_path).map_err(|e| SynthError::Bundle(format!("legs reload: {e}")))?;
    if !load.rejects.is_empty() {
        return Err(SynthError::Bundle(format!(
            "generated legs produced {} rejects",
            load.rejects.len()
        )));
    }
    let (journeys, link_rejects) = link_journeys::<f64>(&load.legs);
    if !link_rejects.is_empty() {
        return Err(SynthError::Bundle(format!(
            "generated journeys produced {} link rejects",
            link_rejects.len()
        )));
    }
    let (scored, metric_rejects) = compute_metrics(journeys, &network, MetricsOptions::default());
    if !metric_rejects.is_empty() {
        return Err(SynthError::Bundle(format!(
            "generated journeys produced {} metric rejects",
            metric_rejects.len()
        )));
    }
    let profiles = stop_profiles(&scored);

    // --- planted demographics ---------------------------------------------------
    let metric_value = |metrics: &ConvenienceMetrics<f64>, key: &str| match key {
        "time_per_mile" => metrics.time_per_mile,
        "transfers_per_mile" => metrics.transfers_per_mile,
        "transfer_wait_minutes" => metrics.transfer_wait_minutes,
        "network_miles" => metrics.network_miles,
        _ => metrics.rail_share,
    };
    let mut stop_shares: BTreeMap<String, DemographicShares<f64>> = BTreeMap::new();
    for (stop_id, profile) in &profiles {
        let mut lis = config.planted_intercept;
        for (key, slope) in &config.planted_effects {
            lis += slope * metric_value(&profile.metrics, key);
        }
        if config.noise_sigma > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            lis += config.noise_sigma * z;
        }
        let lis = lis.clamp(0.0, 1.0);
        let raw: Vec<f64> = (0..5).map(|_| 0.05 + rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        stop_shares.insert(
            stop_id.clone(),
            DemographicShares {
                low_income_share: lis,
                purposes: PurposeShares {
                    home_work: raw[0] / total,
                    home_other: raw[1] / total,
                    other_nonhome: raw[2] / total,
                    home_social: raw[3] / total,
                    home_school: raw[4] / total,
                },
                respondent_count: rng.random_range(20..=500),
            },
        );
    }

    let share_row = |key: &str, d: &DemographicShares<f64>| {
        format!(
            "{key},{},{},{},{},{},{},{}\n",
            d.respondent_count,
            d.low_income_share,
            d.purposes.home_work,
            d.purposes.home_other,
            d.purposes.other_nonhome,
            d.purposes.home_social,
            d.purposes.home_school,
        )
    };
    let mut rail_csv = String::from(
        "stop_id,respondents,low_income_share,p_home_work,p_home_other,p_other,p_home_social,p_home_school\n",
    );
    for (stop_id, d) in &stop_shares {
        rail_csv.push_str(&share_row(stop_id, d));
    }
    write_file(&out_dir.join("survey_rail.csv"), &rail_csv)?;

    let mut bus_csv = String::from(
        "route_id,respondents,low_income_share,p_home_work,p_home_other,p_other,p_home_social,p_home_school\n",
    );
    for (route, ..) in &routes {
        if route.mode != Mode::Bus {
            continue;
        }
        let raw: Vec<f64> = (0..5).map(|_| 0.05 + rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let d = DemographicShares {
            low_income_share: rng.random::<f64>() * 0.8 + 0.1,
            purposes: PurposeShares {
                home_work: raw[0] / total,
                home_other: raw[1] / total,
                other_nonhome: raw[2] / total,
                home_social: raw[3] / total,
                home_school: raw[4] / total,
            },
            respondent_count: rng.random_range(20..=500),
        };
        bus_csv.push_str(&share_row(&route.id, &d));
    }
    write_file(&out_dir.join("survey_bus.csv"), &bus_csv)?;

    // --- coverage ground truth ----------------------------------------------------
    // Replays exactly what the pipeline will do: project stops about the
    // parsed network's region origin and buffer against the reloaded areas.
    let (areas, area_rejects) = load_areas::<f64>(&areas_path, network.region_origin)
        .map_err(|e| SynthError::Bundle(format!("areas reload: {e}")))?;
    if !area_rejects.is_empty() {
        return Err(SynthError::Bundle(format!(
            "generated areas produced {} rejects",
            area_rejects.len()
        )));
    }
    let mut stop_points = BTreeMap::new();
    for (stop_id, stop) in &network.stops {
        if !profiles.contains_key(stop_id) {
            continue;
        }
        let p = crate::geometry::project(stop.lat, stop.lon, network.region_origin)
            .map_err(|e| SynthError::Bundle(format!("stop projection: {e}")))?;
        stop_points.insert(stop_id.clone(), p);
    }
    let mut covered_500 = 0usize;
    let mut covered_1000 = 0usize;
    let mut n_blocks = 0usize;
    for area in areas.iter().filter(|a| a.level == AreaLevel::Block) {
        n_blocks += 1;
        if !stops_within_buffer(area, &stop_points, 500.0).is_empty() {
            covered_500 += 1;
        }
        if !stops_within_buffer(area, &stop_points, 1000.0).is_empty() {
            covered_1000 += 1;
        }
    }

    let truth = GroundTruth {
        config: config.clone(),
        journey_metrics: scored.iter().map(|(j, m)| (j.id.clone(), *m)).collect(),
        stop_metrics: profiles
            .iter()
            .map(|(id, p)| (id.clone(), p.metrics))
            .collect(),
        stop_shares,
        n_blocks,
        covered_blocks_500ft: covered_500,
        covered_blocks_1000ft: covered_1000,
    };
    write_file(
        &out_dir.join("ground_truth.json"),
        &serde_json::to_string_pretty(&truth).unwrap(),
    )?;
    Ok(truth)
}

/// Paths of the files `generate` writes under its output directory.
pub struct BundlePaths {
    pub gtfs_dir: PathBuf,
    pub legs: PathBuf,
    pub survey_rail: PathBuf,
    pub survey_bus: PathBuf,
    pub areas: PathBuf,
    pub ground_truth: PathBuf,
}

impl BundlePaths {
    pub fn under(out_dir: impl AsRef<Path>) -> Self {
        let out_dir = out_dir.as_ref();
        BundlePaths {
            gtfs_dir: out_dir.join("gtfs"),
            legs: out_dir.join("legs.csv"),
            survey_rail: out_dir.join("survey_rail.csv"),
            survey_bus: out_dir.join("survey_bus.csv"),
            areas: out_dir.join("areas.geojson"),
            ground_truth: out_dir.join("ground_truth.json"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn small_config(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            seed,
            grid_rows: 8,
            grid_cols: 8,
            n_routes: 6,
            stops_per_route: 6,
            n_journeys: 300,
            ..ScenarioConfig::default()
        }
    }

    fn bundle_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut out = Vec::new();
        let mut walk = vec![dir.to_path_buf()];
        while let Some(d) = walk.pop() {
            let mut entries: Vec<_> = std::fs::read_dir(&d).unwrap().map(|e| e.unwrap()).collect();
            entries.sort_by_key(|e| e.path());
            for entry in entries {
                let p = entry.path();
                if p.is_dir() {
                    walk.push(p);
                } else {
                    out.push((
                        p.strip_prefix(dir).unwrap().display().to_string(),
                        std::fs::read(&p).unwrap(),
                    ));
                }
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    #[test]
    fn identical_seeds_give_byte_identical_bundles() {
        let dir_a = TempDir::new().unwrap();
        let dir_b = TempDir::new().unwrap();
        generate(&small_config(42), dir_a.path()).unwrap();
        generate(&small_config(42), dir_b.path()).unwrap();
        let a = bundle_bytes(dir_a.path());
        let b = bundle_bytes(dir_b.path());
        assert_eq!(a.len(), b.len());
        for ((name_a, bytes_a), (name_b, bytes_b)) in a.iter().zip(&b) {
            assert_eq!(name_a, name_b);
            assert_eq!(bytes_a, bytes_b, "{name_a} differs between runs");
        }
    }

    #[test]
    fn different_seeds_differ() {
        let dir_a = TempDir::new().unwrap();
        let dir_b = TempDir::new().unwrap();
        generate(&small_config(1), dir_a.path()).unwrap();
        generate(&small_config(2), dir_b.path()).unwrap();
        let a = bundle_bytes(dir_a.path());
        let b = bundle_bytes(dir_b.path());
        assert!(a.iter().zip(&b).any(|((_, x), (_, y))| x != y));
    }

    #[test]
    fn bundle_reloads_cleanly_and_matches_ground_truth() {
        let dir = TempDir::new().unwrap();
        let truth = generate(&small_config(9), dir.path()).unwrap();
        let paths = BundlePaths::under(dir.path());

        let network: crate::gtfs::TransitNetwork<f64> = parse_feed(&paths.gtfs_dir).unwrap();
        let load = load_legs(&paths.legs).unwrap();
        assert!(load.rejects.is_empty());
        let (journeys, rejects) = link_journeys::<f64>(&load.legs);
        assert!(rejects.is_empty());
        let (scored, rejects) = compute_metrics(journeys, &network, MetricsOptions::default());
        assert!(rejects.is_empty());
        assert_eq!(scored.len(), truth.journey_metrics.len());
        for (journey, metrics) in &scored {
            let expected = &truth.journey_metrics[&journey.id];
            assert_eq!(metrics, expected, "journey {} metrics drifted", journey.id);
        }
        let profiles = stop_profiles(&scored);
        for (stop, profile) in &profiles {
            assert_eq!(&profile.metrics, &truth.stop_metrics[stop]);
        }
        // survey parses with zero rejects and covers every profiled stop
        let (survey, srejects) =
            crate::demographics::load_survey::<f64>(&paths.survey_rail, &paths.survey_bus).unwrap();
        assert!(srejects.is_empty());
        for stop in profiles.keys() {
            assert!(
                survey.rail_rows.contains_key(stop),
                "stop {stop} missing from survey"
            );
        }
    }

    #[test]
    fn zero_effects_zero_noise_gives_identical_shares() {
        let mut config = small_config(4);
        config.planted_effects.clear();
        config.planted_intercept = 0.3;
        config.noise_sigma = 0.0;
        let dir = TempDir::new().unwrap();
        let truth = generate(&config, dir.path()).unwrap();
        for d in truth.stop_shares.values() {
            assert_eq!(d.low_income_share, 0.3);
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut config = small_config(1);
        config.stops_per_route = 1;
        let err = generate(&config, TempDir::new().unwrap().path()).unwrap_err();
        assert!(matches!(err, SynthError::InvalidConfig(_)));

        let mut config = small_config(1);
        config.planted_effects.insert("velocity".into(), 1.0);
        let err = generate(&config, TempDir::new().unwrap().path()).unwrap_err();
        assert!(matches!(err, SynthError::InvalidConfig(_)));
    }

    #[test]
    fn coverage_counts_are_monotone_in_radius() {
        let dir = TempDir::new().unwrap();
        let truth = generate(&small_config(11), dir.path()).unwrap();
        assert!(truth.covered_blocks_500ft <= truth.covered_blocks_1000ft);
        assert!(truth.covered_blocks_1000ft <= truth.n_blocks);
        assert!(truth.covered_blocks_500ft > 0);
    }
}
