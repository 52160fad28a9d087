//! End-to-end pipeline orchestration: ingest, link, score, join, aggregate,
//! regress, and write the report artifacts.
//!
//! The pipeline runs at `f64`. Outputs are deterministic for identical config
//! and inputs: collections iterate in key order, per-area work parallelizes
//! without cross-area accumulation, and every number is rendered at a fixed
//! precision.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::compare::{compare_periods, period_comparison_csv, CoefficientComparison};
use super::render::{
    area_profiles_csv, area_profiles_geojson, atomic_write, regression_csv, regression_table,
};
use crate::demographics::{attach_demographics, load_survey, SurveyReject};
use crate::geometry::{project, Point};
use crate::gtfs::parse_feed;
use crate::journeys::{
    compute_metrics, link_journeys, load_legs, stop_profiles, MetricsOptions, Reject,
};
use crate::spatial::{
    aggregate_area, load_areas, rollup_tracts, tract_prefix, AreaLevel, AreaProfile, AreaReject,
    CensusArea, DEFAULT_BUFFER_FEET,
};
use crate::stats::{equity_regression, purpose_regression, reversed_regressions, RegressionResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionDirection {
    /// Low-income share regressed on the convenience measures.
    Forward,
    /// One simple regression per metric, on low-income share.
    Reversed,
}

impl std::str::FromStr for RegressionDirection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" => Ok(RegressionDirection::Forward),
            "reversed" => Ok(RegressionDirection::Reversed),
            other => Err(format!("unknown regression direction `{other}`")),
        }
    }
}

impl std::fmt::Display for RegressionDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegressionDirection::Forward => "forward",
            RegressionDirection::Reversed => "reversed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub gtfs_dir: PathBuf,
    pub legs_file: PathBuf,
    pub rail_survey_file: PathBuf,
    pub bus_survey_file: PathBuf,
    pub areas_file: PathBuf,
    pub output_dir: PathBuf,
    pub buffer_feet: f64,
    pub level: AreaLevel,
    pub low_income_cut: f64,
    pub high_income_cut: f64,
    pub period_label: String,
    pub regression_direction: RegressionDirection,
    pub normalize_transfer_wait: bool,
    pub weighted_regression: bool,
}

impl RunConfig {
    /// Config with the default analysis parameters for the given paths.
    pub fn new(
        gtfs_dir: impl Into<PathBuf>,
        legs_file: impl Into<PathBuf>,
        rail_survey_file: impl Into<PathBuf>,
        bus_survey_file: impl Into<PathBuf>,
        areas_file: impl Into<PathBuf>,
        output_dir: impl Into<PathBuf>,
    ) -> Self {
        RunConfig {
            gtfs_dir: gtfs_dir.into(),
            legs_file: legs_file.into(),
            rail_survey_file: rail_survey_file.into(),
            bus_survey_file: bus_survey_file.into(),
            areas_file: areas_file.into(),
            output_dir: output_dir.into(),
            buffer_feet: DEFAULT_BUFFER_FEET,
            level: AreaLevel::Block,
            low_income_cut: 0.25,
            high_income_cut: 0.50,
            period_label: String::new(),
            regression_direction: RegressionDirection::Forward,
            normalize_transfer_wait: false,
            weighted_regression: false,
        }
    }

    fn validate(&self) -> Result<(), PipelineError> {
        if !self.buffer_feet.is_finite() || self.buffer_feet < 0.0 {
            return Err(PipelineError::Config("buffer_feet must be >= 0".into()));
        }
        if !(0.0 <= self.low_income_cut
            && self.low_income_cut < self.high_income_cut
            && self.high_income_cut <= 1.0)
        {
            return Err(PipelineError::Config(
                "income cuts must satisfy 0 <= low < high <= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Invalid configuration; CLI exit code 2.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Fatal ingestion failure, named by stage; CLI exit code 1.
    #[error("ingestion failed at stage `{stage}`: {message}")]
    Ingest {
        stage: &'static str,
        message: String,
    },
    /// Failure writing an output artifact.
    #[error("writing {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn ingest_err(stage: &'static str, message: impl ToString) -> PipelineError {
    PipelineError::Ingest {
        stage,
        message: message.to_string(),
    }
}

/// Stage accounting for the coverage report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub counts: Vec<(String, u64)>,
    pub no_demographics_stops: Vec<String>,
    pub uncovered_areas: Vec<String>,
    pub survey_rejects: Vec<SurveyReject>,
    pub area_rejects: Vec<AreaReject>,
}

impl Coverage {
    pub fn count(&self, key: &str) -> Option<u64> {
        self.counts.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (key, value) in &self.counts {
            out.push_str(&format!("{key},{value}\n"));
        }
        for stop in &self.no_demographics_stops {
            out.push_str(&format!("no_demographics_stop,{stop}\n"));
        }
        for geoid in &self.uncovered_areas {
            out.push_str(&format!("uncovered_area,{geoid}\n"));
        }
        for reject in &self.survey_rejects {
            out.push_str(&format!("survey_reject,{}:{}\n", reject.key, reject.reason));
        }
        for reject in &self.area_rejects {
            out.push_str(&format!("area_reject,{}:{}\n", reject.geoid, reject.reason));
        }
        out
    }
}

/// Everything a run produces, also written under `output_dir`.
#[derive(Debug)]
pub struct PipelineArtifacts {
    pub config: RunConfig,
    pub area_profiles: Vec<AreaProfile<f64>>,
    pub regressions: Vec<(String, RegressionResult<f64>)>,
    /// Regressions that could not run (name, message); not fatal.
    pub regression_errors: Vec<(String, String)>,
    pub coverage: Coverage,
    pub rejects: Vec<Reject>,
}

/// Dedupe rejects to one row per journey, first reason wins, sorted by id.
fn dedupe_rejects(rejects: Vec<Reject>) -> Vec<Reject> {
    let mut seen = BTreeSet::new();
    let mut out: Vec<Reject> = Vec::new();
    for r in rejects {
        if seen.insert(r.journey_id.clone()) {
            out.push(r);
        }
    }
    out.sort_by(|a, b| a.journey_id.cmp(&b.journey_id));
    out
}

pub fn run_pipeline(config: &RunConfig) -> Result<PipelineArtifacts, PipelineError> {
    config.validate()?;
    for (stage, path, is_dir) in [
        ("gtfs", &config.gtfs_dir, true),
        ("legs", &config.legs_file, false),
        ("survey", &config.rail_survey_file, false),
        ("survey", &config.bus_survey_file, false),
        ("areas", &config.areas_file, false),
    ] {
        let ok = if is_dir {
            path.is_dir()
        } else {
            path.is_file()
        };
        if !ok {
            return Err(ingest_err(
                stage,
                format!("missing input {}", path.display()),
            ));
        }
    }
    std::fs::create_dir_all(&config.output_dir).map_err(|source| PipelineError::Output {
        path: config.output_dir.display().to_string(),
        source,
    })?;

    // ingest
    let network: crate::gtfs::TransitNetwork<f64> =
        parse_feed(&config.gtfs_dir).map_err(|e| ingest_err("gtfs", e))?;
    let leg_load = load_legs(&config.legs_file).map_err(|e| ingest_err("legs", e))?;
    let (survey, survey_rejects) =
        load_survey::<f64>(&config.rail_survey_file, &config.bus_survey_file)
            .map_err(|e| ingest_err("survey", e))?;
    let (areas, area_rejects) = load_areas::<f64>(&config.areas_file, network.region_origin)
        .map_err(|e| ingest_err("areas", e))?;

    // quarantine whole journeys touched by any row-level reject
    let mut rejects = leg_load.rejects.clone();
    let rejected_ids: BTreeSet<String> = rejects.iter().map(|r| r.journey_id.clone()).collect();
    let legs: Vec<_> = leg_load
        .legs
        .into_iter()
        .filter(|l| !rejected_ids.contains(&l.journey_id))
        .collect();
    let legs_loaded = legs.len() as u64;

    // link and score
    let (journeys, link_rejects) = link_journeys::<f64>(&legs);
    rejects.extend(link_rejects);
    let options = MetricsOptions {
        normalize_transfer_wait: config.normalize_transfer_wait,
    };
    let (scored, metric_rejects) = compute_metrics(journeys, &network, options);
    rejects.extend(metric_rejects);
    let rejects = dedupe_rejects(rejects);
    let journeys_accepted = scored.len() as u64;
    let journeys_rejected = rejects.len() as u64;

    // demographics join
    let mut profiles = stop_profiles(&scored);
    let no_demographics = attach_demographics(&mut profiles, &survey, &network);
    let stops_profiled = profiles.len() as u64;

    // stop projection
    let mut stop_points: BTreeMap<String, Point<f64>> = BTreeMap::new();
    for stop_id in profiles.keys() {
        let stop = network
            .stops
            .get(stop_id)
            .ok_or_else(|| ingest_err("legs", format!("origin stop {stop_id} not in feed")))?;
        let p = project(stop.lat, stop.lon, network.region_origin)
            .map_err(|e| ingest_err("gtfs", format!("stop {stop_id}: {e}")))?;
        stop_points.insert(stop_id.clone(), p);
    }

    // buffer aggregation at the analysis level (tract output aggregates blocks)
    let compute_level = match config.level {
        AreaLevel::Tract => AreaLevel::Block,
        other => other,
    };
    let analysis_areas: Vec<&CensusArea<f64>> =
        areas.iter().filter(|a| a.level == compute_level).collect();
    let cuts = (config.low_income_cut, config.high_income_cut);
    let aggregated: Vec<(String, Option<AreaProfile<f64>>)> = analysis_areas
        .par_iter()
        .map(|area| {
            (
                area.geoid.clone(),
                aggregate_area(area, &stop_points, &profiles, config.buffer_feet, cuts),
            )
        })
        .collect();
    let mut base_profiles = Vec::new();
    let mut uncovered_areas = Vec::new();
    for (geoid, profile) in aggregated {
        match profile {
            Some(p) => base_profiles.push(p),
            None => uncovered_areas.push(geoid),
        }
    }

    let (area_profiles, areas_total, uncovered_areas) = match config.level {
        AreaLevel::Tract => {
            let tracts = rollup_tracts(&base_profiles, cuts);
            let all_prefixes: BTreeSet<String> = analysis_areas
                .iter()
                .map(|a| tract_prefix(&a.geoid).to_string())
                .collect();
            let covered: BTreeSet<String> = tracts.iter().map(|t| t.geoid.clone()).collect();
            let uncovered: Vec<String> = all_prefixes.difference(&covered).cloned().collect();
            (tracts, all_prefixes.len() as u64, uncovered)
        }
        _ => (base_profiles, analysis_areas.len() as u64, uncovered_areas),
    };

    // regressions
    let mut regressions: Vec<(String, RegressionResult<f64>)> = Vec::new();
    let mut regression_errors: Vec<(String, String)> = Vec::new();
    match config.regression_direction {
        RegressionDirection::Forward => {
            match equity_regression(&area_profiles, config.weighted_regression) {
                Ok(r) => regressions.push(("equity".to_string(), r)),
                Err(e) => regression_errors.push(("equity".to_string(), e.to_string())),
            }
            match purpose_regression(&area_profiles, config.weighted_regression) {
                Ok(r) => regressions.push(("purpose".to_string(), r)),
                Err(e) => regression_errors.push(("purpose".to_string(), e.to_string())),
            }
        }
        RegressionDirection::Reversed => {
            match reversed_regressions(&area_profiles, config.weighted_regression) {
                Ok(results) => {
                    for (key, r) in results {
                        regressions.push((format!("reversed_{key}"), r));
                    }
                }
                Err(e) => regression_errors.push(("reversed".to_string(), e.to_string())),
            }
        }
    }

    let journeys_input = journeys_accepted + journeys_rejected;
    let coverage = Coverage {
        counts: vec![
            ("journeys_input".to_string(), journeys_input),
            ("journeys_accepted".to_string(), journeys_accepted),
            ("journeys_rejected".to_string(), journeys_rejected),
            ("legs_loaded".to_string(), legs_loaded),
            ("stops_profiled".to_string(), stops_profiled),
            (
                "stops_no_demographics".to_string(),
                no_demographics.len() as u64,
            ),
            (
                "survey_rows_rejected".to_string(),
                survey_rejects.len() as u64,
            ),
            (
                "area_features_rejected".to_string(),
                area_rejects.len() as u64,
            ),
            ("areas_total".to_string(), areas_total),
            ("areas_covered".to_string(), area_profiles.len() as u64),
            (
                "areas_uncovered".to_string(),
                areas_total - area_profiles.len() as u64,
            ),
            (
                "regressions_failed".to_string(),
                regression_errors.len() as u64,
            ),
        ],
        no_demographics_stops: no_demographics,
        uncovered_areas,
        survey_rejects,
        area_rejects,
    };

    let artifacts = PipelineArtifacts {
        config: config.clone(),
        area_profiles,
        regressions,
        regression_errors,
        coverage,
        rejects,
    };
    write_artifacts(&artifacts, &areas)?;
    Ok(artifacts)
}

/// `run_meta.csv` key/value echo of the analysis configuration, used by
/// `compare-periods` to verify two runs are comparable.
pub fn run_meta(config: &RunConfig) -> Vec<(String, String)> {
    vec![
        ("buffer_feet".into(), format!("{}", config.buffer_feet)),
        ("level".into(), config.level.to_string()),
        (
            "low_income_cut".into(),
            format!("{}", config.low_income_cut),
        ),
        (
            "high_income_cut".into(),
            format!("{}", config.high_income_cut),
        ),
        (
            "regression_direction".into(),
            config.regression_direction.to_string(),
        ),
        (
            "normalize_transfer_wait".into(),
            config.normalize_transfer_wait.to_string(),
        ),
        (
            "weighted_regression".into(),
            config.weighted_regression.to_string(),
        ),
        ("period_label".into(), config.period_label.clone()),
        ("legs_file".into(), config.legs_file.display().to_string()),
    ]
}

/// Keys of `run_meta` that are allowed to differ between compared periods.
pub const PERIOD_VARIABLE_KEYS: [&str; 2] = ["period_label", "legs_file"];

fn write_artifacts(
    artifacts: &PipelineArtifacts,
    areas: &[CensusArea<f64>],
) -> Result<(), PipelineError> {
    let out = &artifacts.config.output_dir;
    let write = |name: &str, contents: String| -> Result<(), PipelineError> {
        let path = out.join(name);
        atomic_write(&path, &contents).map_err(|source| PipelineError::Output {
            path: path.display().to_string(),
            source,
        })
    };

    write(
        "area_profiles.csv",
        area_profiles_csv(&artifacts.area_profiles),
    )?;

    let geometries: BTreeMap<String, serde_json::Value> = areas
        .iter()
        .filter(|a| a.level == artifacts.config.level)
        .map(|a| (a.geoid.clone(), a.geometry_wgs84.clone()))
        .collect();
    write(
        "area_profiles.geojson",
        area_profiles_geojson(&artifacts.area_profiles, &geometries),
    )?;

    for (name, result) in &artifacts.regressions {
        write(&format!("regression_{name}.csv"), regression_csv(result))?;
        let title = match name.as_str() {
            "equity" => "Low-income ridership share on convenience measures".to_string(),
            "purpose" => "Low-income ridership share on trip-purpose shares".to_string(),
            other => format!("Reversed model: {}", other.trim_start_matches("reversed_")),
        };
        let title = if artifacts.config.period_label.is_empty() {
            title
        } else {
            format!("{title} ({})", artifacts.config.period_label)
        };
        write(
            &format!("regression_{name}.txt"),
            regression_table(&title, result),
        )?;
    }

    write("coverage.csv", artifacts.coverage.to_csv())?;

    let mut rejects_csv = String::from("journey_id,reason\n");
    for r in &artifacts.rejects {
        rejects_csv.push_str(&format!("{},{}\n", r.journey_id, r.reason));
    }
    write("rejects.csv", rejects_csv)?;

    let mut meta_csv = String::from("key,value\n");
    for (k, v) in run_meta(&artifacts.config) {
        meta_csv.push_str(&format!("{k},{v}\n"));
    }
    write("run_meta.csv", meta_csv)?;
    Ok(())
}

/// Load `run_meta.csv` from a finished run directory.
pub fn load_run_meta(run_dir: &Path) -> Result<BTreeMap<String, String>, PipelineError> {
    let path = run_dir.join("run_meta.csv");
    let raw = std::fs::read_to_string(&path)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for line in raw.lines().skip(1) {
        if let Some((k, v)) = line.split_once(',') {
            out.insert(k.to_string(), v.to_string());
        }
    }
    Ok(out)
}

/// Load a regression CSV written by [`run_pipeline`] back into a result.
/// Values carry report precision only; fine for comparison reports.
pub fn load_regression_csv(path: &Path) -> Result<RegressionResult<f64>, PipelineError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(raw.as_bytes());
    let mut rows = Vec::new();
    let mut r_squared = 0.0;
    let mut adjusted = 0.0;
    let mut n = 0usize;
    let mut dof = 0usize;
    for record in reader.records() {
        let record =
            record.map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let name = record.get(0).unwrap_or("").to_string();
        let value: f64 = record.get(1).unwrap_or("").parse().unwrap_or(f64::NAN);
        match name.as_str() {
            "R-squared" => r_squared = value,
            "Adjusted R-squared" => adjusted = value,
            "Observations" => n = value as usize,
            "Degrees of Freedom" => dof = value as usize,
            _ => {
                let get =
                    |i: usize| -> f64 { record.get(i).unwrap_or("").parse().unwrap_or(f64::NAN) };
                rows.push(crate::stats::CoefficientRow {
                    name,
                    coefficient: value,
                    std_error: get(2),
                    t_value: get(3),
                    p_value: get(4),
                });
            }
        }
    }
    Ok(RegressionResult {
        rows,
        r_squared,
        adjusted_r_squared: adjusted,
        n,
        degrees_of_freedom: dof,
    })
}

/// Compare the named regression across two finished run directories,
/// verifying first that the runs differ only in the period inputs.
pub fn compare_period_dirs(
    run1: &Path,
    run2: &Path,
    regression_name: &str,
) -> Result<(Vec<CoefficientComparison<f64>>, String), PipelineError> {
    let meta1 = load_run_meta(run1)?;
    let meta2 = load_run_meta(run2)?;
    for (key, value) in &meta1 {
        if PERIOD_VARIABLE_KEYS.contains(&key.as_str()) {
            continue;
        }
        if meta2.get(key) != Some(value) {
            return Err(PipelineError::Config(format!(
                "specification mismatch on `{key}`: {:?} vs {:?}",
                value,
                meta2.get(key)
            )));
        }
    }
    let file = format!("regression_{regression_name}.csv");
    let r1 = load_regression_csv(&run1.join(&file))?;
    let r2 = load_regression_csv(&run2.join(&file))?;
    let rows = compare_periods(&r1, &r2).map_err(|e| PipelineError::Config(e.to_string()))?;
    let csv = period_comparison_csv(&rows);
    Ok((rows, csv))
}

/// Load `area_profiles.csv` rows back as profiles (report precision).
pub fn load_area_profiles_csv(path: &Path) -> Result<Vec<AreaProfile<f64>>, PipelineError> {
    use crate::demographics::{classify_income, PurposeShares};
    use crate::journeys::ConvenienceMetrics;
    let raw = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    let mut reader = csv::Reader::from_reader(raw.as_bytes());
    let mut out = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let get = |i: usize| record.get(i).unwrap_or("").to_string();
        let num = |i: usize| -> f64 { record.get(i).unwrap_or("").parse().unwrap_or(f64::NAN) };
        let level: AreaLevel = get(1)
            .parse()
            .map_err(|e: String| PipelineError::Config(e))?;
        let lis = num(8);
        out.push(AreaProfile {
            geoid: get(0),
            level,
            ridership: num(2) as u64,
            metrics: ConvenienceMetrics {
                time_per_mile: num(3),
                transfers_per_mile: num(4),
                transfer_wait_minutes: num(5),
                network_miles: num(6),
                rail_share: num(7),
            },
            low_income_share: lis,
            purposes: PurposeShares {
                home_work: num(9),
                home_other: num(10),
                other_nonhome: num(11),
                home_social: num(12),
                home_school: num(13),
            },
            income_class: classify_income(lis, 0.25, 0.50),
            assigned_stops: get(16)
                .split(';')
                .filter(|s| !s.is_empty())
                .map(|s| s.to_string())
                .collect(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, BundlePaths, ScenarioConfig};
    use tempfile::TempDir;

    fn scenario() -> ScenarioConfig {
        ScenarioConfig {
            seed: 7,
            grid_rows: 8,
            grid_cols: 8,
            n_routes: 6,
            stops_per_route: 6,
            n_journeys: 400,
            ..ScenarioConfig::default()
        }
    }

    fn run_config(bundle: &Path, out: &Path) -> RunConfig {
        let paths = BundlePaths::under(bundle);
        RunConfig::new(
            paths.gtfs_dir,
            paths.legs,
            paths.survey_rail,
            paths.survey_bus,
            paths.areas,
            out,
        )
    }

    #[test]
    fn toy_city_runs_end_to_end_and_matches_ground_truth_coverage() {
        let bundle = TempDir::new().unwrap();
        let out = TempDir::new().unwrap();
        let truth = generate(&scenario(), bundle.path()).unwrap();
        let artifacts = run_pipeline(&run_config(bundle.path(), out.path())).unwrap();

        assert_eq!(
            artifacts.coverage.count("areas_covered").unwrap(),
            truth.covered_blocks_500ft as u64
        );
        assert_eq!(artifacts.coverage.count("journeys_rejected").unwrap(), 0);
        assert_eq!(
            artifacts.coverage.count("journeys_accepted").unwrap(),
            truth.journey_metrics.len() as u64
        );
        for name in [
            "area_profiles.csv",
            "area_profiles.geojson",
            "regression_equity.csv",
            "regression_equity.txt",
            "regression_purpose.csv",
            "coverage.csv",
            "rejects.csv",
            "run_meta.csv",
        ] {
            assert!(out.path().join(name).is_file(), "{name} missing");
        }
    }

    #[test]
    fn larger_buffer_covers_at_least_as_many_areas() {
        let bundle = TempDir::new().unwrap();
        generate(&scenario(), bundle.path()).unwrap();
        let out500 = TempDir::new().unwrap();
        let out1000 = TempDir::new().unwrap();
        let mut cfg500 = run_config(bundle.path(), out500.path());
        cfg500.buffer_feet = 500.0;
        let mut cfg1000 = run_config(bundle.path(), out1000.path());
        cfg1000.buffer_feet = 1000.0;
        let a500 = run_pipeline(&cfg500).unwrap();
        let a1000 = run_pipeline(&cfg1000).unwrap();
        assert!(
            a1000.coverage.count("areas_covered").unwrap()
                >= a500.coverage.count("areas_covered").unwrap()
        );
    }

    #[test]
    fn missing_legs_file_aborts_naming_the_stage() {
        let bundle = TempDir::new().unwrap();
        let out = TempDir::new().unwrap();
        generate(&scenario(), bundle.path()).unwrap();
        let mut cfg = run_config(bundle.path(), out.path());
        cfg.legs_file = bundle.path().join("not_there.csv");
        match run_pipeline(&cfg) {
            Err(PipelineError::Ingest { stage, .. }) => assert_eq!(stage, "legs"),
            other => panic!("expected legs ingest error, got {other:?}"),
        }
    }

    #[test]
    fn bad_income_cuts_are_a_config_error() {
        let bundle = TempDir::new().unwrap();
        let out = TempDir::new().unwrap();
        let mut cfg = run_config(bundle.path(), out.path());
        cfg.low_income_cut = 0.6;
        cfg.high_income_cut = 0.5;
        assert!(matches!(run_pipeline(&cfg), Err(PipelineError::Config(_))));
    }

    #[test]
    fn block_group_and_tract_levels_produce_profiles() {
        let bundle = TempDir::new().unwrap();
        generate(&scenario(), bundle.path()).unwrap();
        for level in [AreaLevel::BlockGroup, AreaLevel::Tract] {
            let out = TempDir::new().unwrap();
            let mut cfg = run_config(bundle.path(), out.path());
            cfg.level = level;
            let artifacts = run_pipeline(&cfg).unwrap();
            assert!(
                !artifacts.area_profiles.is_empty(),
                "{level} produced nothing"
            );
            assert!(artifacts.area_profiles.iter().all(|p| p.level == level));
        }
    }

    #[test]
    fn reversed_direction_emits_five_regressions() {
        let bundle = TempDir::new().unwrap();
        let out = TempDir::new().unwrap();
        generate(&scenario(), bundle.path()).unwrap();
        let mut cfg = run_config(bundle.path(), out.path());
        cfg.regression_direction = RegressionDirection::Reversed;
        let artifacts = run_pipeline(&cfg).unwrap();
        assert_eq!(artifacts.regressions.len(), 5);
        assert!(out
            .path()
            .join("regression_reversed_time_per_mile.csv")
            .is_file());
    }

    #[test]
    fn identical_runs_are_byte_identical() {
        let bundle = TempDir::new().unwrap();
        generate(&scenario(), bundle.path()).unwrap();
        let out_a = TempDir::new().unwrap();
        let out_b = TempDir::new().unwrap();
        run_pipeline(&run_config(bundle.path(), out_a.path())).unwrap();
        run_pipeline(&run_config(bundle.path(), out_b.path())).unwrap();
        for name in [
            "area_profiles.csv",
            "regression_equity.csv",
            "coverage.csv",
            "rejects.csv",
        ] {
            let a = std::fs::read(out_a.path().join(name)).unwrap();
            let b = std::fs::read(out_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs");
        }
    }

    #[test]
    fn compare_periods_between_run_dirs() {
        let bundle = TempDir::new().unwrap();
        generate(&scenario(), bundle.path()).unwrap();
        let out_a = TempDir::new().unwrap();
        let out_b = TempDir::new().unwrap();
        let mut cfg_a = run_config(bundle.path(), out_a.path());
        cfg_a.period_label = "jan2019".into();
        let mut cfg_b = run_config(bundle.path(), out_b.path());
        cfg_b.period_label = "jan2020".into();
        run_pipeline(&cfg_a).unwrap();
        run_pipeline(&cfg_b).unwrap();

        let (rows, csv) = compare_period_dirs(out_a.path(), out_b.path(), "equity").unwrap();
        assert!(!rows.is_empty());
        for row in &rows {
            assert_eq!(
                row.difference, 0.0,
                "identical runs must show zero differences"
            );
        }
        assert!(csv.starts_with("variable,"));

        // different buffer -> specification mismatch
        let out_c = TempDir::new().unwrap();
        let mut cfg_c = run_config(bundle.path(), out_c.path());
        cfg_c.buffer_feet = 1000.0;
        run_pipeline(&cfg_c).unwrap();
        assert!(matches!(
            compare_period_dirs(out_a.path(), out_c.path(), "equity"),
            Err(PipelineError::Config(_))
        ));
    }

    #[test]
    fn compare_periods_recovers_planted_slope_shift() {
        use crate::stats::EQUITY_LABELS;
        // two cities identical except for the time-per-mile slope used to
        // construct shares: 0.68 vs 0.72
        let tmp = TempDir::new().unwrap();
        let mut dirs = Vec::new();
        for (tag, slope) in [("a", 0.68f64), ("b", 0.72f64)] {
            let mut config = ScenarioConfig {
                seed: 31,
                grid_rows: 20,
                grid_cols: 20,
                n_routes: 16,
                stops_per_route: 10,
                n_journeys: 3_000,
                noise_sigma: 0.01,
                ..ScenarioConfig::default()
            };
            config
                .planted_effects
                .insert("time_per_mile".to_string(), slope);
            let bundle = tmp.path().join(format!("bundle_{tag}"));
            generate(&config, &bundle).unwrap();
            let out = tmp.path().join(format!("run_{tag}"));
            let mut cfg = run_config(&bundle, &out);
            cfg.period_label = tag.to_string();
            run_pipeline(&cfg).unwrap();
            dirs.push(out);
        }
        let (rows, _) = compare_period_dirs(&dirs[0], &dirs[1], "equity").unwrap();
        let row = rows.iter().find(|r| r.name == EQUITY_LABELS[0]).unwrap();
        let combined_se = (row.std_error_1.powi(2) + row.std_error_2.powi(2)).sqrt();
        assert!(
            (row.difference - (0.68 - 0.72)).abs() <= 3.0 * combined_se,
            "difference {} vs -0.04 (combined se {combined_se})",
            row.difference
        );
        assert!(row.p_value_1 < 0.001 && row.p_value_2 < 0.001);
    }

    #[test]
    fn area_profiles_csv_round_trips() {
        let bundle = TempDir::new().unwrap();
        let out = TempDir::new().unwrap();
        generate(&scenario(), bundle.path()).unwrap();
        let artifacts = run_pipeline(&run_config(bundle.path(), out.path())).unwrap();
        let loaded = load_area_profiles_csv(&out.path().join("area_profiles.csv")).unwrap();
        assert_eq!(loaded.len(), artifacts.area_profiles.len());
        for (a, b) in loaded.iter().zip(&artifacts.area_profiles) {
            assert_eq!(a.geoid, b.geoid);
            assert_eq!(a.ridership, b.ridership);
            assert!((a.low_income_share - b.low_income_share).abs() < 1e-4);
        }
    }
}
