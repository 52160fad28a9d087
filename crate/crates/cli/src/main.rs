//! Command-line surface for the transit-equity pipeline.
//!
//! Exit codes: 0 on success, 1 on fatal ingestion failure, 2 on invalid
//! configuration or usage.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use transit_equity::demographics::load_survey;
use transit_equity::gtfs::parse_feed;
use transit_equity::journeys::load_legs;
use transit_equity::report::{
    area_comparison_csv, atomic_write, compare_areas, compare_period_dirs, load_area_profiles_csv,
    regression_csv, regression_table, run_pipeline, PipelineError, RegressionDirection, RunConfig,
};
use transit_equity::spatial::{load_areas, AreaLevel};
use transit_equity::stats::{equity_regression, purpose_regression, reversed_regressions};
use transit_equity::synth::{generate, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "transit-equity",
    about = "Journey-based transit equity analytics: OD journeys + survey demographics -> area profiles and equity regressions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic input bundle with planted effects
    Synth(SynthArgs),
    /// Run the full pipeline: ingest, link, aggregate, regress, report
    Run(RunArgs),
    /// Re-run regressions over an existing area_profiles.csv
    Regress(RegressArgs),
    /// Compare two area profiles from an area_profiles.csv
    CompareAreas(CompareAreasArgs),
    /// Compare regression coefficients between two finished run directories
    ComparePeriods(ComparePeriodsArgs),
    /// Validate inputs and print summary counts as key=value lines
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the bundle
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 25)]
    rows: usize,
    #[arg(long, default_value_t = 25)]
    cols: usize,
    #[arg(long, default_value_t = 1320.0)]
    block_side_feet: f64,
    #[arg(long, default_value_t = 16)]
    routes: usize,
    #[arg(long, default_value_t = 12)]
    stops_per_route: usize,
    #[arg(long, default_value_t = 6000)]
    journeys: usize,
    #[arg(long, default_value_t = 0.45)]
    transfer_probability: f64,
    /// Planted slope as metric=value; repeatable. Defaults to
    /// time_per_mile=0.68 and transfers_per_mile=0.04 when omitted.
    #[arg(long = "effect", value_name = "METRIC=SLOPE")]
    effects: Vec<String>,
    #[arg(long, default_value_t = -5.11, allow_hyphen_values = true)]
    intercept: f64,
    #[arg(long, default_value_t = 0.01)]
    noise_sigma: f64,
    #[arg(long, default_value = "2019-01-15")]
    service_date: String,
}

#[derive(Args)]
struct RunArgs {
    /// Plain-text key=value config file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    gtfs_dir: Option<PathBuf>,
    #[arg(long)]
    legs: Option<PathBuf>,
    #[arg(long)]
    rail_survey: Option<PathBuf>,
    #[arg(long)]
    bus_survey: Option<PathBuf>,
    #[arg(long)]
    areas: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    buffer_feet: Option<f64>,
    #[arg(long)]
    level: Option<AreaLevel>,
    #[arg(long)]
    low_income_cut: Option<f64>,
    #[arg(long)]
    high_income_cut: Option<f64>,
    #[arg(long)]
    period: Option<String>,
    #[arg(long)]
    regression_direction: Option<RegressionDirection>,
    #[arg(long)]
    normalize_transfer_wait: bool,
    #[arg(long)]
    weighted_regression: bool,
}

#[derive(Args)]
struct RegressArgs {
    /// An area_profiles.csv produced by `run`
    #[arg(long)]
    profiles: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "forward")]
    regression_direction: RegressionDirection,
    #[arg(long)]
    weighted_regression: bool,
}

#[derive(Args)]
struct CompareAreasArgs {
    #[arg(long)]
    profiles: PathBuf,
    /// geoid of the subject area
    #[arg(long)]
    a: String,
    /// geoid of the baseline area
    #[arg(long)]
    b: String,
    /// Optional CSV output path (stdout otherwise)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ComparePeriodsArgs {
    #[arg(long)]
    run1: PathBuf,
    #[arg(long)]
    run2: PathBuf,
    /// Which regression table to compare
    #[arg(long, default_value = "equity")]
    regression: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    gtfs_dir: PathBuf,
    #[arg(long)]
    legs: Option<PathBuf>,
    #[arg(long)]
    rail_survey: Option<PathBuf>,
    #[arg(long)]
    bus_survey: Option<PathBuf>,
    #[arg(long)]
    areas: Option<PathBuf>,
}

/// Error with the process exit code it maps to.
enum CliError {
    /// Invalid configuration or usage: exit 2.
    Config(String),
    /// Fatal ingestion or I/O: exit 1.
    Fatal(String),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(msg) => CliError::Config(msg),
            other => CliError::Fatal(other.to_string()),
        }
    }
}

impl From<transit_equity::synth::SynthError> for CliError {
    fn from(e: transit_equity::synth::SynthError) -> Self {
        match e {
            transit_equity::synth::SynthError::InvalidConfig(msg) => CliError::Config(msg),
            other => CliError::Fatal(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Run(args) => cmd_run(args),
        Command::Regress(args) => cmd_regress(args),
        Command::CompareAreas(args) => cmd_compare_areas(args),
        Command::ComparePeriods(args) => cmd_compare_periods(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Fatal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("error: invalid configuration: {msg}");
            ExitCode::from(2)
        }
    }
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let mut config = ScenarioConfig {
        seed: args.seed,
        grid_rows: args.rows,
        grid_cols: args.cols,
        block_side_feet: args.block_side_feet,
        n_routes: args.routes,
        stops_per_route: args.stops_per_route,
        n_journeys: args.journeys,
        transfer_probability: args.transfer_probability,
        planted_intercept: args.intercept,
        noise_sigma: args.noise_sigma,
        service_date: args.service_date,
        ..ScenarioConfig::default()
    };
    if !args.effects.is_empty() {
        let mut effects = BTreeMap::new();
        for spec in &args.effects {
            let (key, value) = spec.split_once('=').ok_or_else(|| {
                CliError::Config(format!("--effect wants METRIC=SLOPE, got `{spec}`"))
            })?;
            let slope: f64 = value
                .parse()
                .map_err(|_| CliError::Config(format!("bad slope in `{spec}`")))?;
            effects.insert(key.to_string(), slope);
        }
        config.planted_effects = effects;
    }
    let truth = generate(&config, &args.out)?;
    println!("bundle={}", args.out.display());
    println!("journeys={}", truth.journey_metrics.len());
    println!("stops={}", truth.stop_metrics.len());
    println!("blocks={}", truth.n_blocks);
    println!("covered_blocks_500ft={}", truth.covered_blocks_500ft);
    Ok(())
}

/// Plain-text `key = value` config file; `#` starts a comment.
fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (line_no, line) in raw.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!(
                "{} line {}: expected key = value",
                path.display(),
                line_no + 1
            ))
        })?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => read_config_file(path)?,
        None => BTreeMap::new(),
    };
    let path_of = |flag: &Option<PathBuf>, key: &str| -> Result<PathBuf, CliError> {
        flag.clone()
            .or_else(|| file.get(key).map(PathBuf::from))
            .ok_or_else(|| CliError::Config(format!("missing required setting `{key}`")))
    };
    let parse_key = |key: &str| -> Result<Option<String>, CliError> { Ok(file.get(key).cloned()) };

    let mut config = RunConfig::new(
        path_of(&args.gtfs_dir, "gtfs_dir")?,
        path_of(&args.legs, "legs_file")?,
        path_of(&args.rail_survey, "rail_survey_file")?,
        path_of(&args.bus_survey, "bus_survey_file")?,
        path_of(&args.areas, "areas_file")?,
        path_of(&args.out, "output_dir")?,
    );
    let bad = |key: &str, v: &str| CliError::Config(format!("bad value `{v}` for `{key}`"));
    if let Some(v) = parse_key("buffer_feet")? {
        config.buffer_feet = v.parse().map_err(|_| bad("buffer_feet", &v))?;
    }
    if let Some(v) = parse_key("level")? {
        config.level = v.parse().map_err(|_| bad("level", &v))?;
    }
    if let Some(v) = parse_key("low_income_cut")? {
        config.low_income_cut = v.parse().map_err(|_| bad("low_income_cut", &v))?;
    }
    if let Some(v) = parse_key("high_income_cut")? {
        config.high_income_cut = v.parse().map_err(|_| bad("high_income_cut", &v))?;
    }
    if let Some(v) = parse_key("period_label")? {
        config.period_label = v;
    }
    if let Some(v) = parse_key("regression_direction")? {
        config.regression_direction = v.parse().map_err(|_| bad("regression_direction", &v))?;
    }
    if let Some(v) = parse_key("normalize_transfer_wait")? {
        config.normalize_transfer_wait =
            v.parse().map_err(|_| bad("normalize_transfer_wait", &v))?;
    }
    if let Some(v) = parse_key("weighted_regression")? {
        config.weighted_regression = v.parse().map_err(|_| bad("weighted_regression", &v))?;
    }
    // flags override file entries
    if let Some(v) = args.buffer_feet {
        config.buffer_feet = v;
    }
    if let Some(v) = args.level {
        config.level = v;
    }
    if let Some(v) = args.low_income_cut {
        config.low_income_cut = v;
    }
    if let Some(v) = args.high_income_cut {
        config.high_income_cut = v;
    }
    if let Some(v) = args.period {
        config.period_label = v;
    }
    if let Some(v) = args.regression_direction {
        config.regression_direction = v;
    }
    if args.normalize_transfer_wait {
        config.normalize_transfer_wait = true;
    }
    if args.weighted_regression {
        config.weighted_regression = true;
    }

    let artifacts = run_pipeline(&config)?;
    for (key, value) in &artifacts.coverage.counts {
        println!("{key}={value}");
    }
    for (name, message) in &artifacts.regression_errors {
        eprintln!("warning: regression `{name}` skipped: {message}");
    }
    println!("output_dir={}", config.output_dir.display());
    Ok(())
}

fn cmd_regress(args: RegressArgs) -> Result<(), CliError> {
    let profiles = load_area_profiles_csv(&args.profiles)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Fatal(format!("{}: {e}", args.out.display())))?;
    let mut results = Vec::new();
    match args.regression_direction {
        RegressionDirection::Forward => {
            results.push((
                "equity".to_string(),
                equity_regression(&profiles, args.weighted_regression)
                    .map_err(|e| CliError::Fatal(e.to_string()))?,
            ));
            results.push((
                "purpose".to_string(),
                purpose_regression(&profiles, args.weighted_regression)
                    .map_err(|e| CliError::Fatal(e.to_string()))?,
            ));
        }
        RegressionDirection::Reversed => {
            for (key, result) in reversed_regressions(&profiles, args.weighted_regression)
                .map_err(|e| CliError::Fatal(e.to_string()))?
            {
                results.push((format!("reversed_{key}"), result));
            }
        }
    }
    for (name, result) in &results {
        let csv_path = args.out.join(format!("regression_{name}.csv"));
        atomic_write(&csv_path, &regression_csv(result))
            .map_err(|e| CliError::Fatal(format!("{}: {e}", csv_path.display())))?;
        let txt_path = args.out.join(format!("regression_{name}.txt"));
        atomic_write(&txt_path, &regression_table(name, result))
            .map_err(|e| CliError::Fatal(format!("{}: {e}", txt_path.display())))?;
        println!("wrote regression_{name}.csv");
    }
    Ok(())
}

fn cmd_compare_areas(args: CompareAreasArgs) -> Result<(), CliError> {
    let profiles = load_area_profiles_csv(&args.profiles)?;
    let find = |geoid: &str| {
        profiles.iter().find(|p| p.geoid == geoid).ok_or_else(|| {
            CliError::Config(format!("geoid {geoid} not in {}", args.profiles.display()))
        })
    };
    let a = find(&args.a)?;
    let b = find(&args.b)?;
    let cmp = compare_areas(a, b).map_err(|e| CliError::Config(e.to_string()))?;
    let csv = area_comparison_csv(&cmp);
    match &args.out {
        Some(path) => atomic_write(path, &csv)
            .map_err(|e| CliError::Fatal(format!("{}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_compare_periods(args: ComparePeriodsArgs) -> Result<(), CliError> {
    let (_, csv) = compare_period_dirs(&args.run1, &args.run2, &args.regression)?;
    match &args.out {
        Some(path) => atomic_write(path, &csv)
            .map_err(|e| CliError::Fatal(format!("{}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let network: transit_equity::TransitNetwork =
        parse_feed(&args.gtfs_dir).map_err(|e| CliError::Fatal(format!("gtfs: {e}")))?;
    for (key, value) in network.summary() {
        println!("{key}={value}");
    }
    if let Some(legs) = &args.legs {
        let load = load_legs(legs).map_err(|e| CliError::Fatal(format!("legs: {e}")))?;
        println!("legs_valid={}", load.legs.len());
        println!("legs_rejected={}", load.rejects.len());
    }
    if let (Some(rail), Some(bus)) = (&args.rail_survey, &args.bus_survey) {
        let (survey, rejects) =
            load_survey::<f64>(rail, bus).map_err(|e| CliError::Fatal(format!("survey: {e}")))?;
        println!("survey_rail_rows={}", survey.rail_rows.len());
        println!("survey_bus_rows={}", survey.bus_rows.len());
        println!("survey_rows_rejected={}", rejects.len());
    }
    if let Some(areas) = &args.areas {
        let (loaded, rejects) = load_areas::<f64>(areas, network.region_origin)
            .map_err(|e| CliError::Fatal(format!("areas: {e}")))?;
        println!("areas_valid={}", loaded.len());
        println!("areas_rejected={}", rejects.len());
    }
    Ok(())
}
