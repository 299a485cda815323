//! Command-line front end: `plan`, `simulate`, `verify` and `sweep-params`.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::limiter::{limit_profile, write_limits_csv, LimitSample};
use crate::model::{AssumptionSet, Preset, Scenario, ValidationError};
use crate::profiler::{metrics, plan_profile, Metrics, ProfileError, SpeedProfile};
use crate::scenario_file::{parse_scenario, ScenarioFileError};
use crate::simkernel::{adversary_sweep, simulate, SweepConfig};

/// Exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const INVALID: i32 = 2;
    pub const COLLISION: i32 = 3;
    pub const INFEASIBLE: i32 = 4;
}

const DEFAULT_SCENARIO: &str = include_str!("../fixtures/unicaragil.json");

#[derive(Debug, Parser)]
#[command(name = "occspeed", version, about = "Occlusion-aware speed limits for passing parked vehicles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the dynamic limit, the velocity profile and summary metrics.
    Plan(CommonArgs),
    /// Drive the planned profile in the time-stepped simulation.
    Simulate(CommonArgs),
    /// Run the adversarial pedestrian-emergence sweep against the planned profile.
    Verify(VerifyArgs),
    /// Tabulate metrics over a grid of assumption values.
    SweepParams(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Scenario JSON file (defaults to the built-in three-vehicle scenario).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Replace the scenario's assumptions with a preset (`example` or `extreme`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Set one assumption, e.g. `--override v_o=3.2`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Grid spacing along the route, m.
    #[arg(long, default_value_t = 0.1)]
    pub ds: f64,
    /// Simulation time step, s.
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Output formats.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,json")]
    pub format: Vec<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Spacing of pedestrian emergence times, s.
    #[arg(long, default_value_t = 0.05)]
    pub emergence_step: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Values for one assumption, e.g. `--grid a_max=1,3.25,6.5`. Repeatable; the
    /// rows cover the Cartesian product.
    #[arg(long = "grid", value_name = "KEY=V1,V2,...")]
    pub grid: Vec<String>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => exit::USAGE,
            CliError::Invalid(_) => exit::INVALID,
            CliError::Infeasible(_) => exit::INFEASIBLE,
        }
    }
}

impl From<ScenarioFileError> for CliError {
    fn from(e: ScenarioFileError) -> Self {
        match e {
            ScenarioFileError::Io { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<ValidationError> for CliError {
    fn from(e: ValidationError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        CliError::Infeasible(e.to_string())
    }
}

/// Resolved settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario<f64>,
    pub ds: f64,
    pub dt: f64,
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

impl RunConfig {
    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

fn read_scenario(path: Option<&Path>) -> Result<Scenario<f64>, CliError> {
    match path {
        None => Ok(parse_scenario(DEFAULT_SCENARIO)?),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read scenario {}: {e}", p.display())))?;
            Ok(parse_scenario(&text)?)
        }
    }
}

fn apply_overrides(a: &mut AssumptionSet<f64>, overrides: &[String]) -> Result<(), CliError> {
    for o in overrides {
        a.apply_override(o).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

/// Loads the scenario and applies `--preset`; `--override` goes to the planning
/// assumptions when `overrides_plan` is set.
fn resolve(args: &CommonArgs, overrides_plan: bool) -> Result<RunConfig, CliError> {
    if !(args.ds > 0.0 && args.ds.is_finite()) {
        return Err(CliError::Usage("--ds must be positive".into()));
    }
    if !(args.dt > 0.0 && args.dt.is_finite()) {
        return Err(CliError::Usage("--dt must be positive".into()));
    }
    let mut scenario = read_scenario(args.scenario.as_deref())?;
    if let Some(p) = &args.preset {
        let p: Preset = p.parse().map_err(|e: crate::model::ModelError| CliError::Usage(e.to_string()))?;
        scenario.assumptions = AssumptionSet::preset(p);
    }
    if overrides_plan {
        apply_overrides(&mut scenario.assumptions, &args.overrides)?;
    }
    let scenario = scenario.validate()?;
    Ok(RunConfig {
        scenario,
        ds: args.ds,
        dt: args.dt,
        out: args.out.clone(),
        formats: args.format.clone(),
    })
}

fn plan(sc: &Scenario<f64>, ds: f64) -> Result<(Vec<LimitSample<f64>>, SpeedProfile<f64>), CliError> {
    let limits = limit_profile(sc, ds);
    let profile = plan_profile(&limits, &sc.assumptions, None)?;
    Ok((limits, profile))
}

fn create_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn write_file(dir: &Path, name: &str, f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Result<(), CliError> {
    let path = dir.join(name);
    let mut buf = Vec::new();
    let io_err = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    f(&mut buf).map_err(io_err)?;
    fs::write(&path, buf).map_err(io_err)
}

fn csv_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

fn json_bytes<T: Serialize>(buf: &mut Vec<u8>, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *buf, value)?;
    buf.push(b'\n');
    Ok(())
}

#[derive(Serialize)]
struct MetricsDoc<'a> {
    scenario: &'a str,
    assumptions: &'a AssumptionSet<f64>,
    #[serde(flatten)]
    metrics: &'a Metrics<f64>,
    no_treatment_travel_time: f64,
}

fn cmd_plan(args: &CommonArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = resolve(args, true)?;
    let (limits, profile) = plan(&cfg.scenario, cfg.ds)?;
    let m = metrics(&profile, &cfg.scenario);
    let (_, baseline) = plan(&cfg.scenario.without_parked(), cfg.ds)?;
    create_out(&cfg.out)?;
    if cfg.wants(Format::Csv) {
        write_file(&cfg.out, "limits.csv", |b| write_limits_csv(b, &limits).map_err(csv_io))?;
        write_file(&cfg.out, "profile.csv", |b| profile.write_csv(b).map_err(csv_io))?;
    }
    if cfg.wants(Format::Json) {
        let doc = MetricsDoc {
            scenario: &cfg.scenario.name,
            assumptions: &cfg.scenario.assumptions,
            metrics: &m,
            no_treatment_travel_time: baseline.travel_time(),
        };
        write_file(&cfg.out, "metrics.json", |b| json_bytes(b, &doc))?;
    }
    let _ = write!(out, "{}", m.to_text());
    let _ = writeln!(out, "no_treatment_travel_time_s: {}", baseline.travel_time());
    Ok(exit::OK)
}

#[derive(Serialize)]
struct SimulationDoc<'a> {
    scenario: &'a str,
    dt: f64,
    steps: usize,
    travel_time: f64,
    profile_travel_time: f64,
}

fn cmd_simulate(args: &CommonArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = resolve(args, true)?;
    let (_, profile) = plan(&cfg.scenario, cfg.ds)?;
    let trace = simulate(&cfg.scenario, &profile, cfg.dt);
    create_out(&cfg.out)?;
    if cfg.wants(Format::Csv) {
        write_file(&cfg.out, "trace.csv", |b| trace.write_csv(b).map_err(csv_io))?;
    }
    let doc = SimulationDoc {
        scenario: &cfg.scenario.name,
        dt: cfg.dt,
        steps: trace.states.len() - 1,
        travel_time: trace.travel_time,
        profile_travel_time: profile.travel_time(),
    };
    if cfg.wants(Format::Json) {
        write_file(&cfg.out, "simulation.json", |b| json_bytes(b, &doc))?;
    }
    let _ = writeln!(out, "steps: {}", doc.steps);
    let _ = writeln!(out, "travel_time_s: {}", doc.travel_time);
    let _ = writeln!(out, "profile_travel_time_s: {}", doc.profile_travel_time);
    Ok(exit::OK)
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    if !(args.emergence_step > 0.0 && args.emergence_step.is_finite()) {
        return Err(CliError::Usage("--emergence-step must be positive".into()));
    }
    // Overrides describe the world the plan is tested against, not the plan itself.
    let cfg = resolve(&args.common, false)?;
    let mut world = cfg.scenario.assumptions;
    apply_overrides(&mut world, &args.common.overrides)?;
    let bad = world.violations();
    if !bad.is_empty() {
        return Err(ValidationError(bad).into());
    }
    let (_, profile) = plan(&cfg.scenario, cfg.ds)?;
    let report = adversary_sweep(&cfg.scenario, &profile, &SweepConfig::new(world, args.emergence_step, cfg.dt));
    create_out(&cfg.out)?;
    if cfg.wants(Format::Json) {
        write_file(&cfg.out, "sweep.json", |b| json_bytes(b, &report))?;
    }
    if cfg.wants(Format::Csv) {
        write_file(&cfg.out, "events.csv", |b| report.write_events_csv(b).map_err(csv_io))?;
    }
    let _ = write!(out, "{}", report.summary());
    Ok(if report.is_safe() { exit::OK } else { exit::COLLISION })
}

/// Parses `key=v1,v2,...`.
fn parse_axis(spec: &str) -> Result<(String, Vec<f64>), CliError> {
    let bad = || CliError::Usage(format!("malformed grid `{spec}` (expected key=v1,v2,...)"));
    let (key, values) = spec.split_once('=').ok_or_else(bad)?;
    let key = key.trim().to_ascii_lowercase();
    AssumptionSet::<f64>::preset(Preset::Example)
        .get(&key)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(bad());
    }
    Ok((key, values))
}

#[derive(Serialize)]
struct SweepRow {
    params: Vec<(String, f64)>,
    #[serde(flatten)]
    metrics: Metrics<f64>,
}

fn cmd_sweep_params(args: &SweepArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    if args.grid.is_empty() {
        return Err(CliError::Usage("empty grid: give at least one --grid key=v1,v2,...".into()));
    }
    let axes = args.grid.iter().map(|g| parse_axis(g)).collect::<Result<Vec<_>, _>>()?;
    let cfg = resolve(&args.common, true)?;

    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for (_, values) in &axes {
        points = points
            .iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }

    let mut rows = Vec::with_capacity(points.len());
    for point in &points {
        let mut sc = cfg.scenario.clone();
        for ((key, _), &v) in axes.iter().zip(point) {
            sc.assumptions.set(key, v).map_err(|e| CliError::Usage(e.to_string()))?;
        }
        // Lowering emergency braking capability also lowers the comfort bound.
        let explicit_dec = axes.iter().any(|(k, _)| k == "a_plan_dec");
        if !explicit_dec && sc.assumptions.a_plan_dec > sc.assumptions.a_max {
            sc.assumptions.a_plan_dec = sc.assumptions.a_max;
        }
        let sc = sc.validate()?;
        let (_, profile) = plan(&sc, cfg.ds)?;
        rows.push(SweepRow {
            params: axes.iter().map(|(k, _)| k.clone()).zip(point.iter().copied()).collect(),
            metrics: metrics(&profile, &sc),
        });
    }

    let mut table = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut table);
        let mut header: Vec<String> = axes.iter().map(|(k, _)| k.clone()).collect();
        header.extend(
            ["min_limit_mps", "avg_speed_route_mps", "avg_speed_passing_mps", "travel_time_s"]
                .iter()
                .map(|s| s.to_string()),
        );
        w.write_record(&header).map_err(|e| CliError::Usage(e.to_string()))?;
        for r in &rows {
            let mut rec: Vec<String> = r.params.iter().map(|(_, v)| v.to_string()).collect();
            rec.push(r.metrics.min_limit.to_string());
            rec.push(r.metrics.avg_speed_route.to_string());
            rec.push(r.metrics.avg_speed_passing.map_or_else(String::new, |v| v.to_string()));
            rec.push(r.metrics.travel_time.to_string());
            w.write_record(&rec).map_err(|e| CliError::Usage(e.to_string()))?;
        }
        w.flush().map_err(|source| CliError::Io {
            path: "<table>".into(),
            source,
        })?;
    }
    create_out(&cfg.out)?;
    if cfg.wants(Format::Csv) {
        write_file(&cfg.out, "sweep_params.csv", |b| {
            b.extend_from_slice(&table);
            Ok(())
        })?;
    }
    if cfg.wants(Format::Json) {
        let json: Vec<_> = rows
            .iter()
            .map(|r| {
                let mut obj = serde_json::Map::new();
                for (k, v) in &r.params {
                    obj.insert(k.clone(), serde_json::json!(v));
                }
                obj.insert("metrics".into(), serde_json::to_value(&r.metrics).expect("metrics serialize"));
                serde_json::Value::Object(obj)
            })
            .collect();
        write_file(&cfg.out, "sweep_params.json", |b| json_bytes(b, &json))?;
    }
    let _ = out.write_all(&table);
    Ok(exit::OK)
}

/// Runs the CLI on `argv` and returns the process exit code.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    exit::OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    exit::USAGE
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Plan(a) => cmd_plan(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::SweepParams(a) => cmd_sweep_params(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code()
        }
    }
}
