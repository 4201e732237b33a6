//! Config-driven experiment runner behind the `regen` binary.
//!
//! A config is a TOML file with one optional `[model]` table and any number
//! of `[[checks]]` tables:
//!
//! ```toml
//! seed = 7
//! format = "json"
//!
//! [model]
//! kind = "poisson_count"
//! rate = 2.0
//!
//! [[checks]]
//! name = "clt"
//! t_grid = [250.0, 500.0, 1000.0, 2000.0]
//! replicates = 10000
//! ```
//!
//! Exit codes: 0 when every verdict passes, 1 when any fails, 2 on invalid
//! input.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cycle_models::{CycleModel, ModelKind, CATALOG};
use crate::error::{RegenError, Result};
use crate::process::DEFAULT_MAX_CYCLES;
use crate::renewal_numerics::renewal_function_for;
use crate::stream::StreamSeed;
use crate::theorem_suite::{dyadic_block_counts, mean_offsets, verify_clt, Check, Verdict};
use crate::VERSION;

pub const SEED_ENV: &str = "REGEN_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Quantity {
    MeanCurve,
    KsCurve,
    BlockCounts,
    RenewalFunction,
}

#[derive(Debug, Parser)]
#[command(name = "regen", version, about = "Regenerative-increment simulation and limit-theorem checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the checks listed in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for the report file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Record wall-clock seconds per check (reports stop being
        /// byte-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Run the bundled default suite.
    VerifyAll {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        timing: bool,
    },
    /// Print the model catalog.
    ListModels,
    /// Write plot data (abscissa, value, stderr) for one quantity.
    EmitCurve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        quantity: Quantity,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// One experiment: a model and the checks to run on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_cycles: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelKind>,
    #[serde(default)]
    pub checks: Vec<Check>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| RegenError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RegenError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Checks names, grids and model parameters without running anything.
    pub fn validate(&self) -> Result<()> {
        self.build_model()?;
        for c in &self.checks {
            c.validate()?;
            if c.needs_model() && self.model.is_none() {
                return Err(RegenError::Config(format!("check {} needs a [model] table", c.name())));
            }
        }
        if self.max_cycles == Some(0) {
            return Err(RegenError::Config("max_cycles must be positive".into()));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<Option<CycleModel>> {
        self.model
            .clone()
            .map(CycleModel::new)
            .transpose()
            .map_err(|e| RegenError::Config(e.to_string()))
    }

    /// Seed precedence: flag, then config, then `REGEN_SEED`.
    pub fn resolve_seed(&self, flag: Option<u64>) -> Result<u64> {
        if let Some(s) = flag.or(self.seed) {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| RegenError::Config(format!("{SEED_ENV}={v} is not a u64"))),
            Err(_) => Err(RegenError::Config(format!(
                "no seed: pass --seed, set seed in the config, or set {SEED_ENV}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckTiming {
    pub check: String,
    pub wall_clock_seconds: Option<f64>,
}

/// Top-level report document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: Value,
    pub verdicts: Vec<Verdict>,
    pub timing: Vec<CheckTiming>,
    pub version: String,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn exit_code(&self) -> u8 {
        if self.all_pass() {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per trajectory point: `check,pass,threshold,abscissa,value`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv_writer(Vec::new());
        w.write_record(["check", "pass", "threshold", "abscissa", "value"])
            .map_err(csv_err)?;
        for v in &self.verdicts {
            for (x, y) in &v.statistic_trajectory {
                w.write_record([
                    v.name.clone(),
                    v.pass.to_string(),
                    v.threshold.to_string(),
                    x.to_string(),
                    y.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        finish_csv(w)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(self.to_json()),
            Format::Csv => self.to_csv(),
        }
    }
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(w)
}

fn csv_err(e: csv::Error) -> RegenError {
    RegenError::Io(e.to_string())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| RegenError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| RegenError::Io(e.to_string()))
}

/// Runs every check of `cfg` in parallel; verdicts keep config order.
///
/// A check that exhausts its cycle budget becomes a failed verdict carrying
/// the error, so the rest of the report survives. Any other error aborts.
pub fn run_config(cfg: &ExperimentConfig, seed: u64, timing: bool) -> Result<RunReport> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    let max_cycles = cfg.max_cycles.unwrap_or(DEFAULT_MAX_CYCLES);
    let results: Vec<(Result<Verdict>, f64)> = cfg
        .checks
        .par_iter()
        .map(|c| {
            let start = Instant::now();
            let r = c.run(model.as_ref(), seed, max_cycles);
            (r, start.elapsed().as_secs_f64())
        })
        .collect();
    let mut verdicts = Vec::new();
    let mut times = Vec::new();
    for (check, (res, secs)) in cfg.checks.iter().zip(results) {
        let v = match res {
            Ok(v) => v,
            Err(e @ RegenError::Budget { .. }) => {
                let mut details = std::collections::BTreeMap::new();
                details.insert("error".to_string(), json!(e.to_string()));
                Verdict {
                    name: check.name().to_string(),
                    statistic_trajectory: Vec::new(),
                    threshold: f64::NAN,
                    pass: false,
                    details,
                }
            }
            Err(e) => return Err(e),
        };
        times.push(CheckTiming {
            check: v.name.clone(),
            wall_clock_seconds: timing.then_some(secs),
        });
        verdicts.push(v);
    }
    let mut echo = cfg.clone();
    echo.seed = Some(seed);
    echo.out = None;
    Ok(RunReport {
        config: serde_json::to_value(&echo).map_err(|e| RegenError::Io(e.to_string()))?,
        verdicts,
        timing: times,
        version: VERSION.to_string(),
    })
}

/// The bundled default suite: `(label, config)` pairs.
pub const DEFAULT_SUITE: &[(&str, &str)] = &[
    (
        "poisson_count",
        r#"
[model]
kind = "poisson_count"
rate = 2.0

[[checks]]
name = "clt"

[[checks]]
name = "moment_convergence"

[[checks]]
name = "self_normalized_clt"

[[checks]]
name = "weak_lln"

[[checks]]
name = "mean_expansion"
replicates = 20000
h = 0.01
"#,
    ),
    (
        "uniform_count",
        r#"
[model]
kind = "uniform_count"
upper = 2.0

[[checks]]
name = "clt"

[[checks]]
name = "mean_expansion"

[[checks]]
name = "mean_rate"
replicates = 2000
"#,
    ),
    (
        "arithmetic_count",
        r#"
[model]
kind = "arithmetic_count"
span = 1.0
pmf = [0.5, 0.5]

[[checks]]
name = "mean_expansion"
t_grid = [5.0, 10.0, 20.0, 40.0]
replicates = 20000
"#,
    ),
    (
        "heavy_spike",
        r#"
[model]
kind = "heavy_spike"
rate = 1.0

[[checks]]
name = "weak_lln"

[[checks]]
name = "strong_lln_gap"
"#,
    ),
    (
        "exponential_overshoot",
        r#"
[model]
kind = "linear_to_eta"
rate = 1.0
slope = 0.5

[[checks]]
name = "tightness_limit"

[[checks]]
name = "overshoot_rate"
selector = "duration"
"#,
    ),
    (
        "counterexample",
        r#"
[[checks]]
name = "counterexample"
alpha = 1.5
beta = 1.0
"#,
    ),
];

/// Runs the default suite. Verdict names are prefixed with the suite label.
pub fn verify_all(seed: u64, timing: bool) -> Result<RunReport> {
    let mut configs = Vec::new();
    let mut verdicts = Vec::new();
    let mut times = Vec::new();
    for (label, text) in DEFAULT_SUITE {
        let cfg = ExperimentConfig::parse(text)?;
        let mut r = run_config(&cfg, seed, timing)?;
        configs.push(json!({"label": label, "config": r.config}));
        for v in &mut r.verdicts {
            v.name = format!("{label}/{}", v.name);
        }
        for t in &mut r.timing {
            t.check = format!("{label}/{}", t.check);
        }
        verdicts.extend(r.verdicts);
        times.extend(r.timing);
    }
    Ok(RunReport {
        config: json!({"seed": seed, "suite": configs}),
        verdicts,
        timing: times,
        version: VERSION.to_string(),
    })
}

/// Plot data for `quantity` as `(abscissa, value, stderr)` rows.
pub fn emit_curve(cfg: &ExperimentConfig, quantity: Quantity, seed: u64) -> Result<Vec<(f64, f64, f64)>> {
    let model = cfg.build_model()?;
    let max_cycles = cfg.max_cycles.unwrap_or(DEFAULT_MAX_CYCLES);
    let unsupported = |what: &str| RegenError::Config(format!("emit-curve {quantity:?} needs {what}"));
    match quantity {
        Quantity::MeanCurve => {
            let m = model.as_ref().ok_or_else(|| unsupported("a [model] table"))?;
            let (name, grid, reps) = cfg
                .checks
                .iter()
                .find_map(|c| match c {
                    Check::MeanExpansion(p) => Some((c.name(), p.t_grid.clone(), p.replicates)),
                    Check::MeanRate(p) => Some((c.name(), p.t_grid.clone(), p.replicates)),
                    _ => None,
                })
                .ok_or_else(|| unsupported("a mean_expansion or mean_rate check"))?;
            let s = StreamSeed::new(seed).derive(name).derive("trajectories");
            let pts = mean_offsets(m, m.known_moments().a, &grid, reps, &s, max_cycles)?;
            Ok(pts.iter().map(|q| (q.t, q.offset, q.se)).collect())
        }
        Quantity::KsCurve => {
            let m = model.as_ref().ok_or_else(|| unsupported("a [model] table"))?;
            let p = cfg
                .checks
                .iter()
                .find_map(|c| match c {
                    Check::Clt(p) => Some(p),
                    _ => None,
                })
                .ok_or_else(|| unsupported("a clt check"))?;
            let v = verify_clt(m, p, &StreamSeed::new(seed).derive("clt"), max_cycles)?;
            let se = 1.0 / (p.replicates as f64).sqrt();
            Ok(v.statistic_trajectory.iter().map(|&(t, d)| (t, d, se)).collect())
        }
        Quantity::BlockCounts => {
            let p = cfg
                .checks
                .iter()
                .find_map(|c| match c {
                    Check::StrongLlnGap(p) => Some(p),
                    _ => None,
                })
                .ok_or_else(|| unsupported("a strong_lln_gap check"))?;
            let heavy = CycleModel::heavy_spike(1.0)?;
            let s = StreamSeed::new(seed).derive("strong_lln_gap").derive("heavy_spike");
            let counts = dyadic_block_counts(&heavy, p.eps, p.j_max, p.replicates, &s)?;
            Ok(counts
                .iter()
                .enumerate()
                .map(|(j, &(m, se))| (j as f64, m, se))
                .collect())
        }
        Quantity::RenewalFunction => {
            let m = model.as_ref().ok_or_else(|| unsupported("a [model] table"))?;
            let t_max = cfg
                .checks
                .iter()
                .filter_map(check_grid)
                .filter_map(|g| g.last().copied())
                .fold(10.0f64, f64::max);
            match m.span() {
                Some(d) => {
                    let table = renewal_function_for(m, d, t_max)?;
                    Ok(table
                        .values()
                        .iter()
                        .enumerate()
                        .map(|(k, &u)| (k as f64 * d, u, 0.0))
                        .collect())
                }
                None => {
                    let h = (t_max / 1000.0).min(0.01);
                    let table = renewal_function_for(m, h, t_max)?;
                    (0..=100)
                        .map(|i| {
                            let t = t_max * i as f64 / 100.0;
                            Ok((t, table.value_at(t)?, 0.0))
                        })
                        .collect()
                }
            }
        }
    }
}

fn check_grid(c: &Check) -> Option<&Vec<f64>> {
    match c {
        Check::Clt(p) => Some(&p.t_grid),
        Check::MomentConvergence(p) => Some(&p.t_grid),
        Check::WeakLln(p) => Some(&p.t_grid),
        Check::OvershootRate(p) => Some(&p.t_grid),
        Check::MeanRate(p) => Some(&p.t_grid),
        Check::MeanExpansion(p) => Some(&p.t_grid),
        _ => None,
    }
}

/// RFC 4180 CSV with header `abscissa,value,stderr`.
pub fn curve_csv(rows: &[(f64, f64, f64)]) -> Result<String> {
    let mut w = csv_writer(Vec::new());
    w.write_record(["abscissa", "value", "stderr"]).map_err(csv_err)?;
    for (x, y, s) in rows {
        w.write_record([x.to_string(), y.to_string(), s.to_string()])
            .map_err(csv_err)?;
    }
    finish_csv(w)
}

/// Catalog as aligned text, one model per line after a header.
pub fn list_models() -> String {
    let mut out = format!("{:<22} {:<18} {:<26} {}\n", "kind", "params", "constraints", "properties");
    for e in CATALOG {
        out.push_str(&format!(
            "{:<22} {:<18} {:<26} {}\n",
            e.kind, e.params, e.constraints, e.properties
        ));
    }
    out
}

fn write_output(out: Option<&Path>, file_name: Option<&str>, body: &str) -> Result<()> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            stdout.flush()?;
        }
        Some(p) => {
            let path = match file_name {
                Some(f) => {
                    std::fs::create_dir_all(p)?;
                    p.join(f)
                }
                None => p.to_path_buf(),
            };
            std::fs::write(path, body)?;
        }
    }
    Ok(())
}

fn report_name(format: Format) -> &'static str {
    match format {
        Format::Json => "report.json",
        Format::Csv => "report.csv",
    }
}

fn emit_report(report: &RunReport, format: Format, out: Option<&Path>) -> Result<u8> {
    write_output(out, Some(report_name(format)), &report.render(format)?)?;
    Ok(report.exit_code())
}

fn execute(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            format,
            timing,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let seed = cfg.resolve_seed(seed)?;
            let format = format.or(cfg.format).unwrap_or_default();
            let out = out.or_else(|| cfg.out.clone());
            let report = run_config(&cfg, seed, timing)?;
            emit_report(&report, format, out.as_deref())
        }
        Command::VerifyAll {
            seed,
            out,
            format,
            timing,
        } => {
            let seed = ExperimentConfig::parse("")?.resolve_seed(seed)?;
            let report = verify_all(seed, timing)?;
            emit_report(&report, format.unwrap_or_default(), out.as_deref())
        }
        Command::ListModels => {
            write_output(None, None, &list_models())?;
            Ok(0)
        }
        Command::EmitCurve {
            config,
            quantity,
            seed,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let seed = cfg.resolve_seed(seed)?;
            let rows = emit_curve(&cfg, quantity, seed)?;
            write_output(out.as_deref(), None, &curve_csv(&rows)?)?;
            Ok(0)
        }
    }
}

/// Entry point for the binary: parses arguments, runs, maps errors to exit
/// code 2.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("regen: {e}");
            ExitCode::from(2)
        }
    }
}
