//! Configuration and orchestration behind the `untrained-prior` binary.
//!
//! A run is described by a [`RunConfig`], assembled from an optional TOML
//! file (sections `[grid]`, `[run]`, `[theory]`) overlaid with command-line
//! flags. [`execute`] runs the command and writes its artifacts plus a
//! manifest into the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dynamics::run_gd;
use crate::error::{Error, Result};
use crate::experiments::{
    default_rate_fits, run_grid, summarize, write_artifacts, write_plot_csv, Alignment, ExperimentGrid, InitVariance,
};
use crate::generator::ConvGenerator;
use crate::linalg::mix_seed;
use crate::problems::LinearInverseProblem;
use crate::theory::{lemma_oracles, theory_check, Lemma, LemmaCheck, TheoryReport, TheorySettings};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// One run of one (alignment, p, SNR) configuration.
    SingleRun,
    /// The full repeated grid with the four summary tables.
    SynthTable,
    /// The grid plus log-log regression of the minimal error.
    RateFit,
    /// Linearisation checks around one initialisation.
    TheoryCheck,
    /// Grid checks of the two scalar filter inequalities.
    LemmaCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SingleRun => "single-run",
            Command::SynthTable => "synth-table",
            Command::RateFit => "rate-fit",
            Command::TheoryCheck => "theory-check",
            Command::LemmaCheck => "lemma-check",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "untrained-prior", version, about = "Discrepancy-principle early stopping for untrained convolutional generators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// One run of one (alignment, p, SNR) configuration.
    SingleRun(Flags),
    /// The full repeated grid with the four summary tables.
    SynthTable(Flags),
    /// The grid plus log-log regression of the minimal error.
    RateFit(Flags),
    /// Linearisation checks around one initialisation.
    TheoryCheck(Flags),
    /// Grid checks of the two scalar filter inequalities.
    LemmaCheck(Flags),
}

impl CliCommand {
    pub fn split(&self) -> (Command, &Flags) {
        match self {
            CliCommand::SingleRun(f) => (Command::SingleRun, f),
            CliCommand::SynthTable(f) => (Command::SynthTable, f),
            CliCommand::RateFit(f) => (Command::RateFit, f),
            CliCommand::TheoryCheck(f) => (Command::TheoryCheck, f),
            CliCommand::LemmaCheck(f) => (Command::LemmaCheck, f),
        }
    }
}

/// Flags shared by every command; each mirrors a config-file key.
#[derive(Debug, Default, Clone, Args)]
pub struct Flags {
    /// TOML config file; flags override its values.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated SNR list.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub snr: Option<Vec<f64>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long = "tau-max")]
    pub tau_max: Option<usize>,
    #[arg(long = "fudge-L", alias = "fudge-l")]
    pub fudge_l: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, conflicts_with = "non_aligned")]
    pub aligned: bool,
    #[arg(long = "non-aligned")]
    pub non_aligned: bool,
    /// Comma-separated smoothness exponents of Σ(U).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub p: Option<Vec<f64>>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Initial variance rule: noise-variance-over-root-n or noise-std-over-root-n.
    #[arg(long = "init-variance")]
    pub init_variance: Option<String>,
    /// Horizon of the closeness check.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Grid size of the lemma checks.
    #[arg(long = "grid-size")]
    pub grid_size: Option<usize>,
}

/// Validated configuration of one invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub grid: ExperimentGrid,
    pub out: PathBuf,
    pub format: OutputFormat,
    pub theory: TheoryConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryConfig {
    pub horizon: usize,
    pub probes: usize,
    pub delta: f64,
    pub lemma_grid: usize,
    pub lemma_exponents: Vec<f64>,
    pub lemma_tau_max: u32,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            horizon: 50,
            probes: 16,
            delta: 0.05,
            lemma_grid: 100_000,
            lemma_exponents: vec![0.25, 0.5, 1.0, 2.0],
            lemma_tau_max: 100,
        }
    }
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        Self {
            command,
            grid: ExperimentGrid::default(),
            out: PathBuf::from("out"),
            format: OutputFormat::Csv,
            theory: TheoryConfig::default(),
        }
    }
}

fn cfg_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        other => Err(cfg_err(key, format!("expected a number, got {}", other.type_str()))),
    }
}

fn as_positive_f64(key: &str, v: &toml::Value) -> Result<f64> {
    let x = as_f64(key, v)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(cfg_err(key, format!("must be positive, got {x}")));
    }
    Ok(x)
}

fn as_count(key: &str, v: &toml::Value, allow_zero: bool) -> Result<u64> {
    match v {
        toml::Value::Integer(i) if *i > 0 || (allow_zero && *i == 0) => Ok(*i as u64),
        toml::Value::Integer(i) => Err(cfg_err(key, format!("must be positive, got {i}"))),
        other => Err(cfg_err(key, format!("expected an integer, got {}", other.type_str()))),
    }
}

fn as_f64_list(key: &str, v: &toml::Value) -> Result<Vec<f64>> {
    let items = match v {
        toml::Value::Array(a) => a.iter().map(|x| as_positive_f64(key, x)).collect::<Result<Vec<_>>>()?,
        single => vec![as_positive_f64(key, single)?],
    };
    if items.is_empty() {
        return Err(cfg_err(key, "list is empty"));
    }
    Ok(items)
}

fn as_str<'a>(key: &str, v: &'a toml::Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| cfg_err(key, format!("expected a string, got {}", v.type_str())))
}

fn parse_alignment(key: &str, s: &str) -> Result<Vec<Alignment>> {
    match s {
        "aligned" => Ok(vec![Alignment::Aligned]),
        "non-aligned" | "non_aligned" => Ok(vec![Alignment::NonAligned]),
        "both" => Ok(vec![Alignment::Aligned, Alignment::NonAligned]),
        other => Err(cfg_err(key, format!("expected aligned, non-aligned or both, got {other:?}"))),
    }
}

/// Overlays a TOML document onto `cfg`. Unknown sections and keys are
/// rejected by name.
pub fn apply_toml(cfg: &mut RunConfig, text: &str) -> Result<()> {
    let table: toml::Table = toml::from_str(text).map_err(|e| cfg_err("<file>", e.to_string()))?;
    for (section, body) in &table {
        let body = body
            .as_table()
            .ok_or_else(|| cfg_err(section, "top-level entries must be sections ([grid], [run], [theory])"))?;
        for (name, v) in body {
            let key = format!("{section}.{name}");
            let k = key.as_str();
            match (section.as_str(), name.as_str()) {
                ("grid", "n") => cfg.grid.n = as_count(k, v, false)? as usize,
                ("grid", "k") => cfg.grid.k = as_count(k, v, false)? as usize,
                ("grid", "p") => cfg.grid.p_values = as_f64_list(k, v)?,
                ("grid", "q") => cfg.grid.q = as_positive_f64(k, v)?,
                ("grid", "snr") => cfg.grid.snr_list = as_f64_list(k, v)?,
                ("grid", "reps") => cfg.grid.repetitions = as_count(k, v, false)? as usize,
                ("grid", "tau_max") => cfg.grid.tau_max = as_count(k, v, true)? as usize,
                ("grid", "fudge_l") => cfg.grid.fudge_l = as_positive_f64(k, v)?,
                ("grid", "eta") => cfg.grid.eta = as_positive_f64(k, v)?,
                ("grid", "init_variance") => {
                    let text = as_str(k, v)?;
                    cfg.grid.init_variance = InitVariance::parse(text).ok_or_else(|| {
                        cfg_err(k, format!("expected noise-variance-over-root-n or noise-std-over-root-n, got {text:?}"))
                    })?;
                }
                ("grid", "alignment") => cfg.grid.alignments = parse_alignment(k, as_str(k, v)?)?,
                ("run", "seed") => cfg.grid.base_seed = as_count(k, v, true)?,
                ("run", "out") => cfg.out = PathBuf::from(as_str(k, v)?),
                ("run", "format") => {
                    cfg.format = match as_str(k, v)? {
                        "csv" => OutputFormat::Csv,
                        "json" => OutputFormat::Json,
                        other => return Err(cfg_err(k, format!("expected csv or json, got {other:?}"))),
                    }
                }
                ("theory", "horizon") => cfg.theory.horizon = as_count(k, v, false)? as usize,
                ("theory", "probes") => cfg.theory.probes = as_count(k, v, false)? as usize,
                ("theory", "delta") => {
                    let d = as_positive_f64(k, v)?;
                    if d >= 0.25 {
                        return Err(cfg_err(k, format!("must lie in (0, 1/4), got {d}")));
                    }
                    cfg.theory.delta = d;
                }
                ("theory", "lemma_grid") => cfg.theory.lemma_grid = as_count(k, v, false)? as usize,
                ("theory", "lemma_exponents") => cfg.theory.lemma_exponents = as_f64_list(k, v)?,
                ("theory", "lemma_tau_max") => cfg.theory.lemma_tau_max = as_count(k, v, false)? as u32,
                _ => return Err(cfg_err(k, "unknown key")),
            }
        }
    }
    Ok(())
}

fn positive_flag(key: &str, x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(cfg_err(key, format!("must be positive, got {x}")));
    }
    Ok(x)
}

/// Builds the configuration for `command` from an optional config file and
/// the flags; flags win over the file, the file over the built-in defaults.
pub fn parse_config(command: Command, flags: &Flags) -> Result<RunConfig> {
    let mut cfg = RunConfig::defaults(command);
    if let Some(path) = &flags.config {
        let text = fs::read_to_string(path).map_err(|e| cfg_err("--config", format!("{}: {e}", path.display())))?;
        apply_toml(&mut cfg, &text)?;
    }
    if let Some(out) = &flags.out {
        cfg.out = out.clone();
    }
    if let Some(s) = flags.seed {
        cfg.grid.base_seed = s;
    }
    if let Some(snr) = &flags.snr {
        cfg.grid.snr_list = snr.iter().map(|&x| positive_flag("snr", x)).collect::<Result<_>>()?;
    }
    if let Some(r) = flags.reps {
        cfg.grid.repetitions = r;
    }
    if let Some(t) = flags.tau_max {
        cfg.grid.tau_max = t;
    }
    if let Some(l) = flags.fudge_l {
        cfg.grid.fudge_l = positive_flag("fudge_l", l)?;
    }
    if let Some(e) = flags.eta {
        cfg.grid.eta = positive_flag("eta", e)?;
    }
    if flags.aligned {
        cfg.grid.alignments = vec![Alignment::Aligned];
    }
    if flags.non_aligned {
        cfg.grid.alignments = vec![Alignment::NonAligned];
    }
    if let Some(p) = &flags.p {
        cfg.grid.p_values = p.iter().map(|&x| positive_flag("p", x)).collect::<Result<_>>()?;
    }
    if let Some(q) = flags.q {
        cfg.grid.q = positive_flag("q", q)?;
    }
    if let Some(n) = flags.n {
        cfg.grid.n = n;
    }
    if let Some(k) = flags.k {
        cfg.grid.k = k;
    }
    if let Some(text) = &flags.init_variance {
        cfg.grid.init_variance = InitVariance::parse(text)
            .ok_or_else(|| cfg_err("init_variance", format!("unknown rule {text:?}")))?;
    }
    if let Some(f) = flags.format {
        cfg.format = f;
    }
    if let Some(h) = flags.horizon {
        cfg.theory.horizon = h;
    }
    if let Some(g) = flags.grid_size {
        cfg.theory.lemma_grid = g;
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<()> {
    let g = &cfg.grid;
    let checks: [(&str, bool, String); 6] = [
        ("n", g.n > 0, "must be positive".into()),
        ("k", g.k > 0, "must be positive".into()),
        ("fudge_l", g.fudge_l > 1.0, format!("must exceed 1, got {}", g.fudge_l)),
        ("eta", g.eta > 0.0, format!("must be positive, got {}", g.eta)),
        (
            "reps",
            g.repetitions >= 2 || matches!(cfg.command, Command::SingleRun | Command::TheoryCheck | Command::LemmaCheck),
            format!("summary tables need at least 2 repetitions, got {}", g.repetitions),
        ),
        ("horizon", cfg.theory.horizon > 0, "must be positive".into()),
    ];
    for (key, ok, reason) in checks {
        if !ok {
            return Err(cfg_err(key, reason));
        }
    }
    if cfg.out.exists() && !cfg.out.is_dir() {
        return Err(cfg_err("out", format!("{} exists and is not a directory", cfg.out.display())));
    }
    Ok(())
}

/// Record written next to every artifact set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    pub wall_clock_seconds: f64,
    pub artifacts: Vec<PathBuf>,
    pub status: String,
    pub partial: bool,
    pub failures: Vec<String>,
}

/// Result of [`execute`]: the exit status and what was written.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub manifest: Manifest,
}

struct Collected {
    artifacts: Vec<PathBuf>,
    seeds: Vec<u64>,
    failures: Vec<String>,
}

/// Runs the configured command, writes artifacts and `manifest.json`, and
/// returns the exit status: 0 on success, 2 when a check failed, 1 when the
/// command itself errored (the manifest then carries the error).
pub fn execute(cfg: &RunConfig) -> Outcome {
    let start = Instant::now();
    let result = fs::create_dir_all(&cfg.out)
        .map_err(|e| cfg_err("out", format!("{}: {e}", cfg.out.display())))
        .and_then(|_| match cfg.command {
            Command::SingleRun => single_run(cfg),
            Command::SynthTable | Command::RateFit => grid_run(cfg),
            Command::TheoryCheck => theory_run(cfg),
            Command::LemmaCheck => lemma_run(cfg),
        });
    let (collected, exit_code, status, partial) = match result {
        Ok(c) if c.failures.is_empty() => (c, 0, "ok", false),
        Ok(c) => (c, 2, "check-failed", false),
        Err(e) => (
            Collected {
                artifacts: Vec::new(),
                seeds: vec![cfg.grid.base_seed],
                failures: vec![e.to_string()],
            },
            1,
            "error",
            true,
        ),
    };
    let mut manifest = Manifest {
        command: cfg.command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        seeds: collected.seeds,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        artifacts: collected.artifacts,
        status: status.to_string(),
        partial,
        failures: collected.failures,
    };
    let path = cfg.out.join("manifest.json");
    manifest.artifacts.push(path.clone());
    let written = serde_json::to_string_pretty(&manifest)
        .map_err(Error::from)
        .and_then(|s| fs::write(&path, s).map_err(Error::from));
    let exit_code = match written {
        Ok(()) => exit_code,
        Err(e) => {
            manifest.failures.push(format!("writing manifest: {e}"));
            1
        }
    };
    Outcome { exit_code, manifest }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(path.to_path_buf())
}

fn single_run(cfg: &RunConfig) -> Result<Collected> {
    let g = &cfg.grid;
    let (alignment, p, snr) = (g.alignments[0], g.p_values[0], g.snr_list[0]);
    let design = g.design(alignment, p)?;
    let noise_seed = mix_seed(g.base_seed, 1);
    let init_seed = mix_seed(g.base_seed, 2);
    let problem = LinearInverseProblem::synthetic(&design, snr, noise_seed)?;
    let gen = ConvGenerator::spectrum_prescribed(g.n, p, g.k)?;
    let omega = g.omega_for(&problem, snr);
    let c0 = gen.sample_initial_weights(omega, init_seed)?;
    let traj = run_gd(&gen, &c0, &problem, &g.gd_config())?;

    let mut artifacts = Vec::new();
    match cfg.format {
        OutputFormat::Csv => {
            let path = cfg.out.join("trajectory.csv");
            traj.write_csv(fs::File::create(&path)?)?;
            artifacts.push(path);
        }
        OutputFormat::Json => {
            let rows: Vec<_> = (0..traj.len())
                .map(|t| {
                    serde_json::json!({
                        "iteration": t,
                        "residual_norm": traj.residual_norms[t],
                        "error_norm": traj.error_norms[t],
                        "displacement_norm": traj.displacement_norms[t],
                    })
                })
                .collect();
            artifacts.push(write_json(&cfg.out.join("trajectory.json"), &rows)?);
        }
    }
    artifacts.push(write_json(&cfg.out.join("trajectory_header.json"), &traj.header())?);
    let x_norm = problem.x_dag.norm();
    let summary = serde_json::json!({
        "alignment": alignment,
        "p": p,
        "snr": snr,
        "noise_seed": noise_seed,
        "init_seed": init_seed,
        "h_seed": design.h_seed(),
        "noise_level": problem.noise_level,
        "omega": omega,
        "tau_min": traj.tau_min,
        "e_min": traj.error_norms[traj.tau_min] / x_norm,
        "tau_dp": traj.tau_dp,
        "e_dp": traj.tau_dp.map(|t| traj.error_norms[t] / x_norm),
    });
    artifacts.push(write_json(&cfg.out.join("summary.json"), &summary)?);
    Ok(Collected {
        artifacts,
        seeds: vec![g.base_seed, noise_seed, init_seed],
        failures: Vec::new(),
    })
}

fn grid_run(cfg: &RunConfig) -> Result<Collected> {
    let g = &cfg.grid;
    let records = run_grid(g)?;
    let summary = summarize(&records)?;
    let fits = default_rate_fits(&summary, g);
    let mut seeds = vec![g.base_seed];
    seeds.extend(records.iter().map(|r| r.seed));
    let artifacts = if cfg.command == Command::RateFit {
        let mut out = vec![write_json(&cfg.out.join("rate_fit.json"), &fits)?];
        let plot = cfg.out.join("plot_data.csv");
        write_plot_csv(&summary, &fits, fs::File::create(&plot)?)?;
        out.push(plot);
        out
    } else {
        match cfg.format {
            OutputFormat::Csv => write_artifacts(&cfg.out, g, &records, &summary, &fits)?,
            OutputFormat::Json => vec![
                write_json(&cfg.out.join("runs.json"), &records)?,
                write_json(&cfg.out.join("summary.json"), &summary)?,
                write_json(&cfg.out.join("rate_fit.json"), &fits)?,
            ],
        }
    };
    Ok(Collected {
        artifacts,
        seeds,
        failures: Vec::new(),
    })
}

fn theory_run(cfg: &RunConfig) -> Result<Collected> {
    let g = &cfg.grid;
    let (alignment, p, snr) = (g.alignments[0], g.p_values[0], g.snr_list[0]);
    let design = g.design(alignment, p)?;
    let noise_seed = mix_seed(g.base_seed, 1);
    let init_seed = mix_seed(g.base_seed, 2);
    let probe_seed = mix_seed(g.base_seed, 3);
    let problem = LinearInverseProblem::synthetic(&design, snr, noise_seed)?;
    let gen = ConvGenerator::spectrum_prescribed(g.n, p, g.k)?;
    let c0 = gen.sample_initial_weights(g.omega_for(&problem, snr), init_seed)?;
    let settings = TheorySettings {
        horizon: cfg.theory.horizon,
        n_probes: cfg.theory.probes,
        probe_seed,
        delta: cfg.theory.delta,
        fudge_l: g.fudge_l,
        eta: g.eta,
        rho: (g.n as f64).sqrt(),
        p,
        q: g.q,
        ..TheorySettings::default()
    };
    let report: TheoryReport = theory_check(&problem, &gen, &c0, alignment == Alignment::Aligned, &settings)?;
    let failures = report
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect();
    Ok(Collected {
        artifacts: vec![write_json(&cfg.out.join("theory_report.json"), &report)?],
        seeds: vec![g.base_seed, noise_seed, init_seed, probe_seed],
        failures,
    })
}

/// Every `(lemma, exponent, τ)` combination of the lemma check; the decay
/// lemma is skipped where `τ ≤ r`.
pub fn lemma_checks(exponents: &[f64], tau_max: u32, grid: usize) -> Result<Vec<LemmaCheck>> {
    let mut out = Vec::new();
    for lemma in [Lemma::Growth, Lemma::Decay] {
        for &e in exponents {
            for tau in 1..=tau_max {
                if lemma == Lemma::Decay && (tau as f64) <= e {
                    continue;
                }
                out.push(lemma_oracles(lemma, e, tau, grid)?);
            }
        }
    }
    Ok(out)
}

fn lemma_run(cfg: &RunConfig) -> Result<Collected> {
    let t = &cfg.theory;
    let checks = lemma_checks(&t.lemma_exponents, t.lemma_tau_max, t.lemma_grid)?;
    let failures = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| {
            format!(
                "{:?} exponent {} τ {}: sup {:.6e} > bound {:.6e}",
                c.lemma, c.exponent, c.tau, c.refined_sup, c.bound
            )
        })
        .collect();
    Ok(Collected {
        artifacts: vec![write_json(&cfg.out.join("lemma_check.json"), &checks)?],
        seeds: vec![],
        failures,
    })
}

/// Entry point of the binary: parses `args`, executes, prints a one-line
/// status and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (command, flags) = cli.command.split();
    let cfg = match parse_config(command, flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let outcome = execute(&cfg);
    let m = &outcome.manifest;
    println!("{} {} ({:.1} s) -> {}", m.command, m.status, m.wall_clock_seconds, cfg.out.join("manifest.json").display());
    for f in &m.failures {
        eprintln!("  {f}");
    }
    outcome.exit_code
}
