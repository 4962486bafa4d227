//! Command-line pipeline: `simulate -> fit -> analyze -> verify -> report`.
//!
//! Every command writes its primary output plus a `<out>.manifest.json`
//! recording input/output digests. Analysis findings (unstable fits, bound
//! violations) are reported in the outputs; only I/O and validation problems
//! produce a nonzero exit code.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{
    self, disturbance_admissible, generate_disturbance, verify_with_norms, BoundReport, Horizon,
    LipschitzSource, ModelNorms, RewardDescriptor,
};
use crate::config::{keys_help, EnvKind, RunConfig};
use crate::dmd::KoopmanModel;
use crate::error::{Error, Result};
use crate::hinf::HinfReport;
use crate::trajectory::{ensemble_mean, load_trajectories, save_trajectories};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "koopbound",
    version,
    about = "Koopman/H-infinity robustness analysis of closed-loop policies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// TOML config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed (overrides run.seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Disturbance level gamma (overrides analyze.gamma).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Discount factor (overrides analyze.gamma_d).
    #[arg(long = "gamma-d")]
    pub gamma_d: Option<f64>,
    /// Relative SVD cutoff (overrides fit.rank_tol).
    #[arg(long = "rank-tol")]
    pub rank_tol: Option<f64>,
    /// Frequency grid size (overrides analyze.grid_points).
    #[arg(long = "grid-points")]
    pub grid_points: Option<usize>,
    /// Input file; repeatable for `report`.
    #[arg(long)]
    pub input: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roll out R runs of the configured environment and write a trajectory file.
    Simulate(CommonArgs),
    /// Fit the Koopman state and action operators to a trajectory file.
    Fit(CommonArgs),
    /// Compute H-infinity norms and bounds for a fitted model.
    Analyze(CommonArgs),
    /// Check the bounds against nominal and disturbed ensembles.
    Verify(CommonArgs),
    /// Tabulate one or more bound reports, sorted by T_hinf.
    Report(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Analyze(_) => "analyze",
            Command::Verify(_) => "verify",
            Command::Report(_) => "report",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a)
            | Command::Fit(a)
            | Command::Analyze(a)
            | Command::Verify(a)
            | Command::Report(a) => a,
        }
    }
}

pub fn command() -> clap::Command {
    let keys = keys_help();
    let mut cmd = Cli::command().after_long_help(keys.clone());
    for sub in ["simulate", "fit", "analyze", "verify", "report"] {
        cmd = cmd.mut_subcommand(sub, |c| c.after_long_help(keys.clone()));
    }
    cmd
}

pub fn parse_args<I, T>(args: I) -> std::result::Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = command().try_get_matches_from(args)?;
    Cli::from_arg_matches(&matches)
}

// ---------------------------------------------------------------------------
// Manifest

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub tool_version: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_unix: f64,
    pub finished_unix: f64,
}

pub fn file_digest(path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path)?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

// ---------------------------------------------------------------------------
// Commands

/// Resolved settings for one invocation: config plus command-line overrides.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub config: RunConfig,
    pub config_path: PathBuf,
    pub out: PathBuf,
    pub inputs: Vec<PathBuf>,
}

impl Invocation {
    pub fn resolve(args: &CommonArgs, default_out: &str) -> Result<Self> {
        let mut config = RunConfig::load(&args.config)?;
        if let Some(s) = args.seed {
            config.seed = s;
        }
        if let Some(g) = args.gamma {
            config.gamma = g;
        }
        if let Some(g) = args.gamma_d {
            config.gamma_d = g;
        }
        if let Some(t) = args.rank_tol {
            config.rank_tol = t;
        }
        if let Some(p) = args.grid_points {
            config.grid_points = p;
        }
        config.validate()?;
        let out = args
            .out
            .clone()
            .or_else(|| config.out.clone())
            .unwrap_or_else(|| PathBuf::from(default_out));
        Ok(Self {
            config,
            config_path: args.config.clone(),
            out,
            inputs: args.input.clone(),
        })
    }

    fn single_input(&self, fallback: Option<&PathBuf>, what: &str) -> Result<PathBuf> {
        self.inputs
            .first()
            .or(fallback)
            .cloned()
            .ok_or_else(|| Error::Config(format!("no {what} given (use --input)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub state_hinf: HinfReport,
    pub action_hinf: HinfReport,
    pub bounds: BoundReport,
}

/// One row of the cross-policy comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    #[serde(rename = "T_hinf", with = "crate::hinf::inf_f64")]
    pub t_hinf: f64,
    #[serde(rename = "Kf_hinf", with = "crate::hinf::inf_f64")]
    pub kf_hinf: f64,
    pub gamma: f64,
    #[serde(rename = "M", with = "crate::hinf::inf_f64")]
    pub m: f64,
    #[serde(rename = "N", with = "crate::hinf::inf_f64")]
    pub n: f64,
    #[serde(with = "crate::hinf::inf_f64")]
    pub state_energy_bound: f64,
    #[serde(with = "crate::hinf::inf_f64")]
    pub action_energy_bound: f64,
    #[serde(with = "crate::hinf::inf_f64_opt")]
    pub reward_impact_bound: Option<f64>,
    #[serde(with = "crate::hinf::inf_f64_opt")]
    pub generalization_error_bound: Option<f64>,
    pub reward_impact_pct: Option<f64>,
}

fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:?}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Parses either a bare bound report or an analysis document.
pub fn read_bound_report(path: &Path) -> Result<BoundReport> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    let inner = value.get("bounds").cloned().unwrap_or(value);
    serde_json::from_value(inner).map_err(|e| Error::Schema(bounds::schema_field(&e)))
}

pub fn comparison_rows(reports: &[BoundReport]) -> Result<Vec<ComparisonRow>> {
    if reports.is_empty() {
        return Err(Error::EmptyInput(
            "report needs at least one bound report".into(),
        ));
    }
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| ComparisonRow {
            label: r.label.clone().unwrap_or_else(|| format!("report{i}")),
            t_hinf: r.t_hinf,
            kf_hinf: r.kf_hinf,
            gamma: r.gamma,
            m: r.m,
            n: r.n,
            state_energy_bound: r.state_energy_bound,
            action_energy_bound: r.action_energy_bound,
            reward_impact_bound: r.reward_impact_bound,
            generalization_error_bound: r.generalization_error_bound,
            reward_impact_pct: r.empirical.as_ref().map(|e| e.reward_impact_pct),
        })
        .collect();
    rows.sort_by(|a, b| a.t_hinf.total_cmp(&b.t_hinf));
    Ok(rows)
}

pub fn write_comparison_csv(rows: &[ComparisonRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record([
        "label",
        "T_hinf",
        "Kf_hinf",
        "gamma",
        "M",
        "N",
        "state_energy_bound",
        "action_energy_bound",
        "reward_impact_bound",
        "generalization_error_bound",
        "reward_impact_pct",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            fmt_f64(r.t_hinf),
            fmt_f64(r.kf_hinf),
            fmt_f64(r.gamma),
            fmt_f64(r.m),
            fmt_f64(r.n),
            fmt_f64(r.state_energy_bound),
            fmt_f64(r.action_energy_bound),
            fmt_opt(r.reward_impact_bound),
            fmt_opt(r.generalization_error_bound),
            fmt_opt(r.reward_impact_pct),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome of a command: files read, files written, and warnings for stderr.
#[derive(Debug, Default)]
pub struct Outcome {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

pub fn cmd_simulate(inv: &Invocation) -> Result<Outcome> {
    let c = &inv.config;
    let ensemble = c.env_spec().ensemble(c.runs, c.seed, None)?;
    save_trajectories(&ensemble, &inv.out)?;
    Ok(Outcome {
        outputs: vec![inv.out.clone()],
        ..Default::default()
    })
}

pub fn cmd_fit(inv: &Invocation) -> Result<Outcome> {
    let c = &inv.config;
    let input = inv.single_input(c.fit_input.as_ref(), "trajectory file")?;
    let ensemble = load_trajectories(&input, None)?;
    let mean = ensemble_mean(&ensemble)?;
    let mut model = KoopmanModel::fit(&mean, c.rank_tol)?;
    if c.env == EnvKind::Linear {
        model.record_oracle(&c.linear.a, &c.linear.f);
    }
    fs::write(&inv.out, model.to_json()?)?;
    Ok(Outcome {
        inputs: vec![input],
        outputs: vec![inv.out.clone()],
        ..Default::default()
    })
}

fn load_model(path: &Path) -> Result<KoopmanModel> {
    KoopmanModel::from_json(&fs::read_to_string(path)?)
}

pub fn cmd_analyze(inv: &Invocation) -> Result<Outcome> {
    let c = &inv.config;
    let input = inv.single_input(c.model.as_ref(), "model file")?;
    let model = load_model(&input)?;
    let norms = ModelNorms::compute(&model, c.grid_points, c.refinement_tol)?;
    let lipschitz = c.lipschitz.map(|l| (l, LipschitzSource::Analytic));
    let mut bounds = BoundReport::from_norms(
        &norms,
        c.gamma,
        c.gamma_d,
        Horizon::Infinite,
        lipschitz,
        None,
        None,
    )?;
    bounds.label = Some(c.label());
    let mut warnings = Vec::new();
    if norms.t_hinf.is_infinite() {
        warnings.push(format!(
            "state operator is not stable (spectral radius {:.6}); T_hinf reported as infinite",
            norms.t_hinf.spectral_radius
        ));
    }
    let report = AnalysisReport {
        state_hinf: norms.t_hinf,
        action_hinf: norms.kf_hinf,
        bounds,
    };
    fs::write(&inv.out, serde_json::to_string_pretty(&report)?)?;
    Ok(Outcome {
        inputs: vec![input],
        outputs: vec![inv.out.clone()],
        warnings,
    })
}

pub fn cmd_verify(inv: &Invocation) -> Result<Outcome> {
    let c = &inv.config;
    let input = inv.single_input(c.model.as_ref(), "model file")?;
    let model = load_model(&input)?;
    let env = c.env_spec();
    if model.state_dim() != env.state_dim() || model.action_dim() != env.action_dim() {
        return Err(Error::DimensionMismatch(format!(
            "model is {}x{} / {}x{}, environment has n = {}, m = {}",
            model.state_dim(),
            model.state_dim(),
            model.action_dim(),
            model.state_dim(),
            env.state_dim(),
            env.action_dim()
        )));
    }
    let w = generate_disturbance(&c.disturbance_spec(c.gamma)?)?;
    let adm = disturbance_admissible(
        &w,
        c.gamma,
        bounds::default_grid_points(w.len()).max(4 * w.len()),
    )?;
    if !adm.admissible {
        return Err(Error::Internal(format!(
            "generated disturbance is not admissible: sup {} > gamma {}",
            adm.sup_value, c.gamma
        )));
    }
    let nominal = env.ensemble(c.runs, c.seed, None)?;
    let disturbed = env.ensemble(c.runs, c.seed, Some(&w))?;
    let nominal_mean = ensemble_mean(&nominal)?;
    let disturbed_mean = ensemble_mean(&disturbed)?;
    let norms = ModelNorms::compute(&model, c.grid_points, c.refinement_tol)?;
    let reward = match c.analytic_lipschitz() {
        Some(l) => RewardDescriptor::Analytic(l),
        None => RewardDescriptor::Estimate,
    };
    let mut report = verify_with_norms(
        &nominal_mean,
        &disturbed_mean,
        &nominal,
        &disturbed,
        &norms,
        c.gamma,
        c.gamma_d,
        reward,
    )?;
    report.label = Some(c.label());
    fs::write(&inv.out, report.to_json()?)?;
    let table = sibling(&inv.out, ".deviations.csv");
    bounds::write_deviation_table(&nominal_mean, &disturbed_mean, fs::File::create(&table)?)?;
    let warnings = report
        .violations
        .iter()
        .map(|v| {
            format!(
                "bound `{}` exceeded: measured {} > {}",
                v.bound, v.measured, v.limit
            )
        })
        .collect();
    Ok(Outcome {
        inputs: vec![input],
        outputs: vec![inv.out.clone(), table],
        warnings,
    })
}

pub fn cmd_report(inv: &Invocation) -> Result<Outcome> {
    let reports = inv
        .inputs
        .iter()
        .map(|p| read_bound_report(p))
        .collect::<Result<Vec<_>>>()?;
    let rows = comparison_rows(&reports)?;
    write_comparison_csv(&rows, &inv.out)?;
    let json = sibling(&inv.out, ".json");
    fs::write(&json, serde_json::to_string_pretty(&rows)?)?;
    Ok(Outcome {
        inputs: inv.inputs.clone(),
        outputs: vec![inv.out.clone(), json],
        ..Default::default()
    })
}

/// Runs a parsed command and writes its manifest.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let started = unix_now();
    let args = cli.command.args();
    let default_out = match cli.command {
        Command::Simulate(_) => "trajectories.csv",
        Command::Fit(_) => "model.json",
        Command::Analyze(_) => "analysis.json",
        Command::Verify(_) => "bounds.json",
        Command::Report(_) => "report.csv",
    };
    let inv = Invocation::resolve(args, default_out)?;
    let outcome = match &cli.command {
        Command::Simulate(_) => cmd_simulate(&inv),
        Command::Fit(_) => cmd_fit(&inv),
        Command::Analyze(_) => cmd_analyze(&inv),
        Command::Verify(_) => cmd_verify(&inv),
        Command::Report(_) => cmd_report(&inv),
    }?;
    let manifest = RunManifest {
        command: cli.command.name().into(),
        config_path: inv.config_path.display().to_string(),
        config_sha256: file_digest(&inv.config_path)?.sha256,
        master_seed: inv.config.seed,
        tool_version: TOOL_VERSION.into(),
        inputs: outcome
            .inputs
            .iter()
            .map(|p| file_digest(p))
            .collect::<Result<_>>()?,
        outputs: outcome
            .outputs
            .iter()
            .map(|p| file_digest(p))
            .collect::<Result<_>>()?,
        started_unix: started,
        finished_unix: unix_now(),
    };
    fs::write(
        manifest_path(&inv.out),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(outcome)
}

/// Exit code for an error: 3 for internal errors, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Internal(_) => 3,
        _ => 1,
    }
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match parse_args(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
