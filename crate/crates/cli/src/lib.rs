//! Command-line front end: region vertices, simulations, sweeps and figure data.
//!
//! Exit codes: 0 on success or pass, 1 on configuration errors, 2 when a
//! simulation misses its corner or a sweep row leaves its outer region.

pub mod config;
pub mod figures;

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use erasure_bc::channel::ChannelParams;
use erasure_bc::regions::{RateRegion, RegionKind};
use erasure_bc::sim::{self, ComparisonReport, ProtocolId, SimConfig, SimStats};

use config::ConfigFile;

/// Directory for `figure` output when `--out` is absent.
pub const OUT_DIR_ENV: &str = "ERASURE_BC_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "erasure-bc", version, about = "Broadcast erasure channels with receiver caches")]
pub struct Cli {
    /// `key = value` file mirroring the long flags; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Vertices of a rate region as CSV (label,r1,r2).
    Region(RegionArgs),
    /// Monte Carlo run of one protocol, JSON statistics and corner check.
    Simulate(SimulateArgs),
    /// Cartesian grid of parameters for one protocol, CSV table.
    Sweep(SweepArgs),
    /// Region CSVs behind one of the figures.
    Figure(FigureArgs),
}

#[derive(Args, Debug, Default)]
pub struct ChannelArgs {
    #[arg(long)]
    pub delta1: Option<f64>,
    #[arg(long)]
    pub delta2: Option<f64>,
    #[arg(long)]
    pub eps1: Option<f64>,
    #[arg(long)]
    pub eps2: Option<f64>,
}

#[derive(Args, Debug)]
pub struct RegionArgs {
    /// nn-nonblind, dd-outer or nn-blind-inner.
    #[arg(long)]
    pub scenario: Option<String>,
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub protocol: Option<String>,
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Base message size in bits.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub slack: Option<f64>,
    /// Relative tolerance of the corner comparison.
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Largest failure fraction the corner comparison accepts.
    #[arg(long)]
    pub failure_ceiling: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub protocol: Option<String>,
    /// Comma-separated values; the grid is the Cartesian product.
    #[arg(long)]
    pub delta1: Option<String>,
    #[arg(long)]
    pub delta2: Option<String>,
    #[arg(long)]
    pub eps1: Option<String>,
    #[arg(long)]
    pub eps2: Option<String>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub slack: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FigureArgs {
    /// One of 2, 3a, 3b, 4a, 4b, 5.
    #[arg(long)]
    pub figure: Option<String>,
    /// Parameters of figure 5; the other figures use fixed parameters.
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Output directory; defaults to $ERASURE_BC_OUT_DIR, then `.`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn config_err(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_CONFIG, message: message.into() }
}

/// Parses arguments and runs the command. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn execute(cli: Cli) -> Result<i32, Failure> {
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p).map_err(config_err)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Region(a) => cmd_region(a, &cfg),
        Command::Simulate(a) => cmd_simulate(a, &cfg),
        Command::Sweep(a) => cmd_sweep(a, &cfg),
        Command::Figure(a) => cmd_figure(a, &cfg),
    }
}

fn channel_params(a: &ChannelArgs, cfg: &ConfigFile, default: Option<ChannelParams>) -> Result<ChannelParams, Failure> {
    let get = |flag: Option<f64>, key: &str, fallback: Option<f64>| -> Result<f64, Failure> {
        cfg.pick(flag, key)
            .map_err(config_err)?
            .or(fallback)
            .ok_or_else(|| config_err(format!("missing --{key}")))
    };
    let d = default.as_ref();
    let p = ChannelParams {
        delta1: get(a.delta1, "delta1", d.map(|d| d.delta1))?,
        delta2: get(a.delta2, "delta2", d.map(|d| d.delta2))?,
        eps1: get(a.eps1, "eps1", d.map(|d| d.eps1))?,
        eps2: get(a.eps2, "eps2", d.map(|d| d.eps2))?,
    };
    p.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(p)
}

fn protocol(flag: Option<String>, cfg: &ConfigFile) -> Result<ProtocolId, Failure> {
    let s = cfg.pick(flag, "protocol").map_err(config_err)?.ok_or_else(|| config_err("missing --protocol"))?;
    ProtocolId::parse(&s).ok_or_else(|| {
        let known: Vec<&str> = ProtocolId::ALL.iter().map(|p| p.label()).collect();
        config_err(format!("unknown protocol `{s}`; expected one of {}", known.join(", ")))
    })
}

fn output_path(flag: Option<PathBuf>, cfg: &ConfigFile) -> Option<PathBuf> {
    flag.or_else(|| cfg.raw("out").map(PathBuf::from))
}

/// Writes to `path`, or to standard output when absent.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| config_err(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout().write_all(bytes).map_err(|e| config_err(e.to_string())),
    }
}

/// CSV of counterclockwise vertices with columns `label,r1,r2`.
pub fn region_csv(label: &str, region: &RateRegion) -> Result<Vec<u8>, String> {
    let vertices = region.vertices().map_err(|e| e.to_string())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "r1", "r2"]).map_err(|e| e.to_string())?;
    for v in vertices {
        w.write_record([label.to_string(), v.r1.to_string(), v.r2.to_string()]).map_err(|e| e.to_string())?;
    }
    w.into_inner().map_err(|e| e.to_string())
}

fn cmd_region(a: RegionArgs, cfg: &ConfigFile) -> Result<i32, Failure> {
    let s = cfg.pick(a.scenario, "scenario").map_err(config_err)?.ok_or_else(|| config_err("missing --scenario"))?;
    let kind = RegionKind::parse(&s)
        .ok_or_else(|| config_err(format!("unknown scenario `{s}`; expected nn-nonblind, dd-outer or nn-blind-inner")))?;
    let p = channel_params(&a.channel, cfg, None)?;
    let region = kind.region(&p).map_err(|e| config_err(e.to_string()))?;
    let bytes = region_csv(kind.label(), &region).map_err(config_err)?;
    emit(output_path(a.out, cfg).as_deref(), &bytes)?;
    for h in &region.halfplanes {
        eprintln!("{} * R1 + {} * R2 <= {}", h.c1, h.c2, h.bound);
    }
    Ok(EXIT_OK)
}

/// Flags of a simulation, echoed into its output.
#[derive(Serialize)]
struct SimulateEcho {
    protocol: &'static str,
    params: ChannelParams,
    m: usize,
    trials: usize,
    seed: u64,
    slack: f64,
    rel_tol: f64,
    failure_ceiling: f64,
}

#[derive(Serialize)]
struct SimulateOutput {
    flags: SimulateEcho,
    stats: SimStats,
    comparison: ComparisonReport,
}

fn cmd_simulate(a: SimulateArgs, cfg: &ConfigFile) -> Result<i32, Failure> {
    let proto = protocol(a.protocol, cfg)?;
    let params = channel_params(&a.channel, cfg, None)?;
    let m = cfg.pick(a.m, "m").map_err(config_err)?.ok_or_else(|| config_err("missing --m"))?;
    let trials = pick_or(cfg, a.trials, "trials", 50usize)?;
    let seed = pick_or(cfg, a.seed, "seed", 0u64)?;
    let slack = pick_or(cfg, a.slack, "slack", 3.0f64)?;
    let rel_tol = pick_or(cfg, a.rel_tol, "rel-tol", 0.03f64)?;
    let failure_ceiling = pick_or(cfg, a.failure_ceiling, "failure-ceiling", sim::DEFAULT_FAILURE_CEILING)?;
    if !(rel_tol > 0.0) {
        return Err(config_err("--rel-tol must be positive"));
    }

    let sc = SimConfig { protocol: proto, params, m, slack_coeff: slack, trials, seed, corner: None };
    let stats = sim::run_trials(&sc).map_err(|e| config_err(e.to_string()))?;
    let comparison = sim::compare_to_corner(&stats, stats.corner, rel_tol, failure_ceiling);
    let pass = comparison.pass;
    let out = SimulateOutput {
        flags: SimulateEcho { protocol: proto.label(), params, m, trials, seed, slack, rel_tol, failure_ceiling },
        stats,
        comparison,
    };
    let mut bytes = serde_json::to_vec_pretty(&out).map_err(|e| config_err(e.to_string()))?;
    bytes.push(b'\n');
    emit(output_path(a.out, cfg).as_deref(), &bytes)?;
    Ok(if pass { EXIT_OK } else { EXIT_FAIL })
}

fn pick_or<T: std::str::FromStr>(cfg: &ConfigFile, flag: Option<T>, key: &str, default: T) -> Result<T, Failure>
where
    T::Err: std::fmt::Display,
{
    Ok(cfg.pick(flag, key).map_err(config_err)?.unwrap_or(default))
}

fn parse_list(flag: Option<String>, key: &str, cfg: &ConfigFile) -> Result<Vec<f64>, Failure> {
    let s = cfg.pick(flag, key).map_err(config_err)?.ok_or_else(|| config_err(format!("missing --{key}")))?;
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| config_err(format!("--{key} value `{v}`: {e}"))))
        .collect()
}

fn cmd_sweep(a: SweepArgs, cfg: &ConfigFile) -> Result<i32, Failure> {
    let proto = protocol(a.protocol, cfg)?;
    let d1 = parse_list(a.delta1, "delta1", cfg)?;
    let d2 = parse_list(a.delta2, "delta2", cfg)?;
    let e1 = parse_list(a.eps1, "eps1", cfg)?;
    let e2 = parse_list(a.eps2, "eps2", cfg)?;
    let m = cfg.pick(a.m, "m").map_err(config_err)?.ok_or_else(|| config_err("missing --m"))?;
    let trials = pick_or(cfg, a.trials, "trials", 20usize)?;
    let seed = pick_or(cfg, a.seed, "seed", 0u64)?;
    let slack = pick_or(cfg, a.slack, "slack", 3.0f64)?;

    let mut grid = Vec::new();
    for &a in &d1 {
        for &b in &d2 {
            for &c in &e1 {
                for &d in &e2 {
                    grid.push(ChannelParams::new(a, b, c, d).map_err(|e| config_err(e.to_string()))?);
                }
            }
        }
    }
    let rows = sim::sweep(&grid, proto, m, trials, slack, seed).map_err(|e| config_err(e.to_string()))?;
    let mut bytes = Vec::new();
    sim::write_sweep_csv(proto, &rows, &mut bytes).map_err(|e| config_err(e.to_string()))?;
    emit(output_path(a.out, cfg).as_deref(), &bytes)?;
    let escaped = rows.iter().any(|r| r.inside_outer == Some(false));
    Ok(if escaped { EXIT_FAIL } else { EXIT_OK })
}

fn cmd_figure(a: FigureArgs, cfg: &ConfigFile) -> Result<i32, Failure> {
    let id = cfg.pick(a.figure, "figure").map_err(config_err)?.ok_or_else(|| config_err("missing --figure"))?;
    let p5 = channel_params(&a.channel, cfg, Some(figures::figure5_default()))?;
    let regions = figures::figure(&id, p5).map_err(config_err)?;
    let dir = output_path(a.out, cfg)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| config_err(format!("cannot create {}: {e}", dir.display())))?;
    for r in regions {
        let bytes = region_csv(&r.label, &r.region).map_err(config_err)?;
        let path = dir.join(&r.file);
        let mut f = File::create(&path).map_err(|e| config_err(format!("cannot write {}: {e}", path.display())))?;
        f.write_all(&bytes).map_err(|e| config_err(e.to_string()))?;
        println!("{}", path.display());
    }
    Ok(EXIT_OK)
}
