//! Command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use teleop_core::{evaluate, sweep, Architecture, SweepAxis, SweepRow};

use crate::error::{Error, Result};
use crate::files;
use crate::service::Service;
use crate::settings::{self, Settings};

#[derive(Debug, Parser)]
#[command(
    name = "teleopsim",
    version,
    about = "Delayed bilateral teleoperation simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its trace.
    Run(RunArgs),
    /// Run a grid of experiments and write one metrics row per cell.
    Sweep(SweepArgs),
    /// Drive the loop live over a web socket.
    Serve(ServeArgs),
}

/// Experiment settings; flags override the config file.
#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Flat `section.key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Architecture, e.g. `wave+pred`; a comma list for sweeps.
    #[arg(long)]
    pub arch: Option<String>,
    /// Constant one-way delay in seconds, both directions.
    #[arg(long, conflicts_with = "delay_profile")]
    pub delay: Option<f64>,
    /// Piecewise-constant delay profile, CSV with header `t,tau`.
    #[arg(long)]
    pub delay_profile: Option<PathBuf>,
    /// `step:A[@start]`, `sine:A:F[@start]` or `trace:FILE`.
    #[arg(long)]
    pub input: Option<String>,
    /// Run length in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Tick length in seconds.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Wave impedance.
    #[arg(long)]
    pub b: Option<f64>,
    /// Settling band as a fraction of the equilibrium.
    #[arg(long)]
    pub band: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Trace CSV destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional one-row metrics CSV.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Delay,
    Arch,
    B,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    /// Metrics table destination.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_archs(list: &str) -> Result<Vec<Architecture>> {
    list.split(',')
        .map(|a| a.parse::<Architecture>().map_err(Error::from))
        .collect()
}

/// Resolves the settings and the architecture list given on the command line.
pub fn resolve(args: &ExperimentArgs) -> Result<(Settings, Vec<Architecture>)> {
    let mut s = match &args.config {
        Some(path) => settings::load(path)?,
        None => Settings::default(),
    };
    let e = &mut s.experiment;
    let archs = match &args.arch {
        Some(list) => parse_archs(list)?,
        None => Vec::new(),
    };
    if let Some(&first) = archs.first() {
        e.arch = first;
    }
    if let Some(tau) = args.delay {
        e.forward_delay = settings::constant_delay(tau)?;
        e.return_delay = None;
    }
    if let Some(path) = &args.delay_profile {
        e.forward_delay = files::read_delay_profile(path)?;
        e.return_delay = None;
    }
    if let Some(spec) = &args.input {
        e.input = settings::parse_input_spec(spec, std::path::Path::new("."))?;
    }
    if let Some(v) = args.duration {
        e.duration = v;
    }
    if let Some(v) = args.dt {
        e.dt = v;
    }
    if let Some(v) = args.b {
        e.b = v;
    }
    if let Some(v) = args.band {
        e.band = v;
    }
    if let Some(v) = args.seed {
        e.seed = v;
    }
    e.validate()?;
    Ok((s, archs))
}

fn check_passivity(rows: &[SweepRow]) -> Result<()> {
    let breaches: Vec<String> = rows
        .iter()
        .filter(|r| r.arch.uses_waves() && !r.passive)
        .map(|r| format!("{} at delay {} b {}", r.arch, r.delay, r.b))
        .collect();
    if breaches.is_empty() {
        Ok(())
    } else {
        Err(Error::Invariant(format!(
            "wave channel not passive: {}",
            breaches.join("; ")
        )))
    }
}

pub fn run(args: &RunArgs) -> Result<()> {
    let (s, archs) = resolve(&args.experiment)?;
    if archs.len() > 1 {
        return Err(Error::config("arch", "run takes a single architecture"));
    }
    let cfg = s.experiment;
    let (log, metrics) = evaluate(&cfg)?;
    files::write_trace_file(&args.out, &log)?;
    let row = SweepRow {
        arch: cfg.arch,
        delay: cfg.forward_delay.tau(0.0),
        b: cfg.b,
        metrics,
        passive: log.ledger.passive_so_far,
    };
    if let Some(path) = &args.metrics {
        files::write_metrics_file(path, std::slice::from_ref(&row))?;
    }
    log::info!(
        "{}: {} rows, settling {} s, oscillation index {}",
        cfg.arch,
        log.rows.len(),
        metrics.settling_time,
        metrics.oscillation_index
    );
    check_passivity(std::slice::from_ref(&row))
}

fn numbers(values: &[String]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::config("values", format!("'{v}' is not a number")))
        })
        .collect()
}

pub fn run_sweep(args: &SweepArgs) -> Result<()> {
    let (s, archs) = resolve(&args.experiment)?;
    let axis = match args.axis {
        Axis::Delay => SweepAxis::Delay(numbers(&args.values)?),
        Axis::B => SweepAxis::Impedance(numbers(&args.values)?),
        Axis::Arch => SweepAxis::Arch(
            args.values
                .iter()
                .map(|v| v.parse::<Architecture>().map_err(Error::from))
                .collect::<Result<_>>()?,
        ),
    };
    let rows = sweep(&s.experiment, &axis, &archs)?;
    files::write_metrics_file(&args.out, &rows)?;
    check_passivity(&rows)
}

pub fn serve(args: &ServeArgs) -> Result<()> {
    let s = match &args.config {
        Some(path) => settings::load(path)?,
        None => Settings::default(),
    };
    s.experiment.validate()?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::Service(e.to_string()))?;
    rt.block_on(async {
        let service = Service::bind(&args.bind, &s).await?;
        println!("listening on http://{}", service.local_addr());
        tokio::signal::ctrl_c()
            .await
            .map_err(|e| Error::Service(e.to_string()))?;
        let core = service.shutdown().await?;
        log::info!(
            "stopped after {} ticks, {} commands",
            core.ticks_done(),
            core.command_log().len()
        );
        Ok(())
    })
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TELEOPSIM_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("teleopsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
