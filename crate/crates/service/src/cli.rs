//! Command-line front end: `simulate`, `sweep` and `serve`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use gradleak_core::engine::DEFAULT_LEARNING_RATE;
use gradleak_core::{Error, MechanismKind, ModelKind, PrivacyBudget, SessionConfig, DEFAULT_K};

use crate::api;
use crate::experiment::{run_experiment, run_sweep, write_csv, ExperimentParams, SweepParams};
use crate::store::SessionStore;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "gradleak",
    version,
    about = "Federated learning gradient-leakage simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one session end to end and report cost, accuracy and recovery.
    Simulate(SimulateArgs),
    /// Run a grid of privacy budgets and seeds; one CSV row per run.
    Sweep(SweepArgs),
    /// Serve the session API (and optionally the UI assets).
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Linear,
    Logistic,
    Svm,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Linear => ModelKind::LinearRegression,
            ModelArg::Logistic => ModelKind::LogisticRegression,
            ModelArg::Svm => ModelKind::Svm,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MechanismArg {
    None,
    Laplace,
    Duchi,
    Piecewise,
    Hybrid,
}

impl From<MechanismArg> for MechanismKind {
    fn from(m: MechanismArg) -> Self {
        match m {
            MechanismArg::None => MechanismKind::None,
            MechanismArg::Laplace => MechanismKind::Laplace,
            MechanismArg::Duchi => MechanismKind::Duchi,
            MechanismArg::Piecewise => MechanismKind::Piecewise,
            MechanismArg::Hybrid => MechanismKind::Hybrid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value = "none")]
    pub mechanism: MechanismArg,
    #[arg(long, default_value_t = 100)]
    pub users: usize,
    #[arg(long, default_value_t = 1)]
    pub epochs: u64,
    /// Constant k of the exp-hamming score.
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: f64,
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    pub learning_rate: f64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Total privacy budget per user, split evenly over the 5 gradient values.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, clap::Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated privacy budgets, e.g. `0.5,1,2,4,8`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub epsilons: Vec<f64>,
    /// Number of seeds per budget.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// First seed; runs use `seed..seed + seeds`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, clap::Args)]
pub struct ServeArgs {
    /// Listening port; the PORT environment variable takes precedence.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "0.0.0.0")]
    pub host: std::net::IpAddr,
    /// Directory of static UI assets served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Sessions are loaded from this file at startup (if present) and
    /// written back on shutdown.
    #[arg(long)]
    pub snapshot_file: Option<PathBuf>,
}

/// Distinguishes bad input (exit 1) from failures while running (exit 2).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(EXIT_USAGE),
            CliError::Runtime(_) => ExitCode::from(EXIT_RUNTIME),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidBudget(_)
            | Error::MissingBudget(_)
            | Error::InvalidConfig(_)
            | Error::InvalidArgument(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn budget(eps: f64) -> Result<PrivacyBudget, CliError> {
    PrivacyBudget::new(eps).map_err(CliError::from)
}

fn open_output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let epsilon = args.epsilon.map(budget).transpose()?;
    let mut config = SessionConfig::new(
        args.run.model.into(),
        args.run.mechanism.into(),
        epsilon,
        args.seed,
    );
    config.learning_rate = args.run.learning_rate;
    let report = run_experiment(&ExperimentParams {
        config,
        users: args.run.users,
        epochs: args.run.epochs,
        k: args.run.k,
    })?;

    let mut out = open_output(args.run.out.as_ref())?;
    match args.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &report).context("writing report")?;
            writeln!(out).context("writing report")?;
        }
        Format::Csv => write_csv(&mut out, &[report.csv_row()]).context("writing report")?,
    }
    out.flush().context("writing report")?;
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let mechanism: MechanismKind = args.run.mechanism.into();
    if mechanism == MechanismKind::None {
        tracing::warn!("sweeping epsilon with mechanism `none`: epsilon has no effect");
    }
    let epsilons = args
        .epsilons
        .iter()
        .map(|&e| budget(e))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = run_sweep(&SweepParams {
        model: args.run.model.into(),
        mechanism,
        epsilons,
        first_seed: args.seed,
        seeds: args.seeds,
        users: args.run.users,
        epochs: args.run.epochs,
        k: args.run.k,
        learning_rate: args.run.learning_rate,
    })?;
    let mut out = open_output(args.run.out.as_ref())?;
    write_csv(&mut out, &rows).context("writing sweep")?;
    out.flush().context("writing sweep")?;
    Ok(())
}

fn effective_port(flag: u16) -> Result<u16, CliError> {
    match std::env::var("PORT") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("PORT must be a port number, got `{v}`"))),
        Err(_) => Ok(flag),
    }
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
    tracing::info!("shutdown signal received");
}

pub fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let port = effective_port(args.port)?;
    let store = match &args.snapshot_file {
        Some(path) if path.exists() => {
            let store = SessionStore::load(path)
                .with_context(|| format!("loading sessions from {}", path.display()))?;
            tracing::info!(sessions = store.len(), path = %path.display(), "sessions restored");
            store
        }
        _ => SessionStore::new(),
    };
    let store = Arc::new(store);
    let app = api::router(store.clone(), args.static_dir.clone());
    let addr = SocketAddr::new(args.host, port);

    let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        tracing::info!(%addr, "listening");
        axum::serve(listener, app)
            .with_graceful_shutdown(shutdown_signal())
            .await
            .context("server error")
    })?;

    if let Some(path) = &args.snapshot_file {
        store
            .save(path)
            .with_context(|| format!("saving sessions to {}", path.display()))?;
        tracing::info!(sessions = store.len(), path = %path.display(), "sessions saved");
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Sweep(args) => sweep(args),
        Command::Serve(args) => serve(args),
    }
}
