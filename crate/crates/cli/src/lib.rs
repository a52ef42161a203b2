//! Batch experiment front end for `treesplit`.
//!
//! Each subcommand resolves an [`ExperimentConfig`] from an optional JSON
//! file plus flags, runs, writes its artifacts into the output directory
//! and prints one summary line per experiment.

pub mod commands;
pub mod config;
pub mod emit;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use treesplit::analytics::AnalyticsError;
use treesplit::crp::{CriError, ProtocolKind};
use treesplit::traffic::{AccessPolicy, SimError};

pub use config::{load_config, parse_grid, ExperimentConfig, OUT_DIR_ENV};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Run(String),
}

impl CliError {
    /// Process exit status: 1 for configuration and run errors, 2 for i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Run(_) => 1,
            CliError::Io { .. } => 2,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig { field, reason } => CliError::Config {
                field: field.to_string(),
                reason,
            },
            other => CliError::Run(other.to_string()),
        }
    }
}

impl From<CriError> for CliError {
    fn from(e: CriError) -> Self {
        CliError::Run(e.to_string())
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        CliError::Run(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "treesplit", version, about = "Tree-splitting random access experiments")]
pub struct Cli {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $TREESPLIT_OUT_DIR, then the current directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Table of expected CRI lengths L_n and throughputs T_n.
    Analytic {
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Large-n throughput limit for one splitting probability or a grid.
    Asymptote {
        #[arg(long)]
        p: Option<f64>,
        /// `start:stop:step` grid of splitting probabilities.
        #[arg(long)]
        p_grid: Option<String>,
    },
    /// Stable rate of windowed access over a log grid of window loads.
    WindowedScan {
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        load_min: f64,
        #[arg(long, default_value_t = 1e4)]
        load_max: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// One protocol at one arrival rate.
    Simulate(SimArgs),
    /// Delay and throughput over an arrival-rate grid.
    Sweep(SimArgs),
    /// A single CRI as a Graphviz tree and a JSON-lines slot trace.
    Tree(TreeArgs),
    /// Several protocols side by side, with per-metric overlay tables.
    Compare(SimArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct SimArgs {
    /// Comma-separated protocols (bta, mta, sicta, atic, atic_left).
    #[arg(long, alias = "protocol", value_delimiter = ',')]
    pub protocols: Vec<String>,
    /// One rate, or a `start:stop:step` grid.
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub p: Option<f64>,
    /// `gated` or `windowed`.
    #[arg(long)]
    pub policy: Option<String>,
    /// Window length in slots for windowed access.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub replications: Option<u32>,
    #[arg(long)]
    pub packet_bits: Option<u32>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct TreeArgs {
    #[arg(long)]
    pub protocol: Option<String>,
    #[arg(long)]
    pub users: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Scripted splits per user id, e.g. `1=LRLL,2=LRLR,3=LRR,4=R`.
    /// Unscripted draws use the seed.
    #[arg(long)]
    pub script: Option<String>,
}

fn parse_protocols(names: &[String]) -> Result<Vec<ProtocolKind>, CliError> {
    names
        .iter()
        .map(|s| {
            s.parse().map_err(|reason| CliError::Config {
                field: "protocols".into(),
                reason,
            })
        })
        .collect()
}

impl SimArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
        if !self.protocols.is_empty() {
            cfg.protocols = parse_protocols(&self.protocols)?;
        }
        if let Some(l) = &self.lambda {
            if l.contains(':') {
                cfg.lambda_grid = Some(l.clone());
            } else {
                let v = parse_grid("lambda", l)?[0];
                cfg.lambda = Some(v);
                cfg.lambda_grid = None;
            }
        }
        if let Some(b) = self.budget {
            cfg.budget = b;
        }
        if let Some(s) = self.seed {
            cfg.seed = Some(s);
        }
        if let Some(p) = self.p {
            cfg.p = p;
        }
        if let Some(r) = self.replications {
            cfg.replications = r;
        }
        if let Some(b) = self.packet_bits {
            cfg.packet_bits = b;
        }
        match (self.policy.as_deref(), self.delta) {
            (None, None) => {}
            (Some("gated"), None) => cfg.policy = AccessPolicy::Gated,
            (Some("gated"), Some(_)) => {
                return Err(CliError::Config {
                    field: "delta".into(),
                    reason: "a window length only applies to windowed access".into(),
                })
            }
            (Some("windowed") | None, Some(delta)) => cfg.policy = AccessPolicy::Windowed { delta },
            (Some("windowed"), None) => match cfg.policy {
                AccessPolicy::Windowed { .. } => {}
                AccessPolicy::Gated => {
                    return Err(CliError::Config {
                        field: "delta".into(),
                        reason: "windowed access needs --delta".into(),
                    })
                }
            },
            (Some(other), _) => {
                return Err(CliError::Config {
                    field: "policy".into(),
                    reason: format!("expected `gated` or `windowed`, got `{other}`"),
                })
            }
        }
        Ok(())
    }
}

/// Parses `argv`, runs the command and returns the exit status. Summary
/// lines go to `stdout`, diagnostics to `stderr`.
pub fn run_command<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                return 1;
            }
            let _ = write!(stdout, "{e}");
            return 0;
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn base_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = base_config(&cli)?;
    match &cli.command {
        Command::Analytic { n_max, p } => {
            if let Some(n) = n_max {
                cfg.n_max = *n;
            }
            if let Some(p) = p {
                cfg.p = *p;
            }
            cfg.validate()?;
            commands::analytic(&cfg, stdout)
        }
        Command::Asymptote { p, p_grid } => {
            if let Some(p) = p {
                cfg.p = *p;
            }
            cfg.validate()?;
            let grid = match p_grid {
                Some(g) => parse_grid("p_grid", g)?,
                None => vec![cfg.p],
            };
            commands::asymptote(&cfg, &grid, stdout)
        }
        Command::WindowedScan {
            p,
            load_min,
            load_max,
            points,
        } => {
            if let Some(p) = p {
                cfg.p = *p;
            }
            cfg.validate()?;
            commands::windowed_scan(&cfg, *load_min, *load_max, *points, stdout)
        }
        Command::Simulate(args) => {
            args.apply(&mut cfg)?;
            cfg.validate()?;
            commands::simulate(&cfg, stdout)
        }
        Command::Sweep(args) => {
            args.apply(&mut cfg)?;
            cfg.validate()?;
            commands::sweep(&cfg, stdout)
        }
        Command::Compare(args) => {
            args.apply(&mut cfg)?;
            cfg.validate()?;
            commands::compare(&cfg, stdout)
        }
        Command::Tree(args) => {
            if let Some(p) = &args.protocol {
                cfg.protocols = parse_protocols(std::slice::from_ref(p))?;
            }
            if let Some(u) = args.users {
                cfg.users = Some(u);
            }
            if let Some(s) = args.seed {
                cfg.seed = Some(s);
            }
            if let Some(p) = args.p {
                cfg.p = p;
            }
            cfg.validate()?;
            commands::tree(&cfg, args.script.as_deref(), stdout)
        }
    }
}
