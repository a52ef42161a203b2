//! Experiment configuration: JSON file, defaults and flag overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use treesplit::crp::ProtocolKind;
use treesplit::traffic::AccessPolicy;

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "TREESPLIT_OUT_DIR";

const MAX_GRID_POINTS: usize = 1_000_000;

/// Everything an experiment needs. Missing file fields take the defaults
/// below; command-line flags override both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocols: Vec<ProtocolKind>,
    pub policy: AccessPolicy,
    pub p: f64,
    pub lambda: Option<f64>,
    /// `start:stop:step`, inclusive of `stop`.
    pub lambda_grid: Option<String>,
    pub n_max: usize,
    pub users: Option<u64>,
    pub budget: u64,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub packet_bits: u32,
    pub replications: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            protocols: vec![ProtocolKind::Atic],
            policy: AccessPolicy::Gated,
            p: 0.5,
            lambda: None,
            lambda_grid: None,
            n_max: 24,
            users: None,
            budget: 100_000,
            seed: None,
            out_dir: None,
            packet_bits: 256,
            replications: 1,
        }
    }
}

fn config_err(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Reads a JSON config file. Fields are validated by [`ExperimentConfig::validate`].
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
        let msg = e.to_string();
        // serde names unknown or mistyped fields in backticks
        let field = msg.split('`').nth(1).unwrap_or("config").to_string();
        CliError::Config { field, reason: msg }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(config_err("p", format!("must lie in (0, 1), got {}", self.p)));
        }
        if self.budget == 0 {
            return Err(config_err("budget", "must be positive"));
        }
        if self.replications == 0 {
            return Err(config_err("replications", "must be positive"));
        }
        if self.packet_bits == 0 {
            return Err(config_err("packet_bits", "must be positive"));
        }
        if self.protocols.is_empty() {
            return Err(config_err("protocols", "at least one protocol is required"));
        }
        if let Some(l) = self.lambda {
            check_rate("lambda", l)?;
        }
        if let Some(grid) = &self.lambda_grid {
            parse_grid("lambda_grid", grid)?;
        }
        if let AccessPolicy::Windowed { delta } = self.policy {
            if !(delta.is_finite() && delta > 0.0) {
                return Err(config_err(
                    "delta",
                    format!("window length must be positive, got {delta}"),
                ));
            }
        }
        Ok(())
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| config_err("seed", "an explicit seed is required for randomised experiments"))
    }

    /// Arrival rates to run: the grid if given, else the single rate.
    pub fn lambdas(&self) -> Result<Vec<f64>, CliError> {
        match (&self.lambda_grid, self.lambda) {
            (Some(grid), _) => parse_grid("lambda_grid", grid),
            (None, Some(l)) => Ok(vec![l]),
            (None, None) => Err(config_err("lambda", "an arrival rate or rate grid is required")),
        }
    }

    /// Output directory: explicit setting, then the environment, then `.`.
    pub fn resolve_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

fn check_rate(field: &str, l: f64) -> Result<(), CliError> {
    if l.is_finite() && l >= 0.0 {
        Ok(())
    } else {
        Err(config_err(
            field,
            format!("arrival rate must be finite and non-negative, got {l}"),
        ))
    }
}

/// Parses `start:stop:step` (or a single number) into grid points
/// `start + i·step ≤ stop`.
pub fn parse_grid(field: &str, text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| config_err(field, format!("`{s}` is not a number")))
    };
    let (start, stop, step) = match parts.as_slice() {
        [one] => {
            let v = num(one)?;
            check_rate(field, v)?;
            return Ok(vec![v]);
        }
        [a, b, c] => (num(a)?, num(b)?, num(c)?),
        _ => return Err(config_err(field, format!("expected start:stop:step, got `{text}`"))),
    };
    check_rate(field, start)?;
    check_rate(field, stop)?;
    if !(step.is_finite() && step > 0.0) {
        return Err(config_err(field, format!("step must be positive, got {step}")));
    }
    if stop < start {
        return Err(config_err(field, format!("stop {stop} is below start {start}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > MAX_GRID_POINTS {
        return Err(config_err(
            field,
            format!("{count} grid points exceed the limit of {MAX_GRID_POINTS}"),
        ));
    }
    // round away the binary noise of start + i·step
    Ok((0..count)
        .map(|i| {
            let v = start + i as f64 * step;
            format!("{v:.12}").parse().expect("formatted float")
        })
        .collect())
}
