//! Run configuration: defaults, an optional TOML file, then flags.

use std::f64::consts::PI;
use std::path::Path;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Fully resolved settings, echoed at the top of every JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub epsilon: f64,
    pub weight_m: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub omega_steps: usize,
    pub lambda: f64,
    pub tick: f64,
    pub seed: u64,
    pub window: usize,
    pub rho: f64,
    pub format: Option<Format>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            weight_m: 0.0,
            omega_min: 0.5 * PI,
            omega_max: 0.995 * PI,
            omega_steps: 12,
            lambda: 0.0,
            tick: 0.01,
            seed: 42,
            window: 256,
            rho: 1.0,
            format: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        let fail = |msg: String| Err(CliError::Input(msg));
        if !(self.omega_min > 0.0 && self.omega_min < PI && self.omega_max < PI) {
            return fail(format!(
                "omega range [{}, {}] must lie inside (0, pi)",
                self.omega_min, self.omega_max
            ));
        }
        if self.omega_steps == 0 {
            return fail("omega-steps must be at least 1".into());
        }
        if self.omega_steps > 1 && self.omega_min >= self.omega_max {
            return fail(format!(
                "omega-min {} must be below omega-max {}",
                self.omega_min, self.omega_max
            ));
        }
        if !(self.epsilon > 0.0) {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.tick > 0.0) {
            return fail(format!("tick must be positive, got {}", self.tick));
        }
        if self.window < 2 {
            return fail(format!("window must be at least 2, got {}", self.window));
        }
        if !(self.weight_m >= 0.0) {
            return fail(format!("weight-m must be >= 0, got {}", self.weight_m));
        }
        if !(self.lambda >= 0.0) {
            return fail(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.rho >= 1.0) {
            return fail(format!("rho must be >= 1, got {}", self.rho));
        }
        Ok(())
    }

    pub fn omega_grid(&self) -> CliResult<Vec<f64>> {
        Ok(twinmarket::omega_grid(
            self.omega_min,
            self.omega_max,
            self.omega_steps,
        )?)
    }

    pub fn weights(&self) -> CliResult<twinmarket::WeightConfig> {
        Ok(twinmarket::WeightConfig::new(self.weight_m)?)
    }

    pub fn format_or(&self, fallback: Format) -> Format {
        self.format.unwrap_or(fallback)
    }
}

/// Parses a band limit in radians, or as a multiple of pi with a `pi`
/// suffix (`0.9pi`).
pub fn parse_omega(text: &str) -> Result<f64, String> {
    let text = text.trim();
    let value = match text.strip_suffix("pi") {
        Some(head) => {
            let head = head.trim().trim_end_matches('*');
            let factor: f64 = if head.is_empty() {
                1.0
            } else {
                head.parse()
                    .map_err(|_| format!("invalid multiple of pi: {text}"))?
            };
            factor * PI
        }
        None => text
            .parse()
            .map_err(|_| format!("invalid band limit: {text}"))?,
    };
    Ok(value)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OmegaValue {
    Radians(f64),
    Text(String),
}

impl OmegaValue {
    fn resolve(&self) -> CliResult<f64> {
        match self {
            OmegaValue::Radians(v) => Ok(*v),
            OmegaValue::Text(t) => parse_omega(t).map_err(CliError::Input),
        }
    }
}

/// Keys accepted in the `--config` file; all optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    epsilon: Option<f64>,
    weight_m: Option<f64>,
    omega_min: Option<OmegaValue>,
    omega_max: Option<OmegaValue>,
    omega_steps: Option<usize>,
    lambda: Option<f64>,
    tick: Option<f64>,
    seed: Option<u64>,
    window: Option<usize>,
    rho: Option<f64>,
    format: Option<Format>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// Closeness target for the twin
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Polynomial weight exponent M
    #[arg(long = "weight-m", global = true)]
    pub weight_m: Option<f64>,
    /// Smallest band limit (radians, or e.g. 0.5pi)
    #[arg(long = "omega-min", global = true, value_parser = parse_omega)]
    pub omega_min: Option<f64>,
    /// Largest band limit (radians, or e.g. 0.995pi)
    #[arg(long = "omega-max", global = true, value_parser = parse_omega)]
    pub omega_max: Option<f64>,
    /// Number of band limits on the search grid
    #[arg(long = "omega-steps", global = true)]
    pub omega_steps: Option<usize>,
    /// Tikhonov shift for the Gram solve
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Price rounding grid
    #[arg(long, global = true)]
    pub tick: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of returns used (input is truncated to its last N returns)
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// Per-step bond growth
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

/// Resolves defaults < file < flags.
pub fn resolve(flags: &RunFlags, file: Option<&Path>) -> CliResult<RunConfig> {
    let file = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io(path.display().to_string(), e))?;
            toml::from_str::<ConfigFile>(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    let mut cfg = RunConfig::default();
    macro_rules! layer {
        ($($field:ident),*) => {$(
            if let Some(v) = file.$field { cfg.$field = v; }
            if let Some(v) = flags.$field { cfg.$field = v; }
        )*};
    }
    layer!(
        epsilon,
        weight_m,
        omega_steps,
        lambda,
        tick,
        seed,
        window,
        rho
    );
    if let Some(v) = &file.omega_min {
        cfg.omega_min = v.resolve()?;
    }
    if let Some(v) = &file.omega_max {
        cfg.omega_max = v.resolve()?;
    }
    cfg.omega_min = flags.omega_min.unwrap_or(cfg.omega_min);
    cfg.omega_max = flags.omega_max.unwrap_or(cfg.omega_max);
    cfg.format = flags.format.or(file.format);
    cfg.validate()?;
    Ok(cfg)
}
