//! Run configuration (TOML).
//!
//! ```toml
//! schema_version = 1
//! output_dir = "out"
//! rng_seed = 7
//!
//! [grid]
//! n = 512
//! k_max = 32.0
//!
//! [[emitters]]
//! gamma = 1.0
//! [[emitters]]
//! gamma = 1.0
//!
//! [seed_pulse]
//! type = "gaussian"
//! width = 2.0
//!
//! [optimizer]
//! method = "flow"
//! dtau = 0.05
//! max_iters = 20000
//! tol = 1e-10
//! objective = "plain"
//! ```
//!
//! All rates are in units of the first emitter's coupling.

use std::path::{Path, PathBuf};

use photonsort_core::grid::{exponential_pulse, gaussian_pulse, lorentzian_pulse};
use photonsort_core::objective::ObjectiveKind;
use photonsort_core::optimize::FlowParams;
use photonsort_core::{Emitter, EmitterChain, Grid, Pulse};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::io::read_pulse_csv;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_emitters")]
    pub emitters: Vec<EmitterConfig>,
    #[serde(default)]
    pub seed_pulse: SeedPulse,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub rng_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub k_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = Grid::production();
        GridConfig { n: g.n(), k_max: g.k_max() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterConfig {
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default)]
    pub gamma_p: f64,
}

impl Default for EmitterConfig {
    fn default() -> Self {
        EmitterConfig { gamma: 1.0, delta: 0.0, beta: 1.0, gamma_p: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum SeedPulse {
    Gaussian {
        #[serde(default = "default_width")]
        width: f64,
    },
    Lorentzian {
        #[serde(default = "one")]
        sigma: f64,
    },
    Exponential {
        #[serde(default = "one")]
        rate: f64,
    },
    File {
        path: PathBuf,
    },
}

impl Default for SeedPulse {
    fn default() -> Self {
        SeedPulse::Gaussian { width: default_width() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Flow,
    Filter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// `E = |c₁|² + |c₂|²`.
    Plain,
    /// `E − N₂`, maximizing the total fidelity.
    Total,
    /// `E / N₂`, maximizing the conditional fidelity.
    Conditional,
}

impl From<Objective> for ObjectiveKind {
    fn from(o: Objective) -> Self {
        match o {
            Objective::Plain => ObjectiveKind::Plain,
            Objective::Total => ObjectiveKind::TotalMinusSurvival,
            Objective::Conditional => ObjectiveKind::Conditional,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_dtau")]
    pub dtau: f64,
    /// Flow iterations, or filter rounds.
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_objective")]
    pub objective: Objective,
    /// Also start from the built-in seed set and keep the best run.
    #[serde(default)]
    pub multi_seed: bool,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: default_method(),
            dtau: default_dtau(),
            max_iters: default_max_iters(),
            tol: default_tol(),
            objective: default_objective(),
            multi_seed: false,
            snapshot_every: default_snapshot_every(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_width() -> f64 {
    photonsort_core::grid::DEFAULT_GAUSSIAN_WIDTH
}
fn default_emitters() -> Vec<EmitterConfig> {
    vec![EmitterConfig::default(); 2]
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("photonsort-out")
}
fn default_method() -> Method {
    Method::Flow
}
fn default_dtau() -> f64 {
    FlowParams::default().dtau
}
fn default_max_iters() -> usize {
    FlowParams::default().max_iters
}
fn default_tol() -> f64 {
    FlowParams::default().tol
}
fn default_objective() -> Objective {
    Objective::Plain
}
fn default_snapshot_every() -> usize {
    FlowParams::default().snapshot_every
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            grid: GridConfig::default(),
            emitters: default_emitters(),
            seed_pulse: SeedPulse::default(),
            optimizer: OptimizerConfig::default(),
            output_dir: default_output_dir(),
            rng_seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        // seed files are relative to the config file
        if let SeedPulse::File { path: p } = &mut cfg.seed_pulse {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> AppResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| AppError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> AppResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(AppError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.grid()?;
        self.chain()?;
        self.flow_params().validate().map_err(|e| AppError::Config(e.to_string()))?;
        if self.optimizer.max_iters == 0 {
            return Err(AppError::Config("optimizer.max_iters must be positive".into()));
        }
        match self.seed_pulse {
            SeedPulse::Gaussian { width: x } | SeedPulse::Lorentzian { sigma: x } | SeedPulse::Exponential { rate: x }
                if !(x > 0.0 && x.is_finite()) =>
            {
                Err(AppError::Config(format!("seed pulse parameter {x} must be positive")))
            }
            _ => Ok(()),
        }
    }

    pub fn grid(&self) -> AppResult<Grid> {
        Grid::new(self.grid.n, self.grid.k_max).map_err(|e| AppError::Config(format!("grid: {e}")))
    }

    pub fn chain(&self) -> AppResult<EmitterChain> {
        let emitters = self
            .emitters
            .iter()
            .map(|e| Emitter::new(e.gamma, e.delta, e.beta, e.gamma_p))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| AppError::Config(format!("emitters: {e}")))?;
        EmitterChain::new(emitters).map_err(|e| AppError::Config(format!("emitters: {e}")))
    }

    pub fn flow_params(&self) -> FlowParams {
        FlowParams {
            dtau: self.optimizer.dtau,
            max_iters: self.optimizer.max_iters,
            tol: self.optimizer.tol,
            kind: self.optimizer.objective.into(),
            snapshot_every: self.optimizer.snapshot_every,
            backtracking: true,
        }
    }

    /// The configured seed on the configured grid.
    pub fn seed(&self) -> AppResult<Pulse> {
        let g = self.grid()?;
        Ok(match &self.seed_pulse {
            SeedPulse::Gaussian { width } => gaussian_pulse(g, *width)?,
            SeedPulse::Lorentzian { sigma } => lorentzian_pulse(g, *sigma)?,
            SeedPulse::Exponential { rate } => exponential_pulse(g, *rate)?,
            SeedPulse::File { path } => {
                let p = read_pulse_csv(path)?;
                if p.grid() != &g {
                    return Err(AppError::Config(format!(
                        "seed pulse {} lives on grid ({}, {}), config asks for ({}, {})",
                        path.display(),
                        p.grid().n(),
                        p.grid().k_max(),
                        g.n(),
                        g.k_max()
                    )));
                }
                p.normalize()?
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml("schema_version = 1").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.chain().unwrap().len(), 2);
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.emitters[1].delta = 0.3;
        c.seed_pulse = SeedPulse::Lorentzian { sigma: 0.7 };
        c.optimizer.objective = Objective::Conditional;
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn schema_violations() {
        assert!(RunConfig::from_toml("schema_version = 2").is_err());
        assert!(RunConfig::from_toml("schema_version = 1\nbogus = 3").is_err());
        assert!(RunConfig::from_toml("schema_version = 1\n[grid]\nn = 63\nk_max = 8.0").is_err());
        assert!(RunConfig::from_toml("schema_version = 1\n[[emitters]]\nbeta = 1.5").is_err());
        assert!(RunConfig::from_toml("schema_version = 1\n[optimizer]\ndtau = -1.0").is_err());
        assert!(RunConfig::from_toml("schema_version = 1\n[seed_pulse]\ntype = \"square\"").is_err());
        assert!(RunConfig::from_toml("schema_version = 1\n[seed_pulse]\ntype = \"gaussian\"\nwidth = 0.0").is_err());
        assert!(RunConfig::from_toml("schema_version = 1\nemitters = []").is_err());
        assert!(RunConfig::from_toml("").is_err());
    }
}
