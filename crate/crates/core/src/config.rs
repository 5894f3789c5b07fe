//! Pipeline configuration, read from one TOML file. Every table and key is
//! optional; missing values take the defaults below, which are also what
//! `config/default.toml` spells out.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::continuum::ContinuumOptions;
use crate::control::ControllerConfig;
use crate::design::DesignOptions;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::ode::Tolerances;
use crate::sim::SimConfig;
use crate::supervisor::{RunOptions, SpeedSchedule};

/// Environment variable consulted when no `--config` flag is given.
pub const CONFIG_ENV: &str = "HZD_GAITS_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Accuracy of located touchdown events, in the event function's units (m).
    pub event_tol: f64,
    pub max_steps: usize,
    /// A swing phase longer than this counts as a fall (s).
    pub max_step_time_s: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        let t = Tolerances::default();
        Self { abs_tol: t.abs, rel_tol: t.rel, event_tol: t.event, max_steps: t.max_steps, max_step_time_s: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    /// Radius of the `zeta` ball, in (kg m^2/s)^2.
    pub epsilon: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { epsilon: crate::switching::DEFAULT_EPSILON }
    }
}

/// Randomized boundedness check run by `analyze`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub random_signals: usize,
    pub signal_steps: usize,
    pub seed: u64,
    /// Integrator tolerance for these long runs; looser than the certification tolerance.
    pub tolerance: f64,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self { random_signals: 100, signal_steps: 1000, seed: 1, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `step:speed` pairs, or `<time>s:speed` for time triggers, comma separated.
    pub schedule: String,
    pub total_steps: usize,
    pub record_trajectory: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { schedule: "0:0.85, 80:0.58, 200:0.85".into(), total_steps: 300, record_trajectory: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelParams,
    pub controller: ControllerConfig,
    pub integrator: IntegratorConfig,
    pub design: DesignOptions,
    pub continuum: ContinuumOptions,
    pub graph: GraphConfig,
    pub analyze: AnalyzeConfig,
    pub run: RunConfig,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// File named by `flag`, else by [`CONFIG_ENV`], else the defaults.
    pub fn resolve(flag: Option<&Path>) -> Result<Self> {
        match flag {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.controller.validate()?;
        let i = &self.integrator;
        if !(i.abs_tol > 0.0 && i.rel_tol > 0.0 && i.event_tol > 0.0 && i.max_step_time_s > 0.0 && i.max_steps > 0) {
            return Err(Error::Config("integrator tolerances and limits must be positive".into()));
        }
        if !(self.graph.epsilon > 0.0) {
            return Err(Error::Config("graph.epsilon must be positive".into()));
        }
        if !(self.analyze.tolerance > 0.0) {
            return Err(Error::Config("analyze.tolerance must be positive".into()));
        }
        SpeedSchedule::parse(&self.run.schedule)?;
        Ok(())
    }

    pub fn sim(&self) -> SimConfig {
        let i = &self.integrator;
        SimConfig {
            controller: self.controller,
            tolerances: Tolerances { abs: i.abs_tol, rel: i.rel_tol, event: i.event_tol, max_steps: i.max_steps },
            max_step_time: i.max_step_time_s,
        }
    }

    /// Simulation settings for the long randomized runs.
    pub fn analyze_sim(&self) -> SimConfig {
        let mut s = self.sim();
        s.tolerances.abs = self.analyze.tolerance;
        s.tolerances.rel = self.analyze.tolerance;
        s
    }

    pub fn schedule(&self) -> Result<SpeedSchedule> {
        SpeedSchedule::parse(&self.run.schedule)
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            total_steps: self.run.total_steps,
            epsilon: self.graph.epsilon,
            record_trajectory: self.run.record_trajectory,
        }
    }
}
