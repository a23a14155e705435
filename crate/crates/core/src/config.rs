//! Experiment configuration: a single JSON document with `landscape`,
//! `sim`, `action`, `profiles`, `qp` and `output` blocks. Unknown keys are
//! rejected, and every validation error names the offending key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::action::ActionOptions;
use crate::error::{Error, Result};
use crate::landscape::{make_benchmark, DepthFunction, DriftField};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub landscape: Option<LandscapeConfig>,
    pub sim: Option<SimBlock>,
    #[serde(default)]
    pub action: ActionBlock,
    pub profiles: Option<ProfilesBlock>,
    pub qp: Option<QpBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeConfig {
    /// Only `quartic_double_well` is built in.
    pub name: String,
    pub dimension: usize,
    pub depth: DepthConfig,
    pub phase_lag: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DepthConfig {
    Constant { value: f64 },
    Cosine { mean: f64, amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub epsilon: Option<f64>,
    pub epsilon_ladder: Option<Vec<f64>>,
    pub mu: Option<f64>,
    pub mu_grid: Option<Vec<f64>>,
    /// Size of the scale grid spread over the resonance interval when
    /// `mu_grid` is absent (`compare` only).
    #[serde(default = "default_mu_points")]
    pub mu_points: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub rho: Option<f64>,
    pub h: Option<f64>,
    pub h_ladder: Option<Vec<f64>>,
    pub path_count: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    /// Simulated horizon in units of the time scale `exp(mu / epsilon)`.
    #[serde(default = "default_horizon_multiplier")]
    pub horizon_multiplier: f64,
    #[serde(default = "default_abort_radius")]
    pub abort_radius: f64,
    /// Also fit diffusion rates in `compare` (expensive).
    #[serde(default)]
    pub compare_diffusion: bool,
}

fn default_mu_points() -> usize {
    21
}
fn default_dt() -> f64 {
    1e-3
}
fn default_horizon_multiplier() -> f64 {
    1.0
}
fn default_abort_radius() -> f64 {
    6.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActionBlock {
    pub grid_size: usize,
    pub t0: Option<f64>,
    pub t_max: f64,
    pub nodes_per_time: f64,
    pub min_intervals: usize,
    pub gtol: f64,
    pub max_iter: usize,
    pub ladder_tol: f64,
}

impl Default for ActionBlock {
    fn default() -> Self {
        let o = ActionOptions::default();
        ActionBlock {
            grid_size: 16,
            t0: o.t0,
            t_max: o.t_max,
            nodes_per_time: o.nodes_per_time,
            min_intervals: o.min_intervals,
            gtol: o.gtol,
            max_iter: o.max_iter,
            ladder_tol: o.ladder_tol,
        }
    }
}

impl ActionBlock {
    pub fn options(&self) -> ActionOptions {
        ActionOptions {
            t_max: self.t_max,
            t0: self.t0,
            nodes_per_time: self.nodes_per_time,
            min_intervals: self.min_intervals,
            gtol: self.gtol,
            max_iter: self.max_iter,
            ladder_tol: self.ladder_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    /// Minimize the action on the phase grid.
    Action,
    /// Twice the well depth (gradient fields only).
    WellDepth,
    /// Read a `s,e_minus,e_plus,flags` table.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilesBlock {
    pub source: ProfileSource,
    pub path: Option<PathBuf>,
    /// Phase lag of the profiles when there is no landscape block.
    pub phase_lag: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpBlock {
    #[serde(default)]
    pub phase: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

pub(crate) fn config_error(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_error(key, format!("must be positive, got {v}")))
    }
}

fn positive_list(key: &str, v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(config_error(key, "must not be empty"));
    }
    for x in v {
        positive(key, *x)?;
    }
    Ok(v.to_vec())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_error("<document>", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path)?;
        let text = String::from_utf8(bytes.clone()).map_err(|e| config_error("<document>", e.to_string()))?;
        Ok((Self::from_json(&text)?, bytes))
    }

    pub fn landscape(&self) -> Result<&LandscapeConfig> {
        self.landscape
            .as_ref()
            .ok_or_else(|| config_error("landscape", "block is required"))
    }

    pub fn sim(&self) -> Result<&SimBlock> {
        self.sim.as_ref().ok_or_else(|| config_error("sim", "block is required"))
    }

    pub fn build_field(&self) -> Result<DriftField> {
        let l = self.landscape()?;
        if l.name != "quartic_double_well" {
            return Err(config_error(
                "landscape.name",
                format!("unknown landscape `{}` (available: quartic_double_well)", l.name),
            ));
        }
        if !(1..=2).contains(&l.dimension) {
            return Err(config_error("landscape.dimension", "must be 1 or 2"));
        }
        if !(l.phase_lag > 0.0 && l.phase_lag < 1.0) {
            return Err(config_error("landscape.phase_lag", "must lie in (0, 1)"));
        }
        let depth = match l.depth {
            DepthConfig::Constant { value } => DepthFunction::Constant(positive("landscape.depth.value", value)?),
            DepthConfig::Cosine { mean, amplitude } => {
                if !(mean - amplitude.abs() > 0.0) {
                    return Err(config_error("landscape.depth", "mean - |amplitude| must be positive"));
                }
                DepthFunction::Cosine { mean, amplitude }
            }
        };
        make_benchmark(l.dimension, depth, l.phase_lag)
    }

    /// Phase lag between the two profiles.
    pub fn phase_lag(&self) -> Result<f64> {
        if let Some(lag) = self.profiles.as_ref().and_then(|p| p.phase_lag) {
            return Ok(lag);
        }
        self.landscape
            .as_ref()
            .map(|l| l.phase_lag)
            .ok_or_else(|| config_error("landscape.phase_lag", "required to pair the profiles"))
    }

    pub fn validate_action(&self) -> Result<()> {
        let a = &self.action;
        if a.grid_size < 4 {
            return Err(config_error("action.grid_size", "need at least 4 phases"));
        }
        positive("action.t_max", a.t_max)?;
        if let Some(t0) = a.t0 {
            positive("action.t0", t0)?;
        }
        positive("action.nodes_per_time", a.nodes_per_time)?;
        positive("action.gtol", a.gtol)?;
        if a.max_iter == 0 {
            return Err(config_error("action.max_iter", "must be at least 1"));
        }
        positive("action.ladder_tol", a.ladder_tol)?;
        Ok(())
    }
}

impl SimBlock {
    /// `epsilon` as a one-point list, else the ladder.
    pub fn epsilons(&self) -> Result<Vec<f64>> {
        match (&self.epsilon, &self.epsilon_ladder) {
            (Some(e), _) => Ok(vec![positive("sim.epsilon", *e)?]),
            (None, Some(l)) => positive_list("sim.epsilon_ladder", l),
            (None, None) => Err(config_error("sim.epsilon", "required")),
        }
    }

    pub fn epsilon(&self) -> Result<f64> {
        positive(
            "sim.epsilon",
            self.epsilon.ok_or_else(|| config_error("sim.epsilon", "required"))?,
        )
    }

    pub fn epsilon_ladder(&self) -> Result<Vec<f64>> {
        let l = self
            .epsilon_ladder
            .as_ref()
            .ok_or_else(|| config_error("sim.epsilon_ladder", "required"))?;
        let l = positive_list("sim.epsilon_ladder", l)?;
        if l.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(config_error("sim.epsilon_ladder", "must be strictly decreasing"));
        }
        Ok(l)
    }

    pub fn mus(&self) -> Result<Vec<f64>> {
        match (&self.mu, &self.mu_grid) {
            (Some(m), _) => Ok(vec![positive("sim.mu", *m)?]),
            (None, Some(g)) => positive_list("sim.mu_grid", g),
            (None, None) => Err(config_error("sim.mu", "required")),
        }
    }

    pub fn hs(&self) -> Result<Vec<f64>> {
        match (&self.h, &self.h_ladder) {
            (Some(h), _) => Ok(vec![positive("sim.h", *h)?]),
            (None, Some(l)) => positive_list("sim.h_ladder", l),
            (None, None) => Err(config_error("sim.h", "required")),
        }
    }

    pub fn h(&self) -> Result<f64> {
        positive("sim.h", self.h.ok_or_else(|| config_error("sim.h", "required"))?)
    }

    pub fn h_ladder(&self) -> Result<Vec<f64>> {
        match &self.h_ladder {
            Some(l) => positive_list("sim.h_ladder", l),
            None => Ok(vec![0.2, 0.15, 0.1, 0.05]),
        }
    }

    pub fn rho(&self) -> Result<f64> {
        positive("sim.rho", self.rho.ok_or_else(|| config_error("sim.rho", "required"))?)
    }

    pub fn path_count(&self) -> Result<usize> {
        match self.path_count {
            Some(0) => Err(config_error("sim.path_count", "must be at least 1")),
            Some(n) => Ok(n),
            None => Err(config_error("sim.path_count", "required")),
        }
    }

    pub fn check_common(&self) -> Result<()> {
        positive("sim.dt", self.dt)?;
        positive("sim.horizon_multiplier", self.horizon_multiplier)?;
        positive("sim.abort_radius", self.abort_radius)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BENCH: &str = r#"{
        "landscape": {"name": "quartic_double_well", "dimension": 1,
                      "depth": {"kind": "cosine", "mean": 0.5, "amplitude": 0.25},
                      "phase_lag": 0.5},
        "sim": {"epsilon": 0.25, "mu": 0.9, "h": 0.1, "rho": 0.2, "path_count": 10}
    }"#;

    #[test]
    fn parses_the_benchmark() {
        let cfg = ExperimentConfig::from_json(BENCH).unwrap();
        assert_eq!(cfg.action.grid_size, 16);
        assert_eq!(cfg.sim().unwrap().dt, 1e-3);
        assert!(cfg.build_field().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = BENCH.replace("\"rho\"", "\"rh0\"");
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let bad = BENCH.replace("\"mean\"", "\"avg\"");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn missing_keys_are_named() {
        let cfg = ExperimentConfig::from_json(&BENCH.replace("\"epsilon\": 0.25, ", "")).unwrap();
        match cfg.sim().unwrap().epsilons() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "sim.epsilon"),
            other => panic!("{other:?}"),
        }
    }
}
