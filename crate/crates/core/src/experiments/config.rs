//! JSON configuration files for the CLI and the sweep harness.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ansatz::CircuitSpec;
use crate::engine::OptimizerConfig;
use crate::error::{Error, Result};
use crate::experiments::problems::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `exp(-i eps Z_0 / 2)` after every layer or gate.
    CoherentZ,
    /// Uniformly chosen single-qubit X flip after every layer or gate, with
    /// the per-slot probability giving total level `eps`.
    BitFlip,
    /// Every parameter scaled by `1 + eps`.
    Control,
    /// Depolarizing after every layer or gate, probability as for `BitFlip`.
    Depolarizing,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::CoherentZ => "coherent_z",
            NoiseKind::BitFlip => "bit_flip",
            NoiseKind::Control => "control",
            NoiseKind::Depolarizing => "depolarizing",
        }
    }
}

/// Where per-slot noise is inserted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    #[default]
    PerLayer,
    /// After every generator of a product layer; SU(N) layers count as one
    /// gate.
    PerGate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Epsilons {
    List(Vec<f64>),
    /// `count` points spaced evenly in `log10` between `min` and `max`.
    LogGrid { min: f64, max: f64, count: usize },
}

impl Epsilons {
    pub fn values(&self) -> Result<Vec<f64>> {
        let values = match self {
            Epsilons::List(v) => v.clone(),
            Epsilons::LogGrid { min, max, count } => log_grid(*min, *max, *count)?,
        };
        if values.is_empty() {
            return Err(Error::Config("no perturbation levels given".into()));
        }
        if let Some(bad) = values.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
            return Err(Error::Config(format!("perturbation level {bad} must be finite and > 0")));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("perturbation levels must be strictly ascending".into()));
        }
        Ok(values)
    }
}

/// `count` log-spaced points from `min` to `max`, both included.
pub fn log_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !(min > 0.0) || !(max > min) || count < 2 {
        return Err(Error::Config(format!(
            "log grid needs 0 < min < max and count >= 2, got min={min} max={max} count={count}"
        )));
    }
    let (a, b) = (min.log10(), max.log10());
    Ok((0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect())
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub problem: ProblemSpec,
    pub noise_kind: NoiseKind,
    #[serde(default)]
    pub placement: Placement,
    pub epsilons: Epsilons,
    pub optimizer: OptimizerConfig,
    /// Seed for the shared initial parameters, uniform in `[-pi, pi)`.
    #[serde(default)]
    pub shared_init_seed: u64,
    /// Explicit shared initial parameters; overrides `shared_init_seed`.
    #[serde(default)]
    pub init_theta: Option<Vec<f64>>,
    /// Pick the step size by halving `optimizer.step_size` until the clean
    /// problem descends monotonically.
    #[serde(default)]
    pub tune_step: bool,
    #[serde(default)]
    pub output_path: Option<String>,
    #[serde(default = "default_true")]
    pub parallel: bool,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.epsilons.values()?;
        self.optimizer.validate()?;
        Ok(())
    }

    /// Replaces every seed: problem, shared initialization and optimizer.
    pub fn override_seed(&mut self, seed: u64) {
        self.problem.set_seed(seed);
        self.shared_init_seed = seed;
        self.optimizer.seed = seed;
    }
}

/// Noise for a single training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub epsilon: f64,
    #[serde(default)]
    pub placement: Placement,
}

fn default_snapshot() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub init_seed: u64,
    #[serde(default)]
    pub init_theta: Option<Vec<f64>>,
    /// Write `theta` on every n-th trace line.
    #[serde(default = "default_snapshot")]
    pub snapshot_every: usize,
    #[serde(default)]
    pub output_path: Option<String>,
}

impl TrainConfig {
    pub fn override_seed(&mut self, seed: u64) {
        self.problem.set_seed(seed);
        self.init_seed = seed;
        self.optimizer.seed = seed;
    }
}

fn default_samples() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurjectivityConfig {
    pub circuit: CircuitSpec,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_path: Option<String>,
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
