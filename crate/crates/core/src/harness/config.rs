//! Run configuration: JSON schema, defaults and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("{origin}:{line}:{column}: at `{key}`: {message}{}", suggestion_suffix(.suggestion))]
    Parse { origin: String, line: usize, column: usize, key: String, message: String, suggestion: Option<String> },
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn suggestion_suffix(s: &Option<String>) -> String {
    s.as_ref().map(|k| format!(" (did you mean `{k}`?)")).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Check,
    Evolve,
    Ensemble,
    Sweep,
    Kernel,
    Reverse,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Check => "check",
            Scenario::Evolve => "evolve",
            Scenario::Ensemble => "ensemble",
            Scenario::Sweep => "sweep",
            Scenario::Kernel => "kernel",
            Scenario::Reverse => "reverse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// |1⟩ ⊗ random lower-band state.
    Excited,
    /// (|0⟩+|1⟩)/√2 ⊗ random lower-band state.
    Superposition,
    /// √p|1,lower⟩ + √(1−p)|0,upper⟩, both components random.
    SubspaceRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialState {
    pub kind: InitialKind,
    pub seed: u64,
    pub p_excited: f64,
}

impl Default for InitialState {
    fn default() -> Self {
        Self { kind: InitialKind::Excited, seed: 7, p_excited: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub size: usize,
    /// Base seed; member i uses `derive_seed(seed, i)`.
    pub seed: u64,
    pub p_excited: f64,
    pub bin_width: f64,
    /// Also write one trajectory CSV per member.
    pub write_trajectories: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { size: 500, seed: 1000, p_excited: 0.75, bin_width: 0.005, write_trajectories: false }
    }
}

/// How the band width follows N in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepScaling {
    /// Level spacing δε/N fixed at the base model's value, so the rates and
    /// 2λN/δε stay constant and only the number of levels changes.
    ConstantDensity,
    /// δε fixed at the base model's value.
    FixedWidth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub n_values: Vec<usize>,
    pub scaling: SweepScaling,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { n_values: vec![10, 25, 50, 100, 200, 400, 500, 800], scaling: SweepScaling::ConstantDensity }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub t_max: f64,
    /// Threshold for the decay time of |f|.
    pub decay_threshold: f64,
    /// Also propagate the excited state to `t_max` and look for recurrences of ρ₁₁.
    pub recurrence_probe: bool,
    pub probe_from: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { t_max: 10_000.0, decay_threshold: 0.3, recurrence_probe: true, probe_from: 3000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReverseConfig {
    pub zero_width_variant: bool,
    pub variant_band_width: f64,
    pub variant_lambda: f64,
}

impl Default for ReverseConfig {
    fn default() -> Self {
        Self { zero_width_variant: true, variant_band_width: 0.0, variant_lambda: 1e-4 }
    }
}

fn default_model() -> ModelParams {
    ModelParams::paper()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(default = "default_model")]
    pub model: ModelParams,
    pub scenario: Scenario,
    pub initial_state: InitialState,
    pub t_max: f64,
    pub sample_step: f64,
    /// Averaging window of D².
    pub tau: f64,
    /// Length of the late-time window used for equilibrium means.
    pub equilibrium_window: f64,
    /// Bath temperature for the Born-approximation contrast.
    pub k_t_bath: f64,
    pub ensemble: EnsembleConfig,
    pub sweep: SweepConfig,
    pub kernel: KernelConfig,
    pub reverse: ReverseConfig,
    pub output_dir: PathBuf,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::paper(),
            scenario: Scenario::Evolve,
            initial_state: InitialState::default(),
            t_max: 3000.0,
            sample_step: 1.0,
            tau: 2000.0,
            equilibrium_window: 500.0,
            k_t_bath: 5.0,
            ensemble: EnsembleConfig::default(),
            sweep: SweepConfig::default(),
            kernel: KernelConfig::default(),
            reverse: ReverseConfig::default(),
            output_dir: PathBuf::from("out"),
            workers: 1,
        }
    }
}

/// The bundled preset with the canonical parameters.
pub const PAPER_PRESET: &str = include_str!("../../presets/paper.json");

impl RunConfig {
    pub fn paper() -> Self {
        parse_config(PAPER_PRESET, "paper.json").expect("bundled preset is valid")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, reason: String| Err(ConfigError::Invalid { key: key.into(), reason });
        if let Err(crate::model::ModelError::InvalidParameter { key, reason }) = self.model.validate() {
            return invalid(&format!("model.{key}"), reason);
        }
        if !(self.sample_step.is_finite() && self.sample_step > 0.0) {
            return invalid("sample_step", format!("must be > 0, got {}", self.sample_step));
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return invalid("t_max", format!("must be finite and >= 0, got {}", self.t_max));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return invalid("tau", format!("must be > 0, got {}", self.tau));
        }
        if !on_grid(self.tau, self.sample_step) {
            return invalid("tau", "must be a multiple of sample_step".into());
        }
        if matches!(self.scenario, Scenario::Evolve | Scenario::Reverse) && self.t_max < self.tau {
            return invalid("t_max", format!("must be >= tau = {} for deviation measures", self.tau));
        }
        if !(self.equilibrium_window >= 0.0) {
            return invalid("equilibrium_window", "must be >= 0".into());
        }
        if !(self.k_t_bath > 0.0) {
            return invalid("k_t_bath", "must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.initial_state.p_excited) {
            return invalid("initial_state.p_excited", "must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.ensemble.p_excited) {
            return invalid("ensemble.p_excited", "must lie in [0, 1]".into());
        }
        if self.scenario == Scenario::Ensemble && self.ensemble.size == 0 {
            return invalid("ensemble.size", "must be at least 1".into());
        }
        if !(self.ensemble.bin_width > 0.0) {
            return invalid("ensemble.bin_width", "must be > 0".into());
        }
        if self.sweep.n_values.contains(&0) {
            return invalid("sweep.n_values", "all entries must be >= 1".into());
        }
        if self.scenario == Scenario::Sweep && self.sweep.n_values.is_empty() {
            return invalid("sweep.n_values", "must not be empty".into());
        }
        if !(self.kernel.t_max.is_finite() && self.kernel.t_max >= 0.0) {
            return invalid("kernel.t_max", "must be finite and >= 0".into());
        }
        if !(self.reverse.variant_lambda >= 0.0) {
            return invalid("reverse.variant_lambda", "must be >= 0".into());
        }
        if !(self.reverse.variant_band_width >= 0.0 && self.reverse.variant_band_width < self.model.delta_e) {
            return invalid("reverse.variant_band_width", "must lie in [0, delta_e)".into());
        }
        if self.workers == 0 {
            return invalid("workers", "must be at least 1".into());
        }
        Ok(())
    }
}

fn on_grid(t: f64, step: f64) -> bool {
    let k = (t / step).round();
    (k * step - t).abs() <= 1e-9 * step.max(1.0)
}

/// Parse and validate a configuration document. `origin` labels diagnostics.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.to_string();
        let suggestion = unknown_field_suggestion(&message);
        // serde_json appends " at line L column C"; keep the position separately.
        let message = message.split(" at line ").next().unwrap_or(&message).to_string();
        ConfigError::Parse {
            origin: origin.to_string(),
            line: inner.line(),
            column: inner.column(),
            key,
            message,
            suggestion,
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
    parse_config(&text, &path.display().to_string())
}

/// For "unknown field `x`, expected one of `a`, `b`" messages, the closest
/// expected name by edit distance.
fn unknown_field_suggestion(message: &str) -> Option<String> {
    let rest = message.strip_prefix("unknown field `")?;
    let (unknown, tail) = rest.split_once('`')?;
    let expected: Vec<&str> = tail.split('`').skip(1).step_by(2).collect();
    expected
        .into_iter()
        .map(|k| (strsim::damerau_levenshtein(unknown, k), k))
        .filter(|(d, k)| *d <= 2.max(k.len() / 3))
        .min()
        .map(|(_, k)| k.to_string())
}
