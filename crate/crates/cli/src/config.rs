//! Declarative experiment configuration: versioned TOML document with
//! environment-variable overrides.

use nbeddyn_core::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CONFIG_SCHEMA_VERSION: u64 = 1;

/// Prefix for environment overrides; `NBEDDYN_DATASET__DT=0.02` sets
/// `dataset.dt` (double underscore separates key segments).
pub const ENV_PREFIX: &str = "NBEDDYN_";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u64,
    pub run_name: String,
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub inference: InferenceConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub baselines: BaselinesConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// "lorenz63" or "linear".
    pub system: String,
    pub dt: f64,
    /// Samples kept after the transient.
    pub steps: usize,
    /// Leading samples dropped before observation.
    #[serde(default)]
    pub transient: usize,
    /// Samples of the kept series used for training; the rest is test data.
    pub train_len: usize,
    /// Observed components: indices for lorenz63 ("0" = x1); ignored for
    /// linear (real part is observed).
    #[serde(default = "default_observed")]
    pub observed: Vec<usize>,
    #[serde(default)]
    pub noise_sigma: f64,
    /// Standardize observations to zero mean / unit variance using the
    /// training segment's statistics.
    #[serde(default = "default_true")]
    pub normalize: bool,
    /// Initial condition for the simulator.
    #[serde(default = "default_z0")]
    pub z0: Vec<f64>,
    /// Integrator substeps per sampling interval for the ground truth.
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

fn default_observed() -> Vec<usize> {
    vec![0]
}
fn default_true() -> bool {
    true
}
fn default_z0() -> Vec<f64> {
    vec![1.0, 3.0, 25.0]
}
fn default_substeps() -> usize {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_d_e")]
    pub d_e: usize,
    /// "bilinear" or "linear".
    #[serde(default = "default_arch")]
    pub architecture: String,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_theta_step")]
    pub theta_step: f64,
    #[serde(default = "default_latent_step")]
    pub latent_step: f64,
    #[serde(default = "default_decay_factor")]
    pub decay_factor: Option<f64>,
    #[serde(default = "default_decay_every")]
    pub decay_every: Option<usize>,
    /// Latent-trajectory snapshot cadence in epochs (0 = none).
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default = "default_theta_init")]
    pub theta_init_scale: f64,
    #[serde(default = "default_latent_init")]
    pub latent_init_scale: f64,
    /// Weight of the energy-conservation penalty on the quadratic
    /// coefficients (0 = off); stabilizes long free runs.
    #[serde(default)]
    pub energy_reg: f64,
    /// Initialize latents from delay coordinates at this lag instead of
    /// random noise.
    #[serde(default)]
    pub latent_init_tau: Option<usize>,
}

fn default_theta_init() -> f64 {
    0.01
}
fn default_latent_init() -> f64 {
    0.1
}
fn default_d_e() -> usize {
    6
}
fn default_arch() -> String {
    "bilinear".into()
}
fn default_lambda() -> f64 {
    1.0
}
fn default_epochs() -> usize {
    6000
}
fn default_theta_step() -> f64 {
    3e-3
}
fn default_latent_step() -> f64 {
    3e-2
}
fn default_decay_factor() -> Option<f64> {
    Some(0.5)
}
fn default_decay_every() -> Option<usize> {
    Some(2000)
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_e: 6,
            architecture: "bilinear".into(),
            lambda: 1.0,
            epochs: 6000,
            theta_step: 3e-3,
            latent_step: 3e-2,
            decay_factor: Some(0.5),
            decay_every: Some(2000),
            snapshot_every: 0,
            theta_init_scale: default_theta_init(),
            latent_init_scale: default_latent_init(),
            energy_reg: 0.0,
            latent_init_tau: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceConfig {
    /// Conditioning-window length in samples.
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_infer_step")]
    pub step: f64,
}

fn default_window() -> usize {
    100
}
fn default_iterations() -> usize {
    500
}
fn default_infer_step() -> f64 {
    1e-2
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            window: 100,
            iterations: 500,
            step: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Forecast horizons (in sampling steps) reported in benchmark tables.
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    /// Number of held-out start points.
    #[serde(default = "default_test_windows")]
    pub test_windows: usize,
    /// Length of the series generated for the Lyapunov estimate.
    #[serde(default = "default_generation_steps")]
    pub generation_steps: usize,
}

fn default_horizons() -> Vec<usize> {
    vec![1, 4]
}
fn default_test_windows() -> usize {
    30
}
fn default_generation_steps() -> usize {
    10_000
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            horizons: vec![1, 4],
            test_windows: 30,
            generation_steps: 10_000,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselinesConfig {
    #[serde(default)]
    pub analog: Option<AnalogConfig>,
    #[serde(default)]
    pub sparse: Option<SparseConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalogConfig {
    /// Each (tau, d_e) pair becomes one benchmark row.
    pub tau: Vec<usize>,
    pub d_e: Vec<usize>,
    #[serde(default = "default_k")]
    pub k: usize,
    /// "locally-constant" or "locally-linear".
    #[serde(default = "default_regression")]
    pub regression: String,
}

fn default_k() -> usize {
    40
}
fn default_regression() -> String {
    "locally-linear".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseConfig {
    pub threshold: f64,
    /// Delay-embedding lags benchmarked for the scalar-observation case
    /// (empty = fit on the raw observed series only).
    #[serde(default)]
    pub tau: Vec<usize>,
    #[serde(default = "default_sparse_d_e")]
    pub d_e: usize,
}

fn default_sparse_d_e() -> usize {
    3
}

fn config_error(msg: String) -> Error {
    Error::invalid(msg)
}

impl ExperimentConfig {
    /// Parse a TOML document, apply `NBEDDYN_*` environment overrides, and
    /// validate. Errors name the offending key path.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, std::env::vars())
    }

    pub fn from_toml(
        text: &str,
        env: impl Iterator<Item = (String, String)>,
    ) -> Result<ExperimentConfig> {
        let mut doc: toml::Value = text
            .parse()
            .map_err(|e| config_error(format!("config parse error: {e}")))?;
        apply_env_overrides(&mut doc, env)?;
        let cfg: ExperimentConfig = doc
            .try_into()
            .map_err(|e| config_error(format!("config error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(config_error(format!(
                "schema_version: expected {CONFIG_SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        if self.run_name.is_empty()
            || self
                .run_name
                .chars()
                .any(|c| !c.is_ascii_alphanumeric() && c != '-' && c != '_')
        {
            return Err(config_error(format!(
                "run_name: must be a non-empty [A-Za-z0-9_-]+ token, got {:?}",
                self.run_name
            )));
        }
        let d = &self.dataset;
        match d.system.as_str() {
            "lorenz63" => {
                if d.z0.len() != 3 {
                    return Err(config_error(format!(
                        "dataset.z0: lorenz63 needs 3 components, got {}",
                        d.z0.len()
                    )));
                }
                if d.observed.iter().any(|&i| i >= 3) {
                    return Err(config_error(
                        "dataset.observed: lorenz63 components are 0..=2".into(),
                    ));
                }
            }
            "linear" => {
                if d.z0.len() != 2 {
                    return Err(config_error(format!(
                        "dataset.z0: linear needs (re, im), got {} components",
                        d.z0.len()
                    )));
                }
            }
            other => {
                return Err(config_error(format!(
                    "dataset.system: unknown system {other:?} (expected \"lorenz63\" or \"linear\")"
                )))
            }
        }
        if !(d.dt > 0.0) {
            return Err(config_error(format!("dataset.dt: must be > 0, got {}", d.dt)));
        }
        if d.steps < 3 {
            return Err(config_error(format!(
                "dataset.steps: must be >= 3, got {}",
                d.steps
            )));
        }
        if d.train_len < 3 || d.train_len > d.steps {
            return Err(config_error(format!(
                "dataset.train_len: must be in 3..={}, got {}",
                d.steps, d.train_len
            )));
        }
        if d.substeps == 0 {
            return Err(config_error("dataset.substeps: must be >= 1".into()));
        }
        if d.noise_sigma < 0.0 {
            return Err(config_error(format!(
                "dataset.noise_sigma: must be >= 0, got {}",
                d.noise_sigma
            )));
        }
        let m = &self.model;
        if !matches!(m.architecture.as_str(), "bilinear" | "linear") {
            return Err(config_error(format!(
                "model.architecture: expected \"bilinear\" or \"linear\", got {:?}",
                m.architecture
            )));
        }
        if m.epochs == 0 {
            return Err(config_error("model.epochs: must be >= 1".into()));
        }
        if m.d_e == 0 {
            return Err(config_error("model.d_e: must be >= 1".into()));
        }
        if m.decay_factor.is_some() != m.decay_every.is_some() {
            return Err(config_error(
                "model.decay_factor and model.decay_every must be set together".into(),
            ));
        }
        if m.energy_reg < 0.0 {
            return Err(config_error(format!(
                "model.energy_reg: must be >= 0, got {}",
                m.energy_reg
            )));
        }
        if m.latent_init_tau == Some(0) {
            return Err(config_error("model.latent_init_tau: must be >= 1".into()));
        }
        if self.inference.window < 2 {
            return Err(config_error("inference.window: must be >= 2".into()));
        }
        if self.inference.iterations == 0 {
            return Err(config_error("inference.iterations: must be >= 1".into()));
        }
        let e = &self.evaluation;
        if e.horizons.is_empty() || e.horizons.contains(&0) {
            return Err(config_error(
                "evaluation.horizons: need at least one horizon >= 1".into(),
            ));
        }
        if e.test_windows == 0 {
            return Err(config_error("evaluation.test_windows: must be >= 1".into()));
        }
        if let Some(a) = &self.baselines.analog {
            if a.tau.is_empty() || a.d_e.is_empty() || a.tau.contains(&0) || a.d_e.contains(&0) {
                return Err(config_error(
                    "baselines.analog: tau and d_e must be non-empty lists of positive lags/dims"
                        .into(),
                ));
            }
            if a.k == 0 {
                return Err(config_error("baselines.analog.k: must be >= 1".into()));
            }
            if !matches!(a.regression.as_str(), "locally-constant" | "locally-linear") {
                return Err(config_error(format!(
                    "baselines.analog.regression: expected \"locally-constant\" or \
                     \"locally-linear\", got {:?}",
                    a.regression
                )));
            }
        }
        if let Some(s) = &self.baselines.sparse {
            if s.threshold < 0.0 {
                return Err(config_error(format!(
                    "baselines.sparse.threshold: must be >= 0, got {}",
                    s.threshold
                )));
            }
            if s.d_e == 0 {
                return Err(config_error("baselines.sparse.d_e: must be >= 1".into()));
            }
        }
        Ok(())
    }

    /// Check that the test segment can host the configured held-out
    /// evaluation; only the `benchmark` command needs this.
    pub fn validate_split(&self) -> Result<()> {
        let e = &self.evaluation;
        let max_h = *e.horizons.iter().max().unwrap();
        let test_len = self.dataset.steps - self.dataset.train_len;
        let needed = self.inference.window + 2 * max_h + 2;
        if test_len < needed {
            return Err(config_error(format!(
                "evaluation: test segment of {test_len} samples is too short for \
                 horizon {max_h} after a {}-sample conditioning window (need >= {needed})",
                self.inference.window
            )));
        }
        Ok(())
    }
}

/// Apply `NBEDDYN_SECTION__KEY=value` overrides onto the raw TOML value.
/// Values parse as TOML scalars, falling back to plain strings.
fn apply_env_overrides(
    doc: &mut toml::Value,
    env: impl Iterator<Item = (String, String)>,
) -> Result<()> {
    let mut vars: Vec<(String, String)> = env
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..]
            .split("__")
            .map(|s| s.to_ascii_lowercase())
            .collect();
        if path.iter().any(|s| s.is_empty()) {
            return Err(config_error(format!("malformed override variable {key}")));
        }
        // parse the value as a TOML scalar by wrapping it in a document
        let value: toml::Value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.clone()));
        let mut cur = &mut *doc;
        for seg in &path[..path.len() - 1] {
            let table = cur.as_table_mut().ok_or_else(|| {
                config_error(format!("override {key}: {seg} is not a table"))
            })?;
            cur = table
                .entry(seg.clone())
                .or_insert_with(|| toml::Value::Table(Default::default()));
        }
        let table = cur
            .as_table_mut()
            .ok_or_else(|| config_error(format!("override {key}: parent is not a table")))?;
        table.insert(path.last().unwrap().clone(), value);
    }
    Ok(())
}
