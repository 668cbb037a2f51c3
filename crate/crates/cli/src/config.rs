//! Experiment configuration: one JSON document, optionally patched by
//! `key=value` overrides.

use crate::error::CliError;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};
use zerolab::net::{BatchMode, LossReduction, RankReference, StableRankMethod, TraceMetrics, TrainConfig};
use zerolab::tensor::DEFAULT_RANK_TOL;
use zerolab::NetworkSpec;

/// Environment variable that overrides the configured output directory.
pub const OUT_ENV: &str = "ZERO_INIT_OUT";
/// Environment variable consulted for MNIST files when the config names no directory.
pub const MNIST_ENV: &str = "MNIST_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub network: NetworkSpec,
    #[serde(default)]
    pub data: DataSource,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub analysis: AnalysisToggles,
    #[serde(default)]
    pub prune: PruneSection,
    #[serde(default)]
    pub warmup_probe: WarmupProbeSection,
    #[serde(default)]
    pub theorem: TheoremSection,
    /// Extra convolution kernels for `init-dump`.
    #[serde(default)]
    pub conv_kernels: Vec<ConvShape>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Teacher data sized from the network's input and output widths.
    Synthetic {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default)]
        noise_std: f64,
        /// Held-out samples from the same teacher.
        #[serde(default)]
        test_samples: usize,
        /// Replace targets by one-hot `argmax(T x)` labels.
        #[serde(default)]
        one_hot: bool,
        #[serde(default)]
        whiten: bool,
    },
    Mnist {
        /// Directory holding the four IDX files; falls back to `MNIST_DIR`,
        /// then `data/mnist`.
        #[serde(default)]
        dir: Option<PathBuf>,
        #[serde(default)]
        train_limit: Option<usize>,
        #[serde(default)]
        test_limit: Option<usize>,
        /// Per-feature standardization fitted on the training split.
        #[serde(default)]
        standardize: bool,
    },
    /// Binary dataset cache files.
    Cache {
        train: PathBuf,
        #[serde(default)]
        test: Option<PathBuf>,
    },
}

fn default_samples() -> usize {
    100
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic { seed: 0, samples: default_samples(), noise_std: 0.0, test_samples: 0, one_hot: false, whiten: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default)]
    pub warmup_steps: usize,
    /// At most one of `steps` and `epochs` may be set; with neither, the
    /// run is `DEFAULT_STEPS` steps long.
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub batch: BatchMode,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default)]
    pub loss_reduction: LossReduction,
}

pub const DEFAULT_STEPS: usize = 100;

fn default_lr() -> f64 {
    0.01
}

fn default_log_every() -> usize {
    1
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            lr: default_lr(),
            warmup_steps: 0,
            steps: None,
            epochs: None,
            batch: BatchMode::Full,
            log_every: default_log_every(),
            loss_reduction: LossReduction::Sum,
        }
    }
}

impl TrainingSection {
    /// Total update count for a training set of `samples` examples.
    pub fn total_steps(&self, samples: usize) -> Result<usize, CliError> {
        match (self.steps, self.epochs) {
            (Some(s), None) => Ok(s),
            (None, Some(e)) => Ok(match self.batch {
                BatchMode::Full => e,
                BatchMode::Mini { size, .. } => e * samples.div_ceil(size.max(1)),
            }),
            (Some(_), Some(_)) => Err(CliError::Config("training: set either steps or epochs, not both".into())),
            (None, None) => Ok(DEFAULT_STEPS),
        }
    }

    pub fn train_config(&self, samples: usize, analysis: &AnalysisToggles) -> Result<TrainConfig, CliError> {
        let cfg = TrainConfig {
            lr: self.lr,
            warmup_steps: self.warmup_steps,
            steps: self.total_steps(samples)?,
            batch: self.batch,
            log_every: self.log_every,
            loss_reduction: self.loss_reduction,
            metrics: analysis.metrics(),
            snapshot_weights: false,
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisToggles {
    #[serde(default)]
    pub rank_trajectory: bool,
    #[serde(default)]
    pub stable_rank: StableRankMethod,
    #[serde(default)]
    pub rank_reference: RankReference,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
    /// Jacobian spectra at initialization and after training.
    #[serde(default)]
    pub isometry: bool,
    #[serde(default = "default_isometry_samples")]
    pub isometry_samples: usize,
    /// Correlation metrics, plus the level-1 check for constant inits.
    #[serde(default)]
    pub symmetry: bool,
    /// Per-layer gradient norm columns in the trace.
    #[serde(default = "yes")]
    pub gradient_norms: bool,
}

fn default_rank_tol() -> f64 {
    DEFAULT_RANK_TOL
}

fn default_isometry_samples() -> usize {
    8
}

fn yes() -> bool {
    true
}

impl Default for AnalysisToggles {
    fn default() -> Self {
        Self {
            rank_trajectory: false,
            stable_rank: StableRankMethod::Off,
            rank_reference: RankReference::Auto,
            rank_tol: DEFAULT_RANK_TOL,
            isometry: false,
            isometry_samples: default_isometry_samples(),
            symmetry: false,
            gradient_norms: true,
        }
    }
}

impl AnalysisToggles {
    pub fn metrics(&self) -> TraceMetrics {
        TraceMetrics {
            numeric_rank: self.rank_trajectory,
            stable_rank: self.stable_rank,
            rank_tol: self.rank_tol,
            reference: self.rank_reference,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneSection {
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    /// Trained weights; defaults to `weights.bin` in the output directory.
    #[serde(default)]
    pub weights: Option<PathBuf>,
}

fn default_fractions() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 10.0).collect()
}

impl Default for PruneSection {
    fn default() -> Self {
        Self { fractions: default_fractions(), weights: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarmupProbeSection {
    /// Steps recorded per arm.
    #[serde(default = "default_probe_steps")]
    pub steps: usize,
    /// Warmup length of the warmup arm.
    #[serde(default = "default_probe_warmup")]
    pub warmup_steps: usize,
}

fn default_probe_steps() -> usize {
    50
}

fn default_probe_warmup() -> usize {
    20
}

impl Default for WarmupProbeSection {
    fn default() -> Self {
        Self { steps: default_probe_steps(), warmup_steps: default_probe_warmup() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremSection {
    /// Seed of the random arm.
    #[serde(default)]
    pub random_seed: u64,
    #[serde(default = "default_gain")]
    pub random_gain: f64,
}

fn default_gain() -> f64 {
    1.0
}

impl Default for TheoremSection {
    fn default() -> Self {
        Self { random_seed: 0, random_gain: default_gain() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvShape {
    pub c_out: usize,
    pub c_in: usize,
    pub k: usize,
}

/// Parses `value` as JSON, falling back to a plain string.
fn parse_override_value(value: &str) -> Value {
    serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()))
}

/// Sets `path` (dot-separated keys) in `doc` to `value`, creating objects on
/// the way.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, value) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("override key `{path}` is malformed")));
    }
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("override `{path}`: `{key}` is inside a non-object")))?;
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| CliError::Config(format!("override `{path}` does not address an object field")))?;
    obj.insert(keys[keys.len() - 1].to_string(), parse_override_value(value));
    Ok(())
}

impl ExperimentConfig {
    pub fn from_value(doc: Value) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` and applies `overrides` in order.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::io(path, source))?;
        let mut doc: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        Self::from_value(doc)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.network.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.training.total_steps(1)?;
        if let Some(f) = self.prune.fractions.iter().find(|f| !(0.0..1.0).contains(*f)) {
            return Err(CliError::Config(format!("prune fraction {f} must lie in [0, 1)")));
        }
        if let DataSource::Synthetic { samples: 0, .. } = self.data {
            return Err(CliError::Config("synthetic data needs at least one sample".into()));
        }
        Ok(())
    }

    /// The name used for this experiment's subdirectory in multi-job runs.
    pub fn label(&self, fallback: &str) -> String {
        self.name.clone().unwrap_or_else(|| fallback.to_string())
    }
}

/// `--out`, else `ZERO_INIT_OUT`, else the config's `output_dir`, else `out`.
pub fn resolve_output_dir(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}
