use super::{NetError, Network};
use crate::data::Dataset;
use crate::init::partial_identity;
use crate::rng;
use crate::tensor::{numeric_rank, stable_rank, stable_rank_estimate, Matrix, DEFAULT_RANK_TOL};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossReduction {
    /// `1/2 sum_mu ||y - F(x)||^2`.
    #[default]
    Sum,
    /// The sum divided by the batch size.
    Mean,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BatchMode {
    #[default]
    Full,
    /// Shuffled each epoch; the last batch of an epoch may be short.
    Mini { size: usize, shuffle_seed: u64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StableRankMethod {
    #[default]
    Off,
    /// From a full SVD.
    Exact,
    /// Spectral norm by power iteration.
    Estimate,
}

/// What the rank metrics measure for each layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankReference {
    /// Residual layers: the raw weight. Plain layers: `W - I*`.
    #[default]
    Auto,
    Raw,
    Identity,
    /// `W - W(0)`, the accumulated update.
    Initial,
}

/// Per-layer resolution of a [`RankReference`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerReference {
    Raw,
    Identity,
    Initial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMetrics {
    #[serde(default)]
    pub numeric_rank: bool,
    #[serde(default)]
    pub stable_rank: StableRankMethod,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
    #[serde(default)]
    pub reference: RankReference,
}

fn default_rank_tol() -> f64 {
    DEFAULT_RANK_TOL
}

impl Default for TraceMetrics {
    fn default() -> Self {
        Self { numeric_rank: false, stable_rank: StableRankMethod::Off, rank_tol: DEFAULT_RANK_TOL, reference: RankReference::Auto }
    }
}

fn default_log_every() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    #[serde(default)]
    pub warmup_steps: usize,
    pub steps: usize,
    #[serde(default)]
    pub batch: BatchMode,
    /// Record every `log_every` steps, always including step 0 and, if it
    /// falls on the grid, step `steps`.
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default)]
    pub loss_reduction: LossReduction,
    #[serde(default)]
    pub metrics: TraceMetrics,
    /// Keep a copy of all weights at every logged step.
    #[serde(default)]
    pub snapshot_weights: bool,
}

impl TrainConfig {
    pub fn new(lr: f64, steps: usize) -> Self {
        Self {
            lr,
            warmup_steps: 0,
            steps,
            batch: BatchMode::Full,
            log_every: 1,
            loss_reduction: LossReduction::Sum,
            metrics: TraceMetrics::default(),
            snapshot_weights: false,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(NetError::InvalidConfig(format!("learning rate {} must be finite and non-negative", self.lr)));
        }
        if self.log_every == 0 {
            return Err(NetError::InvalidConfig("log_every must be positive".into()));
        }
        if let BatchMode::Mini { size: 0, .. } = self.batch {
            return Err(NetError::InvalidConfig("batch size must be positive".into()));
        }
        if !(self.metrics.rank_tol > 0.0 && self.metrics.rank_tol < 1.0) {
            return Err(NetError::InvalidConfig(format!("rank tolerance {} must lie in (0, 1)", self.metrics.rank_tol)));
        }
        Ok(())
    }
}

/// Linear warmup: `base * min(1, (t + 1) / warmup)`; `base` when `warmup == 0`.
pub fn warmup_lr(base: f64, warmup: usize, t: usize) -> f64 {
    if warmup == 0 {
        return base;
    }
    base * ((t + 1) as f64 / warmup as f64).min(1.0)
}

/// One logged step. The loss and gradients are those of the batch used at
/// step `step`, evaluated before its update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub grad_norms: Vec<f64>,
    /// Empty unless enabled.
    pub numeric_ranks: Vec<usize>,
    /// Empty unless enabled. A zero deviation has stable rank 0.
    pub stable_ranks: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub records: Vec<TraceRecord>,
    pub references: Vec<LayerReference>,
    /// `(step, weights)` at each logged step when snapshots are enabled.
    pub snapshots: Vec<(usize, Vec<Matrix>)>,
}

impl TrainingTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn at_step(&self, step: usize) -> Option<&TraceRecord> {
        self.records.iter().find(|r| r.step == step)
    }
}

struct Schedule {
    mode: BatchMode,
    n: usize,
    rng: Option<ChaCha8Rng>,
    epoch: usize,
    order: Vec<usize>,
}

impl Schedule {
    fn new(mode: BatchMode, n: usize) -> Self {
        let rng = match mode {
            BatchMode::Full => None,
            BatchMode::Mini { shuffle_seed, .. } => Some(rng::stream(shuffle_seed, rng::STREAM_SHUFFLE)),
        };
        Self { mode, n, rng, epoch: usize::MAX, order: (0..n).collect() }
    }

    /// Sample indices for step `t`; `None` means the whole dataset in order.
    /// Steps must be requested in non-decreasing order.
    fn batch(&mut self, t: usize) -> Option<&[usize]> {
        let BatchMode::Mini { size, .. } = self.mode else {
            return None;
        };
        let per_epoch = self.n.div_ceil(size);
        let epoch = t / per_epoch;
        while self.epoch != epoch {
            self.order = (0..self.n).collect();
            self.order.shuffle(self.rng.as_mut().expect("mini-batch rng"));
            self.epoch = if self.epoch == usize::MAX { 0 } else { self.epoch + 1 };
        }
        let j = t % per_epoch;
        let end = ((j + 1) * size).min(self.n);
        Some(&self.order[j * size..end])
    }
}

fn resolve_references(net: &Network, reference: RankReference) -> Vec<LayerReference> {
    (0..net.depth())
        .map(|l| match reference {
            RankReference::Raw => LayerReference::Raw,
            RankReference::Identity => LayerReference::Identity,
            RankReference::Initial => LayerReference::Initial,
            RankReference::Auto if net.spec().is_residual(l) => LayerReference::Raw,
            RankReference::Auto => LayerReference::Identity,
        })
        .collect()
}

/// The matrix whose rank is tracked for one layer.
pub(crate) fn deviation(w: &Matrix, reference: LayerReference, initial: &Matrix) -> Matrix {
    match reference {
        LayerReference::Raw => w.clone(),
        LayerReference::Identity => w.sub(&partial_identity(w.rows(), w.cols()).expect("non-empty")).expect("same shape"),
        LayerReference::Initial => w.sub(initial).expect("same shape"),
    }
}

fn record(
    net: &Network,
    initial: &[Matrix],
    refs: &[LayerReference],
    metrics: &TraceMetrics,
    step: usize,
    lr: f64,
    loss: f64,
    grads: &[Matrix],
) -> Result<TraceRecord, NetError> {
    let grad_norms = grads.iter().map(Matrix::frobenius_norm).collect();
    let mut numeric_ranks = Vec::new();
    let mut stable_ranks = Vec::new();
    if metrics.numeric_rank || metrics.stable_rank != StableRankMethod::Off {
        for (l, w) in net.weights().iter().enumerate() {
            let d = deviation(w, refs[l], &initial[l]);
            if metrics.numeric_rank {
                numeric_ranks.push(numeric_rank(&d, metrics.rank_tol)?);
            }
            let sr = match metrics.stable_rank {
                StableRankMethod::Off => None,
                _ if d.is_zero() => Some(0.0),
                StableRankMethod::Exact => Some(stable_rank(&d)?),
                StableRankMethod::Estimate => Some(stable_rank_estimate(&d)?),
            };
            stable_ranks.extend(sr);
        }
    }
    Ok(TraceRecord { step, lr, loss, grad_norms, numeric_ranks, stable_ranks })
}

/// Gradient descent on `net` over `data`.
///
/// Step `t` evaluates the loss and gradients on its batch, logs them if
/// `t % log_every == 0`, and then applies `W <- W - lr_t grad`. A final
/// evaluation at `t = steps` is logged (without an update) when it lands on
/// the logging grid. Non-finite losses or weights abort with
/// [`NetError::Diverged`] carrying the records so far.
pub fn train(net: &mut Network, data: &Dataset, cfg: &TrainConfig) -> Result<TrainingTrace, NetError> {
    cfg.validate()?;
    net.check_dataset(data)?;
    let refs = resolve_references(net, cfg.metrics.reference);
    let initial: Vec<Matrix> = net.weights().to_vec();
    let mut trace = TrainingTrace { records: Vec::new(), references: refs.clone(), snapshots: Vec::new() };
    let mut schedule = Schedule::new(cfg.batch, data.len());

    for t in 0..=cfg.steps {
        let log = t % cfg.log_every == 0;
        if t == cfg.steps && !log {
            break;
        }
        let (loss, grads) = match schedule.batch(t) {
            None => net.loss_and_gradients(data.inputs(), data.targets(), cfg.loss_reduction)?,
            Some(idx) => {
                let inputs = data.inputs().select_rows(idx);
                let targets = data.targets().select_rows(idx);
                net.loss_and_gradients(&inputs, &targets, cfg.loss_reduction)?
            }
        };
        if !loss.is_finite() || !grads.iter().all(Matrix::is_finite) {
            return Err(NetError::Diverged { step: t, trace: Box::new(trace) });
        }
        let lr = warmup_lr(cfg.lr, cfg.warmup_steps, t);
        if log {
            trace.records.push(record(net, &initial, &refs, &cfg.metrics, t, lr, loss, &grads)?);
            if cfg.snapshot_weights {
                trace.snapshots.push((t, net.weights().to_vec()));
            }
        }
        if t < cfg.steps {
            for (w, g) in net.weights_mut().iter_mut().zip(&grads) {
                w.axpy(-lr, g)?;
            }
        }
    }
    if !net.weights().iter().all(Matrix::is_finite) {
        return Err(NetError::Diverged { step: cfg.steps, trace: Box::new(trace) });
    }
    Ok(trace)
}
