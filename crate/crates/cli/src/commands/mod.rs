//! Subcommands. Each is a pure function of its configuration and input
//! files; the only artifact that varies between identical runs is
//! `timing.json`.

mod data;

pub use data::{load, mnist_dir, Splits};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{fmt_f64, read_weights, trace_table, write_weights, OutDir};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::time::Instant;
use zerolab::analysis::{isometry_report, level1_symmetry_check, rank_trajectory, symmetry_correlations, IsometryReport, Level1Report, RankReport, SymmetryCorrelations};
use zerolab::init::{census, zero_init_conv, Census};
use zerolab::net::{squared_error, train, LayerReference, LossReduction, RankReference, TrainConfig, TrainingTrace};
use zerolab::prune::{accuracy_of_outputs, magnitude_prune};
use zerolab::tensor::{numeric_rank, Matrix};
use zerolab::{Dataset, InitScheme, NetError, Network};

pub const TIMING_FILE: &str = "timing.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    InitDump,
    Train,
    VerifyTheorem,
    Prune,
    WarmupProbe,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::InitDump => "init-dump",
            Command::Train => "train",
            Command::VerifyTheorem => "verify-theorem",
            Command::Prune => "prune",
            Command::WarmupProbe => "warmup-probe",
        }
    }

    pub fn run(self, cfg: &ExperimentConfig, out: &OutDir) -> Result<(), CliError> {
        let start = Instant::now();
        out.write_json("config.json", cfg)?;
        let result = match self {
            Command::InitDump => init_dump(cfg, out).map(drop),
            Command::Train => train_cmd(cfg, out).map(drop),
            Command::VerifyTheorem => verify_theorem(cfg, out).map(drop),
            Command::Prune => prune_cmd(cfg, out).map(drop),
            Command::WarmupProbe => warmup_probe(cfg, out).map(drop),
        };
        out.write_json(TIMING_FILE, &Timing { command: self.name().into(), wall_seconds: start.elapsed().as_secs_f64() })?;
        result
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub command: String,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerCensus {
    pub layer: usize,
    pub rows: usize,
    pub cols: usize,
    #[serde(flatten)]
    pub census: Census,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelCensus {
    pub c_out: usize,
    pub c_in: usize,
    pub k: usize,
    #[serde(flatten)]
    pub census: Census,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    pub parameters: usize,
    pub zeros: usize,
    pub ones: usize,
    pub others: usize,
    pub layers: Vec<LayerCensus>,
    pub kernels: Vec<KernelCensus>,
}

/// Writes `layer_<l>.csv` per weight matrix, `kernel_<i>.csv` per configured
/// convolution kernel (long format) and `census.json`.
pub fn init_dump(cfg: &ExperimentConfig, out: &OutDir) -> Result<CensusReport, CliError> {
    let net = Network::build(cfg.network.clone())?;
    let mut layers = Vec::new();
    for (l, w) in net.weights().iter().enumerate() {
        out.write_matrix_csv(&format!("layer_{}.csv", l + 1), w)?;
        layers.push(LayerCensus { layer: l + 1, rows: w.rows(), cols: w.cols(), census: Census::of_matrix(w) });
    }
    let mut kernels = Vec::new();
    for (i, shape) in cfg.conv_kernels.iter().enumerate() {
        let kern = zero_init_conv(shape.c_out, shape.c_in, shape.k)?;
        let header = ["out", "in", "h", "w", "value"].map(String::from);
        let mut rows = Vec::new();
        for o in 0..shape.c_out {
            for ci in 0..shape.c_in {
                for h in 0..shape.k {
                    for w in 0..shape.k {
                        let v = kern.get(o, ci, h, w);
                        rows.push(vec![o.to_string(), ci.to_string(), h.to_string(), w.to_string(), fmt_f64(v)]);
                    }
                }
            }
        }
        let c = Census::of_matrix(&Matrix::new(1, kern.as_slice().len(), kern.as_slice().to_vec()).map_err(|e| CliError::Other(e.to_string()))?);
        out.write_csv(&format!("kernel_{}.csv", i + 1), &header, &rows)?;
        kernels.push(KernelCensus { c_out: shape.c_out, c_in: shape.c_in, k: shape.k, census: c });
    }
    let total = census(&net);
    let report = CensusReport {
        parameters: net.parameter_count(),
        zeros: total.zeros,
        ones: total.ones,
        others: total.others,
        layers,
        kernels,
    };
    out.write_json("census.json", &report)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub samples: usize,
    /// `1/2 sum ||y - F(x)||^2`.
    pub loss: f64,
    pub mean_loss: f64,
    /// Present for one-hot targets.
    pub accuracy: Option<f64>,
}

pub fn evaluate(net: &Network, data: &Dataset) -> Result<SplitMetrics, CliError> {
    let outputs = net.predict(data.inputs())?;
    let loss = squared_error(&outputs, data.targets(), LossReduction::Sum);
    Ok(SplitMetrics {
        samples: data.len(),
        loss,
        mean_loss: loss / data.len() as f64,
        accuracy: accuracy_of_outputs(&outputs, data.targets()).ok(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub name: Option<String>,
    pub init: String,
    pub layer_dims: Vec<usize>,
    pub parameters: usize,
    pub steps: usize,
    pub diverged: bool,
    pub diverged_at: Option<usize>,
    /// Loss of the last logged record (batch loss under the configured reduction).
    pub last_logged_loss: Option<f64>,
    pub train: Option<SplitMetrics>,
    pub test: Option<SplitMetrics>,
    pub census_at_init: Census,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsometryPair {
    pub initial: IsometryReport,
    #[serde(rename = "final")]
    pub final_: IsometryReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetrySummary {
    /// Per layer; `None` for an all-zero matrix.
    pub initial: Vec<Option<SymmetryCorrelations>>,
    #[serde(rename = "final")]
    pub final_: Vec<Option<SymmetryCorrelations>>,
    pub level1: Option<Level1Report>,
    pub level1_error: Option<String>,
}

fn correlations(weights: &[Matrix]) -> Vec<Option<SymmetryCorrelations>> {
    weights.iter().map(|w| symmetry_correlations(w).ok()).collect()
}

fn write_trace(cfg: &ExperimentConfig, out: &OutDir, trace: &TrainingTrace) -> Result<(), CliError> {
    let (header, rows) = trace_table(trace, cfg.network.depth(), cfg.analysis.gradient_norms);
    out.write_csv("trace.csv", &header, &rows)?;
    Ok(())
}

fn reference_name(r: LayerReference) -> &'static str {
    match r {
        LayerReference::Raw => "raw",
        LayerReference::Identity => "identity",
        LayerReference::Initial => "initial",
    }
}

/// Long-format rank table: one row per (step, layer).
fn write_rank_csv(out: &OutDir, name: &str, report: &RankReport) -> Result<(), CliError> {
    let header = ["step", "layer", "reference", "bound", "num_rank", "stable_rank", "bound_satisfied"].map(String::from);
    let mut rows = Vec::new();
    for (i, step) in report.steps.iter().enumerate() {
        for layer in &report.layers {
            rows.push(vec![
                step.to_string(),
                layer.layer.to_string(),
                reference_name(layer.reference).to_string(),
                layer.bound.to_string(),
                layer.numeric_ranks[i].to_string(),
                layer.stable_ranks.get(i).map(|&s| fmt_f64(s)).unwrap_or_default(),
                u8::from(layer.bound_satisfied[i]).to_string(),
            ]);
        }
    }
    out.write_csv(name, &header, &rows)?;
    Ok(())
}

pub struct TrainOutcome {
    pub summary: TrainSummary,
    pub network: Network,
    pub trace: TrainingTrace,
    pub test: Option<Dataset>,
}

/// Trains per the config and writes `trace.csv`, `weights.bin`,
/// `summary.json` and the enabled analysis reports.
pub fn train_cmd(cfg: &ExperimentConfig, out: &OutDir) -> Result<TrainOutcome, CliError> {
    let splits = load(cfg)?;
    let mut net = Network::build(cfg.network.clone())?;
    let initial = net.weights().to_vec();
    let census_at_init = census(&net);
    let mut tc = cfg.training.train_config(splits.train.len(), &cfg.analysis)?;
    let level1 = cfg.analysis.symmetry && matches!(cfg.network.init, InitScheme::Constant { .. });
    tc.snapshot_weights = level1;
    let iso_inputs = splits.train.inputs().row_range(0, cfg.analysis.isometry_samples.clamp(1, splits.train.len()));
    let iso_initial = if cfg.analysis.isometry { Some(isometry_report(&net, &iso_inputs)?) } else { None };

    let mut summary = TrainSummary {
        name: cfg.name.clone(),
        init: cfg.network.init.name().into(),
        layer_dims: cfg.network.layer_dims.clone(),
        parameters: net.parameter_count(),
        steps: tc.steps,
        diverged: false,
        diverged_at: None,
        last_logged_loss: None,
        train: None,
        test: None,
        census_at_init,
    };
    let trace = match train(&mut net, &splits.train, &tc) {
        Ok(t) => t,
        Err(NetError::Diverged { step, trace }) => {
            write_trace(cfg, out, &trace)?;
            summary.diverged = true;
            summary.diverged_at = Some(step);
            summary.last_logged_loss = trace.last().map(|r| r.loss);
            out.write_json("summary.json", &summary)?;
            return Err(CliError::Diverged { step });
        }
        Err(e) => return Err(e.into()),
    };
    write_trace(cfg, out, &trace)?;
    write_weights(out, "weights.bin", net.weights())?;
    summary.last_logged_loss = trace.last().map(|r| r.loss);
    summary.train = Some(evaluate(&net, &splits.train)?);
    summary.test = splits.test.as_ref().map(|t| evaluate(&net, t)).transpose()?;

    if cfg.analysis.rank_trajectory {
        let report = rank_trajectory(&trace, cfg.network.n_x(), cfg.network.n_y())?;
        write_rank_csv(out, "rank.csv", &report)?;
        out.write_json("rank_report.json", &report)?;
    }
    if let Some(initial) = iso_initial {
        out.write_json("isometry.json", &IsometryPair { initial, final_: isometry_report(&net, &iso_inputs)? })?;
    }
    if cfg.analysis.symmetry {
        let (level1, level1_error) = if level1 {
            match level1_symmetry_check(&cfg.network, &trace, 1e-9) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            }
        } else {
            (None, None)
        };
        let s = SymmetrySummary { initial: correlations(&initial), final_: correlations(net.weights()), level1, level1_error };
        out.write_json("symmetry.json", &s)?;
    }
    out.write_json("summary.json", &summary)?;
    Ok(TrainOutcome { summary, network: net, trace, test: splits.test })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomArm {
    pub ranks: Vec<usize>,
    pub full_ranks: Vec<usize>,
    pub full_rank_at_init: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedArm {
    pub init: String,
    pub bound: usize,
    /// Largest rank over middle layers and logged steps.
    pub max_middle_rank: usize,
    pub bound_holds: bool,
    /// First logged step at which a middle layer exceeds the bound.
    pub first_break_step: Option<usize>,
    /// `(step, layer, rank)`, at most the first 16.
    pub violations: Vec<(usize, usize, usize)>,
    pub final_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub n_x: usize,
    pub random: RandomArm,
    pub partial_identity: TrainedArm,
    pub hadamard: TrainedArm,
    /// Whether the Hadamard arm exceeded the bound.
    pub broken: bool,
    /// All three arms behave as the theorem predicts.
    pub consistent: bool,
}

fn trained_arm(cfg: &ExperimentConfig, data: &Dataset, init: InitScheme, out: &OutDir, file: &str) -> Result<TrainedArm, CliError> {
    let spec = cfg.network.clone().with_init(init);
    let mut net = Network::build(spec)?;
    let mut tc: TrainConfig = cfg.training.train_config(data.len(), &cfg.analysis)?;
    tc.metrics.numeric_rank = true;
    tc.metrics.reference = RankReference::Auto;
    let trace = train(&mut net, data, &tc)?;
    let report = rank_trajectory(&trace, cfg.network.n_x(), cfg.network.n_y())?;
    write_rank_csv(out, file, &report)?;
    let mut violations = report.middle_violations();
    violations.sort();
    let max_middle_rank = report.middle_layers().iter().map(|l| l.max_rank()).max().unwrap_or(0);
    let bound = report.middle_layers().iter().map(|l| l.bound).min().unwrap_or(cfg.network.n_x());
    Ok(TrainedArm {
        init: init.name().into(),
        bound,
        max_middle_rank,
        bound_holds: violations.is_empty(),
        first_break_step: violations.first().map(|v| v.0),
        violations: violations.into_iter().take(16).collect(),
        final_loss: trace.last().map_or(f64::NAN, |r| r.loss),
    })
}

/// Runs the random, partial-identity and Hadamard arms on the configured
/// dataset and writes `verdict.json` plus one rank table per trained arm.
pub fn verify_theorem(cfg: &ExperimentConfig, out: &OutDir) -> Result<Verdict, CliError> {
    if cfg.network.has_residual() {
        return Err(CliError::Config("verify-theorem needs a plain (non-residual) network".into()));
    }
    if cfg.network.depth() < 3 {
        return Err(CliError::Config("verify-theorem needs at least one middle layer (depth >= 3)".into()));
    }
    let data = load(cfg)?.train;
    let random_spec = cfg.network.clone().with_init(InitScheme::RandomFanIn { gain: cfg.theorem.random_gain, seed: cfg.theorem.random_seed });
    let random_net = Network::build(random_spec)?;
    let ranks = random_net
        .weights()
        .iter()
        .map(|w| numeric_rank(w, cfg.analysis.rank_tol))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Other(e.to_string()))?;
    let full_ranks: Vec<usize> = random_net.weights().iter().map(|w| w.rows().min(w.cols())).collect();
    let random = RandomArm { full_rank_at_init: ranks == full_ranks, ranks, full_ranks };
    let partial_identity = trained_arm(cfg, &data, InitScheme::PartialIdentity, out, "rank_partial_identity.csv")?;
    let hadamard = trained_arm(cfg, &data, InitScheme::zero(), out, "rank_hadamard.csv")?;
    let broken = !hadamard.bound_holds;
    let verdict = Verdict {
        n_x: cfg.network.n_x(),
        consistent: random.full_rank_at_init && partial_identity.bound_holds && broken,
        random,
        partial_identity,
        hadamard,
        broken,
    };
    out.write_json("verdict.json", &verdict)?;
    Ok(verdict)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    pub kept_fraction: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneSummary {
    pub weights: String,
    pub split: String,
    pub unpruned_accuracy: f64,
    pub points: Vec<CurvePoint>,
}

/// Where `prune` reads trained weights: the configured path, else
/// `weights.bin` in the output directory.
pub fn weights_path(cfg: &ExperimentConfig, out: &OutDir) -> PathBuf {
    cfg.prune.weights.clone().unwrap_or_else(|| out.path("weights.bin"))
}

/// Accuracy after per-layer magnitude pruning at each configured fraction,
/// on the test split when there is one. Writes `curve.csv` and
/// `prune_summary.json`.
pub fn prune_cmd(cfg: &ExperimentConfig, out: &OutDir) -> Result<PruneSummary, CliError> {
    let path = weights_path(cfg, out);
    if !path.exists() {
        return Err(CliError::io(&path, std::io::Error::new(std::io::ErrorKind::NotFound, "missing trained weights (run `train` first)")));
    }
    let net = Network::from_weights(cfg.network.clone(), read_weights(&path)?)?;
    let splits = load(cfg)?;
    let (split, data) = match &splits.test {
        Some(t) => ("test", t),
        None => ("train", &splits.train),
    };
    // Relative to the output directory unless configured, so the summary does
    // not depend on where the run was placed.
    let shown = match &cfg.prune.weights {
        Some(p) => p.display().to_string(),
        None => "weights.bin".to_string(),
    };
    prune_curve(cfg, out, &net, data, split, &shown)
}

pub fn prune_curve(cfg: &ExperimentConfig, out: &OutDir, net: &Network, data: &Dataset, split: &str, weights: &str) -> Result<PruneSummary, CliError> {
    let unpruned = zerolab::prune::classify_accuracy(net, data)?;
    let mut points = Vec::new();
    for &fraction in &cfg.prune.fractions {
        let (pruned, mask) = magnitude_prune(net, fraction)?;
        let accuracy = zerolab::prune::classify_accuracy(&pruned, data)?;
        points.push(CurvePoint { fraction, kept_fraction: mask.kept_fraction(), accuracy });
    }
    let header = ["fraction", "kept_fraction", "accuracy"].map(String::from);
    let rows: Vec<Vec<String>> = points.iter().map(|p| vec![fmt_f64(p.fraction), fmt_f64(p.kept_fraction), fmt_f64(p.accuracy)]).collect();
    out.write_csv("curve.csv", &header, &rows)?;
    let summary = PruneSummary { weights: weights.into(), split: split.into(), unpruned_accuracy: unpruned, points };
    out.write_json("prune_summary.json", &summary)?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeArm {
    pub warmup_steps: usize,
    pub recorded_steps: usize,
    pub diverged_at: Option<usize>,
    pub max_grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarmupSummary {
    pub no_warmup: ProbeArm,
    pub warmup: ProbeArm,
    /// The warmup arm's largest layer-1 gradient norm is at most the other's.
    pub warmup_not_larger: bool,
}

struct ProbeRun {
    rows: Vec<(f64, f64, f64)>,
    arm: ProbeArm,
}

fn probe_arm(cfg: &ExperimentConfig, data: &Dataset, warmup_steps: usize) -> Result<ProbeRun, CliError> {
    let mut net = Network::build(cfg.network.clone())?;
    let mut tc = cfg.training.train_config(data.len(), &Default::default())?;
    tc.steps = cfg.warmup_probe.steps;
    tc.warmup_steps = warmup_steps;
    tc.log_every = 1;
    let (trace, diverged_at) = match train(&mut net, data, &tc) {
        Ok(t) => (t, None),
        Err(NetError::Diverged { step, trace }) => (*trace, Some(step)),
        Err(e) => return Err(e.into()),
    };
    // The record at `steps` is an evaluation only; keep the first K updates.
    let rows: Vec<(f64, f64, f64)> = trace
        .records
        .iter()
        .filter(|r| r.step < cfg.warmup_probe.steps)
        .map(|r| (r.lr, r.loss, r.grad_norms[0]))
        .collect();
    let max_grad_norm = if diverged_at.is_some() { f64::INFINITY } else { rows.iter().map(|r| r.2).fold(0.0, f64::max) };
    Ok(ProbeRun { arm: ProbeArm { warmup_steps, recorded_steps: rows.len(), diverged_at, max_grad_norm }, rows })
}

/// Layer-1 gradient norms over the first K steps with and without warmup.
/// Writes `gradnorms.csv` (empty cells after a divergence) and
/// `warmup_summary.json`.
pub fn warmup_probe(cfg: &ExperimentConfig, out: &OutDir) -> Result<WarmupSummary, CliError> {
    if cfg.warmup_probe.steps == 0 {
        return Err(CliError::Config("warmup_probe.steps must be positive".into()));
    }
    let data = load(cfg)?.train;
    let plain = probe_arm(cfg, &data, 0)?;
    let warm = probe_arm(cfg, &data, cfg.warmup_probe.warmup_steps)?;
    let header = ["step", "lr_no_warmup", "loss_no_warmup", "grad_norm_1_no_warmup", "lr_warmup", "loss_warmup", "grad_norm_1_warmup"]
        .map(String::from);
    let cells = |r: Option<&(f64, f64, f64)>| match r {
        Some(&(lr, loss, g)) => vec![fmt_f64(lr), fmt_f64(loss), fmt_f64(g)],
        None => vec![String::new(); 3],
    };
    let rows: Vec<Vec<String>> = (0..cfg.warmup_probe.steps)
        .map(|t| {
            let mut row = vec![t.to_string()];
            row.extend(cells(plain.rows.get(t)));
            row.extend(cells(warm.rows.get(t)));
            row
        })
        .collect();
    out.write_csv("gradnorms.csv", &header, &rows)?;
    let summary = WarmupSummary {
        warmup_not_larger: warm.arm.max_grad_norm <= plain.arm.max_grad_norm,
        no_warmup: plain.arm,
        warmup: warm.arm,
    };
    out.write_json("warmup_summary.json", &summary)?;
    Ok(summary)
}
