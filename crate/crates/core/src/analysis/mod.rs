//! Rank trajectories, initial-gradient structure, span certificates and
//! Jacobian isometry statistics.

mod symmetry;

pub use symmetry::{level1_symmetry_check, symmetry_correlations, Level1Report, SymmetryCorrelations};

use crate::data::Dataset;
use crate::init::partial_identity;
use crate::net::{LayerReference, NetError, Network, Nonlinearity, TrainingTrace};
use crate::tensor::{hadamard_matrix, matmul, numeric_rank, singular_values, Matrix, TensorError, DEFAULT_RANK_TOL};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("trace has no records")]
    EmptyTrace,
    #[error("trace was recorded without numeric ranks")]
    MissingRanks,
    #[error("trace was recorded without weight snapshots")]
    MissingSnapshots,
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("layer {layer}: {count} off-block gradient entries are non-zero, first at {first:?}")]
    BlockViolation { layer: usize, count: usize, first: Vec<(usize, usize)> },
    #[error("step {step}, layer {layer}: symmetry deviation {deviation:e} exceeds tolerance")]
    SymmetryViolation { step: usize, layer: usize, deviation: f64 },
    #[error("rank {rank} exceeds the span bound {bound}")]
    BoundViolated { rank: usize, bound: usize },
    #[error("{0}")]
    InvalidInput(String),
    #[error("correlations of an all-zero matrix are undefined")]
    ZeroMatrix,
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Rank series for one layer (1-based `layer`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRankSeries {
    pub layer: usize,
    pub reference: LayerReference,
    pub bound: usize,
    pub numeric_ranks: Vec<usize>,
    pub stable_ranks: Vec<f64>,
    pub bound_satisfied: Vec<bool>,
}

impl LayerRankSeries {
    pub fn max_rank(&self) -> usize {
        self.numeric_ranks.iter().copied().max().unwrap_or(0)
    }

    pub fn always_bounded(&self) -> bool {
        self.bound_satisfied.iter().all(|&b| b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub steps: Vec<usize>,
    pub layers: Vec<LayerRankSeries>,
}

impl RankReport {
    /// Layers strictly between the first and the last.
    pub fn middle_layers(&self) -> &[LayerRankSeries] {
        let n = self.layers.len();
        if n < 3 {
            &[]
        } else {
            &self.layers[1..n - 1]
        }
    }

    /// `(step, layer, rank)` for every bound violation among middle layers.
    pub fn middle_violations(&self) -> Vec<(usize, usize, usize)> {
        self.middle_layers()
            .iter()
            .flat_map(|s| {
                s.bound_satisfied
                    .iter()
                    .zip(&s.numeric_ranks)
                    .zip(&self.steps)
                    .filter(|((ok, _), _)| !**ok)
                    .map(move |((_, &r), &t)| (t, s.layer, r))
            })
            .collect()
    }
}

/// Evaluates the rank bound for every layer at every logged step. Layers
/// measured relative to the identity (or their initial value) are bounded by
/// `N_x`; raw weights of zero-initialized residual branches by
/// `min(N_x, N_y)`.
pub fn rank_trajectory(trace: &TrainingTrace, n_x: usize, n_y: usize) -> Result<RankReport, AnalysisError> {
    let first = trace.records.first().ok_or(AnalysisError::EmptyTrace)?;
    if first.numeric_ranks.is_empty() {
        return Err(AnalysisError::MissingRanks);
    }
    let steps = trace.records.iter().map(|r| r.step).collect();
    let layers = trace
        .references
        .iter()
        .enumerate()
        .map(|(l, &reference)| {
            let bound = match reference {
                LayerReference::Raw => n_x.min(n_y),
                LayerReference::Identity | LayerReference::Initial => n_x,
            };
            let numeric_ranks: Vec<usize> = trace.records.iter().map(|r| r.numeric_ranks[l]).collect();
            let stable_ranks = trace.records.iter().filter_map(|r| r.stable_ranks.get(l).copied()).collect();
            let bound_satisfied = numeric_ranks.iter().map(|&r| r <= bound).collect();
            LayerRankSeries { layer: l + 1, reference, bound, numeric_ranks, stable_ranks, bound_satisfied }
        })
        .collect();
    Ok(RankReport { steps, layers })
}

/// Initial gradients of a partial-identity network, split into the block
/// the structure allows and the rest.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBlockReport {
    /// `sum_mu relu'(z) (z - y) x^T` over the data, `N_y x N_x`.
    pub lambda: Matrix,
    /// Top-left `N_y x N_x` block of each layer's gradient.
    pub blocks: Vec<Matrix>,
    /// `max |block_l - lambda|` per layer.
    pub deviations: Vec<f64>,
}

/// Checks that at a partial-identity initialization every gradient vanishes
/// outside its top-left `N_y x N_x` block (the top rows of `W_1`, the left
/// columns of `W_L`), exactly.
///
/// The allowed blocks are returned alongside `Lambda` rebuilt directly from
/// the data. In the linear case all blocks equal `Lambda`; with Relu they
/// agree whenever the inputs are non-negative.
pub fn initial_gradient_blocks(net: &Network, data: &Dataset) -> Result<GradientBlockReport, AnalysisError> {
    let spec = net.spec();
    if spec.has_residual() {
        return Err(AnalysisError::NotApplicable("residual network".into()));
    }
    let (n_x, n_y) = (spec.n_x(), spec.n_y());
    if let Some(&d) = spec.layer_dims[1..spec.depth()].iter().find(|&&d| d < n_x.max(n_y)) {
        return Err(AnalysisError::NotApplicable(format!("hidden width {d} is below max(N_x, N_y)")));
    }
    for (l, w) in net.weights().iter().enumerate() {
        if *w != partial_identity(w.rows(), w.cols()).expect("non-empty") {
            return Err(AnalysisError::NotApplicable(format!("layer {} is not a partial identity", l + 1)));
        }
    }
    let grads = net.backward(data)?;
    let mut blocks = Vec::with_capacity(grads.len());
    for (l, g) in grads.iter().enumerate() {
        let mut off = Vec::new();
        for r in 0..g.rows() {
            for c in 0..g.cols() {
                if (r >= n_y || c >= n_x) && g.get(r, c) != 0.0 {
                    off.push((r, c));
                }
            }
        }
        if !off.is_empty() {
            let count = off.len();
            off.truncate(8);
            return Err(AnalysisError::BlockViolation { layer: l + 1, count, first: off });
        }
        blocks.push(Matrix::from_fn(n_y, n_x, |r, c| if r < g.rows() && c < g.cols() { g.get(r, c) } else { 0.0 }));
    }
    let lambda = lambda_from_data(net, data)?;
    let deviations = blocks.iter().map(|b| b.max_abs_diff(&lambda).expect("same shape")).collect();
    Ok(GradientBlockReport { lambda, blocks, deviations })
}

fn lambda_from_data(net: &Network, data: &Dataset) -> Result<Matrix, AnalysisError> {
    let spec = net.spec();
    let out = net.predict(data.inputs())?;
    let at_zero = spec.relu_zero_derivative;
    let relu = spec.nonlinearity == Nonlinearity::Relu && spec.output_activation;
    let mut lambda = Matrix::zeros(spec.n_y(), spec.n_x());
    for mu in 0..data.len() {
        let x = data.inputs().row(mu);
        for i in 0..spec.n_y() {
            let z = out.get(mu, i);
            let gate = if !relu || z > 0.0 { 1.0 } else if z < 0.0 { 0.0 } else { at_zero };
            let e = gate * (z - data.targets().get(mu, i));
            for (j, &xj) in x.iter().enumerate() {
                let v = lambda.get(i, j) + e * xj;
                lambda.set(i, j, v);
            }
        }
    }
    Ok(lambda)
}

/// Rank of `sum_mu a_mu b_mu^T` and the bound `min(dim span{a}, dim span{b})`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OuterSumRank {
    pub rank: usize,
    pub span_a: usize,
    pub span_b: usize,
    pub bound: usize,
}

pub fn outer_sum_rank_oracle(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<OuterSumRank, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::InvalidInput(format!("{} a-vectors but {} b-vectors", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(AnalysisError::InvalidInput("no vectors".into()));
    }
    let stack = |vs: &[Vec<f64>]| Matrix::from_rows(vs).map_err(|e| AnalysisError::InvalidInput(e.to_string()));
    let sa = stack(a)?;
    let sb = stack(b)?;
    let m = matmul(&sa.transpose(), &sb)?;
    let rank = numeric_rank(&m, DEFAULT_RANK_TOL)?;
    let span_a = numeric_rank(&sa, DEFAULT_RANK_TOL)?;
    let span_b = numeric_rank(&sb, DEFAULT_RANK_TOL)?;
    let bound = span_a.min(span_b);
    if rank > bound {
        return Err(AnalysisError::BoundViolated { rank, bound });
    }
    Ok(OuterSumRank { rank, span_a, span_b, bound })
}

/// The four Relu images of `+-H I* e_2` and `+-H I* e_3` for `N_h = 4`,
/// `N_x = 3`, their rank, and the dimension of the span of `relu(H I* x)`
/// over a wider probe set.
///
/// The four vectors satisfy `v_1 + v_2 = v_3 + v_4 = 1`, so their rank is 3.
/// Adding `relu(+-H I* (e_2 + e_3))` lifts the span to the full 4 dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanWitness {
    /// In order: `relu(H I* e_2)`, `relu(-H I* e_2)`, `relu(H I* e_3)`,
    /// `relu(-H I* e_3)`.
    pub vectors: [[f64; 4]; 4],
    pub rank: usize,
    /// `relu(H I* (e_2 + e_3))` and `relu(-H I* (e_2 + e_3))`.
    pub extra: [[f64; 4]; 2],
    /// Rank of all six vectors.
    pub span_rank: usize,
}

pub fn hadamard_span_witness() -> SpanWitness {
    let h = hadamard_matrix(2).expect("small order");
    let hi = matmul(&h, &partial_identity(4, 3).expect("non-empty")).expect("shapes");
    let image = |x: [f64; 3], sign: f64| -> [f64; 4] {
        let y = hi.matvec(&x).expect("shapes");
        [0, 1, 2, 3].map(|i| (sign * y[i]).max(0.0))
    };
    let (e2, e3, e23) = ([0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 1.0]);
    let vectors = [image(e2, 1.0), image(e2, -1.0), image(e3, 1.0), image(e3, -1.0)];
    let extra = [image(e23, 1.0), image(e23, -1.0)];
    let rank_of = |vs: &[[f64; 4]]| numeric_rank(&Matrix::from_rows(vs).expect("finite"), DEFAULT_RANK_TOL).expect("valid tol");
    let all: Vec<[f64; 4]> = vectors.iter().chain(&extra).copied().collect();
    SpanWitness { vectors, rank: rank_of(&vectors), extra, span_rank: rank_of(&all) }
}

/// Singular-value statistics of `J_io` over a set of inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsometryReport {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Singular values per input, non-increasing.
    pub per_input: Vec<Vec<f64>>,
}

/// `inputs` holds one sample per row.
pub fn isometry_report(net: &Network, inputs: &Matrix) -> Result<IsometryReport, AnalysisError> {
    let mut per_input = Vec::with_capacity(inputs.rows());
    for r in 0..inputs.rows() {
        let j = net.input_output_jacobian(inputs.row(r))?;
        per_input.push(singular_values(&j)?);
    }
    let all = per_input.iter().flatten();
    let (mut min, mut max, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for &s in all {
        min = min.min(s);
        max = max.max(s);
        sum += s;
        n += 1;
    }
    Ok(IsometryReport { min, max, mean: sum / n as f64, per_input })
}
