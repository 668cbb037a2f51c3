//! Bias-free fully connected networks with optional residual layers.
//!
//! Layer `l` computes `x_l = W_l z_{l-1}` and `z_l = phi(x_l)`, or
//! `z_l = phi(x_l) + skip(z_{l-1})` for residual layers, where `skip` is the
//! adaptive identity (clip trailing coordinates or zero-pad). Batches are
//! stored one sample per row.

mod train;

pub use train::{
    train, warmup_lr, BatchMode, LayerReference, LossReduction, RankReference, StableRankMethod,
    TraceMetrics, TraceRecord, TrainConfig, TrainingTrace,
};

use crate::data::Dataset;
use crate::init::{InitError, InitScheme};
use crate::tensor::{matmul, matmul_transb, Matrix, TensorError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("{what}: expected dimension {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training diverged at step {step} (non-finite loss or weights)")]
    Diverged { step: usize, trace: Box<TrainingTrace> },
    #[error(transparent)]
    Init(#[from] InitError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    #[default]
    Identity,
    Relu,
}

fn default_relu_zero_derivative() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

/// Architecture plus initialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// `[N_x, d_1, ..., N_y]`; the network has `layer_dims.len() - 1` layers.
    pub layer_dims: Vec<usize>,
    /// Per-layer residual flags. Empty means no residual layers.
    #[serde(default)]
    pub residual: Vec<bool>,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
    pub init: InitScheme,
    /// Relu derivative used at exactly zero pre-activation.
    #[serde(default = "default_relu_zero_derivative")]
    pub relu_zero_derivative: f64,
    /// Apply the nonlinearity to the last layer as well.
    #[serde(default = "default_true")]
    pub output_activation: bool,
}

impl NetworkSpec {
    pub fn new(layer_dims: Vec<usize>, nonlinearity: Nonlinearity, init: InitScheme) -> Self {
        Self {
            layer_dims,
            residual: Vec::new(),
            nonlinearity,
            init,
            relu_zero_derivative: 1.0,
            output_activation: true,
        }
    }

    pub fn with_residual(mut self, residual: Vec<bool>) -> Self {
        self.residual = residual;
        self
    }

    pub fn all_residual(mut self) -> Self {
        self.residual = vec![true; self.depth()];
        self
    }

    pub fn with_init(mut self, init: InitScheme) -> Self {
        self.init = init;
        self
    }

    /// Number of weight matrices `L`.
    pub fn depth(&self) -> usize {
        self.layer_dims.len().saturating_sub(1)
    }

    pub fn n_x(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn n_y(&self) -> usize {
        *self.layer_dims.last().expect("validated spec")
    }

    /// Whether layer `l` (0-based) has a skip connection.
    pub fn is_residual(&self, l: usize) -> bool {
        self.residual.get(l).copied().unwrap_or(false)
    }

    pub fn has_residual(&self) -> bool {
        self.residual.iter().any(|&r| r)
    }

    /// Shape of `W_l` (0-based `l`).
    pub fn weight_shape(&self, l: usize) -> (usize, usize) {
        (self.layer_dims[l + 1], self.layer_dims[l])
    }

    /// Whether the nonlinearity is applied after layer `l` (0-based).
    pub fn is_activated(&self, l: usize) -> bool {
        self.nonlinearity == Nonlinearity::Relu && (l + 1 < self.depth() || self.output_activation)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.layer_dims.len() < 2 {
            return Err(NetError::InvalidSpec("need at least one layer".into()));
        }
        if let Some(i) = self.layer_dims.iter().position(|&d| d == 0) {
            return Err(NetError::InvalidSpec(format!("layer dimension {i} is zero")));
        }
        if !self.residual.is_empty() && self.residual.len() != self.depth() {
            return Err(NetError::InvalidSpec(format!(
                "{} residual flags for {} layers",
                self.residual.len(),
                self.depth()
            )));
        }
        if !self.relu_zero_derivative.is_finite() {
            return Err(NetError::InvalidSpec("relu_zero_derivative must be finite".into()));
        }
        Ok(())
    }
}

/// Realised parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    spec: NetworkSpec,
    weights: Vec<Matrix>,
}

/// Pre-activations `x_1..x_L` and activations `z_0..z_L` for a batch.
#[derive(Clone, Debug)]
pub struct Activations {
    pub pre: Vec<Matrix>,
    pub post: Vec<Matrix>,
}

impl Activations {
    pub fn output(&self) -> &Matrix {
        self.post.last().expect("at least the input")
    }
}

/// Builds a network from its spec; see [`Network::build`].
pub fn build(spec: &NetworkSpec) -> Result<Network, NetError> {
    Network::build(spec.clone())
}

/// `dz/dx` for the configured nonlinearity at pre-activation `x`.
#[inline]
fn relu_grad(x: f64, at_zero: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        at_zero
    }
}

/// Adds the adaptive identity of `src` into `dst` (batch-major, one sample
/// per row): the first `min(cols)` coordinates are copied across.
fn add_skip(dst: &mut Matrix, src: &Matrix) {
    let k = dst.cols().min(src.cols());
    for r in 0..dst.rows() {
        let s = &src.row(r)[..k];
        for (d, v) in dst.row_mut(r)[..k].iter_mut().zip(s) {
            *d += v;
        }
    }
}

impl Network {
    /// Initializes every layer per the spec's scheme. Residual layers under
    /// ZerO or partial identity get an all-zero branch weight so the skip
    /// alone carries the signal. Random schemes draw layer `l` from its own
    /// stream.
    pub fn build(spec: NetworkSpec) -> Result<Self, NetError> {
        spec.validate()?;
        let mut weights = Vec::with_capacity(spec.depth());
        for l in 0..spec.depth() {
            let (rows, cols) = spec.weight_shape(l);
            let zero_branch = spec.is_residual(l)
                && matches!(spec.init, InitScheme::ZerO { .. } | InitScheme::PartialIdentity);
            let w = if zero_branch {
                Matrix::zeros(rows, cols)
            } else {
                spec.init.matrix(rows, cols, crate::rng::STREAM_LAYER_BASE + l as u64 + 1)?
            };
            weights.push(w);
        }
        Ok(Self { spec, weights })
    }

    /// Wraps explicit weights, checking shapes and finiteness.
    pub fn from_weights(spec: NetworkSpec, weights: Vec<Matrix>) -> Result<Self, NetError> {
        spec.validate()?;
        if weights.len() != spec.depth() {
            return Err(NetError::DimensionMismatch { what: "layer count", expected: spec.depth(), got: weights.len() });
        }
        for (l, w) in weights.iter().enumerate() {
            let (r, c) = spec.weight_shape(l);
            if w.rows() != r {
                return Err(NetError::DimensionMismatch { what: "weight rows", expected: r, got: w.rows() });
            }
            if w.cols() != c {
                return Err(NetError::DimensionMismatch { what: "weight cols", expected: c, got: w.cols() });
            }
            if !w.is_finite() {
                return Err(NetError::InvalidSpec(format!("layer {} has non-finite weights", l + 1)));
            }
        }
        Ok(Self { spec, weights })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<Matrix> {
        self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(Matrix::len).sum()
    }

    fn check_inputs(&self, inputs: &Matrix) -> Result<(), NetError> {
        if inputs.cols() != self.spec.n_x() {
            return Err(NetError::DimensionMismatch { what: "input", expected: self.spec.n_x(), got: inputs.cols() });
        }
        Ok(())
    }

    /// Forward pass for a batch (`B x N_x`), keeping all intermediates.
    pub fn forward_batch(&self, inputs: &Matrix) -> Result<Activations, NetError> {
        self.check_inputs(inputs)?;
        let mut pre = Vec::with_capacity(self.depth());
        let mut post = Vec::with_capacity(self.depth() + 1);
        post.push(inputs.clone());
        for (l, w) in self.weights.iter().enumerate() {
            let z_prev = post.last().expect("non-empty");
            let x = matmul_transb(z_prev, w)?;
            let mut z = if self.spec.is_activated(l) {
                let mut z = x.clone();
                z.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
                z
            } else {
                x.clone()
            };
            if self.spec.is_residual(l) {
                add_skip(&mut z, z_prev);
            }
            pre.push(x);
            post.push(z);
        }
        Ok(Activations { pre, post })
    }

    /// Forward pass for a single input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Activations, NetError> {
        if x.len() != self.spec.n_x() {
            return Err(NetError::DimensionMismatch { what: "input", expected: self.spec.n_x(), got: x.len() });
        }
        self.forward_batch(&Matrix::new(1, x.len(), x.to_vec())?)
    }

    /// Network outputs for every row of `inputs`, evaluated in chunks.
    pub fn predict(&self, inputs: &Matrix) -> Result<Matrix, NetError> {
        self.check_inputs(inputs)?;
        const CHUNK: usize = 256;
        let mut data = Vec::with_capacity(inputs.rows() * self.spec.n_y());
        for start in (0..inputs.rows()).step_by(CHUNK) {
            let end = (start + CHUNK).min(inputs.rows());
            let acts = self.forward_batch(&inputs.row_range(start, end))?;
            data.extend_from_slice(acts.output().as_slice());
        }
        Ok(Matrix::new(inputs.rows(), self.spec.n_y(), data)?)
    }

    fn check_dataset(&self, data: &Dataset) -> Result<(), NetError> {
        self.check_inputs(data.inputs())?;
        if data.targets().cols() != self.spec.n_y() {
            return Err(NetError::DimensionMismatch { what: "target", expected: self.spec.n_y(), got: data.targets().cols() });
        }
        Ok(())
    }

    /// `1/2 sum_mu ||y_mu - F(x_mu)||^2`.
    pub fn loss(&self, data: &Dataset) -> Result<f64, NetError> {
        self.check_dataset(data)?;
        let out = self.predict(data.inputs())?;
        Ok(squared_error(&out, data.targets(), LossReduction::Sum))
    }

    /// Exact gradients of [`Network::loss`] with respect to every `W_l`.
    pub fn backward(&self, data: &Dataset) -> Result<Vec<Matrix>, NetError> {
        self.check_dataset(data)?;
        Ok(self.loss_and_gradients(data.inputs(), data.targets(), LossReduction::Sum)?.1)
    }

    /// Loss and gradients for one batch. Per-sample contributions are
    /// accumulated in row order.
    pub fn loss_and_gradients(
        &self,
        inputs: &Matrix,
        targets: &Matrix,
        reduction: LossReduction,
    ) -> Result<(f64, Vec<Matrix>), NetError> {
        let acts = self.forward_batch(inputs)?;
        let out = acts.output();
        if targets.shape() != out.shape() {
            return Err(NetError::DimensionMismatch { what: "target", expected: out.cols(), got: targets.cols() });
        }
        let loss = squared_error(out, targets, reduction);
        let norm = match reduction {
            LossReduction::Sum => 1.0,
            LossReduction::Mean => 1.0 / inputs.rows() as f64,
        };
        // dL/dz_L
        let mut g = out.sub(targets)?;
        if norm != 1.0 {
            g = g.scale(norm);
        }
        let mut grads = vec![Matrix::zeros(1, 1); self.depth()];
        for l in (0..self.depth()).rev() {
            let mut delta = g.clone();
            if self.spec.is_activated(l) {
                let at_zero = self.spec.relu_zero_derivative;
                for (d, &x) in delta.as_mut_slice().iter_mut().zip(acts.pre[l].as_slice()) {
                    *d *= relu_grad(x, at_zero);
                }
            }
            grads[l] = matmul(&delta.transpose(), &acts.post[l])?;
            if l > 0 {
                let mut g_prev = matmul(&delta, &self.weights[l])?;
                if self.spec.is_residual(l) {
                    add_skip(&mut g_prev, &g);
                }
                g = g_prev;
            }
        }
        Ok((loss, grads))
    }

    /// `dz_L / dz_0` at `x`, an `N_y x N_x` matrix.
    pub fn input_output_jacobian(&self, x: &[f64]) -> Result<Matrix, NetError> {
        let acts = self.forward(x)?;
        let mut jac = Matrix::identity(self.spec.n_x());
        for (l, w) in self.weights.iter().enumerate() {
            let mut layer = w.clone();
            if self.spec.is_activated(l) {
                let at_zero = self.spec.relu_zero_derivative;
                for r in 0..layer.rows() {
                    let d = relu_grad(acts.pre[l].get(0, r), at_zero);
                    layer.row_mut(r).iter_mut().for_each(|v| *v *= d);
                }
            }
            let mut next = matmul(&layer, &jac)?;
            if self.spec.is_residual(l) {
                let k = next.rows().min(jac.rows());
                for r in 0..k {
                    let src = jac.row(r).to_vec();
                    next.row_mut(r).iter_mut().zip(src).for_each(|(d, s)| *d += s);
                }
            }
            jac = next;
        }
        Ok(jac)
    }
}

/// Squared error over rows, accumulated sample by sample.
pub fn squared_error(out: &Matrix, targets: &Matrix, reduction: LossReduction) -> f64 {
    let mut total = 0.0;
    for r in 0..out.rows() {
        let s = out.row(r).iter().zip(targets.row(r)).fold(0.0, |acc, (f, y)| {
            let d = y - f;
            acc + d * d
        });
        total += s;
    }
    let loss = 0.5 * total;
    match reduction {
        LossReduction::Sum => loss,
        LossReduction::Mean => loss / out.rows() as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::{partial_identity, zero_init_matrix};

    fn linear(dims: Vec<usize>) -> NetworkSpec {
        NetworkSpec::new(dims, Nonlinearity::Identity, InitScheme::zero())
    }

    #[test]
    fn build_equal_dims_gives_identities() {
        let net = Network::build(linear(vec![3, 3, 3])).unwrap();
        assert!(net.weights().iter().all(|w| *w == Matrix::identity(3)));
    }

    #[test]
    fn build_dispatches_per_layer_shape() {
        let net = Network::build(linear(vec![3, 4, 3])).unwrap();
        assert_eq!(net.weights()[0], zero_init_matrix(4, 3).unwrap());
        assert_eq!(net.weights()[1], partial_identity(3, 4).unwrap());
    }

    #[test]
    fn residual_branches_start_at_zero() {
        let net = Network::build(linear(vec![4, 6, 6, 3]).all_residual()).unwrap();
        assert!(net.weights().iter().all(Matrix::is_zero));
    }

    #[test]
    fn identity_network_passes_input_through() {
        let net = Network::build(linear(vec![4, 4, 4])).unwrap();
        let x = [0.5, -1.0, 2.0, 3.25];
        assert_eq!(net.forward(&x).unwrap().output().as_slice(), &x);
    }

    #[test]
    fn hadamard_first_layer_relu_pattern() {
        let spec = NetworkSpec::new(vec![3, 4, 4, 3], Nonlinearity::Relu, InitScheme::zero());
        let net = Network::build(spec).unwrap();
        let acts = net.forward(&[0.0, 1.0, 0.0]).unwrap();
        let c = 2f64.powf(-0.5);
        assert_eq!(acts.post[1].as_slice(), &[c, 0.0, c, 0.0]);
    }

    #[test]
    fn loss_of_zero_output() {
        let spec = NetworkSpec::new(vec![2, 2], Nonlinearity::Identity, InitScheme::Constant { value: 0.0 });
        let net = Network::build(spec).unwrap();
        let data = Dataset::new(Matrix::from_rows(&[[1.0, 1.0]]).unwrap(), Matrix::from_rows(&[[3.0, 4.0]]).unwrap()).unwrap();
        assert_eq!(net.loss(&data).unwrap(), 12.5);
    }

    #[test]
    fn wrong_input_width_is_an_error() {
        let net = Network::build(linear(vec![3, 3])).unwrap();
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(NetError::DimensionMismatch { what: "input", expected: 3, got: 2 })));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(Network::build(linear(vec![3])).is_err());
        assert!(Network::build(linear(vec![3, 0, 2])).is_err());
        assert!(Network::build(linear(vec![3, 3, 2]).with_residual(vec![true])).is_err());
    }
}
