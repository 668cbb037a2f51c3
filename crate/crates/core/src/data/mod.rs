//! Datasets: MNIST IDX files, seeded synthetic teacher data, whitening and a
//! binary cache format.

mod cache;
mod idx;

pub use cache::{read_cache, read_cache_file, write_cache, write_cache_file, CACHE_TAG};
pub use idx::{load_mnist, mnist_from_bytes, parse_idx_images, parse_idx_labels, IdxHeader, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};

use crate::rng;
use crate::tensor::{matmul, svd, Matrix, TensorError};
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{what}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { what: &'static str, expected: u32, found: u32 },
    #[error("{what}: truncated, need {expected} bytes but found {found}")]
    Truncated { what: &'static str, expected: usize, found: usize },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} at index {index} is outside 0..10")]
    LabelRange { index: usize, label: u8 },
    #[error("{inputs} input rows but {targets} target rows")]
    SampleMismatch { inputs: usize, targets: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("input covariance is singular (condition estimate {condition:e})")]
    SingularCovariance { condition: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// `P` paired samples, one per row of `inputs` (`P x N_x`) and `targets`
/// (`P x N_y`).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: Matrix,
    targets: Matrix,
}

impl Dataset {
    pub fn new(inputs: Matrix, targets: Matrix) -> Result<Self, DataError> {
        if inputs.rows() != targets.rows() {
            return Err(DataError::SampleMismatch { inputs: inputs.rows(), targets: targets.rows() });
        }
        if !inputs.is_finite() {
            return Err(DataError::NonFinite("inputs"));
        }
        if !targets.is_finite() {
            return Err(DataError::NonFinite("targets"));
        }
        Ok(Self { inputs, targets })
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    pub fn into_parts(self) -> (Matrix, Matrix) {
        (self.inputs, self.targets)
    }

    /// Number of samples `P` (always at least one).
    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_x(&self) -> usize {
        self.inputs.cols()
    }

    pub fn n_y(&self) -> usize {
        self.targets.cols()
    }

    /// `sum_mu x x^T`.
    pub fn sigma_xx(&self) -> Matrix {
        matmul(&self.inputs.transpose(), &self.inputs).expect("consistent shapes")
    }

    /// `sum_mu y x^T`.
    pub fn sigma_yx(&self) -> Matrix {
        matmul(&self.targets.transpose(), &self.inputs).expect("consistent shapes")
    }

    /// Samples at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset { inputs: self.inputs.select_rows(idx), targets: self.targets.select_rows(idx) }
    }

    /// The first `n` samples.
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.clamp(1, self.len());
        Dataset { inputs: self.inputs.row_range(0, n), targets: self.targets.row_range(0, n) }
    }

    /// Same targets, new inputs.
    pub fn with_inputs(&self, inputs: Matrix) -> Result<Dataset, DataError> {
        Dataset::new(inputs, self.targets.clone())
    }
}

/// Seeded teacher `N(0, 1/n_x)` entries, `n_y x n_x`.
pub fn teacher_matrix(seed: u64, n_x: usize, n_y: usize) -> Matrix {
    let mut r = rng::stream(seed, rng::STREAM_TEACHER);
    let std = 1.0 / (n_x as f64).sqrt();
    Matrix::from_fn(n_y, n_x, |_, _| {
        let z: f64 = StandardNormal.sample(&mut r);
        std * z
    })
}

/// `p` standard-normal inputs with targets `T x + eps` for a seeded teacher
/// `T` (see [`teacher_matrix`]) and `eps ~ N(0, noise_std^2)`.
///
/// Panics if any dimension or `p` is zero.
pub fn synthetic_teacher(seed: u64, n_x: usize, n_y: usize, p: usize, noise_std: f64) -> Dataset {
    synthetic_with_teacher(seed, &teacher_matrix(seed, n_x, n_y), p, noise_std)
}

/// As [`synthetic_teacher`] with an explicit teacher.
pub fn synthetic_with_teacher(seed: u64, teacher: &Matrix, p: usize, noise_std: f64) -> Dataset {
    assert!(p > 0, "synthetic dataset needs at least one sample");
    let n_x = teacher.cols();
    let mut xr = rng::stream(seed, rng::STREAM_INPUTS);
    let inputs = Matrix::from_fn(p, n_x, |_, _| StandardNormal.sample(&mut xr));
    let mut targets = matmul(&inputs, &teacher.transpose()).expect("teacher shape");
    if noise_std != 0.0 {
        let mut nr = rng::stream(seed, rng::STREAM_NOISE);
        for v in targets.as_mut_slice() {
            let e: f64 = StandardNormal.sample(&mut nr);
            *v += noise_std * e;
        }
    }
    Dataset::new(inputs, targets).expect("finite synthetic data")
}

/// Replaces real-valued targets by one-hot class labels `argmax(T x)`.
pub fn argmax_one_hot(targets: &Matrix) -> Matrix {
    Matrix::from_fn(targets.rows(), targets.cols(), |r, c| if argmax(targets.row(r)) == c { 1.0 } else { 0.0 })
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Transforms inputs so that `sum_mu x x^T = I`, via `x <- Sigma_xx^{-1/2} x`.
pub fn whiten(data: &Dataset) -> Result<Dataset, DataError> {
    let n = data.n_x();
    if data.len() < n {
        return Err(DataError::TooFewSamples { needed: n, got: data.len() });
    }
    let sigma = data.sigma_xx();
    let dec = svd(&sigma)?;
    let s = &dec.singular_values;
    let smin = *s.last().expect("non-empty");
    if !(smin > 1e-12 * s[0]) {
        return Err(DataError::SingularCovariance { condition: s[0] / smin });
    }
    let u = &dec.left_vectors;
    let scaled = Matrix::from_fn(n, n, |i, k| u.get(i, k) / s[k].sqrt());
    let inv_sqrt = matmul(&scaled, &u.transpose())?;
    // Symmetric, so right-multiplying the row-major batch applies it per sample.
    data.with_inputs(matmul(data.inputs(), &inv_sqrt)?)
}

/// Per-feature standardization fitted on one dataset and applied to others.
/// Constant features are only centred.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Self {
        let (p, n) = data.inputs().shape();
        let mut mean = vec![0.0; n];
        for r in 0..p {
            for (m, x) in mean.iter_mut().zip(data.inputs().row(r)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= p as f64);
        let mut var = vec![0.0; n];
        for r in 0..p {
            for ((v, x), m) in var.iter_mut().zip(data.inputs().row(r)).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var.iter().map(|v| {
            let sd = (v / p as f64).sqrt();
            if sd > 0.0 { 1.0 / sd } else { 1.0 }
        }).collect();
        Self { mean, scale }
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset, DataError> {
        if data.n_x() != self.mean.len() {
            return Err(DataError::SampleMismatch { inputs: data.n_x(), targets: self.mean.len() });
        }
        let mut x = data.inputs().clone();
        for r in 0..x.rows() {
            for ((v, m), s) in x.row_mut(r).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) * s;
            }
        }
        data.with_inputs(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_teacher_without_noise_copies_inputs() {
        let d = synthetic_with_teacher(3, &Matrix::identity(4), 10, 0.0);
        assert_eq!(d.inputs(), d.targets());
    }

    #[test]
    fn synthetic_is_deterministic() {
        assert_eq!(synthetic_teacher(7, 5, 2, 20, 0.1), synthetic_teacher(7, 5, 2, 20, 0.1));
        assert_ne!(synthetic_teacher(7, 5, 2, 20, 0.1), synthetic_teacher(8, 5, 2, 20, 0.1));
    }

    #[test]
    fn whitening_requires_enough_samples() {
        let d = synthetic_teacher(1, 5, 1, 3, 0.0);
        assert!(matches!(whiten(&d), Err(DataError::TooFewSamples { needed: 5, got: 3 })));
    }

    #[test]
    fn whitening_singular_covariance() {
        let x = Matrix::from_fn(6, 3, |r, c| if c == 2 { 0.0 } else { (r * 3 + c) as f64 });
        let d = Dataset::new(x, Matrix::zeros(6, 1)).unwrap();
        assert!(matches!(whiten(&d), Err(DataError::SingularCovariance { .. })));
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.0, 2.0, 2.0, 1.0]), 1);
        assert_eq!(argmax(&[3.0]), 0);
    }

    #[test]
    fn standardizer_zero_mean_unit_variance() {
        let d = synthetic_teacher(2, 3, 1, 50, 0.0);
        let x = d.inputs().clone().scale(4.0);
        let d = d.with_inputs(x).unwrap();
        let s = Standardizer::fit(&d).apply(&d).unwrap();
        for c in 0..3 {
            let col = s.inputs().column(c);
            let mean = col.iter().sum::<f64>() / 50.0;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 50.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
    }
}
