//! Weight initialization: ZerO (zeros, ones and scaled Hadamard columns),
//! partial identities, constants and seeded random baselines.

mod conv;

pub use conv::{zero_init_conv, zero_init_conv_scaled, Kernel4D};

use crate::rng;
use crate::tensor::{hadamard_entry, Matrix, MAX_HADAMARD_ORDER};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitError {
    #[error("dimensions must be positive, got {rows}x{cols}")]
    EmptyShape { rows: usize, cols: usize },
    #[error("{rows} rows need a Hadamard matrix larger than H_{limit}")]
    SizeLimit { rows: usize, limit: u32 },
    #[error("kernel size {k} must be odd")]
    EvenKernel { k: usize },
    #[error("scheme {0} is not a random scheme")]
    NotRandom(&'static str),
    #[error("constant {0} is not finite")]
    NonFiniteConstant(f64),
}

/// How the Hadamard branch of ZerO is scaled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HadamardScale {
    /// `c = 2^{-(m-1)/2}`: columns of a clipped `H_m` end up with squared
    /// norm 2 when `p = 2^m`.
    #[default]
    HalfPower,
    /// `c = 2^{-m/2}`: orthonormal columns when `p = 2^m`.
    Orthonormal,
}

impl HadamardScale {
    /// Scale factor for `H_m`.
    pub fn factor(self, m: u32) -> f64 {
        match self {
            HadamardScale::HalfPower => 2f64.powf(-((m as f64) - 1.0) / 2.0),
            HadamardScale::Orthonormal => 2f64.powf(-(m as f64) / 2.0),
        }
    }
}

/// Initialization scheme. Random variants always carry their seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitScheme {
    /// ZerO: identity, partial identity, or a scaled Hadamard block for
    /// dimension-increasing layers. Residual branches start at zero.
    #[serde(rename = "zero")]
    ZerO {
        #[serde(default)]
        scale: HadamardScale,
    },
    /// Partial identity everywhere (no Hadamard).
    PartialIdentity,
    /// Every entry equals `value`.
    Constant { value: f64 },
    /// `N(0, gain^2 / fan_in)` ("kaiming").
    #[serde(rename = "kaiming")]
    RandomFanIn { gain: f64, seed: u64 },
    /// `N(0, 2 gain^2 / (fan_in + fan_out))` ("xavier").
    #[serde(rename = "xavier")]
    RandomFanAvg { gain: f64, seed: u64 },
}

impl InitScheme {
    pub const fn zero() -> Self {
        InitScheme::ZerO { scale: HadamardScale::HalfPower }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitScheme::ZerO { .. } => "zero",
            InitScheme::PartialIdentity => "partial_identity",
            InitScheme::Constant { .. } => "constant",
            InitScheme::RandomFanIn { .. } => "kaiming",
            InitScheme::RandomFanAvg { .. } => "xavier",
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, InitScheme::RandomFanIn { .. } | InitScheme::RandomFanAvg { .. })
    }

    /// Weight matrix for a plain layer with `rows` outputs and `cols` inputs.
    /// `stream` selects the random stream for random schemes.
    pub fn matrix(&self, rows: usize, cols: usize, stream: u64) -> Result<Matrix, InitError> {
        check_shape(rows, cols)?;
        match *self {
            InitScheme::ZerO { scale } => zero_init_matrix_scaled(rows, cols, scale),
            InitScheme::PartialIdentity => partial_identity(rows, cols),
            InitScheme::Constant { value } => {
                if !value.is_finite() {
                    return Err(InitError::NonFiniteConstant(value));
                }
                Ok(Matrix::filled(rows, cols, value))
            }
            InitScheme::RandomFanIn { .. } | InitScheme::RandomFanAvg { .. } => {
                random_matrix(self, rows, cols, stream)
            }
        }
    }
}

fn check_shape(rows: usize, cols: usize) -> Result<(), InitError> {
    if rows == 0 || cols == 0 {
        return Err(InitError::EmptyShape { rows, cols });
    }
    Ok(())
}

/// Rectangular identity: `(I | 0)` for wide shapes, its transpose for tall
/// ones, `I` when square.
pub fn partial_identity(rows: usize, cols: usize) -> Result<Matrix, InitError> {
    check_shape(rows, cols)?;
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows.min(cols) {
        m.set(i, i, 1.0);
    }
    Ok(m)
}

/// `ceil(log2(p))`.
pub fn hadamard_order(p: usize) -> u32 {
    p.next_power_of_two().trailing_zeros()
}

/// ZerO for a `p x q` matrix with the default scale.
pub fn zero_init_matrix(p: usize, q: usize) -> Result<Matrix, InitError> {
    zero_init_matrix_scaled(p, q, HadamardScale::HalfPower)
}

/// ZerO for a `p x q` matrix.
///
/// `p <= q` gives the partial identity. For `p > q` the result is
/// `c I* H_m I*` with `m = ceil(log2 p)`: the first `p` rows and first `q`
/// columns of `H_m`, scaled by `c`. Entries are read off
/// `H_m(i, j) = (-1)^popcount(i & j)` so `H_m` is never materialised.
pub fn zero_init_matrix_scaled(p: usize, q: usize, scale: HadamardScale) -> Result<Matrix, InitError> {
    check_shape(p, q)?;
    if p <= q {
        return partial_identity(p, q);
    }
    let m = hadamard_order(p);
    if m > MAX_HADAMARD_ORDER {
        return Err(InitError::SizeLimit { rows: p, limit: MAX_HADAMARD_ORDER });
    }
    let c = scale.factor(m);
    Ok(Matrix::from_fn(p, q, |i, j| c * hadamard_entry(i, j)))
}

/// Seeded random matrix from stream [`rng::STREAM_MATRIX`].
pub fn random_init(scheme: &InitScheme, rows: usize, cols: usize) -> Result<Matrix, InitError> {
    check_shape(rows, cols)?;
    random_matrix(scheme, rows, cols, rng::STREAM_MATRIX)
}

fn random_matrix(scheme: &InitScheme, rows: usize, cols: usize, stream: u64) -> Result<Matrix, InitError> {
    let (std, seed) = match *scheme {
        InitScheme::RandomFanIn { gain, seed } => (gain / (cols as f64).sqrt(), seed),
        InitScheme::RandomFanAvg { gain, seed } => (gain * (2.0 / (rows + cols) as f64).sqrt(), seed),
        other => return Err(InitError::NotRandom(other.name())),
    };
    let mut r: ChaCha8Rng = rng::stream(seed, stream);
    Ok(Matrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(&mut r);
        std * z
    }))
}

/// Exact value census of a parameter set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub zeros: usize,
    pub ones: usize,
    pub others: usize,
}

impl Census {
    pub fn of_matrix(m: &Matrix) -> Self {
        let mut c = Census::default();
        for &v in m.as_slice() {
            if v == 0.0 {
                c.zeros += 1;
            } else if v == 1.0 {
                c.ones += 1;
            } else {
                c.others += 1;
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.zeros + self.ones + self.others
    }
}

impl std::ops::Add for Census {
    type Output = Census;
    fn add(self, o: Census) -> Census {
        Census { zeros: self.zeros + o.zeros, ones: self.ones + o.ones, others: self.others + o.others }
    }
}

impl std::iter::Sum for Census {
    fn sum<I: Iterator<Item = Census>>(iter: I) -> Census {
        iter.fold(Census::default(), |a, b| a + b)
    }
}

/// Census over every weight of a network.
pub fn census(net: &crate::net::Network) -> Census {
    net.weights().iter().map(Census::of_matrix).sum()
}
