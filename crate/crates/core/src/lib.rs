//! Deterministic ZerO initialization and a small training laboratory for
//! studying how identity- and Hadamard-initialized networks learn.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`] dense row-major matrices, an order-preserving matrix product,
//!   one-sided Jacobi SVD, Hadamard matrices and the fast Walsh–Hadamard
//!   transform.
//! * [`init`] ZerO for matrices and convolution kernels, partial identities,
//!   constant and seeded random baselines.
//! * [`net`] bias-free fully connected / residual networks with exact
//!   backpropagation and (mini-)batch gradient descent.
//! * [`analysis`] rank trajectories, initial-gradient block structure,
//!   weight-symmetry metrics and isometry statistics.
//! * [`prune`] one-shot per-layer magnitude pruning and accuracy evaluation.
//! * [`data`] MNIST IDX parsing, synthetic teacher data, whitening and a
//!   binary dataset cache.
//!
//! Every computation is deterministic: reductions run in a fixed order and
//! the optional `parallel` feature only splits work across independent
//! outputs, so results do not depend on the number of threads.

pub mod analysis;
pub mod data;
pub mod init;
pub mod net;
pub(crate) mod par;
pub mod prune;
pub mod rng;
pub mod tensor;

pub use analysis::AnalysisError;
pub use data::{DataError, Dataset};
pub use init::{InitError, InitScheme, Kernel4D};
pub use net::{NetError, Network, NetworkSpec, Nonlinearity, TrainConfig, TrainingTrace};
pub use prune::{PruneError, PruneMask};
pub use tensor::{Matrix, SvdResult, TensorError};
