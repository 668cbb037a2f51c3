use super::{singular_values, Matrix, TensorError};
use crate::rng;
use rand_distr::{Distribution, StandardNormal};

/// Default relative tolerance for [`numeric_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-6;

/// Number of singular values strictly greater than `rel_tol * sigma_max`.
/// The zero matrix has rank 0.
pub fn numeric_rank(a: &Matrix, rel_tol: f64) -> Result<usize, TensorError> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(TensorError::InvalidTolerance { tol: rel_tol });
    }
    if a.is_zero() {
        return Ok(0);
    }
    let s = singular_values(a)?;
    let cut = rel_tol * s[0];
    Ok(s.iter().filter(|&&x| x > cut).count())
}

/// `||A||_F^2 / ||A||_2^2`, computed from the singular values.
pub fn stable_rank(a: &Matrix) -> Result<f64, TensorError> {
    if a.is_zero() {
        return Err(TensorError::ZeroMatrix { what: "stable rank" });
    }
    let s = singular_values(a)?;
    let fro = s.iter().fold(0.0, |acc, x| acc + x * x);
    Ok(fro / (s[0] * s[0]))
}

/// Largest singular value by power iteration on `A^T A`.
///
/// Starts from a fixed seeded Gaussian vector and stops once the Rayleigh
/// quotient changes by less than `1e-12` relative, or after 2000 iterations.
/// The estimate never exceeds the true spectral norm.
pub fn spectral_norm_estimate(a: &Matrix) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    let n = a.cols();
    let mut r = rng::stream(0, rng::STREAM_POWER);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
    let at = a.transpose();
    let mut prev = 0.0;
    for _ in 0..2000 {
        let nv = v.iter().fold(0.0, |s, x| s + x * x).sqrt();
        if nv == 0.0 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let av = a.matvec(&v).expect("shape checked");
        let lambda = av.iter().fold(0.0, |s, x| s + x * x);
        v = at.matvec(&av).expect("shape checked");
        if (lambda - prev).abs() <= 1e-12 * lambda {
            return lambda.sqrt();
        }
        prev = lambda;
    }
    prev.sqrt()
}

/// Stable rank with the spectral norm taken from [`spectral_norm_estimate`];
/// much cheaper than [`stable_rank`] for large matrices.
pub fn stable_rank_estimate(a: &Matrix) -> Result<f64, TensorError> {
    if a.is_zero() {
        return Err(TensorError::ZeroMatrix { what: "stable rank" });
    }
    let top = spectral_norm_estimate(a);
    Ok(a.frobenius_norm_sq() / (top * top))
}
