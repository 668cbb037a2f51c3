//! One-sided (Hestenes) Jacobi SVD.
//!
//! Columns of the working matrix are orthogonalised pairwise by plane
//! rotations. Pairs are visited in round-robin tournament order: every round
//! touches disjoint column pairs, so a round can be split across threads
//! without changing a single bit of the result.

use super::{Matrix, TensorError};
use crate::par;

const MAX_SWEEPS: usize = 60;

/// Thin SVD `A = U diag(S) V^T` with `k = min(rows, cols)` singular triplets.
#[derive(Clone, Debug)]
pub struct SvdResult {
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
    /// `rows x k`, orthonormal columns.
    pub left_vectors: Matrix,
    /// `cols x k`, orthonormal columns.
    pub right_vectors: Matrix,
}

impl SvdResult {
    /// `U diag(S) V^T`.
    pub fn reconstruct(&self) -> Matrix {
        let u = &self.left_vectors;
        let v = &self.right_vectors;
        let k = self.singular_values.len();
        Matrix::from_fn(u.rows(), v.rows(), |i, j| {
            let mut s = 0.0;
            for p in 0..k {
                s += u.get(i, p) * self.singular_values[p] * v.get(j, p);
            }
            s
        })
    }
}

struct PairJob {
    p: usize,
    q: usize,
    cp: Vec<f64>,
    cq: Vec<f64>,
    vp: Vec<f64>,
    vq: Vec<f64>,
}

/// Returns `(rotated, cosine before rotation)`.
fn rotate_pair(job: &mut PairJob, tol: f64) -> (bool, f64) {
    let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
    for (x, y) in job.cp.iter().zip(&job.cq) {
        alpha += x * x;
        beta += y * y;
        gamma += x * y;
    }
    if alpha == 0.0 || beta == 0.0 || gamma == 0.0 {
        return (false, 0.0);
    }
    let cosine = gamma.abs() / (alpha.sqrt() * beta.sqrt());
    if cosine <= tol {
        return (false, cosine);
    }
    let zeta = (beta - alpha) / (2.0 * gamma);
    let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
    let c = 1.0 / t.hypot(1.0);
    let s = c * t;
    let apply = |a: &mut [f64], b: &mut [f64]| {
        for (x, y) in a.iter_mut().zip(b.iter_mut()) {
            let (xv, yv) = (*x, *y);
            *x = c * xv - s * yv;
            *y = s * xv + c * yv;
        }
    };
    apply(&mut job.cp, &mut job.cq);
    apply(&mut job.vp, &mut job.vq);
    (true, cosine)
}

/// Round `r` of the circle-method tournament over `n` players (`n` even).
fn round_pairs(n: usize, r: usize) -> Vec<(usize, usize)> {
    let mut seats = Vec::with_capacity(n);
    seats.push(0);
    for i in 1..n {
        seats.push(1 + (i - 1 + r) % (n - 1));
    }
    (0..n / 2)
        .map(|i| {
            let (a, b) = (seats[i], seats[n - 1 - i]);
            (a.min(b), a.max(b))
        })
        .collect()
}

/// Orthogonalises the columns of a tall `m x n` matrix given column-wise.
/// Returns the rotated columns and (optionally) the accumulated `V`.
fn jacobi_columns(
    mut cols: Vec<Vec<f64>>,
    m: usize,
    want_v: bool,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), TensorError> {
    let n = cols.len();
    let mut v: Vec<Vec<f64>> = if want_v {
        (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                e
            })
            .collect()
    } else {
        vec![Vec::new(); n]
    };
    if n < 2 {
        return Ok((cols, v));
    }
    let tol = (m as f64) * f64::EPSILON;
    let players = if n % 2 == 0 { n } else { n + 1 };
    let mut last_residual = f64::INFINITY;
    for _sweep in 0..MAX_SWEEPS {
        let mut any = false;
        let mut residual = 0.0_f64;
        for r in 0..players - 1 {
            let jobs: Vec<PairJob> = round_pairs(players, r)
                .into_iter()
                .filter(|&(_, q)| q < n)
                .map(|(p, q)| PairJob {
                    p,
                    q,
                    cp: std::mem::take(&mut cols[p]),
                    cq: std::mem::take(&mut cols[q]),
                    vp: std::mem::take(&mut v[p]),
                    vq: std::mem::take(&mut v[q]),
                })
                .collect();
            let done = par::map_collect(jobs, |mut job| {
                let out = rotate_pair(&mut job, tol);
                (job, out)
            });
            for (job, (rotated, cosine)) in done {
                any |= rotated;
                residual = residual.max(cosine);
                cols[job.p] = job.cp;
                cols[job.q] = job.cq;
                v[job.p] = job.vp;
                v[job.q] = job.vq;
            }
        }
        last_residual = residual;
        if !any {
            return Ok((cols, v));
        }
    }
    Err(TensorError::NoConvergence { sweeps: MAX_SWEEPS, residual: last_residual })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a + x * x).sqrt()
}

/// Normalises `cols[idx]` into orthonormal vectors; exactly-zero columns are
/// replaced by Gram–Schmidt completions from the standard basis.
fn orthonormal_columns(cols: &[Vec<f64>], order: &[usize], sigma: &[f64], len: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(order.len());
    let mut candidate = 0;
    for &j in order {
        let s = sigma[j];
        if s > 0.0 && (1.0 / s).is_finite() {
            out.push(cols[j].iter().map(|x| x / s).collect());
            continue;
        }
        loop {
            assert!(candidate < len, "ran out of completion candidates");
            let mut e = vec![0.0; len];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for u in &out {
                    let d = u.iter().zip(&e).fold(0.0, |a, (x, y)| a + x * y);
                    for (ei, ui) in e.iter_mut().zip(u) {
                        *ei -= d * ui;
                    }
                }
            }
            let nrm = norm(&e);
            if nrm > 0.5 {
                out.push(e.into_iter().map(|x| x / nrm).collect());
                break;
            }
        }
    }
    out
}

fn columns_to_matrix(cols: &[Vec<f64>], rows: usize) -> Matrix {
    Matrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

fn decompose(a: &Matrix, want_vectors: bool) -> Result<SvdResult, TensorError> {
    let tall = a.rows() >= a.cols();
    let work = if tall { a.clone() } else { a.transpose() };
    let (m, n) = work.shape();
    let cols: Vec<Vec<f64>> = (0..n).map(|j| work.column(j)).collect();
    let (cols, v) = jacobi_columns(cols, m, want_vectors)?;
    let sigma: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap().then(i.cmp(&j)));
    let singular_values: Vec<f64> = order.iter().map(|&j| sigma[j]).collect();
    if !want_vectors {
        let empty = Matrix::zeros(1, 1);
        return Ok(SvdResult { singular_values, left_vectors: empty.clone(), right_vectors: empty });
    }
    let u_cols = orthonormal_columns(&cols, &order, &sigma, m);
    let v_cols: Vec<Vec<f64>> = order.iter().map(|&j| v[j].clone()).collect();
    let u = columns_to_matrix(&u_cols, m);
    let vm = columns_to_matrix(&v_cols, n);
    let (left_vectors, right_vectors) = if tall { (u, vm) } else { (vm, u) };
    Ok(SvdResult { singular_values, left_vectors, right_vectors })
}

/// Full thin SVD.
pub fn svd(a: &Matrix) -> Result<SvdResult, TensorError> {
    decompose(a, true)
}

/// Singular values only (skips accumulating `V`), in non-increasing order.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>, TensorError> {
    decompose(a, false).map(|r| r.singular_values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::tensor::matmul;
    use rand::Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut r = rng::stream(seed, 9);
        Matrix::from_fn(rows, cols, |_, _| r.random::<f64>() * 2.0 - 1.0)
    }

    fn orthonormality_error(q: &Matrix) -> f64 {
        let g = matmul(&q.transpose(), q).unwrap();
        g.max_abs_diff(&Matrix::identity(q.cols())).unwrap()
    }

    #[test]
    fn identity_has_unit_singular_values() {
        assert_eq!(singular_values(&Matrix::identity(4)).unwrap(), vec![1.0; 4]);
    }

    #[test]
    fn diagonal_with_zero() {
        let r = svd(&Matrix::diag(&[3.0, 0.0])).unwrap();
        assert_eq!(r.singular_values, vec![3.0, 0.0]);
        assert!(orthonormality_error(&r.left_vectors) < 1e-12);
    }

    #[test]
    fn tournament_covers_every_pair_once() {
        let n = 8;
        let mut seen = std::collections::BTreeSet::new();
        for r in 0..n - 1 {
            let pairs = round_pairs(n, r);
            let mut used = vec![false; n];
            for (p, q) in pairs {
                assert!(!used[p] && !used[q]);
                used[p] = true;
                used[q] = true;
                assert!(seen.insert((p, q)));
            }
        }
        assert_eq!(seen.len(), n * (n - 1) / 2);
    }

    #[test]
    fn wide_and_tall_reconstruct() {
        for (r, c) in [(7, 3), (3, 7), (1, 5), (5, 1), (6, 6)] {
            let a = random(r, c, (r * 10 + c) as u64);
            let s = svd(&a).unwrap();
            assert_eq!(s.singular_values.len(), r.min(c));
            assert_eq!(s.left_vectors.shape(), (r, r.min(c)));
            assert_eq!(s.right_vectors.shape(), (c, r.min(c)));
            let err = s.reconstruct().sub(&a).unwrap().frobenius_norm();
            assert!(err <= 1e-9 * a.frobenius_norm().max(1.0), "{r}x{c}: {err}");
            assert!(orthonormality_error(&s.left_vectors) < 1e-9);
            assert!(orthonormality_error(&s.right_vectors) < 1e-9);
        }
    }

    #[test]
    fn rank_deficient_left_vectors_are_completed() {
        let mut a = Matrix::zeros(5, 4);
        for i in 0..5 {
            a.set(i, 0, (i + 1) as f64);
            a.set(i, 2, 2.0 * (i + 1) as f64);
        }
        let s = svd(&a).unwrap();
        assert_eq!(s.singular_values[2], 0.0);
        assert!(orthonormality_error(&s.left_vectors) < 1e-12);
        assert!(s.reconstruct().max_abs_diff(&a).unwrap() < 1e-12);
    }
}
