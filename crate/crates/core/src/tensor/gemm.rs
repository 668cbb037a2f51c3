use super::{Matrix, TensorError};
use crate::par;

// Inner-dimension and column panel sizes. A KC x NC panel of `b` is 1 MiB.
const KC: usize = 256;
const NC: usize = 512;
const ROWS_PER_TASK: usize = 64;

fn check(a: &Matrix, b: &Matrix) -> Result<(), TensorError> {
    if a.cols() != b.rows() {
        return Err(TensorError::ShapeMismatch {
            op: "matmul",
            left_rows: a.rows(),
            left_cols: a.cols(),
            right_rows: b.rows(),
            right_cols: b.cols(),
        });
    }
    Ok(())
}

// Register tile: MR rows of `a` against NR columns of `b`.
const MR: usize = 4;
const NR: usize = 16;

/// `out[MR x NR] += apack * bpack` over the listed inner indices, in order.
/// `bpack` holds one packed `kb x NR` tile, row-major.
fn micro_tile(apack: &[f64], ks: &[usize], bpack: &[f64], out: &mut [f64], ldo: usize) {
    assert!(out.len() >= (MR - 1) * ldo + NR);
    if let Some(&last) = ks.last() {
        assert!(apack.len() >= (last + 1) * MR && bpack.len() >= (last + 1) * NR);
    }
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx") {
            // SAFETY: AVX is available and all accesses were bounds-checked above.
            unsafe { micro_tile_avx(apack, ks, bpack, out, ldo) };
            return;
        }
    }
    micro_tile_portable(apack, ks, bpack, out, ldo);
}

fn micro_tile_portable(apack: &[f64], ks: &[usize], bpack: &[f64], out: &mut [f64], ldo: usize) {
    let mut acc = [[0.0f64; NR]; MR];
    for (i, row) in acc.iter_mut().enumerate() {
        row.copy_from_slice(&out[i * ldo..i * ldo + NR]);
    }
    for &k in ks {
        let brow = &bpack[k * NR..k * NR + NR];
        for (i, row) in acc.iter_mut().enumerate() {
            let ai = apack[k * MR + i];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += ai * bv;
            }
        }
    }
    for (i, row) in acc.iter().enumerate() {
        out[i * ldo..i * ldo + NR].copy_from_slice(row);
    }
}

/// Same arithmetic as [`micro_tile_portable`]: one rounded multiply and one
/// rounded add per term (no fused multiply-add), so results are identical.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn micro_tile_avx(apack: &[f64], ks: &[usize], bpack: &[f64], out: &mut [f64], ldo: usize) {
    use std::arch::x86_64::*;
    let o = out.as_mut_ptr();
    let a = apack.as_ptr();
    let b = bpack.as_ptr();
    let mut c = [[_mm256_setzero_pd(); 4]; MR];
    for (i, row) in c.iter_mut().enumerate() {
        for (v, reg) in row.iter_mut().enumerate() {
            *reg = _mm256_loadu_pd(o.add(i * ldo + 4 * v));
        }
    }
    for &k in ks {
        let bp = b.add(k * NR);
        let b0 = _mm256_loadu_pd(bp);
        let b1 = _mm256_loadu_pd(bp.add(4));
        let b2 = _mm256_loadu_pd(bp.add(8));
        let b3 = _mm256_loadu_pd(bp.add(12));
        for (i, row) in c.iter_mut().enumerate() {
            let ai = _mm256_broadcast_sd(&*a.add(k * MR + i));
            row[0] = _mm256_add_pd(row[0], _mm256_mul_pd(ai, b0));
            row[1] = _mm256_add_pd(row[1], _mm256_mul_pd(ai, b1));
            row[2] = _mm256_add_pd(row[2], _mm256_mul_pd(ai, b2));
            row[3] = _mm256_add_pd(row[3], _mm256_mul_pd(ai, b3));
        }
    }
    for (i, row) in c.iter().enumerate() {
        for (v, reg) in row.iter().enumerate() {
            _mm256_storeu_pd(o.add(i * ldo + 4 * v), *reg);
        }
    }
}

/// One `KC x NC` panel of `b` (or of `b^T` when `trans`): full `NR`-wide
/// tiles packed contiguously, trailing columns read from `b` directly.
struct Panel<'a> {
    b: &'a [f64],
    ld: usize,
    trans: bool,
    n: usize,
    jc: usize,
    nc: usize,
    kc: usize,
    kb: usize,
    packed: Vec<f64>,
}

impl<'a> Panel<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new(b: &'a Matrix, trans: bool, jc: usize, nc: usize, kc: usize, kb: usize, mut packed: Vec<f64>) -> Self {
        let ld = b.cols();
        let n = if trans { b.rows() } else { b.cols() };
        let bd = b.as_slice();
        let tiles = nc / NR;
        packed.clear();
        packed.resize(tiles * kb * NR, 0.0);
        for t in 0..tiles {
            let tile = &mut packed[t * kb * NR..(t + 1) * kb * NR];
            if trans {
                for c in 0..NR {
                    let src = &bd[(jc + t * NR + c) * ld + kc..][..kb];
                    for (k, &v) in src.iter().enumerate() {
                        tile[k * NR + c] = v;
                    }
                }
            } else {
                for k in 0..kb {
                    let src = (kc + k) * ld + jc + t * NR;
                    tile[k * NR..(k + 1) * NR].copy_from_slice(&bd[src..src + NR]);
                }
            }
        }
        Self { b: bd, ld, trans, n, jc, nc, kc, kb, packed }
    }

    #[inline]
    fn b_at(&self, k: usize, j: usize) -> f64 {
        if self.trans {
            self.b[(self.jc + j) * self.ld + self.kc + k]
        } else {
            self.b[(self.kc + k) * self.ld + self.jc + j]
        }
    }

    /// Adds this panel's contribution to rows `first..` of the product.
    fn apply(&self, a: &Matrix, first: usize, out: &mut [f64]) {
        let (n, jc, nc, kc, kb) = (self.n, self.jc, self.nc, self.kc, self.kb);
        let rows = out.len() / n;
        let blocks = rows / MR;
        let tiles = nc / NR;
        // Pack every MR-row block of `a`, noting which inner indices are
        // non-zero in at least one of its rows.
        let mut apack = vec![0.0; blocks * kb * MR];
        let mut ks: Vec<Vec<usize>> = Vec::with_capacity(blocks);
        for blk in 0..blocks {
            let pack = &mut apack[blk * kb * MR..(blk + 1) * kb * MR];
            let rows_a: [&[f64]; MR] = std::array::from_fn(|i| &a.row(first + blk * MR + i)[kc..kc + kb]);
            let mut nz = Vec::with_capacity(kb);
            for k in 0..kb {
                let mut any = false;
                for (i, row) in rows_a.iter().enumerate() {
                    pack[k * MR + i] = row[k];
                    any |= row[k] != 0.0;
                }
                if any {
                    nz.push(k);
                }
            }
            ks.push(nz);
        }
        for t in 0..tiles {
            let tile = &self.packed[t * kb * NR..(t + 1) * kb * NR];
            for (blk, nz) in ks.iter().enumerate() {
                let pack = &apack[blk * kb * MR..(blk + 1) * kb * MR];
                micro_tile(pack, nz, tile, &mut out[blk * MR * n + jc + t * NR..], n);
            }
        }
        for j in tiles * NR..nc {
            for (blk, nz) in ks.iter().enumerate() {
                let pack = &apack[blk * kb * MR..(blk + 1) * kb * MR];
                for i in 0..MR {
                    let o = &mut out[(blk * MR + i) * n + jc + j];
                    for &k in nz {
                        *o += pack[k * MR + i] * self.b_at(k, j);
                    }
                }
            }
        }
        for r in blocks * MR..rows {
            let arow = &a.row(first + r)[kc..kc + kb];
            let orow = &mut out[r * n + jc..r * n + jc + nc];
            for (k, &aik) in arow.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                for (j, o) in orow.iter_mut().enumerate() {
                    *o += aik * self.b_at(k, j);
                }
            }
        }
    }
}

/// Blocked product. Each output element is accumulated over the inner index
/// in ascending order starting from +0.0, with separate multiply and add,
/// exactly like the textbook triple loop. Terms with `a[i][k] == 0` may be
/// skipped: for finite `b` they only add a signed zero to a sum that is
/// never -0.0, so the result is unchanged.
fn gemm(a: &Matrix, b: &Matrix, trans: bool, parallel: bool) -> Result<Matrix, TensorError> {
    let k_dim = a.cols();
    let n = if trans { b.rows() } else { b.cols() };
    let mut out = vec![0.0; a.rows() * n];
    let mut buf = Vec::new();
    for jc in (0..n).step_by(NC) {
        let nc = NC.min(n - jc);
        for kc in (0..k_dim).step_by(KC) {
            let kb = KC.min(k_dim - kc);
            let panel = Panel::new(b, trans, jc, nc, kc, kb, buf);
            let f = |first: usize, rows: &mut [f64]| panel.apply(a, first, rows);
            if parallel {
                par::for_each_row_chunk(&mut out, n, ROWS_PER_TASK, f);
            } else {
                par::for_each_row_chunk_seq(&mut out, n, ROWS_PER_TASK, f);
            }
            buf = panel.packed;
        }
    }
    Matrix::new(a.rows(), n, out)
}

/// Matrix product `a * b`.
///
/// Uses rayon over row blocks when the `parallel` feature is enabled; the
/// result is bit-identical to [`matmul_seq`] and [`matmul_naive`] for finite
/// inputs regardless of thread count.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix, TensorError> {
    check(a, b)?;
    gemm(a, b, false, true)
}

/// `a * b^T` without materialising the transpose; bit-identical to
/// `matmul(a, &b.transpose())`.
pub fn matmul_transb(a: &Matrix, b: &Matrix) -> Result<Matrix, TensorError> {
    if a.cols() != b.cols() {
        return Err(TensorError::ShapeMismatch {
            op: "matmul_transb",
            left_rows: a.rows(),
            left_cols: a.cols(),
            right_rows: b.rows(),
            right_cols: b.cols(),
        });
    }
    gemm(a, b, true, true)
}

/// Single-threaded blocked product.
pub fn matmul_seq(a: &Matrix, b: &Matrix) -> Result<Matrix, TensorError> {
    check(a, b)?;
    gemm(a, b, false, false)
}

/// Always-parallel product (only with the `parallel` feature).
#[cfg(feature = "parallel")]
pub fn matmul_par(a: &Matrix, b: &Matrix) -> Result<Matrix, TensorError> {
    matmul(a, b)
}

/// Unblocked triple loop, kept as the reference path.
pub fn matmul_naive(a: &Matrix, b: &Matrix) -> Result<Matrix, TensorError> {
    check(a, b)?;
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..k {
                s += a.get(i, p) * b.get(p, j);
            }
            out[i * n + j] = s;
        }
    }
    Matrix::new(m, n, out)
}
