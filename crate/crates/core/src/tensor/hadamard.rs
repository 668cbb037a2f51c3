use super::{Matrix, TensorError};

/// Largest supported order: `H_16` is 65536 x 65536.
pub const MAX_HADAMARD_ORDER: u32 = 16;

/// Entry `(i, j)` of the Sylvester–Hadamard matrix: `(-1)^popcount(i & j)`.
#[inline]
pub fn hadamard_entry(i: usize, j: usize) -> f64 {
    if (i & j).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Dense `2^m x 2^m` Hadamard matrix built by the block recursion
/// `H_m = [[H_{m-1}, H_{m-1}], [H_{m-1}, -H_{m-1}]]` from `H_0 = [1]`.
pub fn hadamard_matrix(m: u32) -> Result<Matrix, TensorError> {
    if m > MAX_HADAMARD_ORDER {
        return Err(TensorError::SizeLimit { order: m, limit: MAX_HADAMARD_ORDER });
    }
    let n = 1usize << m;
    let mut data = vec![0.0; n * n];
    data[0] = 1.0;
    let mut size = 1;
    while size < n {
        // grow the top-left size x size block into 2size x 2size
        for i in 0..size {
            for j in 0..size {
                let h = data[i * n + j];
                data[i * n + j + size] = h;
                data[(i + size) * n + j] = h;
                data[(i + size) * n + j + size] = -h;
            }
        }
        size *= 2;
    }
    Matrix::new(n, n, data)
}

/// In-place unnormalized Walsh–Hadamard transform: `v <- H_m v`.
///
/// Returns the number of butterfly passes, which is `m = log2(len)`.
pub fn fwht_in_place(v: &mut [f64]) -> Result<u32, TensorError> {
    let n = v.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(TensorError::NotPowerOfTwo { len: n });
    }
    let mut passes = 0;
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            let (lo, hi) = v[start..start + 2 * h].split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
        passes += 1;
    }
    Ok(passes)
}

/// Returns `H_m v` without touching `v`.
pub fn fwht(v: &[f64]) -> Result<Vec<f64>, TensorError> {
    let mut out = v.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_orders_match_definition() {
        assert_eq!(hadamard_matrix(0).unwrap(), Matrix::from_rows(&[[1.0]]).unwrap());
        assert_eq!(hadamard_matrix(1).unwrap(), Matrix::from_rows(&[[1.0, 1.0], [1.0, -1.0]]).unwrap());
    }

    #[test]
    fn recursion_agrees_with_popcount_formula() {
        let h = hadamard_matrix(6).unwrap();
        for i in 0..64 {
            for j in 0..64 {
                assert_eq!(h.get(i, j), hadamard_entry(i, j));
            }
        }
    }

    #[test]
    fn rejects_oversized_order() {
        assert_eq!(hadamard_matrix(17).unwrap_err(), TensorError::SizeLimit { order: 17, limit: 16 });
    }

    #[test]
    fn basis_vector_gives_column() {
        let out = fwht(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(out, vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn non_power_of_two_is_rejected() {
        assert_eq!(fwht(&[1.0; 6]).unwrap_err(), TensorError::NotPowerOfTwo { len: 6 });
        assert!(fwht(&[]).is_err());
    }
}
