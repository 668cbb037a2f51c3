use super::{zero_init_matrix_scaled, HadamardScale, InitError};
use crate::tensor::Matrix;
use serde::{Deserialize, Serialize};

/// `c_out x c_in x k x k` convolution kernel, row-major in that order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel4D {
    c_out: usize,
    c_in: usize,
    k: usize,
    data: Vec<f64>,
}

impl Kernel4D {
    pub fn zeros(c_out: usize, c_in: usize, k: usize) -> Result<Self, InitError> {
        if c_out == 0 || c_in == 0 {
            return Err(InitError::EmptyShape { rows: c_out, cols: c_in });
        }
        if k % 2 == 0 {
            return Err(InitError::EvenKernel { k });
        }
        Ok(Self { c_out, c_in, k, data: vec![0.0; c_out * c_in * k * k] })
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn kernel_size(&self) -> usize {
        self.k
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn index(&self, o: usize, i: usize, h: usize, w: usize) -> usize {
        ((o * self.c_in + i) * self.k + h) * self.k + w
    }

    pub fn get(&self, o: usize, i: usize, h: usize, w: usize) -> f64 {
        self.data[self.index(o, i, h, w)]
    }

    pub fn set(&mut self, o: usize, i: usize, h: usize, w: usize, v: f64) {
        let idx = self.index(o, i, h, w);
        self.data[idx] = v;
    }

    /// The `c_out x c_in` slice at spatial position `(h, w)`.
    pub fn spatial_slice(&self, h: usize, w: usize) -> Matrix {
        Matrix::from_fn(self.c_out, self.c_in, |o, i| self.get(o, i, h, w))
    }

    pub fn center_slice(&self) -> Matrix {
        let n = self.k / 2;
        self.spatial_slice(n, n)
    }
}

/// ZerO for a convolution: zeros everywhere except the spatial centre, which
/// holds the ZerO matrix for `c_out x c_in`. The Hadamard order follows the
/// output channel count.
pub fn zero_init_conv(c_out: usize, c_in: usize, k: usize) -> Result<Kernel4D, InitError> {
    zero_init_conv_scaled(c_out, c_in, k, HadamardScale::HalfPower)
}

pub fn zero_init_conv_scaled(c_out: usize, c_in: usize, k: usize, scale: HadamardScale) -> Result<Kernel4D, InitError> {
    let mut kernel = Kernel4D::zeros(c_out, c_in, k)?;
    let centre = zero_init_matrix_scaled(c_out, c_in, scale)?;
    let n = k / 2;
    for o in 0..c_out {
        for i in 0..c_in {
            kernel.set(o, i, n, n, centre.get(o, i));
        }
    }
    Ok(kernel)
}
