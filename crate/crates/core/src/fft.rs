//! Radix-2 complex FFT and its row-column extension to 2-D and 3-D arrays.
//!
//! Forward transforms are unnormalized, inverse transforms carry the `1/N`
//! factor, so `inverse(forward(f)) == f`.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Complex64, Error, Result};

#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    twiddles: Vec<Complex64>,
    rev: Vec<u32>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::param("n", alloc::format!("FFT length {n} is not a power of two")));
        }
        let bits = n.trailing_zeros();
        let rev = (0..n as u32).map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) }).collect();
        let twiddles = (0..n / 2)
            .map(|k| {
                let theta = -2.0 * math::PI * k as f64 / n as f64;
                Complex64::new(math::cos(theta), math::sin(theta))
            })
            .collect();
        Ok(FftPlan { n, twiddles, rev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, false);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, true);
        let scale = 1.0 / self.n as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(buf.len(), n);
        for i in 0..n {
            let j = self.rev[i] as usize;
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * step];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }

    /// Transform a `dim`-dimensional cube stored row-major (last axis fastest).
    pub fn forward_nd(&self, data: &mut [Complex64], dim: usize) {
        self.transform_nd(data, dim, false);
    }

    pub fn inverse_nd(&self, data: &mut [Complex64], dim: usize) {
        self.transform_nd(data, dim, true);
    }

    fn transform_nd(&self, data: &mut [Complex64], dim: usize, inverse: bool) {
        let n = self.n;
        let total = data.len();
        debug_assert_eq!(total, n.pow(dim as u32));
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..dim {
            let stride = n.pow((dim - 1 - axis) as u32);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    if inverse {
                        self.inverse(chunk);
                    } else {
                        self.forward(chunk);
                    }
                }
                continue;
            }
            let block = n * stride;
            for base in (0..total).step_by(block) {
                for inner in 0..stride {
                    for (j, z) in line.iter_mut().enumerate() {
                        *z = data[base + inner + j * stride];
                    }
                    if inverse {
                        self.inverse(&mut line);
                    } else {
                        self.forward(&mut line);
                    }
                    for (j, z) in line.iter().enumerate() {
                        data[base + inner + j * stride] = *z;
                    }
                }
            }
        }
    }
}
