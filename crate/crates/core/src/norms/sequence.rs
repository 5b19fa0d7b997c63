//! Finitely supported sequences on `ℤ^n` with the weighted norms `ℓ^q_s`.

use rustfft::num_complex::Complex64;

use super::{weighted_lp, Exponent};
use crate::error::{Error, Result};
use crate::filterbank::bracket;
use crate::grid::plan;

/// Products of support sizes above this use the FFT path in [`WeightedSequence::convolve`].
const DIRECT_CONVOLUTION_LIMIT: usize = 1 << 14;

/// A sequence stored densely on the box `lower + [0, shape)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSequence {
    dim: usize,
    lower: [i64; 2],
    shape: [usize; 2],
    values: Vec<Complex64>,
}

impl WeightedSequence {
    pub fn new(dim: usize, lower: [i64; 2], shape: [usize; 2], values: Vec<Complex64>) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidArgument(format!("dimension {dim} not supported")));
        }
        let shape = if dim == 1 { [shape[0], 1] } else { shape };
        let lower = if dim == 1 { [lower[0], 0] } else { lower };
        if shape[0] * shape[1] != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for box {:?}",
                values.len(),
                shape
            )));
        }
        Ok(Self {
            dim,
            lower,
            shape,
            values,
        })
    }

    /// Samples `f` on the box `|k_i| ≤ radius`.
    pub fn from_fn(dim: usize, radius: usize, f: impl Fn([i64; 2]) -> Complex64) -> Result<Self> {
        let side = 2 * radius + 1;
        let r = radius as i64;
        let shape = if dim == 1 { [side, 1] } else { [side, side] };
        let mut values = Vec::with_capacity(shape[0] * shape[1]);
        for a in 0..shape[0] {
            for b in 0..shape[1] {
                let k1 = if dim == 1 { 0 } else { b as i64 - r };
                values.push(f([a as i64 - r, k1]));
            }
        }
        Self::new(dim, [-r, -r], shape, values)
    }

    pub fn delta(dim: usize) -> Self {
        Self::new(dim, [0, 0], [1, 1], vec![Complex64::new(1.0, 0.0)]).expect("unit box")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> [i64; 2] {
        self.lower
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, k: [i64; 2]) -> Complex64 {
        let a = k[0] - self.lower[0];
        let b = if self.dim == 1 { 0 } else { k[1] - self.lower[1] };
        if a < 0 || b < 0 || a as usize >= self.shape[0] || b as usize >= self.shape[1] {
            return Complex64::new(0.0, 0.0);
        }
        self.values[a as usize * self.shape[1] + b as usize]
    }

    /// `(k, a_k)` over the stored box.
    pub fn iter(&self) -> impl Iterator<Item = ([i64; 2], Complex64)> + '_ {
        let cols = self.shape[1];
        self.values.iter().enumerate().map(move |(i, &v)| {
            let k = [self.lower[0] + (i / cols) as i64, self.lower[1] + (i % cols) as i64];
            (k, v)
        })
    }

    /// `‖a‖_{ℓ^q_s} = ‖⟨k⟩^s a_k‖_{ℓ^q}`.
    pub fn norm(&self, q: Exponent, s: f64) -> f64 {
        let mags = self.iter().map(|(k, v)| {
            let w = if s == 0.0 {
                1.0
            } else {
                bracket([k[0] as f64, k[1] as f64]).powf(s)
            };
            w * v.norm()
        });
        weighted_lp(mags, 1.0, q)
    }

    fn product_box(&self, other: &Self) -> Result<([i64; 2], [usize; 2])> {
        if self.dim != other.dim {
            return Err(Error::InvalidArgument("sequence dimensions differ".into()));
        }
        let lower = [self.lower[0] + other.lower[0], self.lower[1] + other.lower[1]];
        let shape = [
            self.shape[0] + other.shape[0] - 1,
            self.shape[1] + other.shape[1] - 1,
        ];
        Ok((lower, shape))
    }

    /// `(a∗b)_k = Σ_m a_m b_{k−m}`.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        if self.values.len() * other.values.len() <= DIRECT_CONVOLUTION_LIMIT {
            self.convolve_direct(other)
        } else {
            self.convolve_fft(other)
        }
    }

    pub fn convolve_direct(&self, other: &Self) -> Result<Self> {
        let (lower, shape) = self.product_box(other)?;
        let mut out = vec![Complex64::new(0.0, 0.0); shape[0] * shape[1]];
        let (ac, bc) = (self.shape[1], other.shape[1]);
        for (i, &a) in self.values.iter().enumerate() {
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            let (ar, acol) = (i / ac, i % ac);
            for (j, &b) in other.values.iter().enumerate() {
                let (br, bcol) = (j / bc, j % bc);
                out[(ar + br) * shape[1] + acol + bcol] += a * b;
            }
        }
        Self::new(self.dim, lower, shape, out)
    }

    /// Zero-padded FFT convolution; agrees with the direct sum to rounding.
    pub fn convolve_fft(&self, other: &Self) -> Result<Self> {
        let (lower, shape) = self.product_box(other)?;
        let rows = shape[0].next_power_of_two();
        let cols = shape[1].next_power_of_two();
        let pad = |s: &Self| {
            let mut buf = vec![Complex64::new(0.0, 0.0); rows * cols];
            for (i, &v) in s.values.iter().enumerate() {
                buf[(i / s.shape[1]) * cols + i % s.shape[1]] = v;
            }
            buf
        };
        let mut a = pad(self);
        let mut b = pad(other);
        fft2(&mut a, rows, cols, false);
        fft2(&mut b, rows, cols, false);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= y;
        }
        fft2(&mut a, rows, cols, true);
        let scale = 1.0 / (rows * cols) as f64;
        let mut out = Vec::with_capacity(shape[0] * shape[1]);
        for r in 0..shape[0] {
            for c in 0..shape[1] {
                out.push(a[r * cols + c] * scale);
            }
        }
        Self::new(self.dim, lower, shape, out)
    }
}

fn fft2(buf: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    if cols > 1 {
        let p = plan(cols, inverse);
        for row in buf.chunks_mut(cols) {
            p.process(row);
        }
    }
    if rows > 1 {
        let p = plan(rows, inverse);
        let mut column = vec![Complex64::new(0.0, 0.0); rows];
        for c in 0..cols {
            for r in 0..rows {
                column[r] = buf[r * cols + c];
            }
            p.process(&mut column);
            for r in 0..rows {
                buf[r * cols + c] = column[r];
            }
        }
    }
}
