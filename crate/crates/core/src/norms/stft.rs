//! Short-time Fourier transform `V_g f(x,ξ) = ∫ e^{-iξ·t} conj(g(t−x)) f(t) dt` and
//! the modulation-space norm built on it.
//!
//! Window translates wrap cyclically. The x-variable is subsampled with a stride, and
//! each retained position carries the Riemann weight `(stride·Δx)^n`.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::{weighted_lp, Exponent};
use crate::error::{Error, Result};
use crate::filterbank::{bracket, CutoffProfile};
use crate::grid::{fft_nd, Domain, Grid, SampledFunction};

/// x-positions handled per parallel work item; fixed so the summation order does
/// not depend on the thread count.
const POSITION_CHUNK: usize = 16;

/// The window `g` of the STFT together with its cached `L²` norm.
#[derive(Debug, Clone)]
pub struct WindowFunction {
    profile: SampledFunction,
    l2: f64,
}

impl WindowFunction {
    pub fn new(profile: SampledFunction) -> Result<Self> {
        profile.expect_domain(Domain::Space)?;
        let sup = profile.sup_norm();
        if sup == 0.0 {
            return Err(Error::InvalidArgument("window must be nonzero".into()));
        }
        if profile.boundary_max() > 1e-12 * sup {
            return Err(Error::BoundaryDecay {
                boundary: profile.boundary_max(),
                sup,
            });
        }
        let l2 = super::lp_norm(&profile, Exponent::TWO)?;
        Ok(Self { profile, l2 })
    }

    /// `g(t) = e^{-|t|²/2}`.
    pub fn gaussian(grid: Grid) -> Self {
        Self::new(crate::testfn::gaussian(grid)).expect("gaussian window fits any admissible box")
    }

    /// `g(t) = φ(|t|/R)`: smooth, equal to 1 on `|t| ≤ R/2`, supported in `|t| ≤ R`.
    pub fn bump(grid: Grid, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("window radius {radius}")));
        }
        let profile = CutoffProfile::Exponential;
        Self::new(SampledFunction::from_real_fn(grid, |t| {
            profile.phi(t[0].hypot(t[1]) / radius)
        }))
    }

    /// `φ(|t|/(4R))`, identically 1 on the support of `bump(R)` and its neighbourhood.
    pub fn plateau(grid: Grid, radius: f64) -> Result<Self> {
        Self::bump(grid, 4.0 * radius)
    }

    pub fn profile(&self) -> &SampledFunction {
        &self.profile
    }

    pub fn grid(&self) -> &Grid {
        self.profile.grid()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2
    }
}

/// `V_g f` on strided x-positions times the full frequency lattice.
#[derive(Debug, Clone)]
pub struct StftArray {
    grid: Grid,
    stride: usize,
    /// Row-major: one lattice-length row per x-position.
    values: Vec<Complex64>,
}

impl StftArray {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn positions(&self) -> usize {
        positions(&self.grid, self.stride)
    }

    /// Space coordinates of x-position `a`.
    pub fn position(&self, a: usize) -> [f64; 2] {
        self.grid.position(position_sample(&self.grid, self.stride, a))
    }

    /// `V_g f(x_a, ξ_k)` for position `a` and flat lattice index `k`.
    pub fn get(&self, a: usize, k: usize) -> Complex64 {
        self.values[a * self.grid.len() + k]
    }

    pub fn row(&self, a: usize) -> &[Complex64] {
        let n = self.grid.len();
        &self.values[a * n..(a + 1) * n]
    }
}

fn check_stride(grid: &Grid, stride: usize) -> Result<()> {
    let n = grid.points_per_axis();
    if stride == 0 || n % stride != 0 {
        return Err(Error::InvalidArgument(format!(
            "stride {stride} does not divide {n}"
        )));
    }
    Ok(())
}

fn positions(grid: &Grid, stride: usize) -> usize {
    (grid.points_per_axis() / stride).pow(grid.dim() as u32)
}

/// Flat sample index of strided position `a`.
fn position_sample(grid: &Grid, stride: usize, a: usize) -> usize {
    let n = grid.points_per_axis();
    match grid.dim() {
        1 => a * stride,
        _ => {
            let per_axis = n / stride;
            (a / per_axis) * stride * n + (a % per_axis) * stride
        }
    }
}

/// Fills `out` with the continuous-convention DFT of `t ↦ conj(g(t − x_a)) f(t)`.
fn windowed_spectrum(
    f: &[Complex64],
    window: &[Complex64],
    grid: &Grid,
    stride: usize,
    a: usize,
    out: &mut [Complex64],
) {
    let n = grid.points_per_axis();
    let shift = position_sample(grid, stride, a);
    let weight = grid.cell_volume();
    match grid.dim() {
        1 => {
            for (b, o) in out.iter_mut().enumerate() {
                let gi = (b + n + n / 2 - shift) % n;
                *o = window[gi].conj() * f[b];
            }
        }
        _ => {
            let (sr, sc) = (shift / n, shift % n);
            for r in 0..n {
                let gr = (r + n + n / 2 - sr) % n;
                for c in 0..n {
                    let gc = (c + n + n / 2 - sc) % n;
                    out[r * n + c] = window[gr * n + gc].conj() * f[r * n + c];
                }
            }
        }
    }
    fft_nd(out, grid, false);
    for (k, o) in out.iter_mut().enumerate() {
        let [k0, k1] = grid.wavenumbers(k);
        let sign = if (k0 + k1).rem_euclid(2) == 0 { weight } else { -weight };
        *o *= sign;
    }
}

fn check_inputs(f: &SampledFunction, window: &WindowFunction, stride: usize) -> Result<()> {
    f.expect_domain(Domain::Space)?;
    if f.grid() != window.grid() {
        return Err(Error::GridMismatch);
    }
    check_stride(f.grid(), stride)
}

pub fn stft(f: &SampledFunction, window: &WindowFunction, stride: usize) -> Result<StftArray> {
    check_inputs(f, window, stride)?;
    let grid = *f.grid();
    let len = grid.len();
    let count = positions(&grid, stride);
    let mut values = vec![Complex64::new(0.0, 0.0); count * len];
    values
        .par_chunks_mut(len)
        .enumerate()
        .for_each(|(a, row)| {
            windowed_spectrum(f.values(), window.profile.values(), &grid, stride, a, row)
        });
    Ok(StftArray {
        grid,
        stride,
        values,
    })
}

/// Inner `L^p_x` sums per lattice point, before the `1/p` root.
struct InnerSums {
    sums: Vec<f64>,
}

fn accumulate(acc: &mut [f64], row: &[Complex64], p: Exponent) {
    let pv = p.value();
    if p.is_infinite() {
        for (a, z) in acc.iter_mut().zip(row) {
            *a = a.max(z.norm());
        }
    } else if pv == 2.0 {
        for (a, z) in acc.iter_mut().zip(row) {
            *a += z.norm_sqr();
        }
    } else if pv == 1.0 {
        for (a, z) in acc.iter_mut().zip(row) {
            *a += z.norm();
        }
    } else {
        let half = 0.5 * pv;
        for (a, z) in acc.iter_mut().zip(row) {
            *a += z.norm_sqr().powf(half);
        }
    }
}

fn merge(into: &mut [f64], from: &[f64], p: Exponent) {
    if p.is_infinite() {
        for (a, b) in into.iter_mut().zip(from) {
            *a = a.max(*b);
        }
    } else {
        for (a, b) in into.iter_mut().zip(from) {
            *a += b;
        }
    }
}

fn finish(inner: InnerSums, grid: &Grid, stride: usize, p: Exponent, q: Exponent, s: f64) -> f64 {
    let x_weight = (stride as f64 * grid.spacing()).powi(grid.dim() as i32);
    let per_freq = inner.sums.iter().enumerate().map(|(k, &sum)| {
        let inner_norm = if p.is_infinite() {
            sum
        } else {
            (sum * x_weight).powf(p.reciprocal())
        };
        if s == 0.0 {
            inner_norm
        } else {
            bracket(grid.frequency(k)).powf(s) * inner_norm
        }
    });
    weighted_lp(per_freq, grid.freq_cell_volume(), q)
}

/// `‖f‖_{M^{p,q}_s}` with window `g` and x-stride `stride`, streaming over positions.
pub fn modulation_norm(
    f: &SampledFunction,
    p: Exponent,
    q: Exponent,
    s: f64,
    window: &WindowFunction,
    stride: usize,
) -> Result<f64> {
    check_inputs(f, window, stride)?;
    let grid = *f.grid();
    let len = grid.len();
    let count = positions(&grid, stride);
    let chunks: Vec<Vec<f64>> = (0..count.div_ceil(POSITION_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; len];
            let mut row = vec![Complex64::new(0.0, 0.0); len];
            let end = ((c + 1) * POSITION_CHUNK).min(count);
            for a in c * POSITION_CHUNK..end {
                windowed_spectrum(f.values(), window.profile.values(), &grid, stride, a, &mut row);
                accumulate(&mut acc, &row, p);
            }
            acc
        })
        .collect();
    let mut sums = vec![0.0; len];
    for c in &chunks {
        merge(&mut sums, c, p);
    }
    Ok(finish(InnerSums { sums }, &grid, stride, p, q, s))
}

/// The same norm evaluated from a precomputed STFT array.
pub fn modulation_norm_of_array(v: &StftArray, p: Exponent, q: Exponent, s: f64) -> f64 {
    let mut sums = vec![0.0; v.grid.len()];
    for a in 0..v.positions() {
        accumulate(&mut sums, v.row(a), p);
    }
    finish(InnerSums { sums }, &v.grid, v.stride, p, q, s)
}
