//! Periodic sampling grids and the continuous-convention discrete Fourier transform.
//!
//! The box `[-T/2, T/2)^n` is sampled with `2^M` points per axis. Spectra live on the
//! lattice `k·Δξ`, `Δξ = 2π/T`, stored in FFT order (non-negative wavenumbers first).
//! The transforms are Riemann sums of
//!
//! ```text
//! F f(ξ)    = ∫ e^{-iξ·x} f(x) dx
//! F^{-1} F(x) = (2π)^{-n} ∫ e^{ix·ξ} F(ξ) dξ
//! ```
//!
//! so norms computed on either side carry the same constants as on `R^n`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const MIN_LOG2: u32 = 3;
const MAX_LOG2: u32 = 14;

/// Relative size of the boundary shell allowed by [`SampledFunction::check_boundary_decay`].
pub const BOUNDARY_DECAY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    period: f64,
    log2_size: u32,
}

impl Grid {
    pub fn new(dim: usize, period: f64, log2_size: u32) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(Error::InvalidGrid(format!(
                "dimension {dim} unsupported (1 or 2)"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidGrid(format!("period {period} must be > 0")));
        }
        if log2_size < MIN_LOG2 {
            return Err(Error::InvalidGrid(format!(
                "2^{log2_size} points per axis is below the minimum 2^{MIN_LOG2}"
            )));
        }
        if log2_size > MAX_LOG2 {
            return Err(Error::InvalidGrid(format!(
                "size cap exceeded: 2^{log2_size} > 2^{MAX_LOG2} points per axis"
            )));
        }
        Ok(Self {
            dim,
            period,
            log2_size,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn log2_size(&self) -> u32 {
        self.log2_size
    }

    /// Points per axis, `2^M`.
    pub fn points_per_axis(&self) -> usize {
        1 << self.log2_size
    }

    /// Total number of samples, `(2^M)^n`.
    pub fn len(&self) -> usize {
        self.points_per_axis().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Δx = T / 2^M.
    pub fn spacing(&self) -> f64 {
        self.period / self.points_per_axis() as f64
    }

    /// Δξ = 2π / T.
    pub fn freq_step(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// Δx^n, the Riemann weight of one space sample.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Δξ^n, the Riemann weight of one lattice point.
    pub fn freq_cell_volume(&self) -> f64 {
        self.freq_step().powi(self.dim as i32)
    }

    /// Largest lattice frequency along one axis, `2^{M-1}·Δξ`.
    pub fn nyquist(&self) -> f64 {
        (self.points_per_axis() / 2) as f64 * self.freq_step()
    }

    /// Largest `j` such that the annulus `2^{j-1} ≤ |ξ| ≤ 2^{j+1}` fits below the
    /// per-axis Nyquist frequency. Returns `None` when not even `j = 0` fits.
    pub fn max_level(&self) -> Option<usize> {
        let top = self.nyquist().log2().floor() as i64 - 1;
        (top >= 0).then_some(top as usize)
    }

    /// Same box, twice the points per axis.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.dim, self.period, self.log2_size + 1)
    }

    /// The grid whose sample points coincide with this grid's frequency lattice.
    /// Used to measure multipliers `m(ξ)` with space-side norms.
    pub fn dual(&self) -> Self {
        Self {
            dim: self.dim,
            period: self.points_per_axis() as f64 * self.freq_step(),
            log2_size: self.log2_size,
        }
    }

    fn axis_indices(&self, flat: usize) -> [usize; 2] {
        let n = self.points_per_axis();
        match self.dim {
            1 => [flat, 0],
            _ => [flat / n, flat % n],
        }
    }

    /// Signed wavenumber of an FFT-ordered index along one axis.
    pub fn wavenumber(&self, axis_index: usize) -> i64 {
        let n = self.points_per_axis();
        if axis_index < n / 2 {
            axis_index as i64
        } else {
            axis_index as i64 - n as i64
        }
    }

    /// Signed wavenumber vector of a flat lattice index (unused axis is zero).
    pub fn wavenumbers(&self, flat: usize) -> [i64; 2] {
        let [a, b] = self.axis_indices(flat);
        match self.dim {
            1 => [self.wavenumber(a), 0],
            _ => [self.wavenumber(a), self.wavenumber(b)],
        }
    }

    /// Space coordinates of a flat sample index (unused axis is zero).
    pub fn position(&self, flat: usize) -> [f64; 2] {
        let h = self.spacing();
        let origin = -0.5 * self.period;
        let [a, b] = self.axis_indices(flat);
        match self.dim {
            1 => [origin + a as f64 * h, 0.0],
            _ => [origin + a as f64 * h, origin + b as f64 * h],
        }
    }

    /// Lattice frequency vector of a flat index.
    pub fn frequency(&self, flat: usize) -> [f64; 2] {
        let [k0, k1] = self.wavenumbers(flat);
        let d = self.freq_step();
        [k0 as f64 * d, k1 as f64 * d]
    }

    /// `|ξ|` at a flat lattice index.
    pub fn frequency_norm(&self, flat: usize) -> f64 {
        let [a, b] = self.frequency(flat);
        a.hypot(b)
    }

    /// Flat index of the lattice point with the given wavenumbers, if representable.
    pub fn lattice_index(&self, k: [i64; 2]) -> Option<usize> {
        let n = self.points_per_axis() as i64;
        let half = n / 2;
        let wrap = |k: i64| -> Option<usize> {
            (-half..half)
                .contains(&k)
                .then(|| k.rem_euclid(n) as usize)
        };
        match self.dim {
            1 => (k[1] == 0).then(|| wrap(k[0])).flatten(),
            _ => Some(wrap(k[0])? * n as usize + wrap(k[1])?),
        }
    }

    /// Flat index of the sample nearest to the given point (per axis, rounding down ties).
    pub fn nearest_index(&self, x: [f64; 2]) -> usize {
        let n = self.points_per_axis();
        let idx = |x: f64| -> usize {
            let i = ((x + 0.5 * self.period) / self.spacing()).round() as i64;
            i.rem_euclid(n as i64) as usize
        };
        match self.dim {
            1 => idx(x[0]),
            _ => idx(x[0]) * n + idx(x[1]),
        }
    }

    /// Whether a flat sample index lies in the outer shell used by the boundary guard.
    pub fn in_boundary_shell(&self, flat: usize) -> bool {
        let n = self.points_per_axis();
        let width = (n / 64).max(1);
        let near = |i: usize| i < width || i >= n - width;
        let [a, b] = self.axis_indices(flat);
        match self.dim {
            1 => near(a),
            _ => near(a) || near(b),
        }
    }

    fn sign(&self, flat: usize) -> f64 {
        let [a, b] = self.axis_indices(flat);
        if (a + b) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Space,
    Frequency,
}

impl Domain {
    fn name(self) -> &'static str {
        match self {
            Domain::Space => "space",
            Domain::Frequency => "frequency",
        }
    }
}

/// Complex samples on a grid, tagged with the side of the transform they live on.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: Grid,
    values: Vec<Complex64>,
    domain: Domain,
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<Complex64>, domain: Domain) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            domain,
        })
    }

    pub fn zeros(grid: Grid, domain: Domain) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            domain,
        }
    }

    /// Samples `f(x)` at every space grid point.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self {
            grid,
            values,
            domain: Domain::Space,
        }
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    /// Evaluates `F(ξ)` at every lattice point, giving a frequency-domain function.
    pub fn from_spectrum_fn(grid: Grid, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.frequency(i))).collect();
        Self {
            grid,
            values,
            domain: Domain::Frequency,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn expect_domain(&self, domain: Domain) -> Result<()> {
        if self.domain == domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch {
                expected: domain.name(),
                found: self.domain.name(),
            })
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.domain != other.domain {
            return Err(Error::DomainMismatch {
                expected: self.domain.name(),
                found: other.domain.name(),
            });
        }
        Ok(())
    }

    /// Applies a scalar map value-wise.
    pub fn map(&self, op: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&z| op(z)).collect(),
            domain: self.domain,
        }
    }

    /// Applies a real scalar map to the real part of every sample.
    pub fn map_real(&self, op: impl Fn(f64) -> f64) -> Self {
        self.map(|z| Complex64::new(op(z.re), 0.0))
    }

    /// Applies a binary map value-wise to two functions on the same grid and domain.
    pub fn zip_with(
        &self,
        other: &Self,
        op: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| op(a, b))
                .collect(),
            domain: self.domain,
        })
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        self.map(|z| z * factor)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// True when every imaginary part is below `tol` (absolute).
    pub fn is_real(&self, tol: f64) -> bool {
        self.max_imag() <= tol
    }

    /// Drops imaginary parts.
    pub fn real_part(&self) -> Self {
        self.map(|z| Complex64::new(z.re, 0.0))
    }

    /// Largest modulus on the outer shell of the box.
    pub fn boundary_max(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.in_boundary_shell(*i))
            .map(|(_, z)| z.norm())
            .fold(0.0, f64::max)
    }

    /// Fails unless the function is negligible on the boundary shell, i.e. the
    /// torus is a faithful stand-in for `R^n`.
    pub fn check_boundary_decay(&self) -> Result<()> {
        self.expect_domain(Domain::Space)?;
        let sup = self.sup_norm();
        let boundary = self.boundary_max();
        if boundary <= BOUNDARY_DECAY_TOL * sup {
            Ok(())
        } else {
            Err(Error::BoundaryDecay { boundary, sup })
        }
    }

    /// Whether `F(-ξ) = conj F(ξ)` holds to `tol` relative to the sup norm.
    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        let scale = self.sup_norm().max(f64::MIN_POSITIVE);
        (0..self.grid.len()).all(|i| {
            let [k0, k1] = self.grid.wavenumbers(i);
            match self.grid.lattice_index([-k0, -k1]) {
                Some(j) => (self.values[j] - self.values[i].conj()).norm() <= tol * scale,
                None => true,
            }
        })
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Unnormalized n-dimensional FFT in place (row-major layout).
pub(crate) fn fft_nd(values: &mut [Complex64], grid: &Grid, inverse: bool) {
    let n = grid.points_per_axis();
    let fft = plan(n, inverse);
    fft.process(values);
    if grid.dim() == 2 {
        let mut column = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                column[r] = values[r * n + c];
            }
            fft.process(&mut column);
            for r in 0..n {
                values[r * n + c] = column[r];
            }
        }
    }
}

/// Forward transform `F̂(ξ_k) = Σ_x f(x) e^{-iξ_k·x} Δx^n`.
pub fn dft(f: &SampledFunction) -> Result<SampledFunction> {
    f.expect_domain(Domain::Space)?;
    let grid = f.grid;
    let mut values = f.values.clone();
    fft_nd(&mut values, &grid, false);
    let w = grid.cell_volume();
    for (i, v) in values.iter_mut().enumerate() {
        *v *= grid.sign(i) * w;
    }
    Ok(SampledFunction {
        grid,
        values,
        domain: Domain::Frequency,
    })
}

/// Inverse transform `f(x) = (2π)^{-n} Σ_k F(ξ_k) e^{iξ_k·x} Δξ^n`.
pub fn idft(spectrum: &SampledFunction) -> Result<SampledFunction> {
    spectrum.expect_domain(Domain::Frequency)?;
    let grid = spectrum.grid;
    let w = grid.freq_cell_volume() / (2.0 * PI).powi(grid.dim() as i32);
    let mut values: Vec<Complex64> = spectrum
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| v * (grid.sign(i) * w))
        .collect();
    fft_nd(&mut values, &grid, true);
    Ok(SampledFunction {
        grid,
        values,
        domain: Domain::Space,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn grid_arithmetic() {
        let g = Grid::new(1, 2.0 * PI, 3).unwrap();
        assert_eq!(g.points_per_axis(), 8);
        assert_relative_eq!(g.spacing(), PI / 4.0, epsilon = 1e-15);
        assert_relative_eq!(g.freq_step(), 1.0, epsilon = 1e-15);

        let g = Grid::new(2, 16.0 * PI, 6).unwrap();
        assert_eq!(g.len(), 64 * 64);
        assert_relative_eq!(g.freq_step(), 0.125, epsilon = 1e-15);
        assert_relative_eq!(
            g.spacing() * g.freq_step() * 64.0,
            2.0 * PI,
            epsilon = 1e-14
        );
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(matches!(
            Grid::new(1, 2.0 * PI, 15),
            Err(Error::InvalidGrid(msg)) if msg.contains("size cap")
        ));
        assert!(Grid::new(3, 1.0, 4).is_err());
        assert!(Grid::new(0, 1.0, 4).is_err());
        assert!(Grid::new(1, 0.0, 4).is_err());
        assert!(Grid::new(1, -1.0, 4).is_err());
        assert!(Grid::new(1, 1.0, 2).is_err());
    }

    #[test]
    fn lattice_bounds() {
        let g = Grid::new(1, 2.0 * PI, 4).unwrap();
        let ks: Vec<i64> = (0..16).map(|i| g.wavenumber(i)).collect();
        assert_eq!(*ks.iter().min().unwrap(), -8);
        assert_eq!(*ks.iter().max().unwrap(), 7);
        assert_eq!(g.lattice_index([8, 0]), None);
        assert_eq!(g.lattice_index([-8, 0]), Some(8));
        assert_eq!(g.lattice_index([-1, 0]), Some(15));
    }

    #[test]
    fn max_level_tracks_nyquist() {
        // T = 2π: Nyquist 2^{M-1}, so J_max = M - 2.
        for m in 3..=12 {
            let g = Grid::new(1, 2.0 * PI, m).unwrap();
            assert_eq!(g.max_level(), Some(m as usize - 2));
        }
        let g = Grid::new(1, 64.0 * PI, 12).unwrap();
        assert_relative_eq!(g.nyquist(), 64.0, epsilon = 1e-12);
        assert_eq!(g.max_level(), Some(5));
    }

    #[test]
    fn constant_has_delta_spectrum() {
        let g = Grid::new(1, 2.0 * PI, 4).unwrap();
        let f = SampledFunction::from_fn(g, |_| c(1.0));
        let s = dft(&f).unwrap();
        for (i, v) in s.values().iter().enumerate() {
            let expect = if i == 0 { 2.0 * PI } else { 0.0 };
            assert!((v - c(expect)).norm() < 1e-13, "index {i}: {v}");
        }
        let back = idft(&s).unwrap();
        for v in back.values() {
            assert!((v - c(1.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn pure_mode_spectrum() {
        let g = Grid::new(1, 2.0 * PI, 4).unwrap();
        let f = SampledFunction::from_fn(g, |x| Complex64::from_polar(1.0, 3.0 * x[0]));
        let s = dft(&f).unwrap();
        let at3 = g.lattice_index([3, 0]).unwrap();
        for (i, v) in s.values().iter().enumerate() {
            let expect = if i == at3 { 2.0 * PI } else { 0.0 };
            assert!((v - c(expect)).norm() < 1e-13, "index {i}: {v}");
        }
    }

    #[test]
    fn gaussian_transform_pair() {
        let g = Grid::new(1, 32.0 * PI, 10).unwrap();
        let spec = SampledFunction::from_spectrum_fn(g, |xi| {
            c((2.0 * PI).sqrt() * (-0.5 * xi[0] * xi[0]).exp())
        });
        let f = idft(&spec).unwrap();
        for (i, v) in f.values().iter().enumerate() {
            let x = g.position(i)[0];
            assert!((v - c((-0.5 * x * x).exp())).norm() < 1e-10);
        }
    }

    #[test]
    fn domain_tags_are_enforced() {
        let g = Grid::new(1, 2.0 * PI, 4).unwrap();
        let f = SampledFunction::zeros(g, Domain::Space);
        assert!(matches!(idft(&f), Err(Error::DomainMismatch { .. })));
        let s = SampledFunction::zeros(g, Domain::Frequency);
        assert!(matches!(dft(&s), Err(Error::DomainMismatch { .. })));
        assert!(matches!(f.multiply(&s), Err(Error::DomainMismatch { .. })));
    }

    #[test]
    fn pointwise_products() {
        let g = Grid::new(1, 2.0 * PI, 5).unwrap();
        let e1 = SampledFunction::from_fn(g, |x| Complex64::from_polar(1.0, x[0]));
        let e2 = SampledFunction::from_fn(g, |x| Complex64::from_polar(1.0, 2.0 * x[0]));
        let e3 = SampledFunction::from_fn(g, |x| Complex64::from_polar(1.0, 3.0 * x[0]));
        let prod = e1.multiply(&e2).unwrap();
        for (a, b) in prod.values().iter().zip(e3.values()) {
            assert!((a - b).norm() < 1e-14);
        }
        let zero = SampledFunction::zeros(g, Domain::Space);
        assert_eq!(e1.multiply(&zero).unwrap().sup_norm(), 0.0);

        let other = Grid::new(1, 4.0 * PI, 5).unwrap();
        let h = SampledFunction::zeros(other, Domain::Space);
        assert!(matches!(e1.multiply(&h), Err(Error::GridMismatch)));
    }

    #[test]
    fn boundary_guard() {
        let g = Grid::new(1, 32.0 * PI, 10).unwrap();
        let gauss = SampledFunction::from_real_fn(g, |x| (-0.5 * x[0] * x[0]).exp());
        assert!(gauss.check_boundary_decay().is_ok());
        let flat = SampledFunction::from_real_fn(g, |_| 1.0);
        assert!(matches!(
            flat.check_boundary_decay(),
            Err(Error::BoundaryDecay { .. })
        ));
    }

    #[test]
    fn two_dimensional_pure_mode() {
        let g = Grid::new(2, 2.0 * PI, 4).unwrap();
        let f = SampledFunction::from_fn(g, |x| Complex64::from_polar(1.0, 2.0 * x[0] - x[1]));
        let s = dft(&f).unwrap();
        let idx = g.lattice_index([2, -1]).unwrap();
        let area = (2.0 * PI).powi(2);
        for (i, v) in s.values().iter().enumerate() {
            let expect = if i == idx { area } else { 0.0 };
            assert!((v - c(expect)).norm() < 1e-11, "index {i}: {v}");
        }
        let back = idft(&s).unwrap();
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
