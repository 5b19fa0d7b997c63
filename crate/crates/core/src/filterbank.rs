//! Smooth dyadic partition of unity and Fourier multiplier operators.
//!
//! `φ` is radial, equal to 1 on `|ξ| ≤ 1/2` and 0 on `|ξ| ≥ 1`; `ψ = φ(·/2) − φ`.
//! Dilates are `φ_j = φ(·/2^j)`, `ψ_j = ψ(·/2^j) = φ_{j+1} − φ_j`, so every partial
//! sum telescopes: `φ + Σ_{j≤J} ψ_j = φ_{J+1}`.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{dft, idft, Domain, Grid, SampledFunction};

/// Smooth transition used to build the cutoff `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CutoffProfile {
    /// `h(t) = e^{-1/t}`.
    #[default]
    Exponential,
    /// `h(t) = e^{-1/t²}`; a second admissible profile for norm-equivalence checks.
    SquaredExponential,
}

impl CutoffProfile {
    fn transition(self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            CutoffProfile::Exponential => (-1.0 / t).exp(),
            CutoffProfile::SquaredExponential => (-1.0 / (t * t)).exp(),
        }
    }

    /// `φ(r) = h(1 − r) / (h(1 − r) + h(r − 1/2))` for `r = |ξ|`.
    pub fn phi(self, r: f64) -> f64 {
        if r <= 0.5 {
            return 1.0;
        }
        if r >= 1.0 {
            return 0.0;
        }
        let a = self.transition(1.0 - r);
        let b = self.transition(r - 0.5);
        a / (a + b)
    }

    /// `ψ(r) = φ(r/2) − φ(r)`, supported in `1/2 ≤ r ≤ 2`.
    pub fn psi(self, r: f64) -> f64 {
        self.phi(0.5 * r) - self.phi(r)
    }
}

/// Which Littlewood–Paley operator to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// `S_j = φ_j(D)`.
    LowPass,
    /// `Δ_j = ψ_j(D)`.
    Band,
}

/// Lattice evaluations of `φ_j` for one grid.
#[derive(Debug, Clone)]
pub struct FilterBank {
    grid: Grid,
    profile: CutoffProfile,
    radii: Vec<f64>,
    /// `phi_levels[j]` holds `φ_j` for `0 ≤ j ≤ J_max + 1`.
    phi_levels: Vec<Vec<f64>>,
    max_level: Option<usize>,
}

impl FilterBank {
    pub fn new(grid: Grid) -> Self {
        Self::with_profile(grid, CutoffProfile::default())
    }

    pub fn with_profile(grid: Grid, profile: CutoffProfile) -> Self {
        let radii: Vec<f64> = (0..grid.len()).map(|i| grid.frequency_norm(i)).collect();
        let max_level = grid.max_level();
        let top = max_level.map_or(1, |j| j + 1);
        let phi_levels = (0..=top)
            .map(|j| {
                let scale = (1u64 << j) as f64;
                radii.iter().map(|&r| profile.phi(r / scale)).collect()
            })
            .collect();
        Self {
            grid,
            profile,
            radii,
            phi_levels,
            max_level,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn profile(&self) -> CutoffProfile {
        self.profile
    }

    /// Largest `j` whose annulus sits below Nyquist.
    pub fn max_level(&self) -> Option<usize> {
        self.max_level
    }

    /// `|ξ|` at every lattice point.
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// `φ_j` on the lattice.
    pub fn phi_j(&self, j: usize) -> Vec<f64> {
        match self.phi_levels.get(j) {
            Some(v) => v.clone(),
            None => self.dilated_phi((1u64 << j.min(62)) as f64),
        }
    }

    /// `ψ_j = φ_{j+1} − φ_j` on the lattice.
    pub fn psi_j(&self, j: usize) -> Vec<f64> {
        let lo = self.phi_j(j);
        let hi = self.phi_j(j + 1);
        hi.iter().zip(&lo).map(|(h, l)| h - l).collect()
    }

    /// `φ(ξ / scale)` on the lattice.
    pub fn dilated_phi(&self, scale: f64) -> Vec<f64> {
        self.radii
            .iter()
            .map(|&r| self.profile.phi(r / scale))
            .collect()
    }

    /// `ψ(ξ / scale) = φ(ξ/(2·scale)) − φ(ξ/scale)` on the lattice.
    pub fn dilated_psi(&self, scale: f64) -> Vec<f64> {
        self.radii
            .iter()
            .map(|&r| self.profile.phi(r / (2.0 * scale)) - self.profile.phi(r / scale))
            .collect()
    }

    /// `S_j f` or `Δ_j f`.
    pub fn project(&self, f: &SampledFunction, j: usize, kind: Projection) -> Result<SampledFunction> {
        self.check_grid(f)?;
        match kind {
            Projection::LowPass => apply_real_multiplier(&self.phi_j(j), f),
            Projection::Band => {
                let jmax = self.max_level.ok_or_else(|| {
                    Error::CapabilityLimit("grid resolves no dyadic annulus".into())
                })?;
                if j > jmax {
                    return Err(Error::CapabilityLimit(format!(
                        "Δ_{j} lies beyond Nyquist (J_max = {jmax})"
                    )));
                }
                apply_real_multiplier(&self.psi_j(j), f)
            }
        }
    }

    pub fn low_pass(&self, f: &SampledFunction, j: usize) -> Result<SampledFunction> {
        self.project(f, j, Projection::LowPass)
    }

    pub fn band(&self, f: &SampledFunction, j: usize) -> Result<SampledFunction> {
        self.project(f, j, Projection::Band)
    }

    fn check_grid(&self, f: &SampledFunction) -> Result<()> {
        if *f.grid() != self.grid {
            Err(Error::GridMismatch)
        } else {
            Ok(())
        }
    }
}

/// `m(D) f = F^{-1}[m · F f]` for a multiplier given as frequency-domain samples.
pub fn fourier_multiplier(m: &SampledFunction, f: &SampledFunction) -> Result<SampledFunction> {
    m.expect_domain(Domain::Frequency)?;
    if m.grid() != f.grid() {
        return Err(Error::GridMismatch);
    }
    if m.values().iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite("multiplier"));
    }
    let spec = dft(f)?;
    idft(&spec.multiply(m)?)
}

/// `m(D) f` for a multiplier given as a callable on lattice frequencies.
pub fn multiplier_fn(
    f: &SampledFunction,
    m: impl Fn([f64; 2]) -> Complex64,
) -> Result<SampledFunction> {
    let symbol = SampledFunction::from_spectrum_fn(*f.grid(), m);
    fourier_multiplier(&symbol, f)
}

/// `m(D) f` for a real multiplier given as lattice values.
pub fn apply_real_multiplier(m: &[f64], f: &SampledFunction) -> Result<SampledFunction> {
    if m.len() != f.grid().len() {
        return Err(Error::GridMismatch);
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("multiplier"));
    }
    let mut spec = dft(f)?;
    for (z, &w) in spec.values_mut().iter_mut().zip(m) {
        *z *= w;
    }
    idft(&spec)
}

/// Japanese bracket `⟨ξ⟩ = (1 + |ξ|²)^{1/2}`.
pub fn bracket(xi: [f64; 2]) -> f64 {
    (1.0 + xi[0] * xi[0] + xi[1] * xi[1]).sqrt()
}

/// Bessel potential `(I − Δ)^{s/2} f`, the multiplier `⟨ξ⟩^s`.
pub fn bessel_potential(f: &SampledFunction, s: f64) -> Result<SampledFunction> {
    let grid = *f.grid();
    let m: Vec<f64> = (0..grid.len())
        .map(|i| bracket(grid.frequency(i)).powf(s))
        .collect();
    apply_real_multiplier(&m, f)
}

/// `∂^α f`, the multiplier `(iξ)^α`.
pub fn derivative(f: &SampledFunction, alpha: [u32; 2]) -> Result<SampledFunction> {
    let i = Complex64::new(0.0, 1.0);
    multiplier_fn(f, |xi| {
        (i * xi[0]).powu(alpha[0]) * (i * xi[1]).powu(alpha[1])
    })
}
