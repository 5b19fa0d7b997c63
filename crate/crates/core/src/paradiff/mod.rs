//! Paradifferential decomposition of a composition `G(f)`:
//!
//! ```text
//! G(f) = G(S_0 f) + Σ_j q_j·Δ_j f + Σ_j Σ_m p_{j,m}·Δ_j f
//! m_j  = ∫_0^1 G'(S_j f + t Δ_j f) dt
//! q_j  = φ(D/(C 2^j)) m_j,   p_{j,m} = ψ(D/(C 2^{j+m})) m_j
//! ```
//!
//! The outer sum stops at `J`, the inner at `M_max`. The inner sum is exact on the
//! lattice once `C·2^{j+M_max}` reaches the largest lattice frequency; the outer one
//! leaves the tail `G(f) − G(S_{J+1} f)`, which [`decompose`] reports.

mod nonlinearity;

pub use nonlinearity::{
    factor_h, finite_difference_error, taylor_split, CosMinusOne, FlatExp, HFactor, Nonlinearity,
    Polynomial, RationalSquare, ScalarNonlinearity, Sine, TaylorRemainder, TaylorSplit, Zero,
    FLAT_ORDER, SMOOTH_ORDER,
};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::filterbank::FilterBank;
use crate::grid::{dft, idft, Domain, Grid, SampledFunction};
use crate::quadrature::UnitRule;

/// Imaginary parts above this reject an input as complex-valued.
pub const REAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionConfig {
    /// Dilation constant of the `q_j`/`p_{j,m}` split.
    pub c: f64,
    /// Outer truncation: `j = 0..=J`.
    pub j: usize,
    /// Inner truncation: `m = 0..=M_max`.
    pub m_max: usize,
    /// Gauss–Legendre points for the `m_j` integral.
    pub quad_order: usize,
}

impl DecompositionConfig {
    pub const DEFAULT_C: f64 = 8.0;
    pub const DEFAULT_QUAD_ORDER: usize = 8;

    /// `J = J_max − 1` and the smallest admissible `M_max`.
    pub fn for_grid(grid: &Grid) -> Result<Self> {
        let jmax = top_level(grid)?;
        let c = Self::DEFAULT_C;
        Ok(Self {
            c,
            j: jmax - 1,
            m_max: Self::required_m_max(grid, c, 0),
            quad_order: Self::DEFAULT_QUAD_ORDER,
        })
    }

    /// Smallest `M` with `C·2^{j+M}` at least the largest lattice `|ξ|`, so that
    /// `φ(·/(C2^j)) + Σ_{m≤M} ψ(·/(C2^{j+m})) = φ(·/(C2^{j+M+1}))` is 1 everywhere.
    pub fn required_m_max(grid: &Grid, c: f64, j: usize) -> usize {
        let top = max_frequency(grid);
        let mut m = 0;
        while c * 2f64.powi((j + m) as i32) < top {
            m += 1;
        }
        m
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.c >= 2.0) {
            return Err(Error::InvalidArgument(format!("C = {} must be ≥ 2", self.c)));
        }
        if self.quad_order < 4 {
            return Err(Error::InvalidArgument(format!(
                "quadrature order {} must be ≥ 4",
                self.quad_order
            )));
        }
        let jmax = top_level(grid)?;
        if self.j + 1 > jmax {
            return Err(Error::CapabilityLimit(format!(
                "J = {} exceeds J_max − 1 = {} on this grid",
                self.j,
                jmax as i64 - 1
            )));
        }
        Ok(())
    }
}

fn top_level(grid: &Grid) -> Result<usize> {
    match grid.max_level() {
        Some(j) if j >= 1 => Ok(j),
        _ => Err(Error::CapabilityLimit(
            "grid resolves fewer than two dyadic annuli".into(),
        )),
    }
}

fn max_frequency(grid: &Grid) -> f64 {
    grid.nyquist() * (grid.dim() as f64).sqrt()
}

fn check_real(f: &SampledFunction) -> Result<()> {
    f.expect_domain(Domain::Space)?;
    let imag = f.max_imag();
    if imag > REAL_TOL {
        return Err(Error::Precondition(format!(
            "f must be real-valued (max imaginary part {imag:e})"
        )));
    }
    Ok(())
}

/// `G(f)` pointwise for real `f`.
pub fn compose(g: &dyn Nonlinearity, f: &SampledFunction) -> SampledFunction {
    f.map_real(|t| g.eval(t))
}

fn real_parts(f: &SampledFunction) -> Vec<f64> {
    f.values().iter().map(|z| z.re).collect()
}

/// `m_j = ∫_0^1 G'(S_j f + tΔ_j f) dt` by Gauss–Legendre quadrature.
pub fn compute_mj(
    g: &dyn Nonlinearity,
    f: &SampledFunction,
    j: usize,
    cfg: &DecompositionConfig,
    bank: &FilterBank,
) -> Result<SampledFunction> {
    check_real(f)?;
    let jmax = top_level(bank.grid())?;
    if j + 1 > jmax {
        return Err(Error::CapabilityLimit(format!(
            "m_{j} needs j ≤ J_max − 1 = {}",
            jmax - 1
        )));
    }
    let low = real_parts(&bank.low_pass(f, j)?);
    let band = real_parts(&bank.band(f, j)?);
    mj_from_parts(g, &low, &band, cfg, f.grid())
}

fn mj_from_parts(
    g: &dyn Nonlinearity,
    low: &[f64],
    band: &[f64],
    cfg: &DecompositionConfig,
    grid: &Grid,
) -> Result<SampledFunction> {
    let rule = UnitRule::new(cfg.quad_order)?;
    let values = low
        .iter()
        .zip(band)
        .map(|(&a, &d)| {
            let v = rule.integrate(|t| g.deriv(1, a + t * d));
            Complex64::new(v, 0.0)
        })
        .collect();
    SampledFunction::new(*grid, values, Domain::Space)
}

/// `(q_j, [p_{j,0}, …, p_{j,M_max}])`.
pub fn split_mj(
    mj: &SampledFunction,
    j: usize,
    cfg: &DecompositionConfig,
    bank: &FilterBank,
) -> Result<(SampledFunction, Vec<SampledFunction>)> {
    let grid = *bank.grid();
    if mj.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    let need = DecompositionConfig::required_m_max(&grid, cfg.c, j);
    if cfg.m_max < need {
        return Err(Error::Precondition(format!(
            "M_max = {} leaves part of the lattice uncovered at j = {j}; need {need}",
            cfg.m_max
        )));
    }
    let spec = dft(mj)?;
    let masked = |mask: Vec<f64>| -> Result<SampledFunction> {
        let mut s = spec.clone();
        for (z, w) in s.values_mut().iter_mut().zip(mask) {
            *z *= w;
        }
        idft(&s)
    };
    let base = cfg.c * 2f64.powi(j as i32);
    let q = masked(bank.dilated_phi(base))?;
    let p = (0..=cfg.m_max)
        .map(|m| masked(bank.dilated_psi(base * 2f64.powi(m as i32))))
        .collect::<Result<Vec<_>>>()?;
    Ok((q, p))
}

#[derive(Debug, Clone)]
pub struct ParadiffDecomposition {
    /// `G(S_0 f)`.
    pub base: SampledFunction,
    /// `Δ_j f` for `j = 0..=J`.
    pub bands: Vec<SampledFunction>,
    pub m_terms: Vec<SampledFunction>,
    pub q_terms: Vec<SampledFunction>,
    /// `p_terms[j][m] = p_{j,m}`.
    pub p_terms: Vec<Vec<SampledFunction>>,
    pub config: DecompositionConfig,
    /// `‖G(f) − G(S_{J+1} f)‖_∞`.
    pub j_tail: f64,
    /// `‖m_j − q_j − Σ_m p_{j,m}‖_∞` per `j`.
    pub m_tails: Vec<f64>,
    /// `‖f − S_J f‖_∞ / ‖f‖_∞`.
    pub input_tail: f64,
}

impl ParadiffDecomposition {
    pub fn grid(&self) -> &Grid {
        self.base.grid()
    }

    /// `G(S_0 f) + Σ_j q_j Δ_j f + Σ_{j,m} p_{j,m} Δ_j f` in a fixed summation order.
    pub fn reconstruct(&self) -> SampledFunction {
        let mut out = self.base.clone();
        for (j, band) in self.bands.iter().enumerate() {
            let add = |out: &mut SampledFunction, term: &SampledFunction| {
                for ((o, t), d) in out.values_mut().iter_mut().zip(term.values()).zip(band.values()) {
                    *o += t * d;
                }
            };
            add(&mut out, &self.q_terms[j]);
            for p in &self.p_terms[j] {
                add(&mut out, p);
            }
        }
        out
    }

    /// `G(S_0 f) + Σ_j m_j Δ_j f`, which telescopes to `G(S_{J+1} f)`.
    pub fn telescoped(&self) -> SampledFunction {
        let mut out = self.base.clone();
        for (m, band) in self.m_terms.iter().zip(&self.bands) {
            for ((o, a), d) in out.values_mut().iter_mut().zip(m.values()).zip(band.values()) {
                *o += a * d;
            }
        }
        out
    }

    /// Fraction of the spectral energy of `q_j·Δ_j f` outside `|ξ| ≤ C·2^{j+1}`.
    pub fn q_leakage(&self, j: usize) -> Result<f64> {
        let r = self.config.c * 2f64.powi(j as i32 + 1);
        energy_outside(&self.q_terms[j].multiply(&self.bands[j])?, |k| k <= r)
    }

    /// Fraction of the spectral energy of `p_{j,m}·Δ_j f` outside
    /// `C·2^{j+m−2} ≤ |ξ| ≤ C·2^{j+m+2}`.
    pub fn p_leakage(&self, j: usize, m: usize) -> Result<f64> {
        let c = self.config.c * 2f64.powi((j + m) as i32);
        let (lo, hi) = (c / 4.0, c * 4.0);
        energy_outside(&self.p_terms[j][m].multiply(&self.bands[j])?, |k| {
            lo <= k && k <= hi
        })
    }
}

/// `Σ_{outside} |F h|² / Σ |F h|²`, or 0 for `h = 0`.
pub fn energy_outside(h: &SampledFunction, inside: impl Fn(f64) -> bool) -> Result<f64> {
    let spec = dft(h)?;
    let grid = *h.grid();
    let (mut total, mut out) = (0.0, 0.0);
    for (i, z) in spec.values().iter().enumerate() {
        let e = z.norm_sqr();
        total += e;
        if !inside(grid.frequency_norm(i)) {
            out += e;
        }
    }
    Ok(if total == 0.0 { 0.0 } else { out / total })
}

pub fn decompose(
    g: &dyn Nonlinearity,
    f: &SampledFunction,
    cfg: &DecompositionConfig,
    bank: &FilterBank,
) -> Result<ParadiffDecomposition> {
    check_real(f)?;
    if f.grid() != bank.grid() {
        return Err(Error::GridMismatch);
    }
    f.check_boundary_decay()?;
    decompose_unguarded(g, f, cfg, bank)
}

fn decompose_unguarded(
    g: &dyn Nonlinearity,
    f: &SampledFunction,
    cfg: &DecompositionConfig,
    bank: &FilterBank,
) -> Result<ParadiffDecomposition> {
    let grid = *f.grid();
    cfg.validate(&grid)?;
    DecompositionConfig::required_m_max(&grid, cfg.c, 0)
        .le(&cfg.m_max)
        .then_some(())
        .ok_or_else(|| {
            Error::Precondition(format!(
                "M_max = {} leaves part of the lattice uncovered at j = 0",
                cfg.m_max
            ))
        })?;

    let base = compose(g, &bank.low_pass(f, 0)?);
    let levels = (0..=cfg.j)
        .into_par_iter()
        .map(|j| {
            let low = real_parts(&bank.low_pass(f, j)?);
            let band = bank.band(f, j)?;
            let mj = mj_from_parts(g, &low, &real_parts(&band), cfg, &grid)?;
            let (q, p) = split_mj(&mj, j, cfg, bank)?;
            let mut residual = mj.sub(&q)?;
            for pm in &p {
                residual = residual.sub(pm)?;
            }
            Ok((band, mj, q, p, residual.sup_norm()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut bands = Vec::with_capacity(levels.len());
    let mut m_terms = Vec::with_capacity(levels.len());
    let mut q_terms = Vec::with_capacity(levels.len());
    let mut p_terms = Vec::with_capacity(levels.len());
    let mut m_tails = Vec::with_capacity(levels.len());
    for (band, mj, q, p, tail) in levels {
        bands.push(band);
        m_terms.push(mj);
        q_terms.push(q);
        p_terms.push(p);
        m_tails.push(tail);
    }

    let gf = compose(g, f);
    let top = compose(g, &bank.low_pass(f, cfg.j + 1)?.real_part());
    let j_tail = gf.sub(&top)?.sup_norm();
    let fsup = f.sup_norm();
    let input_tail = if fsup == 0.0 {
        0.0
    } else {
        f.sub(&bank.low_pass(f, cfg.j)?)?.sup_norm() / fsup
    };

    Ok(ParadiffDecomposition {
        base,
        bands,
        m_terms,
        q_terms,
        p_terms,
        config: *cfg,
        j_tail,
        m_tails,
        input_tail,
    })
}
