//! Function-space norms as Riemann sums over the grid and its frequency lattice.
//!
//! | space | norm |
//! |-------|------|
//! | `L^p` | `(Σ |f|^p Δx^n)^{1/p}` |
//! | `H^p_s` | `‖(I−Δ)^{s/2} f‖_{L^p}` |
//! | `FL^q_s` | `(Σ ⟨ξ⟩^{sq} |f̂|^q Δξ^n)^{1/q}` |
//! | `B^{p,q}_s` | `‖S_0 f‖_{L^p} + (Σ_j 2^{jsq} ‖Δ_j f‖_{L^p}^q)^{1/q}` |
//! | `M^{p,q}_s` | `‖ ‖⟨ξ⟩^s V_g f(x,ξ)‖_{L^p_x} ‖_{L^q_ξ}` |
//! | `ℓ^q_s` | `(Σ ⟨k⟩^{sq} |a_k|^q)^{1/q}` |
//!
//! Infinite exponents use lattice maxima.

mod sequence;
mod stft;

use std::fmt;
use std::str::FromStr;

pub use sequence::WeightedSequence;
pub use stft::{modulation_norm, modulation_norm_of_array, stft, StftArray, WindowFunction};

use crate::error::{Error, Result};
use crate::filterbank::{bessel_potential, bracket, FilterBank};
use crate::grid::{dft, idft, Domain, SampledFunction};

/// Relative tail allowed outside the resolved dyadic range in [`besov_norm`].
pub const BESOV_TAIL_TOL: f64 = 1e-9;

/// An integrability exponent in `[1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub const ONE: Exponent = Exponent(1.0);
    pub const TWO: Exponent = Exponent(2.0);
    pub const INFINITY: Exponent = Exponent(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p >= 1.0 {
            Ok(Self(p))
        } else {
            Err(Error::InvalidArgument(format!("exponent {p} must lie in [1, ∞]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// Hölder dual `p′` with `1/p + 1/p′ = 1`.
    pub fn dual(self) -> Self {
        if self.0 == 1.0 {
            Self::INFINITY
        } else if self.is_infinite() {
            Self::ONE
        } else {
            Self(self.0 / (self.0 - 1.0))
        }
    }

    /// `1/p`, zero for `p = ∞`.
    pub fn reciprocal(self) -> f64 {
        1.0 / self.0
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    /// Accepts decimals, fractions like `4/3`, and `inf`/`∞`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if matches!(s, "inf" | "infinity" | "∞" | "Inf") {
            return Ok(Self::INFINITY);
        }
        Self::new(parse_real(s)?)
    }
}

/// Parses a decimal or a simple fraction `a/b`.
pub fn parse_real(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse number `{s}`"));
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            Ok(a / b)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

/// `(Σ |v|^p w)^{1/p}` for magnitudes `v`, or `max |v|` when `p = ∞`.
pub(crate) fn weighted_lp(values: impl Iterator<Item = f64>, weight: f64, p: Exponent) -> f64 {
    if p.is_infinite() {
        return values.fold(0.0, f64::max);
    }
    let p = p.0;
    let sum: f64 = if p == 1.0 {
        values.sum()
    } else if p == 2.0 {
        values.map(|v| v * v).sum()
    } else {
        values.map(|v| v.powf(p)).sum()
    };
    (sum * weight).powf(1.0 / p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    Lp,
    Sobolev,
    FourierLebesgue,
    Besov,
    Modulation,
    Sequence,
}

impl SpaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::Lp => "lp",
            SpaceKind::Sobolev => "sobolev",
            SpaceKind::FourierLebesgue => "fourier_lebesgue",
            SpaceKind::Besov => "besov",
            SpaceKind::Modulation => "modulation",
            SpaceKind::Sequence => "sequence",
        }
    }
}

impl FromStr for SpaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "lp" | "lebesgue" => SpaceKind::Lp,
            "sobolev" | "h" | "hps" => SpaceKind::Sobolev,
            "fourier_lebesgue" | "fl" | "fourierlebesgue" => SpaceKind::FourierLebesgue,
            "besov" | "b" => SpaceKind::Besov,
            "modulation" | "m" => SpaceKind::Modulation,
            "sequence" | "lqs" | "sequencelqs" => SpaceKind::Sequence,
            other => return Err(Error::Config(format!("unknown space kind `{other}`"))),
        })
    }
}

/// Selects a norm: kind plus `(p, q, s)` and the auxiliary `s̃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceSpec {
    pub kind: SpaceKind,
    pub p: Exponent,
    pub q: Exponent,
    pub s: f64,
    pub s_tilde: Option<f64>,
}

impl SpaceSpec {
    pub fn new(kind: SpaceKind, p: Exponent, q: Exponent, s: f64) -> Self {
        Self {
            kind,
            p,
            q,
            s,
            s_tilde: None,
        }
    }

    pub fn lp(p: Exponent) -> Self {
        Self::new(SpaceKind::Lp, p, p, 0.0)
    }

    pub fn sobolev(p: Exponent, s: f64) -> Self {
        Self::new(SpaceKind::Sobolev, p, p, s)
    }

    pub fn fourier_lebesgue(q: Exponent, s: f64) -> Self {
        Self::new(SpaceKind::FourierLebesgue, q, q, s)
    }

    pub fn besov(p: Exponent, q: Exponent, s: f64) -> Self {
        Self::new(SpaceKind::Besov, p, q, s)
    }

    pub fn modulation(p: Exponent, q: Exponent, s: f64) -> Self {
        Self::new(SpaceKind::Modulation, p, q, s)
    }

    /// The critical regularity `n/q′`.
    pub fn critical_s(&self, dim: usize) -> f64 {
        dim as f64 * self.q.dual().reciprocal()
    }

    /// `s̃` if set, otherwise the midpoint of `(n/2, n/2 + (s − n/q′))`.
    pub fn s_tilde_or_default(&self, dim: usize) -> f64 {
        self.s_tilde
            .unwrap_or_else(|| 0.5 * dim as f64 + 0.5 * (self.s - self.critical_s(dim)))
    }

    /// Checks `n/2 < s̃ < n/2 + (s − n/q′)` for the resolved `s̃`.
    pub fn check_s_tilde(&self, dim: usize) -> Result<f64> {
        let st = self.s_tilde_or_default(dim);
        let lo = 0.5 * dim as f64;
        let hi = lo + (self.s - self.critical_s(dim));
        if lo < st && st < hi {
            Ok(st)
        } else {
            Err(Error::Hypothesis(format!(
                "s̃ = {st} must lie in ({lo}, {hi})"
            )))
        }
    }

    /// Verifies the parameter range under which this space is a multiplication algebra.
    pub fn check_algebra_hypothesis(&self, dim: usize) -> Result<()> {
        let n = dim as f64;
        let ok = match self.kind {
            SpaceKind::Sobolev => {
                self.p.value() > 1.0 && !self.p.is_infinite() && self.s > n * self.p.reciprocal()
            }
            SpaceKind::Besov => self.s > n * self.p.reciprocal(),
            SpaceKind::Modulation | SpaceKind::FourierLebesgue => {
                self.s > self.critical_s(dim) || (self.q == Exponent::ONE && self.s == 0.0)
            }
            SpaceKind::Lp | SpaceKind::Sequence => {
                return Err(Error::Hypothesis(format!(
                    "{} is not covered by the algebra inequalities",
                    self.kind.name()
                )))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Hypothesis(format!(
                "{} with p={}, q={}, s={} is outside the algebra range",
                self.kind.name(),
                self.p,
                self.q,
                self.s
            )))
        }
    }

    /// Evaluates the norm of a space-domain function.
    pub fn norm(&self, f: &SampledFunction, ctx: &NormContext) -> Result<f64> {
        match self.kind {
            SpaceKind::Lp => lp_norm(f, self.p),
            SpaceKind::Sobolev => sobolev_norm(f, self.p, self.s),
            SpaceKind::FourierLebesgue => fl_norm(f, self.q, self.s),
            SpaceKind::Besov => besov_norm(f, self.p, self.q, self.s, &ctx.bank),
            SpaceKind::Modulation => {
                modulation_norm(f, self.p, self.q, self.s, &ctx.window, ctx.stride)
            }
            SpaceKind::Sequence => Err(Error::InvalidArgument(
                "sequence norms apply to WeightedSequence, not sampled functions".into(),
            )),
        }
    }
}

/// Grid-dependent objects shared by norm evaluations.
#[derive(Debug, Clone)]
pub struct NormContext {
    pub bank: FilterBank,
    pub window: WindowFunction,
    pub stride: usize,
}

impl NormContext {
    /// Default Littlewood–Paley bank, Gaussian window and x-stride 4.
    pub fn new(grid: crate::grid::Grid) -> Self {
        let stride = 4.min(grid.points_per_axis());
        Self {
            bank: FilterBank::new(grid),
            window: WindowFunction::gaussian(grid),
            stride,
        }
    }
}

pub fn lp_norm(f: &SampledFunction, p: Exponent) -> Result<f64> {
    f.expect_domain(Domain::Space)?;
    Ok(weighted_lp(
        f.values().iter().map(|z| z.norm()),
        f.grid().cell_volume(),
        p,
    ))
}

/// `‖f‖_{H^p_s}`. Defined for `1 < p < ∞`; the endpoints evaluate the same formula.
pub fn sobolev_norm(f: &SampledFunction, p: Exponent, s: f64) -> Result<f64> {
    f.expect_domain(Domain::Space)?;
    if s == 0.0 {
        return lp_norm(f, p);
    }
    lp_norm(&bessel_potential(f, s)?, p)
}

/// `‖f‖_{FL^q_s}` of a space-domain function.
pub fn fl_norm(f: &SampledFunction, q: Exponent, s: f64) -> Result<f64> {
    fl_norm_of_spectrum(&dft(f)?, q, s)
}

/// `‖⟨·⟩^s F‖_{L^q}` of frequency-domain samples.
pub fn fl_norm_of_spectrum(spectrum: &SampledFunction, q: Exponent, s: f64) -> Result<f64> {
    spectrum.expect_domain(Domain::Frequency)?;
    let grid = *spectrum.grid();
    let magnitudes = spectrum
        .values()
        .iter()
        .enumerate()
        .map(|(i, z)| bracket(grid.frequency(i)).powf(s) * z.norm());
    Ok(weighted_lp(magnitudes, grid.freq_cell_volume(), q))
}

/// `‖f‖_{B^{p,q}_s}` with the dyadic sum truncated at `J_max`.
///
/// Fails with [`Error::UnderResolved`] when `f − S_{J_max+1} f`, the part not seen
/// by the truncated sum, exceeds `BESOV_TAIL_TOL·‖f‖_{L^p}`.
pub fn besov_norm(
    f: &SampledFunction,
    p: Exponent,
    q: Exponent,
    s: f64,
    bank: &FilterBank,
) -> Result<f64> {
    f.expect_domain(Domain::Space)?;
    if f.grid() != bank.grid() {
        return Err(Error::GridMismatch);
    }
    let jmax = bank
        .max_level()
        .ok_or_else(|| Error::CapabilityLimit("grid resolves no dyadic annulus".into()))?;
    let spec = dft(f)?;
    let filtered = |m: &[f64]| -> Result<SampledFunction> {
        let mut out = spec.clone();
        for (z, &w) in out.values_mut().iter_mut().zip(m) {
            *z *= w;
        }
        idft(&out)
    };

    let total = lp_norm(f, p)?;
    if total == 0.0 {
        return Ok(0.0);
    }
    let complement: Vec<f64> = bank.phi_j(jmax + 1).iter().map(|v| 1.0 - v).collect();
    let tail = lp_norm(&filtered(&complement)?, p)?;
    let limit = BESOV_TAIL_TOL * total;
    if tail >= limit {
        return Err(Error::UnderResolved { tail, limit });
    }

    let low = lp_norm(&filtered(&bank.phi_j(0))?, p)?;
    let blocks = (0..=jmax)
        .map(|j| Ok(2f64.powf(j as f64 * s) * lp_norm(&filtered(&bank.psi_j(j))?, p)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(low + weighted_lp(blocks.into_iter(), 1.0, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::testfn::{gaussian, RandomFamily};
    use approx::assert_relative_eq;
    use rustfft::num_complex::Complex64;
    use std::f64::consts::PI;

    fn ex(p: f64) -> Exponent {
        Exponent::new(p).unwrap()
    }

    #[test]
    fn exponent_parsing_and_duals() {
        assert_eq!("4/3".parse::<Exponent>().unwrap(), ex(4.0 / 3.0));
        assert!("inf".parse::<Exponent>().unwrap().is_infinite());
        assert!("0.5".parse::<Exponent>().is_err());
        assert!(Exponent::new(0.99).is_err());
        assert_eq!(Exponent::ONE.dual(), Exponent::INFINITY);
        assert_eq!(Exponent::INFINITY.dual(), Exponent::ONE);
        assert_relative_eq!(ex(4.0 / 3.0).dual().value(), 4.0, epsilon = 1e-12);
        assert_relative_eq!(ex(4.0).dual().value(), 4.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn lp_of_constants_and_gaussian() {
        let g = Grid::new(1, 2.0 * PI, 6).unwrap();
        let one = SampledFunction::from_real_fn(g, |_| 1.0);
        assert_relative_eq!(lp_norm(&one, Exponent::ONE).unwrap(), 2.0 * PI, epsilon = 1e-13);
        let c = SampledFunction::from_fn(g, |_| Complex64::new(-1.5, 2.0));
        assert_relative_eq!(lp_norm(&c, Exponent::INFINITY).unwrap(), 2.5, epsilon = 1e-15);

        let g = Grid::new(1, 32.0 * PI, 10).unwrap();
        let gauss = gaussian(g);
        // (∫ e^{-x²} dx)^{1/2} = π^{1/4}
        assert_relative_eq!(
            lp_norm(&gauss, Exponent::TWO).unwrap(),
            PI.powf(0.25),
            epsilon = 1e-8
        );
    }

    #[test]
    fn sobolev_cases() {
        let g = Grid::new(1, 64.0 * PI, 12).unwrap();
        let f = RandomFamily::default().nth(g, 3, 0);
        assert_eq!(
            sobolev_norm(&f, ex(3.0), 0.0).unwrap(),
            lp_norm(&f, ex(3.0)).unwrap()
        );

        // Windowed mode e^{3ix}·e^{-x²/200}: |f̂|² is a normal density in ξ with mean 3
        // and variance v = 1/200, so the ratio² is E[(1+ξ²)²].
        let mode = SampledFunction::from_fn(g, |x| {
            Complex64::from_polar((-x[0] * x[0] / 200.0).exp(), 3.0 * x[0])
        });
        let ratio = sobolev_norm(&mode, Exponent::TWO, 2.0).unwrap()
            / lp_norm(&mode, Exponent::TWO).unwrap();
        let v: f64 = 1.0 / 200.0;
        let m2 = 9.0 + v;
        let m4 = 81.0 + 54.0 * v + 3.0 * v * v;
        assert_relative_eq!(ratio, (1.0 + 2.0 * m2 + m4).sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn sobolev_two_is_fourier_lebesgue_two() {
        let g = Grid::new(1, 64.0 * PI, 12).unwrap();
        for f in RandomFamily::default().suite(g, 11, 5) {
            for s in [0.0, 0.7, 1.5] {
                let h = sobolev_norm(&f, Exponent::TWO, s).unwrap();
                let fl = fl_norm(&f, Exponent::TWO, s).unwrap();
                assert_relative_eq!(h * (2.0 * PI).sqrt(), fl, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn fl_of_delta_and_gaussian() {
        let g = Grid::new(1, 2.0 * PI, 5).unwrap();
        let one = SampledFunction::from_real_fn(g, |_| 1.0);
        for q in [Exponent::ONE, ex(4.0 / 3.0), Exponent::TWO, Exponent::INFINITY] {
            for s in [-1.0, 0.0, 2.5] {
                assert_relative_eq!(fl_norm(&one, q, s).unwrap(), 2.0 * PI, epsilon = 1e-12);
            }
        }
        let g = Grid::new(1, 32.0 * PI, 10).unwrap();
        let gauss = gaussian(g);
        let expect = (2.0 * PI * PI.sqrt()).sqrt();
        assert_relative_eq!(fl_norm(&gauss, Exponent::TWO, 0.0).unwrap(), expect, epsilon = 1e-6);
        let scaled = gauss.scale(Complex64::new(3.5, 0.0));
        assert_relative_eq!(
            fl_norm(&scaled, ex(1.5), 1.0).unwrap(),
            3.5 * fl_norm(&gauss, ex(1.5), 1.0).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn besov_of_bandlimited_is_lp() {
        let g = Grid::new(1, 64.0 * PI, 10).unwrap();
        let bank = FilterBank::new(g);
        // e^{-x²/2 σ²} with σ = 24 has spectrum below 1/2 to machine precision.
        let f = SampledFunction::from_real_fn(g, |x| (-x[0] * x[0] / (2.0 * 24.0 * 24.0)).exp());
        // The box is too small for this width, but the test only needs a function
        // whose lattice spectrum is supported in |ξ| ≤ 1/2.
        let spec = dft(&f).unwrap();
        let mut clipped = spec.clone();
        for (i, z) in clipped.values_mut().iter_mut().enumerate() {
            if g.frequency_norm(i) > 0.5 {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        let f = idft(&clipped).unwrap();
        for p in [Exponent::ONE, Exponent::TWO, Exponent::INFINITY] {
            let b = besov_norm(&f, p, Exponent::TWO, 1.0, &bank).unwrap();
            assert_relative_eq!(b, lp_norm(&f, p).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn besov_frame_bounds() {
        // Oracle: with A(ξ) = φ² + Σ ψ_j², Plancherel gives
        // sqrt(min A)·‖f‖ ≤ ‖S_0 f‖ + (Σ‖Δ_j f‖²)^{1/2} ≤ sqrt(2·max A)·‖f‖.
        let g = Grid::new(1, 64.0 * PI, 12).unwrap();
        let bank = FilterBank::new(g);
        let jmax = bank.max_level().unwrap();
        let phi = bank.phi_j(0);
        let psis: Vec<Vec<f64>> = (0..=jmax).map(|j| bank.psi_j(j)).collect();
        let (mut amin, mut amax) = (f64::INFINITY, 0.0f64);
        for i in 0..g.len() {
            if g.frequency_norm(i) <= 2f64.powi(jmax as i32) {
                let a = phi[i] * phi[i] + psis.iter().map(|p| p[i] * p[i]).sum::<f64>();
                amin = amin.min(a);
                amax = amax.max(a);
            }
        }
        assert!(amin >= 0.5 - 1e-12 && amax <= 1.0 + 1e-12);
        for f in RandomFamily::default().suite(g, 5, 10) {
            let b = besov_norm(&f, Exponent::TWO, Exponent::TWO, 0.0, &bank).unwrap();
            let l2 = lp_norm(&f, Exponent::TWO).unwrap();
            assert!(b >= amin.sqrt() * l2 * (1.0 - 1e-9), "{b} vs {l2}");
            assert!(b <= (2.0 * amax).sqrt() * l2 * (1.0 + 1e-9), "{b} vs {l2}");
        }
    }

    #[test]
    fn besov_monotone_in_s() {
        let g = Grid::new(1, 64.0 * PI, 12).unwrap();
        let bank = FilterBank::new(g);
        let f = RandomFamily::default().nth(g, 9, 0);
        let mut prev = 0.0;
        for s in [-1.0, 0.0, 0.5, 1.0, 2.0] {
            let b = besov_norm(&f, ex(1.5), ex(3.0), s, &bank).unwrap();
            assert!(b >= prev);
            prev = b;
        }
    }

    #[test]
    fn besov_rejects_under_resolved_input() {
        let g = Grid::new(1, 2.0 * PI, 6).unwrap();
        let bank = FilterBank::new(g);
        let f = SampledFunction::from_fn(g, |x| Complex64::from_polar(1.0, 31.0 * x[0]));
        assert!(matches!(
            besov_norm(&f, Exponent::TWO, Exponent::TWO, 0.0, &bank),
            Err(Error::UnderResolved { .. })
        ));
    }

    #[test]
    fn algebra_hypotheses() {
        let q43 = ex(4.0 / 3.0);
        assert!(SpaceSpec::fourier_lebesgue(q43, 0.3).check_algebra_hypothesis(1).is_ok());
        assert!(SpaceSpec::fourier_lebesgue(q43, 0.2).check_algebra_hypothesis(1).is_err());
        assert!(SpaceSpec::fourier_lebesgue(Exponent::ONE, 0.0).check_algebra_hypothesis(1).is_ok());
        assert!(SpaceSpec::modulation(Exponent::TWO, Exponent::TWO, 0.5).check_algebra_hypothesis(1).is_err());
        assert!(SpaceSpec::sobolev(Exponent::TWO, 0.6).check_algebra_hypothesis(1).is_ok());
        assert!(SpaceSpec::sobolev(Exponent::ONE, 2.0).check_algebra_hypothesis(1).is_err());
        assert!(SpaceSpec::besov(Exponent::INFINITY, Exponent::ONE, 0.1).check_algebra_hypothesis(1).is_ok());
        assert!(SpaceSpec::lp(Exponent::TWO).check_algebra_hypothesis(1).is_err());
    }

    #[test]
    fn s_tilde_default_is_midpoint() {
        let spec = SpaceSpec::fourier_lebesgue(ex(4.0), 1.2);
        assert_relative_eq!(spec.s_tilde_or_default(1), 0.725, epsilon = 1e-12);
        assert!(spec.check_s_tilde(1).is_ok());
        let bad = SpaceSpec {
            s_tilde: Some(0.4),
            ..spec
        };
        assert!(bad.check_s_tilde(1).is_err());
    }
}
