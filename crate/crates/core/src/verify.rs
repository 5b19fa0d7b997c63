//! Experiment drivers. Each turns one estimate into a table of measurements and a
//! verdict that can be recomputed from the table and its tolerances alone.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filterbank::{apply_real_multiplier, derivative, FilterBank};
use crate::grid::{idft, Domain, Grid, SampledFunction};
use crate::norms::{
    lp_norm, modulation_norm, sobolev_norm, Exponent, NormContext, SpaceKind, SpaceSpec,
    WeightedSequence, WindowFunction,
};
use crate::paradiff::{compose, compute_mj, split_mj, DecompositionConfig, Nonlinearity};
use crate::testfn::RandomFamily;

pub const QJ_BOUND: &str = "qj_bound";
pub const PJM_DECAY: &str = "pjm_decay";
pub const DMJ_GROWTH: &str = "dmj_growth";
pub const ALGEBRA: &str = "algebra";
pub const COUNTEREXAMPLE: &str = "counterexample";
pub const LOCAL_EQUIVALENCE: &str = "local_equivalence";
pub const COMPOSITION_SCAN: &str = "composition_scan";
pub const HAHN: &str = "hahn";

pub const EXPERIMENTS: [&str; 8] = [
    QJ_BOUND,
    PJM_DECAY,
    DMJ_GROWTH,
    ALGEBRA,
    COUNTEREXAMPLE,
    LOCAL_EQUIVALENCE,
    COMPOSITION_SCAN,
    HAHN,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Informational,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Informational => "informational",
        }
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub parameters: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub verdict: Verdict,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
}

impl ExperimentReport {
    fn new(name: &str, columns: &[&str], seed: u64) -> Self {
        Self {
            name: name.into(),
            parameters: BTreeMap::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            verdict: Verdict::Informational,
            tolerances: BTreeMap::new(),
            seed,
        }
    }

    fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.insert(key.into(), value.to_string());
        self
    }

    fn tol(mut self, key: &str, value: f64) -> Self {
        self.tolerances.insert(key.into(), value);
        self
    }

    fn finish(mut self) -> Result<Self> {
        self.verdict = recompute_verdict(&self)?;
        Ok(self)
    }

    /// Values of one named column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    fn col(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name)
            .ok_or_else(|| Error::InvalidArgument(format!("report lacks column `{name}`")))
    }

    fn tolerance(&self, key: &str) -> Result<f64> {
        self.tolerances
            .get(key)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("report lacks tolerance `{key}`")))
    }
}

/// Least-squares slope of `ys` against `xs`; `None` with fewer than two points.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Recomputes the verdict of a report from its rows and tolerances.
pub fn recompute_verdict(r: &ExperimentReport) -> Result<Verdict> {
    match r.name.as_str() {
        QJ_BOUND => verdict_profile(r),
        PJM_DECAY => verdict_pjm(r),
        DMJ_GROWTH => verdict_dmj(r),
        ALGEBRA | HAHN => verdict_ratios(r),
        COUNTEREXAMPLE => verdict_counterexample(r),
        LOCAL_EQUIVALENCE => verdict_local(r),
        COMPOSITION_SCAN => verdict_scan(r),
        other => Err(Error::Config(format!("unknown experiment `{other}`"))),
    }
}

fn verdict_profile(r: &ExperimentReport) -> Result<Verdict> {
    let j = r.col("j")?;
    let norms = r.col("norm")?;
    if norms.iter().all(|&v| v == 0.0) {
        return Ok(Verdict::Pass);
    }
    if norms.iter().any(|v| !v.is_finite()) {
        return Ok(Verdict::Fail);
    }
    let ratio = max_of(&norms) / median(&norms);
    // Low j are dominated by the transient of S_j f filling in; boundedness shows in
    // the flat tail.
    let start = r.tolerance("tail_start")? * max_of(&j);
    let (xs, ys): (Vec<f64>, Vec<f64>) = j
        .iter()
        .zip(&norms)
        .filter(|(&x, &v)| x >= start && v > 0.0)
        .map(|(&x, &v)| (x, v.log2()))
        .unzip();
    let slope = fit_slope(&xs, &ys).unwrap_or(0.0);
    Ok(Verdict::from_bool(
        ratio < r.tolerance("max_over_median")? && slope <= r.tolerance("slope_max")?,
    ))
}

/// Per-`j` slopes of `log₂‖p_{j,m}‖` in `m`, fitted over `m ≥ m_min` on the points
/// above `noise_floor·‖m_j‖`. `None` where fewer than two points survive.
pub fn pjm_slopes(r: &ExperimentReport) -> Result<Vec<(usize, Option<f64>)>> {
    let js = r.col("j")?;
    let ms = r.col("m")?;
    let norms = r.col("norm")?;
    let refs = r.col("mj_norm")?;
    let m_min = r.tolerance("m_min")?;
    let floor = r.tolerance("noise_floor")?;
    let top = js.iter().copied().fold(0.0, f64::max) as usize;
    let mut out = Vec::new();
    for j in 0..=top {
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..js.len())
            .filter(|&i| js[i] as usize == j && ms[i] >= m_min && norms[i] > floor * refs[i])
            .map(|i| (ms[i], norms[i].log2()))
            .unzip();
        out.push((j, fit_slope(&xs, &ys)));
    }
    Ok(out)
}

fn verdict_pjm(r: &ExperimentReport) -> Result<Verdict> {
    let norms = r.col("norm")?;
    if norms.iter().all(|&v| v == 0.0) {
        return Ok(Verdict::Informational);
    }
    if norms.iter().any(|v| !v.is_finite()) {
        return Ok(Verdict::Fail);
    }
    let bound = r.tolerance("slope_max")?;
    // No surviving points means decay past the noise floor within two steps, which
    // is faster than any power bound can be measured.
    let ok = pjm_slopes(r)?
        .iter()
        .all(|(_, s)| s.is_none_or(|s| s <= bound));
    Ok(Verdict::from_bool(ok))
}

fn verdict_dmj(r: &ExperimentReport) -> Result<Verdict> {
    let j = r.col("j")?;
    let norms = r.col("norm")?;
    let refs = r.col("mj_norm")?;
    let floor = r.tolerance("noise_floor")?;
    let scale = max_of(&refs);
    if norms.iter().all(|&v| v <= floor * scale) {
        return Ok(Verdict::Informational);
    }
    if norms.iter().any(|v| !v.is_finite()) {
        return Ok(Verdict::Fail);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = j
        .iter()
        .zip(&norms)
        .filter(|(_, &v)| v > floor * scale)
        .map(|(&x, &v)| (x, v.log2()))
        .unzip();
    let slope = fit_slope(&xs, &ys).unwrap_or(0.0);
    Ok(Verdict::from_bool(slope <= r.tolerance("slope_max")?))
}

fn verdict_ratios(r: &ExperimentReport) -> Result<Verdict> {
    let ratios = r.col("ratio")?;
    if ratios.iter().any(|v| !v.is_finite()) {
        return Ok(Verdict::Fail);
    }
    let first = r.tolerance("trials")? as usize;
    if ratios.len() < 2 * first || first == 0 {
        return Ok(Verdict::Informational);
    }
    let all_max = max_of(&ratios);
    let first_max = max_of(&ratios[..first]);
    let mut ok = all_max < r.tolerance("blowup")? * median(&ratios)
        && all_max <= (1.0 + r.tolerance("doubling")?) * first_max;
    if let Some(&bound) = r.tolerances.get("exact_bound") {
        ok &= all_max <= bound;
    }
    Ok(Verdict::from_bool(ok))
}

fn verdict_counterexample(r: &ExperimentReport) -> Result<Verdict> {
    let ratio = r.col("R")?;
    let scaled = r.col("R_over_P")?;
    if ratio.len() < r.tolerance("min_points")? as usize {
        return Ok(Verdict::Informational);
    }
    if r.tolerance("critical")? == 0.0 {
        // Above the critical regularity the sequences only serve as a control.
        return Ok(Verdict::Informational);
    }
    let increasing = ratio.windows(2).all(|w| w[1] > w[0]);
    let factor = r.tolerance("band_factor")?;
    let lo = scaled[0].min(scaled[1]) / factor;
    let hi = scaled[0].max(scaled[1]) * factor;
    let in_band = scaled.iter().all(|&v| lo <= v && v <= hi);
    Ok(Verdict::from_bool(increasing && in_band))
}

/// `max_N R(N) ≤ (1 + growth)·R(N_0)`: the control run shows no growth.
pub fn counterexample_is_bounded(r: &ExperimentReport, growth: f64) -> Result<bool> {
    let ratio = r.col("R")?;
    Ok(!ratio.is_empty() && max_of(&ratio) <= (1.0 + growth) * ratio[0])
}

fn verdict_local(r: &ExperimentReport) -> Result<Verdict> {
    let m = r.col("modulation")?;
    let fl = r.col("fourier_lebesgue")?;
    if m.iter().chain(&fl).all(|&v| v == 0.0) {
        return Ok(Verdict::Informational);
    }
    let ratio = r.col("ratio")?;
    let refined = r.col("ratio_refined")?;
    if ratio.iter().chain(&refined).any(|v| !v.is_finite() || *v <= 0.0) {
        return Ok(Verdict::Fail);
    }
    let lo = ratio.iter().copied().fold(f64::INFINITY, f64::min);
    let band = max_of(&ratio) / lo;
    let drift = ratio
        .iter()
        .zip(&refined)
        .map(|(a, b)| (b / a - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(Verdict::from_bool(
        band < r.tolerance("band")? && drift <= r.tolerance("refinement")?,
    ))
}

fn verdict_scan(r: &ExperimentReport) -> Result<Verdict> {
    let finite = r
        .col("norm_F")?
        .iter()
        .chain(&r.col("norm_f")?)
        .all(|v| v.is_finite());
    Ok(if finite {
        Verdict::Informational
    } else {
        Verdict::Fail
    })
}

/// The space in which the low and high multiplier parts are measured: `H^{q′}_s`
/// for `q ≤ 2` and `H²_{s̃}` for `q > 2`.
pub fn multiplier_space(dim: usize, q: Exponent, s: f64, s_tilde: Option<f64>) -> Result<(Exponent, f64)> {
    let spec = SpaceSpec {
        s_tilde,
        ..SpaceSpec::fourier_lebesgue(q, s)
    };
    if q.value() <= 1.0 {
        return Err(Error::Hypothesis(format!("q = {q} must exceed 1")));
    }
    let crit = spec.critical_s(dim);
    if s <= crit {
        return Err(Error::Hypothesis(format!("s = {s} must exceed n/q′ = {crit}")));
    }
    if q.value() <= 2.0 {
        Ok((q.dual(), s))
    } else {
        Ok((Exponent::TWO, spec.check_s_tilde(dim)?))
    }
}

fn decomposition_inputs(f: &SampledFunction, cfg: &DecompositionConfig) -> Result<FilterBank> {
    f.check_boundary_decay()?;
    cfg.validate(f.grid())?;
    Ok(FilterBank::new(*f.grid()))
}

/// `‖q_j‖` in the multiplier space for `j = 0..=J`.
pub fn exp_qj_bound(
    g: &dyn Nonlinearity,
    f: &SampledFunction,
    q: Exponent,
    s: f64,
    s_tilde: Option<f64>,
    cfg: &DecompositionConfig,
) -> Result<ExperimentReport> {
    let (p, reg) = multiplier_space(f.grid().dim(), q, s, s_tilde)?;
    let bank = decomposition_inputs(f, cfg)?;
    let rows = (0..=cfg.j)
        .into_par_iter()
        .map(|j| {
            let mj = compute_mj(g, f, j, cfg, &bank)?;
            let qj = apply_real_multiplier(&bank.dilated_phi(cfg.c * 2f64.powi(j as i32)), &mj)?;
            Ok(vec![j as f64, sobolev_norm(&qj, p, reg)?])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut r = ExperimentReport::new(QJ_BOUND, &["j", "norm"], 0)
        .param("nonlinearity", g.label())
        .param("q", q)
        .param("s", s)
        .param("measure_p", p)
        .param("measure_s", reg)
        .param("J", cfg.j)
        .tol("max_over_median", 10.0)
        .tol("slope_max", 0.1)
        .tol("tail_start", 0.5);
    r.rows = rows;
    r.finish()
}

/// `‖p_{j,m}‖` in the multiplier space, with `‖m_j‖` as the noise reference.
pub fn exp_pjm_decay(
    g: &dyn Nonlinearity,
    f: &SampledFunction,
    q: Exponent,
    s: f64,
    s_tilde: Option<f64>,
    cfg: &DecompositionConfig,
) -> Result<ExperimentReport> {
    let (p, reg) = multiplier_space(f.grid().dim(), q, s, s_tilde)?;
    let bank = decomposition_inputs(f, cfg)?;
    let blocks = (0..=cfg.j)
        .into_par_iter()
        .map(|j| {
            let mj = compute_mj(g, f, j, cfg, &bank)?;
            let reference = sobolev_norm(&mj, p, reg)?;
            let (_, terms) = split_mj(&mj, j, cfg, &bank)?;
            terms
                .iter()
                .enumerate()
                .map(|(m, pm)| Ok(vec![j as f64, m as f64, sobolev_norm(pm, p, reg)?, reference]))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let order = s.floor() + 1.0;
    let mut r = ExperimentReport::new(PJM_DECAY, &["j", "m", "norm", "mj_norm"], 0)
        .param("nonlinearity", g.label())
        .param("q", q)
        .param("s", s)
        .param("measure_p", p)
        .param("measure_s", reg)
        .param("J", cfg.j)
        .param("M_max", cfg.m_max)
        .tol("slope_max", -order + 0.5)
        .tol("m_min", 2.0)
        .tol("noise_floor", 1e-11);
    r.rows = blocks.into_iter().flatten().collect();
    r.finish()
}

/// `‖∂^α m_j‖_∞` with `α = (alpha_order, 0)`.
pub fn exp_dmj_growth(
    g: &dyn Nonlinearity,
    f: &SampledFunction,
    q: Exponent,
    s: f64,
    cfg: &DecompositionConfig,
    alpha_order: u32,
) -> Result<ExperimentReport> {
    let bank = decomposition_inputs(f, cfg)?;
    let rows = (0..=cfg.j)
        .into_par_iter()
        .map(|j| {
            let mj = compute_mj(g, f, j, cfg, &bank)?;
            let d = derivative(&mj, [alpha_order, 0])?;
            Ok(vec![j as f64, d.sup_norm(), mj.sup_norm()])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut r = ExperimentReport::new(DMJ_GROWTH, &["j", "norm", "mj_norm"], 0)
        .param("nonlinearity", g.label())
        .param("q", q)
        .param("s", s)
        .param("alpha_order", alpha_order)
        .param("J", cfg.j)
        .tol("slope_max", s.floor() + 1.0 + 0.5)
        .tol("noise_floor", 1e-12);
    r.rows = rows;
    r.finish()
}

/// Ratios `‖fg‖_X / (‖f‖_X ‖g‖_X)` over `2·trials` random pairs.
pub fn exp_algebra(
    space: &SpaceSpec,
    grid: Grid,
    trials: usize,
    seed: u64,
    ctx: &NormContext,
    family: &RandomFamily,
) -> Result<ExperimentReport> {
    space.check_algebra_hypothesis(grid.dim())?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let rows = (0..2 * trials)
        .into_par_iter()
        .map(|t| {
            let f = family.nth(grid, seed, 2 * t);
            let g = family.nth(grid, seed, 2 * t + 1);
            f.check_boundary_decay()?;
            g.check_boundary_decay()?;
            let nf = space.norm(&f, ctx)?;
            let ng = space.norm(&g, ctx)?;
            let nfg = space.norm(&f.multiply(&g)?, ctx)?;
            Ok(vec![t as f64, nf, ng, nfg, nfg / (nf * ng)])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut r = ExperimentReport::new(ALGEBRA, &["trial", "norm_f", "norm_g", "norm_fg", "ratio"], seed)
        .param("space", space.kind.name())
        .param("p", space.p)
        .param("q", space.q)
        .param("s", space.s)
        .tol("trials", trials as f64)
        .tol("blowup", 100.0)
        .tol("doubling", 0.2);
    if space.kind == SpaceKind::FourierLebesgue && space.q == Exponent::ONE && space.s == 0.0 {
        // ‖F(fg)‖₁ = (2π)^{-n}‖Ff ∗ Fg‖₁ ≤ (2π)^{-n}‖Ff‖₁‖Fg‖₁ holds exactly on the lattice.
        r = r.tol("exact_bound", (2.0 * PI).powi(-(grid.dim() as i32)) * (1.0 + 1e-12));
    }
    r.rows = rows;
    r.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleSpec {
    pub n: usize,
    pub q: Exponent,
    pub s: f64,
    pub epsilon: f64,
    pub c_log: f64,
    pub n_list: Vec<usize>,
}

impl CounterexampleSpec {
    /// `ε = (1 − 1/q)/2`, `C = 2`, and the critical `s = n/q′`.
    pub fn new(n: usize, q: Exponent, n_list: Vec<usize>) -> Self {
        let s = n as f64 * q.dual().reciprocal();
        Self {
            n,
            q,
            s,
            epsilon: 0.5 * (1.0 - q.reciprocal()),
            c_log: 2.0,
            n_list,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.n) {
            return Err(Error::InvalidArgument(format!("dimension {} not supported", self.n)));
        }
        if self.q.value() <= 1.0 || self.q.is_infinite() {
            return Err(Error::InvalidArgument(format!("q = {} must lie in (1, ∞)", self.q)));
        }
        let headroom = 1.0 - self.q.reciprocal() - self.epsilon;
        if !(self.epsilon > 0.0 && headroom > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ε = {} must satisfy 0 < ε < 1 − 1/q",
                self.epsilon
            )));
        }
        if !(self.c_log > 1.0) {
            return Err(Error::InvalidArgument(format!("C = {} must exceed 1", self.c_log)));
        }
        if self.n_list.contains(&0) {
            return Err(Error::InvalidArgument("N must be positive".into()));
        }
        let largest = self.n_list.iter().copied().max().unwrap_or(0);
        if (10 * largest + 1).pow(self.n as u32) > 1 << 24 {
            return Err(Error::CapabilityLimit(format!(
                "N = {largest} is too large for dimension {}",
                self.n
            )));
        }
        Ok(())
    }

    fn a(&self, big_n: usize) -> Result<WeightedSequence> {
        let (q, s, eps, c) = (self.q.value(), self.s, self.epsilon, self.c_log);
        let n = self.n as f64;
        let r = big_n as f64;
        WeightedSequence::from_fn(self.n, big_n, |k| {
            let len = ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
            if len > r {
                return Complex64::new(0.0, 0.0);
            }
            let b = (1.0 + len * len).sqrt();
            Complex64::new(b.powf(-n / q - s) * (c + b.ln()).powf(-1.0 / q - eps), 0.0)
        })
    }

    fn b(&self, big_n: usize) -> Result<WeightedSequence> {
        let (lo, hi) = (big_n as f64, 5.0 * big_n as f64);
        WeightedSequence::from_fn(self.n, 5 * big_n, |k| {
            let len = ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
            Complex64::new(if lo <= len && len <= hi { 1.0 } else { 0.0 }, 0.0)
        })
    }
}

pub fn exp_counterexample(spec: &CounterexampleSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let (q, s) = (spec.q, spec.s);
    let critical = s <= spec.n as f64 * q.dual().reciprocal() + 1e-15;
    let exponent = 1.0 - q.reciprocal() - spec.epsilon;
    let rows = spec
        .n_list
        .par_iter()
        .map(|&big_n| {
            let a = spec.a(big_n)?;
            let b = spec.b(big_n)?;
            let ab = a.convolve(&b)?;
            let (na, nb, nab) = (a.norm(q, s), b.norm(q, s), ab.norm(q, s));
            let ratio = nab / (na * nb);
            let predicted = (1.0 + (1.0 + big_n as f64 / 2.0).ln()).powf(exponent);
            let b_scaled = nb / (big_n as f64).powf(s + spec.n as f64 * q.reciprocal());
            Ok(vec![big_n as f64, na, nb, nab, ratio, predicted, ratio / predicted, b_scaled])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut r = ExperimentReport::new(
        COUNTEREXAMPLE,
        &["N", "norm_a", "norm_b", "norm_ab", "R", "P", "R_over_P", "b_over_N_power"],
        0,
    )
    .param("n", spec.n)
    .param("q", q)
    .param("s", s)
    .param("epsilon", spec.epsilon)
    .param("C_log", spec.c_log)
    .tol("min_points", 4.0)
    .tol("band_factor", 2.0)
    .tol("critical", if critical { 1.0 } else { 0.0 });
    r.rows = rows;
    r.finish()
}

/// Cut-off `χ(x − x₀) = φ(|x − x₀|/R)` swept over centers `x₀`, with the window
/// `φ(|t|/R)` and the co-window `φ(|t|/(4R))`.
#[derive(Debug, Clone)]
pub struct LocalPatchSpec {
    pub radius: f64,
    pub centers: Vec<[f64; 2]>,
}

impl LocalPatchSpec {
    pub fn chi(&self, grid: Grid, center: [f64; 2]) -> SampledFunction {
        let profile = crate::filterbank::CutoffProfile::Exponential;
        let r = self.radius;
        SampledFunction::from_real_fn(grid, |x| {
            profile.phi((x[0] - center[0]).hypot(x[1] - center[1]) / r)
        })
    }

    pub fn window(&self, grid: Grid) -> Result<WindowFunction> {
        WindowFunction::bump(grid, self.radius)
    }

    pub fn co_window(&self, grid: Grid) -> Result<WindowFunction> {
        WindowFunction::plateau(grid, self.radius)
    }

    /// Centers snapped to grid points.
    fn lattice_centers(&self, grid: &Grid) -> Vec<[f64; 2]> {
        self.centers
            .iter()
            .map(|&c| grid.position(grid.nearest_index(c)))
            .collect()
    }

    /// Support of `χ` in the `R`-ball around each center, co-window `≡ 1` on the `2R`
    /// ball, and the window inside the `R` ball.
    pub fn check(&self, grid: Grid) -> Result<()> {
        if !(self.radius > 0.0) || self.centers.is_empty() {
            return Err(Error::Precondition("patch needs a radius and centers".into()));
        }
        let window = self.window(grid)?;
        let co = self.co_window(grid)?;
        for c in self.lattice_centers(&grid) {
            let chi = self.chi(grid, c);
            for i in 0..grid.len() {
                let x = grid.position(i);
                let d = (x[0] - c[0]).hypot(x[1] - c[1]);
                if d > self.radius && chi.values()[i].norm() >= 1e-13 {
                    return Err(Error::Precondition(format!("χ leaks outside the R-ball at {x:?}")));
                }
            }
        }
        for i in 0..grid.len() {
            let x = grid.position(i);
            let d = x[0].hypot(x[1]);
            if d <= 2.0 * self.radius && co.profile().values()[i].re != 1.0 {
                return Err(Error::Precondition("co-window is not 1 on the 2R ball".into()));
            }
            if d > self.radius && window.profile().values()[i].norm() != 0.0 {
                return Err(Error::Precondition("window leaves the R ball".into()));
            }
        }
        Ok(())
    }
}

fn local_ratios(
    f: &SampledFunction,
    patch: &LocalPatchSpec,
    p: Exponent,
    q: Exponent,
    s: f64,
    stride: usize,
    centers: &[[f64; 2]],
) -> Result<Vec<(f64, f64)>> {
    let grid = *f.grid();
    patch.check(grid)?;
    let window = patch.window(grid)?;
    centers
        .par_iter()
        .map(|&c| {
            let local = patch.chi(grid, c).multiply(f)?;
            let m = modulation_norm(&local, p, q, s, &window, stride)?;
            let fl = crate::norms::fl_norm(&local, q, s)?;
            Ok((m, fl))
        })
        .collect()
}

/// `‖χf‖_{M^{p,q}_s} / ‖χf‖_{FL^q_s}` per center, on `grid` and on its refinement.
pub fn exp_local_equivalence(
    f_on: &(dyn Fn(Grid) -> Result<SampledFunction> + Sync),
    grid: Grid,
    patch: &LocalPatchSpec,
    p: Exponent,
    q: Exponent,
    s: f64,
    stride: usize,
) -> Result<ExperimentReport> {
    let fine = grid.refined()?;
    let f = f_on(grid)?;
    let f_fine = f_on(fine)?;
    let centers = patch.lattice_centers(&grid);
    let coarse = local_ratios(&f, patch, p, q, s, stride, &centers)?;
    let refined = local_ratios(&f_fine, patch, p, q, s, stride, &centers)?;
    let mut r = ExperimentReport::new(
        LOCAL_EQUIVALENCE,
        &["center", "modulation", "fourier_lebesgue", "ratio", "ratio_refined"],
        0,
    )
    .param("p", p)
    .param("q", q)
    .param("s", s)
    .param("radius", patch.radius)
    .param("stride", stride)
    .tol("band", 10.0)
    .tol("refinement", 0.1);
    r.rows = centers
        .iter()
        .zip(coarse.iter().zip(&refined))
        .map(|(c, (&(m, fl), &(mf, flf)))| vec![c[0], m, fl, m / fl, mf / flf])
        .collect();
    r.finish()
}

/// `‖F(λf)‖_X` over a λ scan. The fitted log–log growth order is stored as the
/// `growth_order` parameter.
pub fn exp_composition_scan(
    nl: &dyn Nonlinearity,
    f: &SampledFunction,
    space: &SpaceSpec,
    lambdas: &[f64],
    ctx: &NormContext,
) -> Result<ExperimentReport> {
    if !matches!(space.kind, SpaceKind::Modulation | SpaceKind::FourierLebesgue) {
        return Err(Error::Hypothesis(format!(
            "composition scan runs in modulation or Fourier–Lebesgue spaces, not {}",
            space.kind.name()
        )));
    }
    let crit = space.critical_s(f.grid().dim());
    if space.s <= crit {
        return Err(Error::Hypothesis(format!("s = {} must exceed n/q′ = {crit}", space.s)));
    }
    if nl.eval(0.0).abs() > 1e-14 {
        return Err(Error::Precondition(format!("{}(0) must vanish", nl.label())));
    }
    f.expect_domain(Domain::Space)?;
    if f.max_imag() > crate::paradiff::REAL_TOL {
        return Err(Error::Precondition("f must be real-valued".into()));
    }
    f.check_boundary_decay()?;
    let rows = lambdas
        .par_iter()
        .map(|&lambda| {
            let lf = f.map_real(|t| lambda * t);
            let composed = compose(nl, &lf);
            Ok(vec![lambda, space.norm(&lf, ctx)?, space.norm(&composed, ctx)?])
        })
        .collect::<Result<Vec<_>>>()?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r[0] > 0.0 && r[2] > 0.0)
        .map(|r| (r[0].ln(), r[2].ln()))
        .unzip();
    let growth = fit_slope(&xs, &ys).unwrap_or(f64::NAN);
    let regime = if space.q.value() < 4.0 / 3.0 { "below_4/3" } else { "covered" };
    let mut r = ExperimentReport::new(COMPOSITION_SCAN, &["lambda", "norm_f", "norm_F"], 0)
        .param("nonlinearity", nl.label())
        .param("space", space.kind.name())
        .param("p", space.p)
        .param("q", space.q)
        .param("s", space.s)
        .param("regime", regime)
        .param("growth_order", growth);
    r.rows = rows;
    r.finish()
}

/// Frequency-domain samples of a multiplier given as a function on the dual grid.
pub fn multiplier_spectrum(m_dual: &SampledFunction, grid: &Grid) -> Result<SampledFunction> {
    if m_dual.grid() != &grid.dual() {
        return Err(Error::GridMismatch);
    }
    let n = grid.points_per_axis() as i64;
    let half = n / 2;
    let values = (0..grid.len())
        .map(|i| {
            let k = grid.wavenumbers(i);
            let flat = match grid.dim() {
                1 => (k[0] + half) as usize,
                _ => ((k[0] + half) * n + k[1] + half) as usize,
            };
            m_dual.values()[flat]
        })
        .collect();
    SampledFunction::new(*grid, values, Domain::Frequency)
}

fn hahn_range(dim: usize, p: Exponent, q: Exponent, s: f64) -> Result<()> {
    let (pv, qv) = (p.value(), q.value());
    let n = dim as f64;
    let ok = pv >= 2.0
        && !p.is_infinite()
        && s > n / pv
        && if pv == 2.0 {
            true
        } else {
            qv >= 2.0 * pv / (pv + 2.0) && qv <= 2.0 * pv / (pv - 2.0)
        };
    if ok {
        Ok(())
    } else {
        Err(Error::Hypothesis(format!(
            "(p, q, s) = ({p}, {q}, {s}) is outside the multiplier range"
        )))
    }
}

/// `‖m(D)f‖_q / (‖m‖_{H^p_s} ‖f‖_q)`, or `‖F^{-1}m‖_1 / ‖m‖_{H²_s}` for `q = ∞`.
pub fn hahn_ratio(
    m_dual: &SampledFunction,
    f: &SampledFunction,
    p: Exponent,
    q: Exponent,
    s: f64,
) -> Result<[f64; 3]> {
    let grid = *f.grid();
    let spectrum = multiplier_spectrum(m_dual, &grid)?;
    let nm = sobolev_norm(m_dual, p, s)?;
    if q.is_infinite() {
        let kernel = lp_norm(&idft(&spectrum)?, Exponent::ONE)?;
        return Ok([nm, 1.0, kernel]);
    }
    let out = crate::filterbank::fourier_multiplier(&spectrum, f)?;
    Ok([nm, lp_norm(f, q)?, lp_norm(&out, q)?])
}

pub fn exp_hahn(
    p: Exponent,
    q: Exponent,
    s: f64,
    grid: Grid,
    trials: usize,
    seed: u64,
    family: &RandomFamily,
) -> Result<ExperimentReport> {
    hahn_range(grid.dim(), p, q, s)?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let dual = grid.dual();
    let rows = (0..2 * trials)
        .into_par_iter()
        .map(|t| {
            let m = family.nth(dual, seed, 2 * t);
            let f = family.nth(grid, seed, 2 * t + 1);
            m.check_boundary_decay()?;
            f.check_boundary_decay()?;
            let [nm, nf, nout] = hahn_ratio(&m, &f, p, q, s)?;
            Ok(vec![t as f64, nm, nf, nout, nout / (nm * nf)])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut r = ExperimentReport::new(HAHN, &["trial", "norm_m", "norm_f", "norm_out", "ratio"], seed)
        .param("p", p)
        .param("q", q)
        .param("s", s)
        .tol("trials", trials as f64)
        .tol("blowup", 100.0)
        .tol("doubling", 0.2);
    r.rows = rows;
    r.finish()
}
