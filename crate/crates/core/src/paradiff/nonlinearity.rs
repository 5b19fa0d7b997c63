//! Scalar nonlinearities `F: ℝ → ℝ` with analytic derivatives, the Taylor remainder
//! `G = F − Σ_{k≤N} F^{(k)}(0) t^k/k!`, and the factor `H` with `G(t) = t^N H(t)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::UnitRule;

/// Derivative order advertised by the entire functions shipped here.
pub const SMOOTH_ORDER: usize = 24;

/// Highest derivative precomputed for the flat family `t^k e^{-1/t²}`.
pub const FLAT_ORDER: usize = 16;

/// Tolerance for `F(0) = 0` in [`taylor_split`].
pub const ORIGIN_TOL: f64 = 1e-14;

/// Tolerance for vanishing Taylor coefficients of a remainder.
pub const REMAINDER_TOL: f64 = 1e-10;

/// Quadrature points used for the θ-integral of [`factor_h`].
const H_QUAD_ORDER: usize = 64;

pub trait Nonlinearity: Send + Sync + fmt::Debug {
    /// Highest `k` for which `deriv(k, ·)` is available.
    fn order(&self) -> usize;

    /// `F^{(k)}(t)` for `k ≤ order()`.
    fn deriv(&self, k: usize, t: f64) -> f64;

    fn label(&self) -> String;

    fn eval(&self, t: f64) -> f64 {
        self.deriv(0, t)
    }
}

pub type ScalarNonlinearity = Arc<dyn Nonlinearity>;

#[derive(Debug, Clone, Copy, Default)]
pub struct Sine;

impl Nonlinearity for Sine {
    fn order(&self) -> usize {
        SMOOTH_ORDER
    }

    fn deriv(&self, k: usize, t: f64) -> f64 {
        match k % 4 {
            0 => t.sin(),
            1 => t.cos(),
            2 => -t.sin(),
            _ => -t.cos(),
        }
    }

    fn label(&self) -> String {
        "sin".into()
    }
}

/// `cos t − 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CosMinusOne;

impl Nonlinearity for CosMinusOne {
    fn order(&self) -> usize {
        SMOOTH_ORDER
    }

    fn deriv(&self, k: usize, t: f64) -> f64 {
        match k % 4 {
            0 if k == 0 => t.cos() - 1.0,
            0 => t.cos(),
            1 => -t.sin(),
            2 => -t.cos(),
            _ => t.sin(),
        }
    }

    fn label(&self) -> String {
        "cos-1".into()
    }
}

/// `t²/(1+t²) = 1 − Im[1/(t−i)]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RationalSquare;

impl Nonlinearity for RationalSquare {
    fn order(&self) -> usize {
        SMOOTH_ORDER
    }

    fn deriv(&self, k: usize, t: f64) -> f64 {
        if k == 0 {
            return t * t / (1.0 + t * t);
        }
        // d^k/dt^k (t−i)^{-1} = (−1)^k k! (t−i)^{-(k+1)}
        let z = rustfft::num_complex::Complex64::new(t, -1.0);
        let w = z.powi(-(k as i32 + 1));
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        -sign * fact * w.im
    }

    fn label(&self) -> String {
        "t^2/(1+t^2)".into()
    }
}

/// The flat, non-analytic family `t^k e^{-1/t²}`, extended by 0 at the origin.
///
/// With `u = 1/t`, every derivative has the form `Σ_j c_j u^j e^{-u²}`, and
/// `d/dt [u^j e^{-u²}] = (−j u^{j+1} + 2 u^{j+3}) e^{-u²}`.
#[derive(Debug, Clone)]
pub struct FlatExp {
    k: u32,
    /// `laurent[d]` lists `(j, c_j)` for the `d`-th derivative.
    laurent: Vec<Vec<(i32, f64)>>,
}

impl FlatExp {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("flat family needs k ≥ 1".into()));
        }
        let mut laurent = vec![vec![(-(k as i32), 1.0)]];
        for d in 0..FLAT_ORDER {
            let mut next: std::collections::BTreeMap<i32, f64> = Default::default();
            for &(j, c) in &laurent[d] {
                if j != 0 {
                    *next.entry(j + 1).or_default() -= j as f64 * c;
                }
                *next.entry(j + 3).or_default() += 2.0 * c;
            }
            laurent.push(next.into_iter().filter(|&(_, c)| c != 0.0).collect());
        }
        Ok(Self { k, laurent })
    }

    pub fn power(&self) -> u32 {
        self.k
    }
}

impl Nonlinearity for FlatExp {
    fn order(&self) -> usize {
        FLAT_ORDER
    }

    fn deriv(&self, d: usize, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let u = 1.0 / t;
        if u * u > 900.0 {
            // e^{-u²} beats every power of u kept here
            return 0.0;
        }
        let damp = (-u * u).exp();
        self.laurent[d]
            .iter()
            .map(|&(j, c)| c * u.powi(j))
            .sum::<f64>()
            * damp
    }

    fn label(&self) -> String {
        format!("t^{} exp(-1/t^2)", self.k)
    }
}

/// `Σ c_k t^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// `t^d`.
    pub fn monomial(d: usize) -> Self {
        let mut coeffs = vec![0.0; d + 1];
        coeffs[d] = 1.0;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

impl Nonlinearity for Polynomial {
    fn order(&self) -> usize {
        SMOOTH_ORDER.max(self.coeffs.len())
    }

    fn deriv(&self, d: usize, t: f64) -> f64 {
        // Horner on c_k · k!/(k−d)!
        let mut acc = 0.0;
        for k in (d..self.coeffs.len()).rev() {
            let falling: f64 = ((k - d + 1)..=k).map(|i| i as f64).product();
            acc = acc * t + self.coeffs[k] * falling;
        }
        acc
    }

    fn label(&self) -> String {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(k, c)| format!("{c}*t^{k}"))
            .collect();
        if terms.is_empty() {
            "0".into()
        } else {
            terms.join(" + ")
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl Nonlinearity for Zero {
    fn order(&self) -> usize {
        usize::MAX
    }

    fn deriv(&self, _k: usize, _t: f64) -> f64 {
        0.0
    }

    fn label(&self) -> String {
        "0".into()
    }
}

/// `G = F − P` for the Taylor polynomial `P` of `F` at the origin.
#[derive(Debug, Clone)]
pub struct TaylorRemainder {
    inner: ScalarNonlinearity,
    taylor: Polynomial,
}

impl Nonlinearity for TaylorRemainder {
    fn order(&self) -> usize {
        self.inner.order()
    }

    fn deriv(&self, k: usize, t: f64) -> f64 {
        self.inner.deriv(k, t) - self.taylor.deriv(k, t)
    }

    fn label(&self) -> String {
        format!("{} - T{}", self.inner.label(), self.taylor.coeffs.len() - 1)
    }
}

/// Result of [`taylor_split`]: the remainder and `coeffs[i] = F^{(i+1)}(0)/(i+1)!`.
#[derive(Debug, Clone)]
pub struct TaylorSplit {
    pub remainder: ScalarNonlinearity,
    pub coeffs: Vec<f64>,
}

/// Splits off the degree-`n` Taylor polynomial of `f` at the origin.
pub fn taylor_split(f: ScalarNonlinearity, n: usize) -> Result<TaylorSplit> {
    if f.order() < n.saturating_add(2) {
        return Err(Error::Precondition(format!(
            "{} has {} derivatives, need {}",
            f.label(),
            f.order(),
            n + 2
        )));
    }
    let f0 = f.eval(0.0);
    if f0.abs() > ORIGIN_TOL {
        return Err(Error::Precondition(format!(
            "{}(0) = {f0} must vanish",
            f.label()
        )));
    }
    let mut fact = 1.0;
    let mut coeffs = Vec::with_capacity(n);
    for k in 1..=n {
        fact *= k as f64;
        coeffs.push(f.deriv(k, 0.0) / fact);
    }
    let mut full = vec![0.0];
    full.extend_from_slice(&coeffs);
    let remainder = TaylorRemainder {
        inner: f,
        taylor: Polynomial::new(full),
    };
    for k in 0..=n {
        let v = remainder.deriv(k, 0.0);
        if v.abs() > REMAINDER_TOL {
            return Err(Error::Precondition(format!(
                "remainder derivative {k} at 0 is {v}"
            )));
        }
    }
    Ok(TaylorSplit {
        remainder: Arc::new(remainder),
        coeffs,
    })
}

/// `H(t) = 1/(N−1)! ∫_0^1 (1−θ)^{N−1} G^{(N)}(θt) dθ`, so that `G(t) = t^N H(t)`.
#[derive(Debug, Clone)]
pub struct HFactor {
    g: ScalarNonlinearity,
    n: usize,
    rule: UnitRule,
    /// `(1−θ_i)^{N−1} w_i / (N−1)!` at the quadrature nodes.
    kernel: Vec<f64>,
}

impl Nonlinearity for HFactor {
    fn order(&self) -> usize {
        self.g.order().saturating_sub(self.n)
    }

    fn deriv(&self, k: usize, t: f64) -> f64 {
        self.rule
            .nodes()
            .iter()
            .zip(&self.kernel)
            .map(|(&theta, &w)| w * theta.powi(k as i32) * self.g.deriv(self.n + k, theta * t))
            .sum()
    }

    fn label(&self) -> String {
        format!("H[{}; N={}]", self.g.label(), self.n)
    }
}

/// Builds `H` for a `G` that vanishes to order `N` at the origin.
pub fn factor_h(g: ScalarNonlinearity, n: usize) -> Result<ScalarNonlinearity> {
    if n == 0 {
        return Err(Error::InvalidArgument("factor order N must be ≥ 1".into()));
    }
    if g.order() < n + 1 {
        return Err(Error::Precondition(format!(
            "{} has {} derivatives, need {}",
            g.label(),
            g.order(),
            n + 1
        )));
    }
    for k in 0..=n {
        let v = g.deriv(k, 0.0);
        if v.abs() > REMAINDER_TOL {
            return Err(Error::Precondition(format!(
                "{}: derivative {k} at 0 is {v}, H(0) = 0 needs it to vanish",
                g.label()
            )));
        }
    }
    let rule = UnitRule::new(H_QUAD_ORDER)?;
    let inv_fact = 1.0 / (1..n).map(|i| i as f64).product::<f64>();
    let kernel = rule
        .nodes()
        .iter()
        .zip(rule.weights())
        .map(|(&theta, &w)| w * (1.0 - theta).powi(n as i32 - 1) * inv_fact)
        .collect();
    Ok(Arc::new(HFactor { g, n, rule, kernel }))
}

/// Largest relative mismatch between `deriv(k+1, t)` and a central difference of
/// `deriv(k, ·)` with step `h`, over `k < min(order, max_k)` and the given points.
/// Errors are relative to `max(|F^{(k+1)}(t)|, 1)`.
pub fn finite_difference_error(f: &dyn Nonlinearity, points: &[f64], h: f64, max_k: usize) -> f64 {
    let top = f.order().min(max_k);
    let mut worst: f64 = 0.0;
    for &t in points {
        for k in 0..top {
            let fd = (f.deriv(k, t + h) - f.deriv(k, t - h)) / (2.0 * h);
            let exact = f.deriv(k + 1, t);
            worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn points(seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..10).map(|_| rng.gen_range(-2.0..2.0)).collect()
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let fs: Vec<ScalarNonlinearity> = vec![
            Arc::new(Sine),
            Arc::new(CosMinusOne),
            Arc::new(RationalSquare),
            Arc::new(FlatExp::new(3).unwrap()),
            Arc::new(FlatExp::new(1).unwrap()),
            Arc::new(Polynomial::new(vec![0.0, 1.0, -2.0, 0.5])),
        ];
        for f in fs {
            let err = finite_difference_error(f.as_ref(), &points(3), 1e-4, 3);
            assert!(err < 1e-6, "{}: {err}", f.label());
            assert_eq!(f.deriv(0, 0.7), f.eval(0.7));
        }
    }

    #[test]
    fn flat_family_is_flat_at_zero() {
        let f = FlatExp::new(3).unwrap();
        for d in 0..=FLAT_ORDER {
            assert_eq!(f.deriv(d, 0.0), 0.0);
            assert!(f.deriv(d, 1e-3).abs() < 1e-300);
        }
        let t: f64 = 0.8;
        assert!((f.eval(t) - t.powi(3) * (-1.0 / (t * t)).exp()).abs() < 1e-15);
        // F'(t) = (3t² + 2) e^{-1/t²} for k = 3
        assert!((f.deriv(1, t) - (3.0 * t * t + 2.0) * (-1.0 / (t * t)).exp()).abs() < 1e-14);
    }

    #[test]
    fn rational_square_closed_forms() {
        let f = RationalSquare;
        let t: f64 = 0.6;
        let d = 1.0 + t * t;
        assert!((f.deriv(1, t) - 2.0 * t / (d * d)).abs() < 1e-15);
        assert!((f.deriv(2, t) - (2.0 - 6.0 * t * t) / (d * d * d)).abs() < 1e-14);
        assert_eq!(f.eval(0.0), 0.0);
    }

    #[test]
    fn split_of_square_vanishes() {
        let sq: ScalarNonlinearity = Arc::new(Polynomial::monomial(2));
        let split = taylor_split(sq, 2).unwrap();
        assert_eq!(split.coeffs, vec![0.0, 1.0]);
        for t in points(5) {
            assert_eq!(split.remainder.eval(t), 0.0);
        }
    }

    #[test]
    fn split_of_sine() {
        let split = taylor_split(Arc::new(Sine), 1).unwrap();
        assert_eq!(split.coeffs, vec![1.0]);
        let g = &split.remainder;
        assert_eq!(g.eval(0.0), 0.0);
        assert_eq!(g.deriv(1, 0.0), 0.0);
        assert!((g.eval(0.5) - (0.5f64.sin() - 0.5)).abs() < 1e-16);
        let split3 = taylor_split(Arc::new(Sine), 3).unwrap();
        assert!((split3.coeffs[2] + 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn split_of_flat_germ_is_identity() {
        let f: ScalarNonlinearity = Arc::new(FlatExp::new(3).unwrap());
        let split = taylor_split(f.clone(), 4).unwrap();
        assert!(split.coeffs.iter().all(|&c| c == 0.0));
        for t in points(8) {
            assert_eq!(split.remainder.eval(t), f.eval(t));
        }
    }

    #[test]
    fn split_rejects_bad_input() {
        let shifted: ScalarNonlinearity = Arc::new(Polynomial::new(vec![0.1, 1.0]));
        assert!(taylor_split(shifted, 1).is_err());
        let flat: ScalarNonlinearity = Arc::new(FlatExp::new(1).unwrap());
        assert!(taylor_split(flat, FLAT_ORDER).is_err());
    }

    #[test]
    fn h_factor_of_monomial() {
        // G = t^{N+1} → H(t) = t
        for n in 1..5 {
            let h = factor_h(Arc::new(Polynomial::monomial(n + 1)), n).unwrap();
            for t in points(n as u64) {
                assert!((h.eval(t) - t).abs() < 1e-13, "N={n}");
            }
            assert_eq!(h.eval(0.0), 0.0);
        }
        // G = t^N has G^{(N)}(0) = N! ≠ 0
        assert!(factor_h(Arc::new(Polynomial::monomial(3)), 3).is_err());
    }

    #[test]
    fn h_factor_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let ts: Vec<f64> = (0..50).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let cases: Vec<(ScalarNonlinearity, usize)> = vec![
            (taylor_split(Arc::new(Sine), 3).unwrap().remainder, 3),
            (taylor_split(Arc::new(RationalSquare), 2).unwrap().remainder, 2),
            (Arc::new(FlatExp::new(3).unwrap()), 2),
        ];
        for (g, n) in cases {
            let h = factor_h(g.clone(), n).unwrap();
            let mut worst: f64 = 0.0;
            for &t in &ts {
                let lhs = g.eval(t);
                worst = worst.max((lhs - t.powi(n as i32) * h.eval(t)).abs() / (1.0 + lhs.abs()));
            }
            assert!(worst < 1e-9, "{}: {worst}", g.label());
            assert!(h.eval(0.0).abs() < 1e-15);
            let err = finite_difference_error(h.as_ref(), &ts[..10], 1e-4, 2);
            assert!(err < 1e-6, "{}: {err}", h.label());
        }
    }
}
