//! Reproducible smooth test functions.
//!
//! Random suites are sums of five modulated Gaussians
//! `c_i · e^{-|x-x_i|²/(2σ_i²)} · e^{iω_i·x}` with `c_i ∈ [-1, 1]`, `σ_i ∈ [0.5, 4]`,
//! `ω_i ∈ [-8, 8]^n` and centers in the middle half of the box. Real suites keep the
//! real part.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::grid::{Grid, SampledFunction};

/// One modulated Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub amplitude: f64,
    pub center: [f64; 2],
    pub width: f64,
    pub frequency: [f64; 2],
}

impl Packet {
    pub fn eval(&self, x: [f64; 2]) -> Complex64 {
        let d0 = x[0] - self.center[0];
        let d1 = x[1] - self.center[1];
        let envelope = (-(d0 * d0 + d1 * d1) / (2.0 * self.width * self.width)).exp();
        let phase = self.frequency[0] * x[0] + self.frequency[1] * x[1];
        Complex64::from_polar(self.amplitude * envelope, phase)
    }
}

/// Samples a packet sum on a grid.
pub fn packets_to_function(grid: Grid, packets: &[Packet], real: bool) -> SampledFunction {
    let f = SampledFunction::from_fn(grid, |x| packets.iter().map(|p| p.eval(x)).sum());
    if real {
        f.real_part()
    } else {
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomFamily {
    pub terms: usize,
    pub amplitude: f64,
    pub width: (f64, f64),
    pub max_frequency: f64,
    /// Centers are drawn from `[-fraction·T/2, fraction·T/2]^n`.
    pub center_fraction: f64,
    pub real: bool,
}

impl Default for RandomFamily {
    fn default() -> Self {
        Self {
            terms: 5,
            amplitude: 1.0,
            width: (0.5, 4.0),
            max_frequency: 8.0,
            center_fraction: 0.5,
            real: true,
        }
    }
}

impl RandomFamily {
    pub fn complex() -> Self {
        Self {
            real: false,
            ..Self::default()
        }
    }

    pub fn packets(&self, grid: &Grid, rng: &mut impl Rng) -> Vec<Packet> {
        let half = 0.5 * self.center_fraction * grid.period();
        let dim = grid.dim();
        (0..self.terms)
            .map(|_| {
                let amplitude = rng.gen_range(-self.amplitude..=self.amplitude);
                let width = rng.gen_range(self.width.0..=self.width.1);
                let mut center = [0.0; 2];
                let mut frequency = [0.0; 2];
                for axis in 0..dim {
                    center[axis] = rng.gen_range(-half..=half);
                    frequency[axis] = rng.gen_range(-self.max_frequency..=self.max_frequency);
                }
                Packet {
                    amplitude,
                    center,
                    width,
                    frequency,
                }
            })
            .collect()
    }

    pub fn sample(&self, grid: Grid, rng: &mut impl Rng) -> SampledFunction {
        let packets = self.packets(&grid, rng);
        packets_to_function(grid, &packets, self.real)
    }

    /// `count` functions from one seed; function `i` only depends on `(seed, i)`.
    pub fn suite(&self, grid: Grid, seed: u64, count: usize) -> Vec<SampledFunction> {
        (0..count).map(|i| self.nth(grid, seed, i)).collect()
    }

    pub fn nth(&self, grid: Grid, seed: u64, index: usize) -> SampledFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        self.sample(grid, &mut rng)
    }
}

/// `e^{-|x|²/2}`, the closed-form calibration function.
pub fn gaussian(grid: Grid) -> SampledFunction {
    SampledFunction::from_real_fn(grid, |x| (-0.5 * (x[0] * x[0] + x[1] * x[1])).exp())
}

const CALIBRATION: [&[(f64, f64, f64, f64)]; 6] = [
    // (amplitude, center, width, frequency) along the first axis
    &[(0.8, 0.0, 2.0, 0.0), (0.4, 1.5, 1.0, 2.0)],
    &[(0.5, 0.0, 2.5, 0.0), (0.6, -1.0, 1.2, 3.0)],
    &[(0.7, 0.5, 1.5, 0.0), (0.3, -2.0, 0.9, 1.5), (0.2, 2.0, 1.1, 4.0)],
    &[(0.9, 0.0, 1.8, 0.5), (-0.35, 0.8, 0.8, 2.5)],
    &[(0.6, -0.5, 2.2, 0.0), (0.45, 0.0, 1.0, 1.0), (-0.25, 1.5, 0.7, 3.5)],
    &[(1.0, 0.0, 1.0, 0.0)],
];

/// Number of fixed calibration functions.
pub const CALIBRATION_COUNT: usize = CALIBRATION.len();

/// Fixed real test functions with substantial low-frequency mass, localized within
/// `|x| ≤ 5` and resolved below `|ξ| ≈ 12` to double precision.
pub fn calibration(grid: Grid, index: usize) -> SampledFunction {
    let packets: Vec<Packet> = CALIBRATION[index % CALIBRATION.len()]
        .iter()
        .map(|&(amplitude, c, width, freq)| Packet {
            amplitude,
            center: [c, 0.0],
            width,
            frequency: [freq, 0.0],
        })
        .collect();
    packets_to_function(grid, &packets, true)
}

pub fn calibration_suite(grid: Grid) -> Vec<SampledFunction> {
    (0..CALIBRATION_COUNT).map(|i| calibration(grid, i)).collect()
}
