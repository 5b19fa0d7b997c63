//! Acceptance criteria, one PASS/FAIL line each.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rustfft::num_complex::Complex64;

use modspace::filterbank::{CutoffProfile, FilterBank};
use modspace::grid::{dft, idft, Grid, SampledFunction};
use modspace::norms::{
    fl_norm, lp_norm, modulation_norm, sobolev_norm, Exponent, NormContext, SpaceSpec,
    WindowFunction,
};
use modspace::paradiff::{
    compose, decompose, taylor_split, CosMinusOne, DecompositionConfig, FlatExp, Polynomial,
    RationalSquare, ScalarNonlinearity, Sine,
};
use modspace::testfn::{calibration, calibration_suite, gaussian, RandomFamily, CALIBRATION_COUNT};
use modspace::verify::{
    counterexample_is_bounded, exp_algebra, exp_composition_scan, exp_counterexample,
    exp_dmj_growth, exp_local_equivalence, exp_pjm_decay, exp_qj_bound, fit_slope, pjm_slopes,
    CounterexampleSpec, ExperimentReport, LocalPatchSpec, Verdict,
};

fn ex(v: f64) -> Exponent {
    Exponent::new(v).unwrap()
}

fn rel_sup(a: &SampledFunction, b: &SampledFunction) -> f64 {
    a.sub(b).unwrap().sup_norm() / b.sup_norm()
}

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

fn flat() -> ScalarNonlinearity {
    Arc::new(FlatExp::new(3).unwrap())
}

/// `sin t − t` and `t³e^{−1/t²}`: nonlinear parts with vanishing first-order Taylor terms.
fn nonlinear_parts() -> Vec<ScalarNonlinearity> {
    vec![taylor_split(Arc::new(Sine), 1).unwrap().remainder, flat()]
}

fn calibration_grid(m: u32) -> Grid {
    Grid::new(1, 16.0 * PI, m).unwrap()
}

fn fft_suite() -> Outcome {
    let g = Grid::new(1, 32.0 * PI, 12).unwrap();
    let f = gaussian(g);
    let spectrum = dft(&f).unwrap();
    let exact = SampledFunction::from_spectrum_fn(g, |xi| {
        Complex64::new((2.0 * PI).sqrt() * (-0.5 * xi[0] * xi[0]).exp(), 0.0)
    });
    let pair = rel_sup(&spectrum, &exact);
    let back = rel_sup(&idft(&exact).unwrap(), &f);

    let gr = Grid::new(1, 64.0 * PI, 12).unwrap();
    let mut roundtrip: f64 = 0.0;
    let mut parseval: f64 = 0.0;
    for h in RandomFamily::complex().suite(gr, 5, 10) {
        let hat = dft(&h).unwrap();
        roundtrip = roundtrip.max(rel_sup(&idft(&hat).unwrap(), &h));
        let space: f64 = h.values().iter().map(|z| z.norm_sqr()).sum::<f64>() * gr.cell_volume();
        let freq: f64 = hat.values().iter().map(|z| z.norm_sqr()).sum::<f64>() * gr.freq_cell_volume()
            / (2.0 * PI);
        parseval = parseval.max((space - freq).abs() / space);
    }
    let worst = pair.max(back).max(roundtrip).max(parseval);
    outcome(
        worst < 1e-10,
        format!("gaussian pair {pair:.1e}, inverse pair {back:.1e}, roundtrip {roundtrip:.1e}, parseval {parseval:.1e}"),
    )
}

fn filterbank_suite() -> Outcome {
    let mut ok = true;
    for profile in [CutoffProfile::Exponential, CutoffProfile::SquaredExponential] {
        ok &= profile.phi(0.5) == 1.0 && profile.phi(0.25) == 1.0 && profile.phi(0.0) == 1.0;
        ok &= profile.phi(1.0) == 0.0 && profile.phi(3.0) == 0.0;
        // Midpoint of the transition, where h(1 − r) = h(r − 1/2).
        ok &= profile.phi(0.75) == 0.5;
        ok &= profile.psi(0.5) == 0.0 && profile.psi(2.0) == 0.0 && profile.psi(0.1) == 0.0;
        ok &= profile.psi(0.75) == 0.5 && profile.psi(1.5) == 0.5;
    }
    let mut worst: f64 = 0.0;
    let mut levels = 0;
    for (dim, period, m) in [(1, 2.0 * PI, 12), (1, 64.0 * PI, 12), (2, 16.0 * PI, 7)] {
        let g = Grid::new(dim, period, m).unwrap();
        let bank = FilterBank::new(g);
        let jmax = g.max_level().unwrap();
        let mut partial = bank.phi_j(0);
        for j in 0..=jmax {
            for (acc, v) in partial.iter_mut().zip(bank.psi_j(j)) {
                *acc += v;
            }
            let target = bank.phi_j(j + 1);
            for (a, b) in partial.iter().zip(&target) {
                worst = worst.max((a - b).abs());
            }
            levels += 1;
        }
    }
    ok &= worst <= 1e-14;
    outcome(ok, format!("endpoint checks exact, telescoping error {worst:.1e} over {levels} partial sums"))
}

fn norm_cross_checks() -> Outcome {
    let g = Grid::new(1, 64.0 * PI, 12).unwrap();
    let w = WindowFunction::gaussian(g);
    let mut sob: f64 = 0.0;
    let mut moyal: f64 = 0.0;
    for f in RandomFamily::default().suite(g, 17, 50) {
        for s in [0.0, 0.7, 1.2] {
            let h = sobolev_norm(&f, Exponent::TWO, s).unwrap() * (2.0 * PI).sqrt();
            let fl = fl_norm(&f, Exponent::TWO, s).unwrap();
            sob = sob.max((h - fl).abs() / fl);
        }
        let m = modulation_norm(&f, Exponent::TWO, Exponent::TWO, 0.0, &w, 4).unwrap();
        let expect = (2.0 * PI).sqrt() * lp_norm(&f, Exponent::TWO).unwrap() * w.l2_norm();
        moyal = moyal.max((m - expect).abs() / expect);
    }
    outcome(
        sob < 1e-10 && moyal < 1e-6,
        format!("50 functions: H²_s vs FL²_s {sob:.1e}, Moyal at stride 4 {moyal:.1e}"),
    )
}

fn reconstruction() -> Outcome {
    let g = calibration_grid(12);
    let cfg = DecompositionConfig::for_grid(&g).unwrap();
    let bank = FilterBank::new(g);
    let pairs: Vec<(ScalarNonlinearity, usize)> = vec![
        (Arc::new(Sine), 0),
        (Arc::new(Sine), 3),
        (Arc::new(CosMinusOne), 1),
        (Arc::new(RationalSquare), 2),
        (Arc::new(RationalSquare), 5),
        (Arc::new(Polynomial::new(vec![0.0, 0.5, -1.0, 0.3])), 4),
        (taylor_split(Arc::new(Sine), 1).unwrap().remainder, 1),
        (flat(), 0),
        (flat(), 2),
        (Arc::new(FlatExp::new(4).unwrap()), 5),
    ];
    let mut worst: f64 = 0.0;
    let mut tails: f64 = 0.0;
    for (nl, idx) in &pairs {
        let f = calibration(g, *idx);
        let d = decompose(nl.as_ref(), &f, &cfg, &bank).unwrap();
        worst = worst.max(rel_sup(&d.reconstruct(), &compose(nl.as_ref(), &f)));
        tails = tails.max(d.j_tail);
    }
    outcome(
        worst < 1e-8,
        format!(
            "{} pairs, J = {}, M_max = {}: max relative error {worst:.1e} (j-tail {tails:.1e})",
            pairs.len(),
            cfg.j,
            cfg.m_max
        ),
    )
}

fn qj_flat() -> Outcome {
    let g = calibration_grid(12);
    let cfg = DecompositionConfig::for_grid(&g).unwrap();
    let mut runs = 0;
    let mut failed = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for nl in nonlinear_parts() {
        for (idx, f) in calibration_suite(g).iter().enumerate() {
            for q in [4.0 / 3.0, 2.0, 4.0] {
                let r = exp_qj_bound(nl.as_ref(), f, ex(q), 1.2, None, &cfg).unwrap();
                let n = r.column("norm").unwrap();
                let med = modspace::verify::median(&n);
                worst_ratio = worst_ratio.max(n.iter().copied().fold(0.0, f64::max) / med);
                runs += 1;
                if r.verdict != Verdict::Pass {
                    failed.push(format!("{} f{idx} q={q:.3}", nl.label()));
                }
            }
        }
    }
    outcome(
        failed.is_empty(),
        format!("{runs} runs, max/median ≤ {worst_ratio:.2}, tail slope ≤ 0.1; failures {failed:?}"),
    )
}

fn pjm_runs(m: u32) -> Vec<(String, ExperimentReport)> {
    let g = calibration_grid(m);
    let cfg = DecompositionConfig::for_grid(&g).unwrap();
    let mut out = Vec::new();
    for nl in nonlinear_parts() {
        for idx in 0..CALIBRATION_COUNT {
            let f = calibration(g, idx);
            for q in [4.0 / 3.0, 2.0, 4.0] {
                let r = exp_pjm_decay(nl.as_ref(), &f, ex(q), 1.2, None, &cfg).unwrap();
                out.push((format!("{} f{idx} q={q:.3}", nl.label()), r));
            }
        }
    }
    out
}

fn pjm_decay() -> Outcome {
    let fine = pjm_runs(12);
    let coarse = pjm_runs(11);
    let mut failed = Vec::new();
    let mut fitted = 0;
    let mut steepest = f64::NEG_INFINITY;
    let mut drift: f64 = 0.0;
    let mut compared = 0;
    for ((label, r), (_, rc)) in fine.iter().zip(&coarse) {
        if r.verdict == Verdict::Fail {
            failed.push(label.clone());
        }
        let a = pjm_slopes(r).unwrap();
        let b = pjm_slopes(rc).unwrap();
        for (j, s) in &a {
            if let Some(s) = s {
                fitted += 1;
                steepest = steepest.max(*s);
                if let Some((_, Some(sc))) = b.iter().find(|(jc, _)| jc == j) {
                    drift = drift.max((s - sc).abs());
                    compared += 1;
                }
            }
        }
    }
    let bound = -(1.2f64.floor() + 1.0) + 0.5;
    outcome(
        failed.is_empty() && drift < 0.2,
        format!(
            "{} runs, {fitted} (j) slopes above the noise floor, max slope {steepest:.2} (bound {bound}); \
             M=11→12 drift {drift:.2e} over {compared} slopes; failures {failed:?}",
            fine.len()
        ),
    )
}

fn dmj_growth() -> Outcome {
    let g = calibration_grid(12);
    let cfg = DecompositionConfig::for_grid(&g).unwrap();
    let s = 1.2f64;
    let alpha = s.floor() as u32 + 1;
    let mut failed = Vec::new();
    let mut max_slope = f64::NEG_INFINITY;
    let mut runs = 0;
    for nl in nonlinear_parts() {
        for (idx, f) in calibration_suite(g).iter().enumerate() {
            let r = exp_dmj_growth(nl.as_ref(), f, ex(4.0 / 3.0), s, &cfg, alpha).unwrap();
            let j = r.column("j").unwrap();
            let n: Vec<f64> = r.column("norm").unwrap().iter().map(|v| v.log2()).collect();
            max_slope = max_slope.max(fit_slope(&j, &n).unwrap());
            runs += 1;
            if r.verdict == Verdict::Fail {
                failed.push(format!("{} f{idx}", nl.label()));
            }
        }
    }
    outcome(
        failed.is_empty(),
        format!("{runs} runs, |α| = {alpha}: max growth slope {max_slope:.2} (bound {}); failures {failed:?}", alpha as f64 + 0.5),
    )
}

fn support_locality() -> Outcome {
    let g = calibration_grid(12);
    let cfg = DecompositionConfig::for_grid(&g).unwrap();
    let bank = FilterBank::new(g);
    let mut q_leak: f64 = 0.0;
    let mut p_leak: f64 = 0.0;
    for nl in [Arc::new(Sine) as ScalarNonlinearity, flat()] {
        for f in calibration_suite(g) {
            let d = decompose(nl.as_ref(), &f, &cfg, &bank).unwrap();
            for j in 0..=cfg.j {
                q_leak = q_leak.max(d.q_leakage(j).unwrap());
                for m in 0..=cfg.m_max {
                    p_leak = p_leak.max(d.p_leakage(j, m).unwrap());
                }
            }
        }
    }
    outcome(
        q_leak < 1e-10 && p_leak < 1e-10,
        format!("max relative leakage q_jΔ_j f {q_leak:.1e}, p_(j,m)Δ_j f {p_leak:.1e} (C = {})", cfg.c),
    )
}

fn algebra_suites() -> Outcome {
    let g = Grid::new(1, 64.0 * PI, 12).unwrap();
    let ctx = NormContext::new(g);
    let family = RandomFamily::default();
    let spaces = [
        ("H^2_1", SpaceSpec::sobolev(Exponent::TWO, 1.0)),
        ("B^{2,2}_1", SpaceSpec::besov(Exponent::TWO, Exponent::TWO, 1.0)),
        ("M^{2,4/3}_1.2", SpaceSpec::modulation(Exponent::TWO, ex(4.0 / 3.0), 1.2)),
        ("FL^{4/3}_1.2", SpaceSpec::fourier_lebesgue(ex(4.0 / 3.0), 1.2)),
        ("FL^1_0", SpaceSpec::fourier_lebesgue(Exponent::ONE, 0.0)),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, space) in spaces {
        let t = Instant::now();
        let r = exp_algebra(&space, g, 50, 2024, &ctx, &family);
        let elapsed = t.elapsed();
        match r {
            Ok(r) => {
                let ratios = r.column("ratio").unwrap();
                let max = ratios.iter().copied().fold(0.0, f64::max);
                let pass = r.verdict == Verdict::Pass && elapsed < Duration::from_secs(60);
                ok &= pass;
                parts.push(format!("{label} {} max {max:.3} ({:.1}s)", r.verdict.as_str(), elapsed.as_secs_f64()));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{label} error: {e}"));
            }
        }
    }
    outcome(ok, format!("100 samples each: {}", parts.join("; ")))
}

fn counterexample() -> Outcome {
    let t = Instant::now();
    let spec = CounterexampleSpec::new(1, Exponent::TWO, vec![16, 64, 256, 1024, 4096]);
    let r = exp_counterexample(&spec).unwrap();
    let control = exp_counterexample(&CounterexampleSpec {
        s: spec.s + 0.6,
        ..spec.clone()
    })
    .unwrap();
    let bounded = counterexample_is_bounded(&control, 0.1).unwrap();
    let elapsed = t.elapsed();
    let fmt = |v: Vec<f64>| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(",");
    outcome(
        r.verdict == Verdict::Pass && bounded && elapsed < Duration::from_secs(30),
        format!(
            "s = {}, ε = {}: R = [{}], R/P = [{}]; control R = [{}] bounded = {bounded} ({:.1}s)",
            spec.s,
            spec.epsilon,
            fmt(r.column("R").unwrap()),
            fmt(r.column("R_over_P").unwrap()),
            fmt(control.column("R").unwrap()),
            elapsed.as_secs_f64()
        ),
    )
}

fn local_equivalence() -> Outcome {
    let g = calibration_grid(10);
    let patch = LocalPatchSpec {
        radius: 2.0,
        centers: (0..8).map(|i| [-3.5 + i as f64, 0.0]).collect(),
    };
    let f_on = |g: Grid| Ok(calibration(g, 2));
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, q, s) in [(2.0, 4.0 / 3.0, 1.2), (2.0, 2.0, 1.0), (1.0, 2.0, 0.8)] {
        let r = exp_local_equivalence(&f_on, g, &patch, ex(p), ex(q), s, 4).unwrap();
        let ratio = r.column("ratio").unwrap();
        let refined = r.column("ratio_refined").unwrap();
        let band = ratio.iter().copied().fold(0.0, f64::max) / ratio.iter().copied().fold(f64::INFINITY, f64::min);
        let drift = ratio
            .iter()
            .zip(&refined)
            .map(|(a, b)| (b / a - 1.0).abs())
            .fold(0.0, f64::max);
        ok &= r.verdict == Verdict::Pass;
        parts.push(format!("(p,q,s)=({p},{q:.3},{s}) max/min {band:.2} drift {drift:.1e}"));
    }
    outcome(ok, format!("8 centers, R = 2: {}", parts.join("; ")))
}

fn composition_scan() -> Outcome {
    let g = Grid::new(1, 16.0 * PI, 11).unwrap();
    let ctx = NormContext::new(g);
    let f = calibration(g, 0);
    let lambdas = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
    let mut ok = true;
    let mut parts = Vec::new();
    for (q, s) in [(4.0 / 3.0, 1.2), (2.0, 0.8)] {
        for space in [
            SpaceSpec::fourier_lebesgue(ex(q), s),
            SpaceSpec::modulation(Exponent::TWO, ex(q), s),
        ] {
            for nl in [Arc::new(Sine) as ScalarNonlinearity, flat()] {
                let r = exp_composition_scan(nl.as_ref(), &f, &space, &lambdas, &ctx).unwrap();
                let finite = r.column("norm_F").unwrap().iter().all(|v| v.is_finite());
                ok &= finite && r.verdict != Verdict::Fail;
            }
            let sq = Polynomial::monomial(2);
            let r = exp_composition_scan(&sq, &f, &space, &lambdas, &ctx).unwrap();
            let n = r.column("norm_F").unwrap();
            let i1 = lambdas.iter().position(|&l| l == 1.0).unwrap();
            let scaling = lambdas
                .iter()
                .zip(&n)
                .map(|(l, v)| (v / (l * l * n[i1]) - 1.0).abs())
                .fold(0.0, f64::max);
            ok &= scaling < 1e-12;
            parts.push(format!("{}^{{{q:.3}}}_{s}: t² scaling error {scaling:.1e}", space.kind.name()));
        }
    }
    outcome(ok, format!("sin and t³e^(-1/t²) finite over λ ∈ {lambdas:?}; {}", parts.join("; ")))
}

fn main() {
    let criteria: [(&str, Option<Duration>, fn() -> Outcome); 12] = [
        ("fft conventions", Some(Duration::from_secs(1)), fft_suite),
        ("filter bank", Some(Duration::from_secs(1)), filterbank_suite),
        ("norm cross-checks", Some(Duration::from_secs(30)), norm_cross_checks),
        ("decomposition reconstruction", Some(Duration::from_secs(120)), reconstruction),
        ("q_j profile", None, qj_flat),
        ("p_(j,m) decay", None, pjm_decay),
        ("derivative growth of m_j", None, dmj_growth),
        ("support locality", None, support_locality),
        ("algebra suites", None, algebra_suites),
        ("counterexample", Some(Duration::from_secs(30)), counterexample),
        ("local equivalence", None, local_equivalence),
        ("composition scan", None, composition_scan),
    ];
    let mut failures = Vec::new();
    println!();
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = run();
        let elapsed = t.elapsed();
        let in_time = limit.is_none_or(|l| elapsed < l);
        let ok = out.ok && in_time;
        let budget = limit.map_or(String::new(), |l| format!(" / {}s", l.as_secs()));
        println!(
            "{} [{:>2}] {name}: {} [{:.2}s{budget}]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            elapsed.as_secs_f64()
        );
        if !ok {
            failures.push(i + 1);
        }
    }
    let passed = criteria.len() - failures.len();
    println!("acceptance: {passed}/{} criteria passed", criteria.len());
    if !failures.is_empty() {
        println!("failed criteria: {failures:?}");
        std::process::exit(1);
    }
}
