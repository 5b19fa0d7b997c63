//! Batch front end: `key = value` run configs, command dispatch and report files.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rustfft::num_complex::Complex64;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::filterbank::FilterBank;
use crate::grid::{Domain, Grid, SampledFunction};
use crate::norms::{
    besov_norm, fl_norm, lp_norm, modulation_norm, parse_real, sobolev_norm, Exponent,
    NormContext, SpaceKind, SpaceSpec,
};
use crate::paradiff::{
    decompose, taylor_split, CosMinusOne, DecompositionConfig, FlatExp, Polynomial,
    RationalSquare, ScalarNonlinearity, Sine, Zero,
};
use crate::testfn::{calibration, gaussian, RandomFamily};
use crate::verify::{self, CounterexampleSpec, ExperimentReport, LocalPatchSpec, Verdict};

pub const NORM: &str = "norm";
pub const DECOMPOSE: &str = "decompose";

pub const SEED_ENV: &str = "MODSPACE_SEED";

/// Every key a run config may contain.
pub const KNOWN_KEYS: &[&str] = &[
    "grid.n",
    "grid.T",
    "grid.M",
    "space.kind",
    "space.p",
    "space.q",
    "space.s",
    "space.s_tilde",
    "function.kind",
    "function.index",
    "function.complex",
    "function.path",
    "nonlinearity.kind",
    "nonlinearity.k",
    "nonlinearity.coeffs",
    "nonlinearity.taylor_order",
    "decomposition.C",
    "decomposition.J",
    "decomposition.M_max",
    "decomposition.quad_order",
    "experiment.name",
    "experiment.trials",
    "experiment.alpha_order",
    "experiment.lambdas",
    "experiment.N_list",
    "experiment.epsilon",
    "experiment.C_log",
    "experiment.centers",
    "experiment.radius",
    "stft.stride",
    "seed",
    "output.path",
    "output.format",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown output format `{other}`"))),
        }
    }
}

/// Exit status for an error: 2 usage/config, 3 numerical guard, 4 capability limit.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BoundaryDecay { .. } | Error::UnderResolved { .. } | Error::NonFinite(_) => 3,
        Error::CapabilityLimit(_) => 4,
        _ => 2,
    }
}

/// Exit status for a finished report.
pub fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Fail => 1,
        Verdict::Pass | Verdict::Informational => 0,
    }
}

/// Parsed `key = value` config. Every value a command reads, including defaults,
/// is recorded so that the report can embed the fully resolved config.
#[derive(Debug, Default)]
pub struct RunConfig {
    raw: BTreeMap<String, String>,
    used: Mutex<BTreeMap<String, String>>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::Config(format!("unknown key `{key}`")));
            }
            if raw.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!("duplicate key `{key}`")));
            }
        }
        Ok(Self {
            raw,
            used: Mutex::default(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.raw.insert(key.into(), value.to_string());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.raw.get(key).map(String::as_str)
    }

    fn record(&self, key: &str, value: String) {
        self.used.lock().expect("config lock").insert(key.into(), value);
    }

    fn parsed<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
        match self.raw.get(key) {
            None => Ok(None),
            Some(v) => {
                let out = parse(v).map_err(|e| Error::Config(format!("`{key}`: {e}")))?;
                self.record(key, v.clone());
                Ok(Some(out))
            }
        }
    }

    fn get_or<T: Display>(&self, key: &str, default: T, parse: impl Fn(&str) -> Result<T>) -> Result<T> {
        match self.parsed(key, parse)? {
            Some(v) => Ok(v),
            None => {
                self.record(key, default.to_string());
                Ok(default)
            }
        }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        self.get_or(key, default, parse_real)
    }

    fn opt_real(&self, key: &str) -> Result<Option<f64>> {
        self.parsed(key, parse_real)
    }

    fn integer(&self, key: &str, default: usize) -> Result<usize> {
        self.get_or(key, default, parse_int)
    }

    fn opt_integer(&self, key: &str) -> Result<Option<usize>> {
        self.parsed(key, parse_int)
    }

    fn text(&self, key: &str, default: &str) -> Result<String> {
        self.get_or(key, default.to_string(), |s| Ok(s.to_string()))
    }

    fn exponent(&self, key: &str, default: Exponent) -> Result<Exponent> {
        let v = self.get_or(key, default.value(), |s| Exponent::from_str(s).map(|e| e.value()))?;
        Exponent::new(v)
    }

    fn list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.parsed(key, parse_list)? {
            Some(v) => Ok(v),
            None => {
                self.record(key, join(default));
                Ok(default.to_vec())
            }
        }
    }

    /// Keys that enter the computation, excluding where the output goes.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        let mut out: BTreeMap<String, String> = self
            .raw
            .iter()
            .filter(|(k, _)| !k.starts_with("output."))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        for (k, v) in self.used.lock().expect("config lock").iter() {
            out.insert(k.clone(), v.clone());
        }
        out
    }

    /// Renders the resolved config in the input format.
    pub fn resolved_text(&self) -> String {
        render_config(&self.resolved())
    }

    pub fn seed(&self) -> Result<u64> {
        self.get_or("seed", 0u64, |s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse seed `{s}`")))
        })
    }

    /// `--seed` beats `MODSPACE_SEED`, which beats the config file.
    pub fn apply_seed_override(&mut self, flag: Option<u64>, env: Option<&str>) -> Result<()> {
        if let Some(seed) = flag {
            return self.set("seed", seed);
        }
        if let Some(v) = env {
            let seed: u64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV} = `{v}` is not an integer")))?;
            self.set("seed", seed)?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let n = self.integer("grid.n", 1)?;
        let t = self.get_or("grid.T", 64.0 * PI, parse_period)?;
        let m = self.integer("grid.M", 12)?;
        Grid::new(n, t, m as u32)
    }

    /// The test function named by `function.*`.
    pub fn function(&self, grid: Grid) -> Result<SampledFunction> {
        let kind = self.text("function.kind", "calibration")?;
        match kind.as_str() {
            "gaussian" => Ok(gaussian(grid)),
            "zero" => Ok(SampledFunction::zeros(grid, Domain::Space)),
            "calibration" => Ok(calibration(grid, self.integer("function.index", 0)?)),
            "random" => {
                let complex = self.get_or("function.complex", false, parse_bool)?;
                let family = if complex {
                    RandomFamily::complex()
                } else {
                    RandomFamily::default()
                };
                Ok(family.nth(grid, self.seed()?, self.integer("function.index", 0)?))
            }
            "file" => {
                let path = self
                    .parsed("function.path", |s| Ok(PathBuf::from(s)))?
                    .ok_or_else(|| Error::Config("function.kind = file needs function.path".into()))?;
                read_samples(&path, grid)
            }
            other => Err(Error::Config(format!("unknown function kind `{other}`"))),
        }
    }

    /// `nonlinearity.*`; with `taylor_order = N` the result is `F − T_N F`.
    pub fn nonlinearity(&self) -> Result<ScalarNonlinearity> {
        let kind = self.text("nonlinearity.kind", "sin")?;
        let base: ScalarNonlinearity = match kind.as_str() {
            "sin" => Arc::new(Sine),
            "cos_minus_one" => Arc::new(CosMinusOne),
            "rational_square" => Arc::new(RationalSquare),
            "flat_exp" => Arc::new(FlatExp::new(self.integer("nonlinearity.k", 3)? as u32)?),
            "polynomial" => Arc::new(Polynomial::new(self.list("nonlinearity.coeffs", &[0.0, 0.0, 1.0])?)),
            "zero" => Arc::new(Zero),
            other => return Err(Error::Config(format!("unknown nonlinearity `{other}`"))),
        };
        match self.opt_integer("nonlinearity.taylor_order")? {
            None | Some(0) => Ok(base),
            Some(n) => Ok(taylor_split(base, n)?.remainder),
        }
    }

    pub fn space(&self, default_kind: &str) -> Result<SpaceSpec> {
        let kind: SpaceKind = self.text("space.kind", default_kind)?.parse()?;
        Ok(SpaceSpec {
            kind,
            p: self.exponent("space.p", Exponent::TWO)?,
            q: self.exponent("space.q", Exponent::TWO)?,
            s: self.real("space.s", 1.2)?,
            s_tilde: self.opt_real("space.s_tilde")?,
        })
    }

    pub fn decomposition(&self, grid: &Grid) -> Result<DecompositionConfig> {
        let base = DecompositionConfig::for_grid(grid)?;
        let c = self.real("decomposition.C", base.c)?;
        let j = self.integer("decomposition.J", base.j)?;
        let m_max = self.integer("decomposition.M_max", DecompositionConfig::required_m_max(grid, c, 0))?;
        let quad_order = self.integer("decomposition.quad_order", base.quad_order)?;
        let cfg = DecompositionConfig {
            c,
            j,
            m_max,
            quad_order,
        };
        cfg.validate(grid)?;
        Ok(cfg)
    }

    pub fn norm_context(&self, grid: Grid) -> Result<NormContext> {
        let mut ctx = NormContext::new(grid);
        ctx.stride = self.integer("stft.stride", ctx.stride)?;
        Ok(ctx)
    }

    pub fn output(&self, out: Option<PathBuf>, format: Option<Format>) -> Result<(Option<PathBuf>, Format)> {
        let path = out.or_else(|| self.raw("output.path").map(PathBuf::from));
        let format = match format {
            Some(f) => f,
            None => self.raw("output.format").unwrap_or("csv").parse()?,
        };
        Ok((path, format))
    }
}

fn parse_int(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse integer `{s}`")))
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!("cannot parse boolean `{other}`"))),
    }
}

/// A real number, optionally times `pi` (`64pi`, `64*pi`, `pi`).
pub fn parse_period(s: &str) -> Result<f64> {
    let t = s.trim();
    match t.strip_suffix("pi") {
        Some(head) => {
            let head = head.trim().trim_end_matches('*').trim();
            Ok(if head.is_empty() { 1.0 } else { parse_real(head)? } * PI)
        }
        None => parse_real(t),
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(parse_real)
        .collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn render_config(map: &BTreeMap<String, String>) -> String {
    map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// One sample per line, `re [im]`, in flat index order; `#` starts a comment.
pub fn read_samples(path: &Path, grid: Grid) -> Result<SampledFunction> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::with_capacity(grid.len());
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Config(format!("{}:{}: bad sample `{s}`", path.display(), lineno + 1)))
        };
        let z = match fields.as_slice() {
            [re] => Complex64::new(num(re)?, 0.0),
            [re, im] => Complex64::new(num(re)?, num(im)?),
            _ => {
                return Err(Error::Config(format!(
                    "{}:{}: expected `re [im]`",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        values.push(z);
    }
    if values.len() != grid.len() {
        return Err(Error::Config(format!(
            "{} holds {} samples, grid has {}",
            path.display(),
            values.len(),
            grid.len()
        )));
    }
    SampledFunction::new(grid, values, Domain::Space)
}

/// A report plus the config that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub config: BTreeMap<String, String>,
}

fn informational(name: &str, columns: &[&str], seed: u64) -> ExperimentReport {
    ExperimentReport {
        name: name.into(),
        parameters: BTreeMap::new(),
        columns: columns.iter().map(|c| c.to_string()).collect(),
        rows: Vec::new(),
        verdict: Verdict::Informational,
        tolerances: BTreeMap::new(),
        seed,
    }
}

fn finish(cfg: &RunConfig, report: ExperimentReport) -> RunOutput {
    RunOutput {
        report,
        config: cfg.resolved(),
    }
}

/// Norms of one function. `space.kind = all` evaluates every function space.
pub fn cmd_norm(cfg: &RunConfig) -> Result<RunOutput> {
    let grid = cfg.grid()?;
    let seed = cfg.seed()?;
    let f = cfg.function(grid)?;
    f.check_boundary_decay()?;
    let kind = cfg.text("space.kind", "all")?;
    let p = cfg.exponent("space.p", Exponent::TWO)?;
    let q = cfg.exponent("space.q", Exponent::TWO)?;
    let s = cfg.real("space.s", 0.0)?;
    let ctx = cfg.norm_context(grid)?;
    let (columns, row) = if kind == "all" {
        let bank = FilterBank::new(grid);
        (
            vec!["lp", "sobolev", "fourier_lebesgue", "besov", "modulation"],
            vec![
                lp_norm(&f, p)?,
                sobolev_norm(&f, p, s)?,
                fl_norm(&f, q, s)?,
                besov_norm(&f, p, q, s, &bank)?,
                modulation_norm(&f, p, q, s, &ctx.window, ctx.stride)?,
            ],
        )
    } else {
        let kind: SpaceKind = kind.parse()?;
        let spec = SpaceSpec {
            kind,
            p,
            q,
            s,
            s_tilde: None,
        };
        (vec![kind.name()], vec![spec.norm(&f, &ctx)?])
    };
    let mut report = informational(NORM, &columns, seed);
    report.parameters.insert("p".into(), p.to_string());
    report.parameters.insert("q".into(), q.to_string());
    report.parameters.insert("s".into(), s.to_string());
    report.rows = vec![row];
    Ok(finish(cfg, report))
}

/// Runs the decomposition and tabulates the sup norms of `q_j` (`m = −1`) and
/// `p_{j,m}`, their spectral leakage, and the per-`j` truncation tail.
pub fn cmd_decompose(cfg: &RunConfig) -> Result<RunOutput> {
    let grid = cfg.grid()?;
    let seed = cfg.seed()?;
    let g = cfg.nonlinearity()?;
    let f = cfg.function(grid)?;
    let dcfg = cfg.decomposition(&grid)?;
    let bank = FilterBank::new(grid);
    let d = decompose(g.as_ref(), &f, &dcfg, &bank)?;
    let gf = crate::paradiff::compose(g.as_ref(), &f);
    let err = d.reconstruct().sub(&gf)?.sup_norm();
    let scale = gf.sup_norm();
    let rel = if scale == 0.0 { err } else { err / scale };

    let mut report = informational(DECOMPOSE, &["j", "m", "sup_norm", "leakage", "m_tail"], seed);
    for j in 0..=dcfg.j {
        report.rows.push(vec![
            j as f64,
            -1.0,
            d.q_terms[j].sup_norm(),
            d.q_leakage(j)?,
            d.m_tails[j],
        ]);
        for m in 0..=dcfg.m_max {
            report.rows.push(vec![
                j as f64,
                m as f64,
                d.p_terms[j][m].sup_norm(),
                d.p_leakage(j, m)?,
                d.m_tails[j],
            ]);
        }
    }
    let params = &mut report.parameters;
    params.insert("nonlinearity".into(), g.label());
    params.insert("reconstruction_error".into(), rel.to_string());
    params.insert("j_tail".into(), d.j_tail.to_string());
    params.insert("input_tail".into(), d.input_tail.to_string());
    params.insert("C".into(), dcfg.c.to_string());
    params.insert("J".into(), dcfg.j.to_string());
    params.insert("M_max".into(), dcfg.m_max.to_string());
    Ok(finish(cfg, report))
}

fn default_centers(dim: usize) -> Vec<f64> {
    let line: Vec<f64> = (0..8).map(|i| -3.5 + i as f64).collect();
    match dim {
        1 => line,
        // Pairs (x, y) along the diagonal.
        _ => line.iter().flat_map(|&c| [c, c]).collect(),
    }
}

/// Dispatches `experiment.name` to its driver in [`verify`].
pub fn cmd_verify(cfg: &RunConfig) -> Result<RunOutput> {
    let name = cfg
        .parsed("experiment.name", |s| Ok(s.to_string()))?
        .ok_or_else(|| Error::Config("verify needs experiment.name".into()))?;
    if !verify::EXPERIMENTS.contains(&name.as_str()) {
        return Err(Error::Config(format!("unknown experiment `{name}`")));
    }
    let seed = cfg.seed()?;
    let mut report = match name.as_str() {
        verify::QJ_BOUND | verify::PJM_DECAY | verify::DMJ_GROWTH => {
            let grid = cfg.grid()?;
            let g = cfg.nonlinearity()?;
            let f = cfg.function(grid)?;
            let q = cfg.exponent("space.q", Exponent::new(4.0 / 3.0)?)?;
            let s = cfg.real("space.s", 1.2)?;
            let dcfg = cfg.decomposition(&grid)?;
            match name.as_str() {
                verify::QJ_BOUND => {
                    let st = cfg.opt_real("space.s_tilde")?;
                    verify::exp_qj_bound(g.as_ref(), &f, q, s, st, &dcfg)?
                }
                verify::PJM_DECAY => {
                    let st = cfg.opt_real("space.s_tilde")?;
                    verify::exp_pjm_decay(g.as_ref(), &f, q, s, st, &dcfg)?
                }
                _ => {
                    let alpha = cfg.integer("experiment.alpha_order", s.floor() as usize + 1)?;
                    verify::exp_dmj_growth(g.as_ref(), &f, q, s, &dcfg, alpha as u32)?
                }
            }
        }
        verify::ALGEBRA => {
            let grid = cfg.grid()?;
            let space = cfg.space("fourier_lebesgue")?;
            let trials = cfg.integer("experiment.trials", 20)?;
            let ctx = cfg.norm_context(grid)?;
            verify::exp_algebra(&space, grid, trials, seed, &ctx, &RandomFamily::default())?
        }
        verify::COUNTEREXAMPLE => {
            let n = cfg.integer("grid.n", 1)?;
            let q = cfg.exponent("space.q", Exponent::TWO)?;
            let n_list: Vec<usize> = cfg
                .list("experiment.N_list", &[16.0, 64.0, 256.0, 1024.0, 4096.0])?
                .iter()
                .map(|&v| v as usize)
                .collect();
            let base = CounterexampleSpec::new(n, q, n_list);
            let spec = CounterexampleSpec {
                s: cfg.real("space.s", base.s)?,
                epsilon: cfg.real("experiment.epsilon", base.epsilon)?,
                c_log: cfg.real("experiment.C_log", base.c_log)?,
                ..base
            };
            verify::exp_counterexample(&spec)?
        }
        verify::LOCAL_EQUIVALENCE => {
            let grid = cfg.grid()?;
            let p = cfg.exponent("space.p", Exponent::TWO)?;
            let q = cfg.exponent("space.q", Exponent::TWO)?;
            let s = cfg.real("space.s", 1.0)?;
            let stride = cfg.integer("stft.stride", 4)?;
            let radius = cfg.real("experiment.radius", 2.0)?;
            let flat = cfg.list("experiment.centers", &default_centers(grid.dim()))?;
            let centers: Vec<[f64; 2]> = match grid.dim() {
                1 => flat.iter().map(|&x| [x, 0.0]).collect(),
                _ => {
                    if flat.len() % 2 != 0 {
                        return Err(Error::Config("experiment.centers needs (x, y) pairs".into()));
                    }
                    flat.chunks(2).map(|c| [c[0], c[1]]).collect()
                }
            };
            // Resolve the function keys once so the report records them.
            cfg.function(grid)?;
            let f_on = |g: Grid| cfg.function(g);
            let patch = LocalPatchSpec { radius, centers };
            verify::exp_local_equivalence(&f_on, grid, &patch, p, q, s, stride)?
        }
        verify::COMPOSITION_SCAN => {
            let grid = cfg.grid()?;
            let nl = cfg.nonlinearity()?;
            let f = cfg.function(grid)?;
            let space = cfg.space("fourier_lebesgue")?;
            let lambdas = cfg.list("experiment.lambdas", &[0.25, 0.5, 1.0, 2.0, 4.0])?;
            let ctx = cfg.norm_context(grid)?;
            verify::exp_composition_scan(nl.as_ref(), &f, &space, &lambdas, &ctx)?
        }
        verify::HAHN => {
            let grid = cfg.grid()?;
            let p = cfg.exponent("space.p", Exponent::TWO)?;
            let q = cfg.exponent("space.q", Exponent::TWO)?;
            let s = cfg.real("space.s", 1.0)?;
            let trials = cfg.integer("experiment.trials", 20)?;
            verify::exp_hahn(p, q, s, grid, trials, seed, &RandomFamily::default())?
        }
        _ => unreachable!(),
    };
    report.seed = seed;
    Ok(finish(cfg, report))
}

fn number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

pub fn to_json(out: &RunOutput) -> Result<String> {
    let r = &out.report;
    let rows: Vec<Value> = r
        .rows
        .iter()
        .map(|row| {
            let obj: Map<String, Value> = r
                .columns
                .iter()
                .zip(row)
                .map(|(c, &v)| (c.clone(), number(v)))
                .collect();
            Value::Object(obj)
        })
        .collect();
    let tolerances: Map<String, Value> = r.tolerances.iter().map(|(k, &v)| (k.clone(), number(v))).collect();
    let doc = json!({
        "name": r.name,
        "verdict": r.verdict.as_str(),
        "seed": r.seed,
        "parameters": r.parameters,
        "tolerances": tolerances,
        "config": out.config,
        "columns": r.columns,
        "rows": rows,
    });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

/// `#`-prefixed metadata (name, verdict, parameters, tolerances, config), then a
/// header row and one record per row.
pub fn to_csv(out: &RunOutput) -> Result<String> {
    let r = &out.report;
    let mut text = String::new();
    text += &format!("# name = {}\n# verdict = {}\n# seed = {}\n", r.name, r.verdict.as_str(), r.seed);
    for (k, v) in &r.parameters {
        text += &format!("# parameter.{k} = {v}\n");
    }
    for (k, v) in &r.tolerances {
        text += &format!("# tolerance.{k} = {v}\n");
    }
    for (k, v) in &out.config {
        text += &format!("# config.{k} = {v}\n");
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&r.columns)?;
    for row in &r.rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    text += std::str::from_utf8(&body).expect("csv output is utf-8");
    Ok(text)
}

pub fn render(out: &RunOutput, format: Format) -> Result<String> {
    match format {
        Format::Csv => to_csv(out),
        Format::Json => to_json(out),
    }
}

/// Embedded config and rows of a rendered report.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReport {
    pub verdict: String,
    pub config: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn parse_csv(text: &str) -> Result<ParsedReport> {
    let mut verdict = String::new();
    let mut config = BTreeMap::new();
    let mut body = String::new();
    for line in text.lines() {
        match line.strip_prefix("# ") {
            Some(meta) => {
                let (k, v) = meta
                    .split_once(" = ")
                    .ok_or_else(|| Error::Config(format!("bad metadata line `{line}`")))?;
                if k == "verdict" {
                    verdict = v.to_string();
                } else if let Some(key) = k.strip_prefix("config.") {
                    config.insert(key.to_string(), v.to_string());
                }
            }
            None => {
                body += line;
                body.push('\n');
            }
        }
    }
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let columns = reader.headers()?.iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|rec| {
            rec?.iter()
                .map(|v| v.parse::<f64>().map_err(|_| Error::Config(format!("bad value `{v}`"))))
                .collect()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(ParsedReport {
        verdict,
        config,
        columns,
        rows,
    })
}

pub fn parse_json(text: &str) -> Result<ParsedReport> {
    let doc: Value = serde_json::from_str(text)?;
    let bad = || Error::Config("malformed JSON report".into());
    let columns: Vec<String> = serde_json::from_value(doc["columns"].clone())?;
    let config: BTreeMap<String, String> = serde_json::from_value(doc["config"].clone())?;
    let rows = doc["rows"]
        .as_array()
        .ok_or_else(bad)?
        .iter()
        .map(|row| {
            columns
                .iter()
                .map(|c| Ok(row[c].as_f64().unwrap_or(f64::NAN)))
                .collect()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(ParsedReport {
        verdict: doc["verdict"].as_str().ok_or_else(bad)?.to_string(),
        config,
        columns,
        rows,
    })
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Norm,
    Decompose,
    Verify,
}

pub fn run_command(command: Command, cfg: &RunConfig) -> Result<RunOutput> {
    match command {
        Command::Norm => cmd_norm(cfg),
        Command::Decompose => cmd_decompose(cfg),
        Command::Verify => cmd_verify(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> RunConfig {
        RunConfig::parse(text).unwrap()
    }

    #[test]
    fn parse_rejects_unknown_and_duplicate_keys() {
        let err = RunConfig::parse("grid.n = 1\nspace.r = 2\n").unwrap_err();
        assert!(err.to_string().contains("space.r"), "{err}");
        assert_eq!(exit_code(&err), 2);
        assert!(RunConfig::parse("seed = 1\nseed = 2").is_err());
        assert!(RunConfig::parse("just words").is_err());
        let c = cfg("# comment\n\ngrid.M = 9   # trailing\n");
        assert_eq!(c.raw("grid.M"), Some("9"));
    }

    #[test]
    fn periods() {
        assert_eq!(parse_period("64pi").unwrap(), 64.0 * PI);
        assert_eq!(parse_period("16 * pi").unwrap(), 16.0 * PI);
        assert_eq!(parse_period("pi").unwrap(), PI);
        assert_eq!(parse_period("2.5").unwrap(), 2.5);
        assert!(parse_period("xpi").is_err());
    }

    #[test]
    fn seed_precedence() {
        let mut c = cfg("seed = 3");
        c.apply_seed_override(None, None).unwrap();
        assert_eq!(c.seed().unwrap(), 3);
        c.apply_seed_override(None, Some("7")).unwrap();
        assert_eq!(c.seed().unwrap(), 7);
        c.apply_seed_override(Some(11), Some("7")).unwrap();
        assert_eq!(c.seed().unwrap(), 11);
        assert!(c.apply_seed_override(None, Some("x")).is_err());
    }

    #[test]
    fn gaussian_norm_report() {
        let c = cfg("grid.T = 32pi\ngrid.M = 10\nfunction.kind = gaussian\nspace.q = 2\nspace.s = 0\n");
        let out = cmd_norm(&c).unwrap();
        let r = &out.report;
        let fl = r.column("fourier_lebesgue").unwrap()[0];
        let expect = (2.0 * PI * PI.sqrt()).sqrt();
        assert!((fl - expect).abs() / expect < 1e-6);
        let lp = r.column("lp").unwrap()[0];
        assert!((lp - PI.powf(0.25)).abs() < 1e-8);
        assert_eq!(out.config["grid.M"], "10");
        assert_eq!(out.config["stft.stride"], "4");
    }

    #[test]
    fn zero_function_norms() {
        let c = cfg("grid.M = 9\nfunction.kind = zero\n");
        let out = cmd_norm(&c).unwrap();
        assert!(out.report.rows[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn error_codes() {
        let c = cfg("grid.T = 2pi\ngrid.M = 8\nfunction.kind = calibration\n");
        assert_eq!(exit_code(&cmd_norm(&c).unwrap_err()), 3);
        let c = cfg("grid.T = 16pi\ngrid.M = 10\ndecomposition.J = 9\n");
        assert_eq!(exit_code(&cmd_decompose(&c).unwrap_err()), 4);
        let c = cfg("experiment.name = nope\n");
        assert_eq!(exit_code(&cmd_verify(&c).unwrap_err()), 2);
        let c = cfg("experiment.name = algebra\nspace.q = 2\nspace.s = 0.3\ngrid.M = 9\n");
        assert!(matches!(cmd_verify(&c).unwrap_err(), Error::Hypothesis(_)));
        let c = cfg("function.kind = wobble\nfunction.index = 2\n");
        assert!(cmd_norm(&c).is_err());
    }

    #[test]
    fn decompose_report() {
        let c = cfg("grid.T = 16pi\ngrid.M = 11\nnonlinearity.kind = sin\n");
        let out = cmd_decompose(&c).unwrap();
        let err: f64 = out.report.parameters["reconstruction_error"].parse().unwrap();
        assert!(err < 1e-8, "{err}");
        let leak = out.report.column("leakage").unwrap();
        assert!(leak.iter().all(|&v| v < 1e-10));
    }

    #[test]
    fn csv_and_json_agree() {
        let c = cfg("experiment.name = counterexample\nexperiment.N_list = 16,64,256,1024\n");
        let out = cmd_verify(&c).unwrap();
        assert_eq!(out.report.verdict, Verdict::Pass);
        let a = parse_csv(&to_csv(&out).unwrap()).unwrap();
        let b = parse_json(&to_json(&out).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows, out.report.rows);
        assert_eq!(a.config, out.config);
    }

    #[test]
    fn embedded_config_reruns_identically() {
        let c = cfg("experiment.name = hahn\ngrid.M = 12\nspace.q = 4/3\nexperiment.trials = 3\nseed = 5\n");
        let first = cmd_verify(&c).unwrap();
        let again = cmd_verify(&RunConfig::parse(&render_config(&first.config)).unwrap()).unwrap();
        assert_eq!(first, again);
    }

    #[test]
    fn samples_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.txt");
        let g = Grid::new(1, 16.0 * PI, 4).unwrap();
        let mut text = String::from("# header\n");
        for i in 0..g.len() {
            text += &format!("{} {}\n", i as f64, -(i as f64));
        }
        std::fs::write(&path, &text).unwrap();
        let f = read_samples(&path, g).unwrap();
        assert_eq!(f.values()[3], Complex64::new(3.0, -3.0));
        std::fs::write(&path, "1\n2\n").unwrap();
        assert!(read_samples(&path, g).is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, "a").unwrap();
        write_atomic(&path, "b").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "b");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
