//! Seeded ensembles, structured runs and their CSV/metadata output.
//!
//! Trial `t` draws its initial guess from `ChaCha8Rng::seed_from_u64(seed)`
//! switched to stream `t`, entries uniform on `(−1, 1)`. Right-hand sides are
//! zero, so `r₀ = A x₀`. Indices in config files are 1-based.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exact::{frac, int, Rational, RationalMatrix};
use crate::linalg::{DenseMatrix, DenseVector};
use crate::solvers::{solve, IterationTrace, Method, SolveConfig, Termination};
use crate::spectral::{SchurBlocks, Spectrum};
use crate::theory::{self, classify, Prediction, Structure};

pub const BUILTIN_NAMES: [&str; 7] = ["A1", "A2", "A3", "A4", "CA1", "CA2", "CA3"];

/// Environment variable capping the worker threads of ensemble runs.
pub const THREADS_ENV: &str = "RKL_THREADS";

const A4_M_TIMES_8: [[i64; 8]; 8] = [
    [0, 1, 0, -5, 0, 0, 0, 2],
    [-1, 0, 0, 0, 5, 0, -2, 0],
    [0, 0, 0, 0, -2, -1, 5, 0],
    [5, 0, 0, 0, -1, -2, 0, 0],
    [0, -5, 2, 1, 0, 0, 0, 0],
    [0, 0, 1, 2, 0, 0, 0, -5],
    [0, 2, -5, 0, 0, 0, 0, 1],
    [-2, 0, 0, 0, 0, 5, -1, 0],
];

/// Builtin matrix with exact entries.
pub fn builtin_rational(name: &str) -> Result<RationalMatrix> {
    let d = |e: Vec<Rational>| RationalMatrix::diag(&e);
    match name.to_ascii_uppercase().as_str() {
        "A1" | "CA1" => d(vec![int(1), int(2), int(3)]),
        "A2" => d((1..=5).map(|k| frac(1, 1 << k)).collect()),
        "A3" => d(vec![int(-1), int(2), int(3), int(4)]),
        "A4" => RationalMatrix::from_rows(
            (0..8)
                .map(|i| {
                    (0..8)
                        .map(|j| {
                            let delta = if i == j { 8 } else { 0 };
                            frac(delta - A4_M_TIMES_8[i][j], 8)
                        })
                        .collect()
                })
                .collect(),
        ),
        "CA2" => d(vec![frac(-1, 2), int(-4), int(2)]),
        "CA3" => d(vec![frac(1, 2), frac(3, 2), frac(1, 3), int(-2)]),
        _ => Err(Error::UnknownMatrix(name.to_string())),
    }
}

/// Builtin matrix in double precision.
pub fn builtin_matrix(name: &str) -> Result<DenseMatrix> {
    builtin_rational(name)?.to_dense()
}

/// A builtin name, or else a path to a matrix file.
pub fn load_matrix(source: &str) -> Result<DenseMatrix> {
    match builtin_matrix(source) {
        Err(Error::UnknownMatrix(_)) => DenseMatrix::parse(&std::fs::read_to_string(source)?),
        other => other,
    }
}

/// Exact counterpart of [`load_matrix`].
pub fn load_rational_matrix(source: &str) -> Result<RationalMatrix> {
    match builtin_rational(source) {
        Err(Error::UnknownMatrix(_)) => RationalMatrix::parse(&std::fs::read_to_string(source)?),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    /// Builtin name or matrix file path.
    pub matrix: String,
    pub trials: usize,
    pub seed: u64,
    pub solver: Method,
    pub tol: f64,
    pub max_iters: usize,
    /// 0-based components of `x₀` forced to zero.
    pub mask: Vec<usize>,
    /// 0-based Schur blocks spanning `x₀` (skew `M` only).
    pub block_init: Option<Vec<usize>>,
    /// Bound checks ignore `ϱ_k` for `k` below this.
    pub transient_cutoff: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            matrix: "A1".into(),
            trials: 1000,
            seed: 0,
            solver: Method::Gmres1,
            tol: 1e-30,
            max_iters: 5000,
            mask: Vec::new(),
            block_init: None,
            transient_cutoff: 20,
        }
    }
}

fn parse_index_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t.parse::<usize>() {
            Ok(i) if i >= 1 => Ok(i - 1),
            _ => Err(Error::Config(format!("{key}: indices are 1-based integers, got `{t}`"))),
        })
        .collect()
}

fn format_index_list(idx: &[usize]) -> String {
    idx.iter()
        .map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl EnsembleConfig {
    /// Parses flat `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("duplicate key `{key}`")));
            }
            let num_err = || Error::Config(format!("bad value for {key}: `{value}`"));
            match key {
                "matrix" => cfg.matrix = value.to_string(),
                "trials" => cfg.trials = value.parse().map_err(|_| num_err())?,
                "seed" => cfg.seed = value.parse().map_err(|_| num_err())?,
                "solver" => cfg.solver = value.parse().map_err(|_| num_err())?,
                "tol" => cfg.tol = value.parse().map_err(|_| num_err())?,
                "max_iters" => cfg.max_iters = value.parse().map_err(|_| num_err())?,
                "mask" => cfg.mask = parse_index_list(key, value)?,
                "block_init" => cfg.block_init = Some(parse_index_list(key, value)?),
                "transient_cutoff" => cfg.transient_cutoff = value.parse().map_err(|_| num_err())?,
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }
        Ok(cfg)
    }

    /// Inverse of [`EnsembleConfig::parse`].
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "matrix = {}", self.matrix);
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "solver = {}", self.solver);
        let _ = writeln!(s, "tol = {:e}", self.tol);
        let _ = writeln!(s, "max_iters = {}", self.max_iters);
        if !self.mask.is_empty() {
            let _ = writeln!(s, "mask = {}", format_index_list(&self.mask));
        }
        if let Some(b) = &self.block_init {
            let _ = writeln!(s, "block_init = {}", format_index_list(b));
        }
        let _ = writeln!(s, "transient_cutoff = {}", self.transient_cutoff);
        s
    }

    fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            tol: self.tol,
            max_iters: self.max_iters,
            ..SolveConfig::default()
        }
    }

    fn validate(&self, a: &DenseMatrix, structure: &Structure) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        self.solve_config().validate()?;
        let n = a.dim();
        if let Some(&i) = self.mask.iter().find(|&&i| i >= n) {
            return Err(Error::Config(format!("mask index {} exceeds dimension {n}", i + 1)));
        }
        if let Some(blocks) = &self.block_init {
            if !self.mask.is_empty() {
                return Err(Error::Config("mask and block_init are exclusive".into()));
            }
            let Structure::SkewM(sb) = structure else {
                return Err(Error::Config("block_init needs I - A skew-symmetric".into()));
            };
            if blocks.is_empty() {
                return Err(Error::Config("block_init is empty".into()));
            }
            if let Some(&j) = blocks.iter().find(|&&j| j >= sb.len()) {
                return Err(Error::Config(format!(
                    "block index {} exceeds block count {}",
                    j + 1,
                    sb.len()
                )));
            }
        }
        Ok(())
    }
}

fn uniform_open(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let x: f64 = rng.gen_range(-1.0..1.0);
        if x != -1.0 {
            return x;
        }
    }
}

/// Initial guess of trial `trial`.
pub fn trial_x0(
    seed: u64,
    trial: usize,
    n: usize,
    mask: &[usize],
    blocks: Option<(&SchurBlocks, &[usize])>,
) -> Result<DenseVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    match blocks {
        Some((sb, chosen)) => {
            let mut x = DenseVector::zeros(n);
            for &j in chosen {
                let (q, qt) = sb.block_basis(j)?;
                x.axpy(uniform_open(&mut rng), &q)?;
                x.axpy(uniform_open(&mut rng), &qt)?;
            }
            Ok(x)
        }
        None => {
            let mut x: Vec<f64> = (0..n).map(|_| uniform_open(&mut rng)).collect();
            for &i in mask {
                x[i] = 0.0;
            }
            DenseVector::new(x)
        }
    }
}

/// Distinct eigenvalues reachable from `r₀ = A x₀` with `x₀` vanishing on `mask`.
fn reachable_groups(spec: &Spectrum, mask: &[usize]) -> Vec<usize> {
    (0..spec.len())
        .filter(|&g| {
            spec.groups()[g].vectors.iter().any(|u| {
                let ss: f64 = u
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !mask.contains(i))
                    .map(|(_, x)| x * x)
                    .sum();
                ss.sqrt() > 1e-12
            })
        })
        .collect()
}

/// Theoretical factor for the solver over the modes an initial guess can excite.
/// The flag tells whether it is a proven upper bound on every `ϱ_k` tail.
pub fn theoretical_rho(
    method: Method,
    structure: &Structure,
    mask: &[usize],
    blocks: Option<&[usize]>,
) -> Result<(f64, bool)> {
    match structure {
        Structure::Symmetric(spec) => {
            let sub = spec.restricted(&reachable_groups(spec, mask))?;
            let values = sub.distinct_eigenvalues();
            match method {
                Method::Gmres1 => {
                    let rep = theory::worst_case_gmres1(&sub)?;
                    Ok((rep.worst_case_rho, rep.regime == theory::Regime::SymmetricDefinite))
                }
                Method::Raa1 => Ok((theory::lambda_star_values(&values).powf(0.25), false)),
                Method::Stationary => Ok((
                    values.iter().map(|a| (1.0 - a).abs()).fold(0.0, f64::max),
                    false,
                )),
            }
        }
        Structure::SkewM(sb) => {
            let all: Vec<usize> = (0..sb.len()).collect();
            let chosen = blocks.unwrap_or(&all);
            let mut m = 0.0f64;
            for &j in chosen {
                m = m.max(sb.block(j)?.modulus);
            }
            Ok(match method {
                Method::Gmres1 => (theory::skew_factor(m), true),
                Method::Raa1 => (theory::skew_factor_raa1(m), false),
                Method::Stationary => (m, false),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub trace: IterationTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub config: EnsembleConfig,
    pub trials: Vec<TrialResult>,
    pub theoretical_rho: f64,
    /// `theoretical_rho` bounds every tail (GMRES(1), definite or skew).
    pub bounded: bool,
    /// Largest `ϱ_k` over all trials and all `k ≥ transient_cutoff`.
    pub max_observed_rho_tail: f64,
}

impl EnsembleResult {
    /// Largest final `ϱ_k` over trials.
    pub fn max_final_rho(&self) -> f64 {
        self.trials
            .iter()
            .map(|t| t.trace.final_rho())
            .fold(0.0, f64::max)
    }

    /// Trials whose `ϱ_k` exceeds `theoretical_rho + slack` at some `k ≥ cutoff`.
    pub fn bound_violations(&self, slack: f64) -> Vec<usize> {
        let limit = self.theoretical_rho + slack;
        self.trials
            .iter()
            .filter(|t| tail(&t.trace, self.config.transient_cutoff).any(|r| r > limit))
            .map(|t| t.trial)
            .collect()
    }

    pub fn terminations(&self) -> Vec<Termination> {
        self.trials.iter().map(|t| t.trace.termination).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_traces_csv(out, self.trials.iter().map(|t| (t.trial, &t.trace)))
    }

    /// `key = value` sidecar: config echo, theory, summary and input hash.
    pub fn metadata(&self, matrix: &DenseMatrix) -> String {
        let mut s = self.config.to_config_string();
        let _ = writeln!(s, "theoretical_rho = {:e}", self.theoretical_rho);
        let _ = writeln!(s, "bounded = {}", self.bounded);
        let _ = writeln!(s, "max_observed_rho_tail = {:e}", self.max_observed_rho_tail);
        let _ = writeln!(s, "max_final_rho = {:e}", self.max_final_rho());
        for t in [
            Termination::Converged,
            Termination::Stagnated,
            Termination::Breakdown,
            Termination::Diverged,
            Termination::MaxIters,
        ] {
            let c = self.trials.iter().filter(|r| r.trace.termination == t).count();
            let _ = writeln!(s, "count_{} = {c}", t.as_str().to_ascii_lowercase());
        }
        let inputs = format!("{}{}", self.config.to_config_string(), matrix);
        let _ = writeln!(s, "input_hash = {}", content_hash(inputs.as_bytes()));
        s
    }
}

fn tail(trace: &IterationTrace, cutoff: usize) -> impl Iterator<Item = f64> + '_ {
    trace.rho_series.iter().skip(cutoff.max(1)).copied()
}

/// SHA-256 over git's blob framing `blob <len>\0<content>`, hex encoded.
pub fn content_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub const CSV_HEADER: &str = "trial,k,residual_norm,rho_k,alpha_k,termination";

fn fmt_opt(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:e}")
    }
}

/// One row per `(trial, k)`; `alpha_k` is the step taken from `k` to `k + 1`.
pub fn write_traces_csv<'a, W: Write>(
    mut out: W,
    traces: impl IntoIterator<Item = (usize, &'a IterationTrace)>,
) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for (trial, t) in traces {
        for (k, &norm) in t.residual_norms.iter().enumerate() {
            let alpha = t.alphas.get(k).copied().flatten().unwrap_or(f64::NAN);
            writeln!(
                out,
                "{trial},{k},{:e},{},{},{}",
                norm,
                fmt_opt(t.rho_series[k]),
                fmt_opt(alpha),
                t.termination
            )?;
        }
    }
    Ok(())
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer")))?;
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| Error::Config(e.to_string()))
}

/// Runs the seeded ensemble on an explicit matrix.
pub fn run_ensemble_with(cfg: &EnsembleConfig, a: &DenseMatrix) -> Result<EnsembleResult> {
    let structure = classify(a)?;
    cfg.validate(a, &structure)?;
    let (theo, bounded) = theoretical_rho(cfg.solver, &structure, &cfg.mask, cfg.block_init.as_deref())?;
    let blocks = match (&structure, &cfg.block_init) {
        (Structure::SkewM(sb), Some(chosen)) => Some((sb, chosen.as_slice())),
        _ => None,
    };
    let scfg = cfg.solve_config();
    let b = DenseVector::zeros(a.dim());
    let run = |trial: usize| -> Result<TrialResult> {
        let x0 = trial_x0(cfg.seed, trial, a.dim(), &cfg.mask, blocks)?;
        let (_, trace) = solve(cfg.solver, a, &b, &x0, &scfg)?;
        Ok(TrialResult { trial, trace })
    };
    let trials = thread_pool()?.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(run)
            .collect::<Result<Vec<_>>>()
    })?;
    let max_tail = trials
        .iter()
        .flat_map(|t| tail(&t.trace, cfg.transient_cutoff))
        .fold(0.0, f64::max);
    Ok(EnsembleResult {
        config: cfg.clone(),
        trials,
        theoretical_rho: theo,
        bounded,
        max_observed_rho_tail: max_tail,
    })
}

/// Runs the seeded ensemble described by `cfg`.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleResult> {
    run_ensemble_with(cfg, &load_matrix(&cfg.matrix)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredRun {
    pub trace: IterationTrace,
    /// `None` when `A` has no supported structure.
    pub prediction: Option<Prediction>,
}

/// GMRES(1) from a chosen `x₀` with `b = 0`, paired with the predicted factor.
pub fn run_structured(
    a: &DenseMatrix,
    x0: &DenseVector,
    tol: f64,
    max_iters: usize,
) -> Result<StructuredRun> {
    let cfg = SolveConfig {
        tol,
        max_iters,
        ..SolveConfig::default()
    };
    let (_, trace) = solve(Method::Gmres1, a, &DenseVector::zeros(a.dim()), x0, &cfg)?;
    let prediction = match classify(a) {
        Ok(st) => Some(theory::predict_rho(&st, &a.matvec(x0)?)?),
        Err(Error::UnsupportedStructure) => None,
        Err(e) => return Err(e),
    };
    Ok(StructuredRun { trace, prediction })
}

/// Writes `<stem>.csv` and `<stem>.meta` for an ensemble.
pub fn write_ensemble(result: &EnsembleResult, matrix: &DenseMatrix, dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let f = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
    result.write_csv(std::io::BufWriter::new(f))?;
    std::fs::write(dir.join(format!("{stem}.meta")), result.metadata(matrix))?;
    Ok(())
}
