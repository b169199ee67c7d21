use std::fmt;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use rkl::exact::{self, ParityOutcome, RationalMatrix, RationalVector};
use rkl::experiments::{self, EnsembleConfig};
use rkl::solvers::{self, IterationTrace, Method, SolveConfig, Termination};
use rkl::theory::{self, Eps, MapKind, Structure};
use rkl::{DenseMatrix, DenseVector, Error};

use crate::svg::{self, Panel};
use crate::{
    Command, CounterexampleArgs, EigpairArgs, FigureArgs, MeasureArgs, PredictArgs, SolveArgs,
};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numeric(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Usage(_) => ExitCode::from(2),
            Failure::Numeric(_) => ExitCode::from(3),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::ZeroResidual
            | Error::SingularDirection
            | Error::Singular
            | Error::ZeroEigenvalue
            | Error::SignConditionViolated(_)
            | Error::Breakdown
            | Error::Overflow => Failure::Numeric(msg),
            _ => Failure::Usage(msg),
        }
    }
}

type Outcome = Result<ExitCode, Failure>;

pub fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Predict(a) => predict(&a),
        Command::Solve(a) => solve(&a),
        Command::Measure(a) => measure(&a),
        Command::Eigpair(a) => eigpair(&a),
        Command::Counterexample(a) => counterexample(&a),
        Command::Figure(a) => figure(&a),
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn zero_based(idx: &[usize], what: &str) -> Result<Vec<usize>, Failure> {
    idx.iter()
        .map(|&i| {
            i.checked_sub(1)
                .ok_or_else(|| usage(format!("{what} indices are 1-based")))
        })
        .collect()
}

/// `p/q ≈ x` when `x` is a small-denominator fraction, else just `x`.
fn pretty(x: f64) -> String {
    if let Ok(r) = exact::approximate(x, 10_000) {
        if let Ok(f) = exact::to_float(&r) {
            if (f - x).abs() <= 1e-12 {
                return if r.is_integer() {
                    format!("{r}")
                } else {
                    format!("{r} ≈ {x:.5}")
                };
            }
        }
    }
    format!("{x:.5}")
}

fn predict(args: &PredictArgs) -> Outcome {
    let a = experiments::load_matrix(&args.matrix)?;
    let restrict = args
        .restrict
        .as_deref()
        .map(|r| zero_based(r, "--restrict"))
        .transpose()?;
    println!("matrix: {} ({n}x{n})", args.matrix, n = a.dim());
    match theory::classify(&a)? {
        Structure::Symmetric(spec) => {
            let spec = match &restrict {
                Some(r) => spec.restricted(r)?,
                None => spec,
            };
            let report = theory::worst_case_gmres1(&spec)?;
            println!(
                "rho* = {}, regime={}",
                pretty(report.worst_case_rho),
                report.regime
            );
            println!(
                "Lambda* (rAA(1)) = {}",
                pretty(theory::lambda_star_raa1(&spec))
            );
            println!("eigenvalues: {:?}", spec.distinct_eigenvalues());
            println!("pairs (i, j, a_i, a_j, factor, eps^2):");
            for p in &report.per_pair_table {
                let eps2 = p.opt_eps2.map_or("-".to_string(), |e| format!("{e:.6}"));
                let flag = if p.attains_one { "  <- <Au,u> = 0 reachable" } else { "" };
                println!(
                    "  {} {} {:.6} {:.6} {:.6} {eps2}{flag}",
                    p.i + 1,
                    p.j + 1,
                    p.a_i,
                    p.a_j,
                    p.value
                );
            }
        }
        Structure::SkewM(blocks) => {
            let rep = theory::worst_case_skew(&blocks);
            let chosen: Vec<usize> = match &restrict {
                Some(r) => r.clone(),
                None => (0..blocks.len()).collect(),
            };
            let rho = theory::restricted_skew_factor(&blocks, &chosen)?;
            if restrict.is_some() {
                println!("rho*_ss (restricted) = {}, regime=SkewM", pretty(rho));
            } else {
                println!("rho*_ss ≈ {:.5}, regime=SkewM", rep.gmres1);
            }
            println!("m* = {:.5}", rep.m_star);
            println!("rho*_rAA(1) ≈ {:.5}", rep.raa1);
            let (lo, hi) = theory::alpha_range_skew(&blocks);
            println!("alpha range = [{}, {}]", pretty(lo), pretty(hi));
            println!("blocks (j, modulus, factor):");
            for (j, b) in blocks.blocks().iter().enumerate() {
                println!("  {} {:.6} {:.6}", j + 1, b.modulus, theory::skew_factor(b.modulus));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn read_vector(spec: &str, n: usize) -> Result<DenseVector, Failure> {
    if spec == "zeros" {
        return Ok(DenseVector::zeros(n));
    }
    if let Some(seed) = spec.strip_prefix("rand:") {
        let seed: u64 = seed
            .parse()
            .map_err(|_| usage(format!("bad seed in `{spec}`")))?;
        return Ok(experiments::trial_x0(seed, 0, n, &[], None)?);
    }
    let v = DenseVector::parse(&fs::read_to_string(spec).map_err(Error::from)?)?;
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.len(),
        }
        .into());
    }
    Ok(v)
}

fn write_trace(path: &Path, trace: &IterationTrace) -> Result<(), Failure> {
    let f = fs::File::create(path).map_err(Error::from)?;
    experiments::write_traces_csv(std::io::BufWriter::new(f), [(0, trace)])?;
    Ok(())
}

fn solve(args: &SolveArgs) -> Outcome {
    let a = experiments::load_matrix(&args.matrix)?;
    let method: Method = args.method.parse()?;
    let x0 = read_vector(&args.x0, a.dim())?;
    let b = read_vector(&args.b, a.dim())?;
    let cfg = SolveConfig {
        tol: args.tol,
        max_iters: args.max_iters,
        ..SolveConfig::default()
    };
    let (_, trace) = solvers::solve(method, &a, &b, &x0, &cfg)?;
    if let Some(path) = &args.trace {
        write_trace(path, &trace)?;
    }
    let rho = match trace.iterations() {
        0 => "n/a".to_string(),
        _ => format!("{:.6}", trace.final_rho()),
    };
    println!(
        "method={method} termination={} iterations={} final_residual={:e} final_rho={rho}",
        trace.termination,
        trace.iterations(),
        trace.residual_norms.last().unwrap(),
    );
    Ok(if trace.termination.is_success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}

fn measure(args: &MeasureArgs) -> Outcome {
    let text = fs::read_to_string(&args.config).map_err(Error::from)?;
    let cfg = EnsembleConfig::parse(&text)?;
    let a = experiments::load_matrix(&cfg.matrix)?;
    let result = experiments::run_ensemble_with(&cfg, &a)?;
    experiments::write_ensemble(&result, &a, &args.out, "ensemble")?;
    report_ensemble(&result);
    Ok(ExitCode::SUCCESS)
}

fn report_ensemble(r: &experiments::EnsembleResult) {
    println!(
        "matrix={} solver={} trials={} seed={}",
        r.config.matrix,
        r.config.solver,
        r.config.trials,
        r.config.seed
    );
    println!("theoretical_rho = {:.6} (bound: {})", r.theoretical_rho, r.bounded);
    println!(
        "max rho_k for k >= {} = {:.6}",
        r.config.transient_cutoff, r.max_observed_rho_tail
    );
    println!("max final rho = {:.6}", r.max_final_rho());
    let stag = r
        .terminations()
        .iter()
        .filter(|t| **t == Termination::Stagnated)
        .count();
    if stag > 0 {
        println!("stagnated trials = {stag}");
    }
}

fn eigpair(args: &EigpairArgs) -> Outcome {
    let a = experiments::load_matrix(&args.matrix)?;
    let kind: MapKind = args.map.parse()?;
    let eps: Eps = args.eps.parse()?;
    let [i, j] = zero_based(&args.pair, "--pair")?[..] else {
        return Err(usage("--pair takes exactly two indices i,j"));
    };
    let Structure::Symmetric(spec) = theory::classify(&a)? else {
        return Err(usage("eigenpairs need a symmetric matrix"));
    };
    let spread = args.spread.then_some(args.seed);
    let pair = theory::construct_eigpair(&spec, kind, i, j, eps, spread)?;
    let residual = theory::verify_eigenpair(&a, &pair)?;
    let (_, _, e) = pair.construction;
    let vals = spec.distinct_eigenvalues();
    println!("map={kind} pair=({}, {}) a=({}, {})", i + 1, j + 1, vals[i], vals[j]);
    println!("eps = {e:.12} (eps^2 = {:.12})", e * e);
    println!("eigenvalue = {:.15}", pair.value);
    println!("residual = {residual:e}");
    println!("u = {:?}", pair.vector.as_slice());
    Ok(ExitCode::SUCCESS)
}

fn print_case(label: &str, a: &RationalMatrix, v: &RationalVector, exact_print: bool) -> Result<bool, Failure> {
    println!("{label}: A = diag{}, v = {v}", fmt_diag(a));
    let check = match exact::check_conjecture_violation(a, v) {
        Ok(c) => c,
        Err(Error::Breakdown | Error::ZeroResidual | Error::SingularDirection) => {
            println!("  NOT-APPLICABLE: the rAA(1) cycle breaks down for this v");
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    };
    let ls = exact::to_float(&check.lambda_star)?;
    let ratio = check.ratio()?;
    println!("  Lambda* = {} ≈ {ls:.6}", check.lambda_star);
    println!("  ||Upsilon(v)v|| / ||v|| ≈ {ratio:.6}");
    if exact_print {
        let s = &check.steps;
        println!("  alpha(v) = {}", s.alpha_v);
        println!("  u = {}", s.u);
        println!("  alpha(u) = {}", s.alpha_u);
        println!("  w = {}", s.w);
        println!("  ratio^2 = {}", check.ratio_sq);
    }
    match exact::parity_certificate(a, v)? {
        ParityOutcome::Computed { lhs, rhs, certified } => println!(
            "  parity: lhs {} rhs {} -> {}",
            if lhs.bit(0) { "odd" } else { "even" },
            if rhs.bit(0) { "odd" } else { "even" },
            if certified { "certified" } else { "inconclusive" }
        ),
        ParityOutcome::Skipped(why) => println!("  parity: skipped ({why})"),
    }
    if check.violated {
        println!("  VIOLATED: {ratio:.6} > {ls:.6}");
    } else {
        println!("  NOT-VIOLATED: {ratio:.6} <= {ls:.6}");
    }
    Ok(check.violated)
}

fn fmt_diag(a: &RationalMatrix) -> String {
    let d: Vec<String> = a.diagonal().iter().map(|x| x.to_string()).collect();
    format!("({})", d.join(", "))
}

fn counterexample(args: &CounterexampleArgs) -> Outcome {
    let mut all = true;
    if let (Some(m), Some(v)) = (&args.matrix, &args.vector) {
        let a = experiments::load_rational_matrix(m)?;
        let v = RationalVector::parse(&fs::read_to_string(v).map_err(Error::from)?)?;
        all &= print_case("custom", &a, &v, args.exact_print)?;
    } else {
        let cases: Vec<usize> = match args.case.as_str() {
            "all" => vec![1, 2, 3],
            c => vec![c
                .parse()
                .ok()
                .filter(|k| (1..=3).contains(k))
                .ok_or_else(|| usage(format!("--case must be 1, 2, 3 or all, got `{c}`")))?],
        };
        for k in cases {
            let (a, v) = exact::counterexample(k)?;
            all &= print_case(&format!("case {k}"), &a, &v, args.exact_print)?;
        }
    }
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn curve(trace: &IterationTrace) -> Vec<(f64, f64)> {
    trace
        .rho_series
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &r)| (k as f64, r))
        .collect()
}

fn write_panel(out: &Path, stem: &str, title: &str, traces: &[&IterationTrace], reference: f64) -> Result<(), Failure> {
    let f = fs::File::create(out.join(format!("{stem}.csv"))).map_err(Error::from)?;
    experiments::write_traces_csv(
        std::io::BufWriter::new(f),
        traces.iter().enumerate().map(|(i, t)| (i, *t)),
    )?;
    let panel = Panel {
        title: title.to_string(),
        curves: traces.iter().map(|t| curve(t)).collect(),
        reference,
    };
    fs::write(out.join(format!("{stem}.svg")), svg::render(&panel)).map_err(Error::from)?;
    println!("wrote {stem}.csv and {stem}.svg (reference {reference:.5})");
    Ok(())
}

fn ensemble_panel(args: &FigureArgs, stem: &str, matrix: &str, mask: Vec<usize>, blocks: Option<Vec<usize>>) -> Result<(), Failure> {
    let cfg = EnsembleConfig {
        matrix: matrix.to_string(),
        trials: args.trials,
        seed: args.seed,
        mask,
        block_init: blocks,
        ..EnsembleConfig::default()
    };
    let a = experiments::load_matrix(matrix)?;
    let r = experiments::run_ensemble_with(&cfg, &a)?;
    fs::write(args.out.join(format!("{stem}.meta")), r.metadata(&a)).map_err(Error::from)?;
    let traces: Vec<&IterationTrace> = r.trials.iter().map(|t| &t.trace).collect();
    let title = format!("{matrix}: {} random x0", args.trials);
    write_panel(&args.out, stem, &title, &traces, r.theoretical_rho)
}

fn structured(a: &DenseMatrix, x0: DenseVector) -> Result<IterationTrace, Failure> {
    Ok(experiments::run_structured(a, &x0, 1e-30, 10_000)?.trace)
}

fn figure(args: &FigureArgs) -> Outcome {
    if args.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    fs::create_dir_all(&args.out).map_err(Error::from)?;
    match args.name.as_str() {
        "fig1" => {
            ensemble_panel(args, "fig1a", "A1", vec![], None)?;
            ensemble_panel(args, "fig1b", "A2", vec![], None)?;
        }
        "fig2" => {
            ensemble_panel(args, "fig2a", "A3", vec![], None)?;
            ensemble_panel(args, "fig2b", "A3", vec![0], None)?;
        }
        "fig3" => {
            let a = experiments::builtin_matrix("A2")?;
            let t1 = structured(&a, DenseVector::new(vec![1.0, 2.0 * 2f64.sqrt(), 0.0, 0.0, 0.0])?)?;
            let t2 = structured(&a, DenseVector::new(vec![1.0, 0.0, 8.0, 0.0, 0.0])?)?;
            let rho = theory::qfactor(&a)?;
            write_panel(&args.out, "fig3", "A2: two structured x0", &[&t1, &t2], rho)?;
        }
        "fig4" => {
            ensemble_panel(args, "fig4a", "A4", vec![], None)?;
            let a = experiments::builtin_matrix("A4")?;
            let Structure::SkewM(blocks) = theory::classify(&a)? else {
                return Err(Failure::Numeric("A4 lost its skew structure".into()));
            };
            // the three blocks after the dominant one: Q(:,3) + Q(:,5) + Q(:,7)
            let q = blocks.q();
            let x0 = q.column(2).add(&q.column(4))?.add(&q.column(6))?;
            let rho = theory::restricted_skew_factor(&blocks, &[1, 2, 3])?;
            let t = structured(&a, x0)?;
            write_panel(&args.out, "fig4b", "A4: x0 = Q(:,3)+Q(:,5)+Q(:,7)", &[&t], rho)?;
        }
        other => return Err(usage(format!("unknown figure `{other}` (fig1..fig4)"))),
    }
    Ok(ExitCode::SUCCESS)
}
