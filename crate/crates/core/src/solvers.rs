//! GMRES(1) (minimal residual iteration), restarted Anderson acceleration
//! with window one, and the plain stationary iteration `x ← Mx + b`.
//!
//! All three record an [`IterationTrace`]. The root-convergence estimate
//! `ϱ_k = ‖r_k‖^{1/k}` is formed from a running sum of log step ratios so it
//! stays meaningful when the norms approach the bottom of the double range.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{alpha_with, DenseMatrix, DenseVector, ZERO_NORM};

/// Residual norm above which rAA(1) and the stationary iteration give up.
pub const DIVERGENCE_NORM: f64 = 1e150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Converged,
    Stagnated,
    Breakdown,
    Diverged,
    MaxIters,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "Converged",
            Termination::Stagnated => "Stagnated",
            Termination::Breakdown => "Breakdown",
            Termination::Diverged => "Diverged",
            Termination::MaxIters => "MaxIters",
        }
    }

    /// Converged and Stagnated are legitimate mathematical outcomes.
    pub fn is_success(self) -> bool {
        matches!(self, Termination::Converged | Termination::Stagnated)
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Gmres1,
    Raa1,
    Stationary,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gmres1 => "gmres1",
            Method::Raa1 => "raa1",
            Method::Stationary => "stationary",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gmres1" | "mri" => Ok(Method::Gmres1),
            "raa1" => Ok(Method::Raa1),
            "stationary" | "richardson" => Ok(Method::Stationary),
            other => Err(Error::Parse(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    /// Stop once `‖r_k‖ ≤ tol`.
    pub tol: f64,
    pub max_iters: usize,
    /// Keep every residual and iterate in the trace.
    pub record_vectors: bool,
    /// GMRES(1) reports `Stagnated` when `|α_k|·‖A r_k‖ ≤ stagnation_eps·‖r_k‖`.
    pub stagnation_eps: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tol: 1e-30,
            max_iters: 10_000,
            record_vectors: false,
            stagnation_eps: 1e-14,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Config("tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.stagnation_eps.is_nan() || self.stagnation_eps < 0.0 {
            return Err(Error::Config("stagnation_eps must be non-negative".into()));
        }
        Ok(())
    }
}

/// Per-step record of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    /// `‖r_k‖` for `k = 0..=iterations`.
    pub residual_norms: Vec<f64>,
    /// Step length used to go from `k` to `k + 1`; `None` on plain
    /// fixed-point steps.
    pub alphas: Vec<Option<f64>>,
    /// `ϱ_k = ‖r_k‖^{1/k}`; entry 0 is NaN (undefined).
    pub rho_series: Vec<f64>,
    pub termination: Termination,
    /// `r_k` for every `k` when vectors are recorded.
    pub residuals: Option<Vec<DenseVector>>,
    /// `x_k` for every `k` when vectors are recorded.
    pub iterates: Option<Vec<DenseVector>>,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.residual_norms.len() - 1
    }

    /// `ϱ_k` at the last recorded step (0 when no step was taken).
    pub fn final_rho(&self) -> f64 {
        match self.rho_series.len() {
            0 | 1 => 0.0,
            n => self.rho_series[n - 1],
        }
    }

    /// `‖r_k‖ / ‖r_{k−1}‖` for `k ≥ 1`.
    pub fn step_ratios(&self) -> Vec<f64> {
        self.residual_norms
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .collect()
    }
}

struct Recorder {
    trace: IterationTrace,
    log_norm: f64,
}

impl Recorder {
    fn new(r0: &DenseVector, x0: &DenseVector, record: bool) -> Self {
        let n0 = r0.norm2();
        Self {
            trace: IterationTrace {
                residual_norms: vec![n0],
                alphas: Vec::new(),
                rho_series: vec![f64::NAN],
                termination: Termination::MaxIters,
                residuals: record.then(|| vec![r0.clone()]),
                iterates: record.then(|| vec![x0.clone()]),
            },
            log_norm: n0.ln(),
        }
    }

    fn last_norm(&self) -> f64 {
        *self.trace.residual_norms.last().unwrap()
    }

    fn push(&mut self, alpha: Option<f64>, r: &DenseVector, x: &DenseVector) {
        let prev = self.last_norm();
        let norm = r.norm2();
        self.trace.alphas.push(alpha);
        self.trace.residual_norms.push(norm);
        let k = self.trace.residual_norms.len() - 1;
        let rho = if norm == 0.0 || prev == 0.0 {
            self.log_norm = f64::NEG_INFINITY;
            0.0
        } else {
            self.log_norm += (norm / prev).ln();
            (self.log_norm / k as f64).exp()
        };
        self.trace.rho_series.push(rho);
        if let Some(rs) = self.trace.residuals.as_mut() {
            rs.push(r.clone());
        }
        if let Some(xs) = self.trace.iterates.as_mut() {
            xs.push(x.clone());
        }
    }

    fn finish(mut self, t: Termination) -> IterationTrace {
        self.trace.termination = t;
        self.trace
    }
}

fn initial_residual(a: &DenseMatrix, b: &DenseVector, x0: &DenseVector) -> Result<DenseVector> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.len(),
        });
    }
    a.matvec(x0)?.sub(b)
}

/// Minimal residual iteration: `α_k = ⟨r_k, A r_k⟩/⟨A r_k, A r_k⟩`,
/// `x_{k+1} = x_k − α_k r_k`, `r_{k+1} = r_k − α_k A r_k`, with
/// `r_0 = A x_0 − b`.
pub fn gmres1(
    a: &DenseMatrix,
    b: &DenseVector,
    x0: &DenseVector,
    cfg: &SolveConfig,
) -> Result<(DenseVector, IterationTrace)> {
    cfg.validate()?;
    let mut r = initial_residual(a, b, x0)?;
    let mut x = x0.clone();
    let mut rec = Recorder::new(&r, &x, cfg.record_vectors);
    for k in 0.. {
        let rn = rec.last_norm();
        if rn <= cfg.tol {
            return Ok((x, rec.finish(Termination::Converged)));
        }
        if k == cfg.max_iters {
            return Ok((x, rec.finish(Termination::MaxIters)));
        }
        let ar = a.matvec(&r)?;
        let arn = ar.norm2();
        if arn < ZERO_NORM {
            return Ok((x, rec.finish(Termination::Breakdown)));
        }
        let alpha = alpha_with(&r, &ar)?;
        if alpha.abs() * arn <= cfg.stagnation_eps * rn {
            return Ok((x, rec.finish(Termination::Stagnated)));
        }
        x.axpy(-alpha, &r)?;
        r.axpy(-alpha, &ar)?;
        rec.push(Some(alpha), &r, &x);
    }
    unreachable!()
}

/// Restarted Anderson acceleration with window one on `x ← Mx + b`,
/// `M = I − A`.
///
/// Even steps are plain fixed-point steps. Odd steps mix the last two
/// iterates with the step length of the residual the cycle started from:
/// `x_{k+1} = M x_{k−1} + α(r_{k−1}) M (x_k − x_{k−1}) + b`, which is the
/// AA(1) update `x_{k+1} = Mx_k + b − γ M(x_k − x_{k−1})` with the optimal
/// `γ = 1 − α(r_{k−1})`. Residuals then obey
/// `r_{k+2} = M (I − α(r_k) A) r_k` for every even `k`.
pub fn raa1(
    a: &DenseMatrix,
    b: &DenseVector,
    x0: &DenseVector,
    cfg: &SolveConfig,
) -> Result<(DenseVector, IterationTrace)> {
    cfg.validate()?;
    let m = a.iteration_matrix();
    let mut r = initial_residual(a, b, x0)?;
    let mut x = x0.clone();
    let mut x_prev = x0.clone();
    let mut r_prev = r.clone();
    let mut rec = Recorder::new(&r, &x, cfg.record_vectors);
    for k in 0.. {
        let rn = rec.last_norm();
        if rn <= cfg.tol {
            return Ok((x, rec.finish(Termination::Converged)));
        }
        if rn > DIVERGENCE_NORM {
            return Ok((x, rec.finish(Termination::Diverged)));
        }
        if k == cfg.max_iters {
            return Ok((x, rec.finish(Termination::MaxIters)));
        }
        if k % 2 == 0 {
            let x_next = m.matvec(&x)?.add(b)?;
            let r_next = m.matvec(&r)?;
            x_prev = std::mem::replace(&mut x, x_next);
            r_prev = std::mem::replace(&mut r, r_next);
            rec.push(None, &r, &x);
        } else {
            let ar_prev = a.matvec(&r_prev)?;
            if ar_prev.norm2() < ZERO_NORM {
                return Ok((x, rec.finish(Termination::Breakdown)));
            }
            let gamma = alpha_with(&r_prev, &ar_prev)?;
            let mut x_next = m.matvec(&x_prev)?;
            x_next.axpy(gamma, &m.matvec(&x.sub(&x_prev)?)?)?;
            let x_next = x_next.add(b)?;
            let mut d = r_prev.clone();
            d.axpy(-gamma, &ar_prev)?;
            let r_next = m.matvec(&d)?;
            x_prev = std::mem::replace(&mut x, x_next);
            r_prev = std::mem::replace(&mut r, r_next);
            rec.push(Some(gamma), &r, &x);
        }
    }
    unreachable!()
}

/// Plain fixed-point (Richardson) iteration `x_{k+1} = M x_k + b`.
pub fn stationary(
    a: &DenseMatrix,
    b: &DenseVector,
    x0: &DenseVector,
    cfg: &SolveConfig,
) -> Result<(DenseVector, IterationTrace)> {
    cfg.validate()?;
    let m = a.iteration_matrix();
    let mut r = initial_residual(a, b, x0)?;
    let mut x = x0.clone();
    let mut rec = Recorder::new(&r, &x, cfg.record_vectors);
    for k in 0.. {
        let rn = rec.last_norm();
        if rn <= cfg.tol {
            return Ok((x, rec.finish(Termination::Converged)));
        }
        if rn > DIVERGENCE_NORM {
            return Ok((x, rec.finish(Termination::Diverged)));
        }
        if k == cfg.max_iters {
            return Ok((x, rec.finish(Termination::MaxIters)));
        }
        x = m.matvec(&x)?.add(b)?;
        r = m.matvec(&r)?;
        rec.push(None, &r, &x);
    }
    unreachable!()
}

/// Dispatches on [`Method`].
pub fn solve(
    method: Method,
    a: &DenseMatrix,
    b: &DenseVector,
    x0: &DenseVector,
    cfg: &SolveConfig,
) -> Result<(DenseVector, IterationTrace)> {
    match method {
        Method::Gmres1 => gmres1(a, b, x0, cfg),
        Method::Raa1 => raa1(a, b, x0, cfg),
        Method::Stationary => stationary(a, b, x0, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DenseVector {
        DenseVector::new(x.to_vec()).unwrap()
    }

    fn a2() -> DenseMatrix {
        DenseMatrix::diag(&[0.5, 0.25, 0.125, 0.0625, 0.03125]).unwrap()
    }

    #[test]
    fn identity_converges_in_one_step() {
        let a = DenseMatrix::identity(3);
        let b = v(&[1.0, -2.0, 0.5]);
        let x0 = v(&[3.0, 3.0, 3.0]);
        for method in [Method::Gmres1, Method::Raa1, Method::Stationary] {
            let (x, t) = solve(method, &a, &b, &x0, &SolveConfig::default()).unwrap();
            assert_eq!(t.termination, Termination::Converged, "{method}");
            assert_eq!(t.iterations(), 1, "{method}");
            assert_eq!(x, b);
        }
        let (_, t) = gmres1(&a, &b, &x0, &SolveConfig::default()).unwrap();
        assert_eq!(t.alphas, vec![Some(1.0)]);
    }

    #[test]
    fn structured_initial_guesses_on_a2() {
        let zero = DenseVector::zeros(5);
        let cfg = SolveConfig::default();
        let x0 = v(&[1.0, 2.0 * 2f64.sqrt(), 0.0, 0.0, 0.0]);
        let (_, t) = gmres1(&a2(), &zero, &x0, &cfg).unwrap();
        assert_eq!(t.termination, Termination::Converged);
        assert!((t.final_rho() - 1.0 / 3.0).abs() < 5e-3, "{}", t.final_rho());

        let x0 = v(&[1.0, 0.0, 8.0, 0.0, 0.0]);
        let (_, t) = gmres1(&a2(), &zero, &x0, &cfg).unwrap();
        assert!((t.final_rho() - 0.6).abs() < 5e-3, "{}", t.final_rho());
    }

    #[test]
    fn trace_invariants_and_drift() {
        let a = DenseMatrix::from_rows(&[
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, 0.5],
            vec![0.0, 0.5, 2.0],
        ])
        .unwrap();
        let b = v(&[1.0, 2.0, 3.0]);
        let x0 = v(&[0.0, 0.0, 0.0]);
        let cfg = SolveConfig {
            record_vectors: true,
            tol: 1e-13,
            ..SolveConfig::default()
        };
        let (_, t) = gmres1(&a, &b, &x0, &cfg).unwrap();
        assert_eq!(t.termination, Termination::Converged);
        assert_eq!(t.residual_norms[0], a.matvec(&x0).unwrap().sub(&b).unwrap().norm2());
        let r0 = t.residual_norms[0];
        for (k, xk) in t.iterates.as_ref().unwrap().iter().enumerate() {
            let true_r = a.matvec(xk).unwrap().sub(&b).unwrap();
            let rec_r = &t.residuals.as_ref().unwrap()[k];
            assert!(true_r.sub(rec_r).unwrap().norm2() <= 1e-10 * r0);
        }
        for k in 1..t.residual_norms.len() {
            let want = t.residual_norms[k].powf(1.0 / k as f64);
            assert_relative_eq!(t.rho_series[k], want, max_relative = 1e-12);
            assert!(t.residual_norms[k] <= t.residual_norms[k - 1] * (1.0 + 1e-14));
        }
        assert!(t.rho_series[0].is_nan());
    }

    #[test]
    fn indefinite_orthogonal_start_stagnates() {
        let a = DenseMatrix::diag(&[-1.0, 2.0, 3.0, 4.0]).unwrap();
        // r0 = u1 + u2/√2 has ⟨A r0, r0⟩ = 0
        let t = 1.0 / 2f64.sqrt();
        let x0 = v(&[-1.0, t / 2.0, 0.0, 0.0]);
        let (_, tr) = gmres1(&a, &DenseVector::zeros(4), &x0, &SolveConfig::default()).unwrap();
        assert_eq!(tr.termination, Termination::Stagnated);
        assert_eq!(tr.iterations(), 0);
    }

    #[test]
    fn breakdown_on_singular_direction() {
        let a = DenseMatrix::diag(&[0.0, 1.0]).unwrap();
        let b = v(&[1.0, 0.0]);
        let (_, t) = gmres1(&a, &b, &DenseVector::zeros(2), &SolveConfig::default()).unwrap();
        assert_eq!(t.termination, Termination::Breakdown);
    }

    #[test]
    fn config_validation() {
        let a = DenseMatrix::identity(2);
        let z = DenseVector::zeros(2);
        let bad = SolveConfig {
            tol: 0.0,
            ..SolveConfig::default()
        };
        assert!(matches!(gmres1(&a, &z, &z, &bad), Err(Error::Config(_))));
        let bad = SolveConfig {
            max_iters: 0,
            ..SolveConfig::default()
        };
        assert!(matches!(raa1(&a, &z, &z, &bad), Err(Error::Config(_))));
        assert!(gmres1(&a, &DenseVector::zeros(3), &z, &SolveConfig::default()).is_err());
    }

    #[test]
    fn max_iters_is_reported() {
        let cfg = SolveConfig {
            max_iters: 3,
            ..SolveConfig::default()
        };
        let (_, t) = gmres1(&a2(), &DenseVector::zeros(5), &v(&[1.0; 5]), &cfg).unwrap();
        assert_eq!(t.termination, Termination::MaxIters);
        assert_eq!(t.iterations(), 3);
    }

    #[test]
    fn raa1_two_step_identity() {
        let a = DenseMatrix::from_rows(&[
            vec![1.5, 0.2, -0.1],
            vec![0.2, -0.7, 0.3],
            vec![-0.1, 0.3, 2.2],
        ])
        .unwrap();
        let m = a.iteration_matrix();
        let cfg = SolveConfig {
            record_vectors: true,
            max_iters: 40,
            ..SolveConfig::default()
        };
        let (_, t) = raa1(&a, &DenseVector::zeros(3), &v(&[1.0, -1.0, 0.5]), &cfg).unwrap();
        let rs = t.residuals.unwrap();
        for k in (0..rs.len().saturating_sub(2)).step_by(2) {
            let phi = crate::linalg::phi_map(&a, &rs[k]).unwrap();
            let want = m.matvec(&phi).unwrap();
            assert!(want.sub(&rs[k + 2]).unwrap().norm2() <= 1e-10 * rs[k].norm2());
        }
        assert!(t.alphas[0].is_none() && t.alphas[1].is_some());
    }

    #[test]
    fn raa1_identity_holds_with_nonzero_rhs() {
        // the identity is about residuals, so b must not matter
        let a = DenseMatrix::diag(&[0.5, 1.5, 3.0]).unwrap();
        let m = a.iteration_matrix();
        let b = v(&[1.0, 2.0, -1.0]);
        let cfg = SolveConfig {
            record_vectors: true,
            max_iters: 12,
            ..SolveConfig::default()
        };
        let (_, t) = raa1(&a, &b, &v(&[0.3, 0.1, 0.9]), &cfg).unwrap();
        let rs = t.residuals.as_ref().unwrap();
        let xs = t.iterates.as_ref().unwrap();
        for k in 0..rs.len() {
            let true_r = a.matvec(&xs[k]).unwrap().sub(&b).unwrap();
            assert!(true_r.sub(&rs[k]).unwrap().norm2() <= 1e-10 * rs[0].norm2());
        }
        for k in (0..rs.len() - 2).step_by(2) {
            let want = m.matvec(&crate::linalg::phi_map(&a, &rs[k]).unwrap()).unwrap();
            assert!(want.sub(&rs[k + 2]).unwrap().norm2() <= 1e-10 * rs[k].norm2());
        }
    }

    #[test]
    fn stationary_ratio_tends_to_spectral_radius() {
        let zero = DenseVector::zeros(3);
        let a1 = DenseMatrix::diag(&[1.0, 2.0, 3.0]).unwrap();
        let (_, t) = stationary(&a1, &zero, &v(&[0.3, -0.2, 0.7]), &SolveConfig::default()).unwrap();
        assert_eq!(t.termination, Termination::Diverged);
        let ratios = t.step_ratios();
        assert_relative_eq!(*ratios.last().unwrap(), 2.0, epsilon = 1e-9);

        let zero = DenseVector::zeros(5);
        let cfg = SolveConfig {
            max_iters: 1500,
            ..SolveConfig::default()
        };
        let (_, t) = stationary(&a2(), &zero, &v(&[1.0, 1.0, 1.0, 1.0, 1.0]), &cfg).unwrap();
        let ratios = t.step_ratios();
        assert_relative_eq!(*ratios.last().unwrap(), 31.0 / 32.0, epsilon = 1e-9);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("GMRES1".parse::<Method>().unwrap(), Method::Gmres1);
        assert_eq!("raa1".parse::<Method>().unwrap(), Method::Raa1);
        assert!("gmres2".parse::<Method>().is_err());
    }
}
