//! Closed-form convergence factors and nonlinear-eigenpair constructors.
//!
//! Notation: `a_i` are the distinct eigenvalues of a symmetric `A`, `u_i` unit
//! eigenvectors, `M = I − A`. A two-mode vector is `u = u_{i1} + ε u_{i2}`.
//!
//! * `𝓘₂(u)u = (I − α(u)Aᵀ)(I − α(u)A)u`
//! * `Π(u)u = Φ(Φ(u))` (two GMRES(1) steps)
//! * `Ψ(u)u = M(I − α(u)A)u` (one rAA(1) half cycle)
//! * `Υ(u)u = Ψ(Ψ(u)u)` (one full rAA(1) cycle)
//!
//! [`verify_eigenpair`] always applies these maps step by step, so it checks
//! the closed forms independently.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{alpha_with, DenseMatrix, DenseVector, ZERO_NORM};
use crate::spectral::{eig_symmetric, schur_skew, SchurBlocks, Spectrum, STRUCTURE_RTOL};

/// Relative size below which an intermediate map output counts as zero.
pub const BREAKDOWN_RTOL: f64 = 1e-14;

/// Relative tolerance when checking a caller-supplied ε against the required one.
pub const EPS_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    SymmetricDefinite,
    SymmetricIndefinite,
    SkewM,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::SymmetricDefinite => "SymmetricDefinite",
            Regime::SymmetricIndefinite => "SymmetricIndefinite",
            Regime::SkewM => "SkewM",
        })
    }
}

/// One row of a per-pair factor table (indices into the distinct eigenvalues).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFactor {
    pub i: usize,
    pub j: usize,
    pub a_i: f64,
    pub a_j: f64,
    pub value: f64,
    /// `ε²` at which the value is attained, when it is.
    pub opt_eps2: Option<f64>,
    /// The pair mixes signs, so a direction with `⟨Au, u⟩ = 0` exists.
    pub attains_one: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorReport {
    pub worst_case_rho: f64,
    pub per_pair_table: Vec<PairFactor>,
    pub regime: Regime,
}

/// `|a_j − a_i| / (|a_j| + |a_i|)`.
pub fn pair_factor_gmres1(a_i: f64, a_j: f64) -> f64 {
    (a_j - a_i).abs() / (a_j.abs() + a_i.abs())
}

/// Worst-case GMRES(1) root-convergence factor for symmetric `A`.
pub fn worst_case_gmres1(spec: &Spectrum) -> Result<FactorReport> {
    worst_case_gmres1_values(&spec.distinct_eigenvalues())
}

/// [`worst_case_gmres1`] on a list of distinct eigenvalues.
pub fn worst_case_gmres1_values(values: &[f64]) -> Result<FactorReport> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    if values.contains(&0.0) {
        return Err(Error::ZeroEigenvalue);
    }
    let definite = values.iter().all(|&a| a > 0.0) || values.iter().all(|&a| a < 0.0);
    let mut table = Vec::new();
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let (a_i, a_j) = (values[i], values[j]);
            let mixed = a_i * a_j < 0.0;
            table.push(PairFactor {
                i,
                j,
                a_i,
                a_j,
                value: if mixed { 1.0 } else { pair_factor_gmres1(a_i, a_j) },
                opt_eps2: (!mixed).then(|| a_i.abs() / a_j.abs()),
                attains_one: mixed,
            });
        }
    }
    let (worst, regime) = if definite {
        let w = table.iter().map(|p| p.value).fold(0.0, f64::max);
        (w, Regime::SymmetricDefinite)
    } else {
        (1.0, Regime::SymmetricIndefinite)
    };
    Ok(FactorReport {
        worst_case_rho: worst,
        per_pair_table: table,
        regime,
    })
}

/// `λ_ij(ε) = (a_j − a_i)² ε² / ((a_i² + ε² a_j²)(1 + ε²))`, the `Π`
/// eigenvalue of `u_i + ε u_j`.
pub fn lambda_pi(a_i: f64, a_j: f64, eps: f64) -> f64 {
    let e2 = eps * eps;
    let d = a_j - a_i;
    d * d * e2 / ((a_i * a_i + e2 * a_j * a_j) * (1.0 + e2))
}

/// `(a_j − a_i)² / (a_j + a_i)²`, the `𝓘₂` eigenvalue of a definite pair.
pub fn lambda_i2(a_i: f64, a_j: f64) -> f64 {
    let r = (a_j - a_i) / (a_j + a_i);
    r * r
}

/// Asymptotic GMRES(1) factor for `r₀ = c(u_i + ε u_j)`: `√λ_ij(ε)`.
pub fn rho_for_two_modes(a_i: f64, a_j: f64, eps: f64) -> f64 {
    lambda_pi(a_i, a_j, eps).sqrt()
}

/// `Ψ` eigenvalue `(1 − a_1)(a_2 − 1)/(a_1 + a_2 − 1)`.
pub fn mu_psi(a1: f64, a2: f64) -> f64 {
    (1.0 - a1) * (a2 - 1.0) / (a1 + a2 - 1.0)
}

/// `ε²` making `u_1 + ε u_2` a `Ψ` eigenvector; only meaningful when positive.
pub fn psi_eps2(a1: f64, a2: f64) -> f64 {
    -(a2 - 1.0) * a1 / ((a1 - 1.0) * a2)
}

/// `Υ` eigenvalue of `u_1 + ε u_2`.
pub fn mu_upsilon(a1: f64, a2: f64, eps: f64) -> f64 {
    let e2 = eps * eps;
    let d = a2 - a1;
    let p = (1.0 - a1) * (1.0 - a2);
    d * d / (a1 * a1 + e2 * a2 * a2) * (p * p)
        / ((1.0 - a1) * (1.0 - a1) + (1.0 - a2) * (1.0 - a2) / e2)
}

/// `ε²` maximizing [`mu_upsilon`]: `|(1 − a_2)a_1 / ((1 − a_1)a_2)|`.
pub fn upsilon_opt_eps2(a1: f64, a2: f64) -> f64 {
    ((1.0 - a2) * a1 / ((1.0 - a1) * a2)).abs()
}

/// Maximum over ε of [`mu_upsilon`], the pair term of `Λ*`. `None` when both
/// denominator terms vanish.
pub fn raa1_pair_term(a1: f64, a2: f64) -> Option<f64> {
    let den = ((1.0 - a1) * a1).abs() + ((1.0 - a2) * a2).abs();
    if den == 0.0 {
        return None;
    }
    let t = (1.0 - a1) * (1.0 - a2) * (a1 - a2) / den;
    Some(t * t)
}

/// `Λ* = max_{i,j} ((1−a_i)(1−a_j)(a_i−a_j) / (|(1−a_i)a_i| + |(1−a_j)a_j|))²`.
pub fn lambda_star_raa1(spec: &Spectrum) -> f64 {
    lambda_star_values(&spec.distinct_eigenvalues())
}

/// [`lambda_star_raa1`] on a list of distinct eigenvalues.
pub fn lambda_star_values(values: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            if let Some(t) = raa1_pair_term(values[i], values[j]) {
                best = best.max(t);
            }
        }
    }
    best
}

/// GMRES(1) factor `m/√(1 + m²)` of a skew block with modulus `m`.
pub fn skew_factor(m: f64) -> f64 {
    m / (1.0 + m * m).sqrt()
}

/// rAA(1) factor `m/(1 + m²)^{1/4}` of a skew block with modulus `m`.
pub fn skew_factor_raa1(m: f64) -> f64 {
    m / (1.0 + m * m).powf(0.25)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkewReport {
    /// Largest block modulus `m*`.
    pub m_star: f64,
    pub gmres1: f64,
    pub raa1: f64,
    /// Per-block GMRES(1) factors, in block order.
    pub block_factors: Vec<f64>,
}

/// Worst-case factors when `M = I − A` is skew-symmetric.
pub fn worst_case_skew(blocks: &SchurBlocks) -> SkewReport {
    let m = blocks.max_modulus();
    SkewReport {
        m_star: m,
        gmres1: skew_factor(m),
        raa1: skew_factor_raa1(m),
        block_factors: blocks.moduli().into_iter().map(skew_factor).collect(),
    }
}

/// GMRES(1) factor when `r₀` lies in the span of the chosen blocks: set by
/// the dominant chosen modulus.
pub fn restricted_skew_factor(blocks: &SchurBlocks, subset: &[usize]) -> Result<f64> {
    let mut m = 0.0f64;
    for &j in subset {
        m = m.max(blocks.block(j)?.modulus);
    }
    Ok(skew_factor(m))
}

/// `[1/(1 + m*²), 1/(1 + m_*²)]`, the range of `α(v)` for skew `M`.
pub fn alpha_range_skew(blocks: &SchurBlocks) -> (f64, f64) {
    let hi = blocks.max_modulus();
    let lo = if blocks.unpaired().is_empty() {
        blocks.min_modulus(false)
    } else {
        0.0
    };
    (1.0 / (1.0 + hi * hi), 1.0 / (1.0 + lo * lo))
}

/// Symmetric or `I − A` skew: the structures with a closed-form factor.
#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    Symmetric(Spectrum),
    SkewM(SchurBlocks),
}

/// Classifies `A` into one of the supported structures.
pub fn classify(a: &DenseMatrix) -> Result<Structure> {
    let scale = a.max_abs().max(1.0);
    if a.asymmetry() <= STRUCTURE_RTOL * scale {
        return Ok(Structure::Symmetric(eig_symmetric(a)?));
    }
    let m = a.iteration_matrix();
    if m.skew_defect() <= STRUCTURE_RTOL * scale {
        return Ok(Structure::SkewM(schur_skew(&m)?));
    }
    Err(Error::UnsupportedStructure)
}

/// q-factor `σ` with `‖r_k‖ ≤ σ‖r_{k−1}‖` for every GMRES(1) step.
pub fn qfactor(a: &DenseMatrix) -> Result<f64> {
    match classify(a)? {
        Structure::Symmetric(spec) => Ok(worst_case_gmres1(&spec)?.worst_case_rho),
        Structure::SkewM(blocks) => Ok(worst_case_skew(&blocks).gmres1),
    }
}

/// Predicted asymptotic GMRES(1) factor for a given `r₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    /// Closed-form value for this `r₀`.
    Exact(f64),
    /// Worst case over the modes `r₀` excites.
    Bound(f64),
}

impl Prediction {
    pub fn value(self) -> f64 {
        match self {
            Prediction::Exact(x) | Prediction::Bound(x) => x,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Prediction::Exact(_))
    }
}

/// Relative weight below which an eigencomponent of `r₀` is treated as absent.
pub const ACTIVE_RTOL: f64 = 1e-12;

/// Eigen-groups (symmetric) or Schur blocks (skew) excited by `r₀`.
pub fn active_modes(structure: &Structure, r0: &DenseVector) -> Result<Vec<usize>> {
    let coeffs = match structure {
        Structure::Symmetric(spec) => spec.group_coefficients(r0)?,
        Structure::SkewM(blocks) => (0..blocks.len())
            .map(|j| Ok(blocks.project_onto_block(j, r0)?.norm2()))
            .collect::<Result<Vec<_>>>()?,
    };
    let n = r0.norm2();
    Ok(coeffs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > ACTIVE_RTOL * n)
        .map(|(i, _)| i)
        .collect())
}

/// GMRES(1) factor predicted for `r₀`: exact for one or two active symmetric
/// modes and for skew `M`, otherwise the worst case over the active modes.
pub fn predict_rho(structure: &Structure, r0: &DenseVector) -> Result<Prediction> {
    let active = active_modes(structure, r0)?;
    match structure {
        Structure::Symmetric(spec) => {
            let coeffs = spec.group_coefficients(r0)?;
            let values = spec.distinct_eigenvalues();
            match active.as_slice() {
                [] | [_] => Ok(Prediction::Exact(0.0)),
                &[i, j] => {
                    let (a_i, a_j) = (values[i], values[j]);
                    if a_i * a_j < 0.0 {
                        return Ok(Prediction::Bound(1.0));
                    }
                    let eps = coeffs[j] / coeffs[i];
                    Ok(Prediction::Exact(rho_for_two_modes(a_i, a_j, eps)))
                }
                many => {
                    let vals: Vec<f64> = many.iter().map(|&i| values[i]).collect();
                    Ok(Prediction::Bound(worst_case_gmres1_values(&vals)?.worst_case_rho))
                }
            }
        }
        Structure::SkewM(blocks) => Ok(Prediction::Exact(restricted_skew_factor(blocks, &active)?)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapKind {
    I2,
    Pi,
    Psi,
    Upsilon,
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MapKind::I2 => "i2",
            MapKind::Pi => "pi",
            MapKind::Psi => "psi",
            MapKind::Upsilon => "upsilon",
        })
    }
}

impl FromStr for MapKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "i2" => Ok(MapKind::I2),
            "pi" => Ok(MapKind::Pi),
            "psi" => Ok(MapKind::Psi),
            "upsilon" => Ok(MapKind::Upsilon),
            other => Err(Error::Parse(format!("unknown map `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eps {
    Auto,
    Value(f64),
}

impl FromStr for Eps {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("auto") {
            return Ok(Eps::Auto);
        }
        t.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(Eps::Value)
            .ok_or_else(|| Error::Parse(format!("bad epsilon `{t}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NepEigenpair {
    pub vector: DenseVector,
    pub value: f64,
    pub map_kind: MapKind,
    /// `(i1, i2, ε)` with indices into the distinct eigenvalues.
    pub construction: (usize, usize, f64),
}

fn required_eps(kind: MapKind, a1: f64, a2: f64) -> Result<Option<f64>> {
    let check = |e2: f64, what: &str| -> Result<f64> {
        if e2.is_finite() && e2 > 0.0 {
            Ok(e2)
        } else {
            Err(Error::SignConditionViolated(format!(
                "{what} for eigenvalues {a1} and {a2}"
            )))
        }
    };
    match kind {
        MapKind::I2 => {
            if a1 * a2 <= 0.0 {
                return Err(Error::SignConditionViolated(format!(
                    "I2 needs a_i a_j > 0, got {a1} and {a2}"
                )));
            }
            Ok(Some(check(a1 / a2, "I2 eps^2 = a_i/a_j undefined")?))
        }
        MapKind::Psi => Ok(Some(check(
            psi_eps2(a1, a2),
            "Psi has no eigenvector with nonzero eigenvalue",
        )?)),
        MapKind::Pi | MapKind::Upsilon => Ok(None),
    }
}

fn auto_eps2(kind: MapKind, a1: f64, a2: f64) -> Result<f64> {
    if let Some(e2) = required_eps(kind, a1, a2)? {
        return Ok(e2);
    }
    let e2 = match kind {
        MapKind::Pi => a1.abs() / a2.abs(),
        _ => upsilon_opt_eps2(a1, a2),
    };
    if e2.is_finite() && e2 > 0.0 {
        Ok(e2)
    } else {
        Err(Error::SignConditionViolated(format!(
            "optimal eps undefined for eigenvalues {a1} and {a2}"
        )))
    }
}

fn map_value(kind: MapKind, a1: f64, a2: f64, eps: f64) -> f64 {
    match kind {
        MapKind::I2 => lambda_i2(a1, a2),
        MapKind::Pi => lambda_pi(a1, a2, eps),
        MapKind::Psi => mu_psi(a1, a2),
        MapKind::Upsilon => mu_upsilon(a1, a2, eps),
    }
}

fn random_direction(rng: &mut ChaCha8Rng, vectors: &[DenseVector], n: usize) -> DenseVector {
    let mut out = DenseVector::zeros(n);
    loop {
        for u in vectors {
            out.axpy(StandardNormal.sample(rng), u).expect("eigenvectors share the dimension");
        }
        let nn = out.norm2();
        if nn > 1e-8 {
            return out.scaled(1.0 / nn);
        }
    }
}

/// Two-mode eigenpair of the chosen map for distinct eigenvalues `i1`, `i2`.
///
/// With `spread = Some(seed)` the unit components are random directions in
/// each eigenspace instead of the first basis vector.
pub fn construct_eigpair(
    spec: &Spectrum,
    kind: MapKind,
    i1: usize,
    i2: usize,
    eps: Eps,
    spread: Option<u64>,
) -> Result<NepEigenpair> {
    if i1 == i2 {
        return Err(Error::SamePair);
    }
    let g1 = spec.group(i1)?;
    let g2 = spec.group(i2)?;
    let (a1, a2) = (g1.value, g2.value);
    let e = match eps {
        Eps::Auto => auto_eps2(kind, a1, a2)?.sqrt(),
        Eps::Value(e) => {
            if e == 0.0 || !e.is_finite() {
                return Err(Error::InadmissibleEpsilon {
                    eps: e,
                    required: f64::NAN,
                });
            }
            if let Some(req) = required_eps(kind, a1, a2)? {
                if ((e * e - req) / req).abs() > EPS_RTOL {
                    return Err(Error::InadmissibleEpsilon { eps: e, required: req });
                }
            }
            e
        }
    };
    let n = spec.dim();
    let (w1, w2) = match spread {
        None => (g1.vectors[0].clone(), g2.vectors[0].clone()),
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (
                random_direction(&mut rng, &g1.vectors, n),
                random_direction(&mut rng, &g2.vectors, n),
            )
        }
    };
    let mut vector = w1;
    vector.axpy(e, &w2)?;
    Ok(NepEigenpair {
        vector,
        value: map_value(kind, a1, a2, e),
        map_kind: kind,
        construction: (i1, i2, e),
    })
}

/// Single-mode vector `u_i`: every map sends it to zero.
pub fn single_mode_eigpair(spec: &Spectrum, kind: MapKind, i: usize) -> Result<NepEigenpair> {
    Ok(NepEigenpair {
        vector: spec.group(i)?.vectors[0].clone(),
        value: 0.0,
        map_kind: kind,
        construction: (i, i, 0.0),
    })
}

/// `u = u_i + t u_j` with `t² = −a_i/a_j` for a sign-mixed pair, so that
/// `⟨Au, u⟩ = 0`: GMRES(1) stalls and both `𝓘₂` and `Π` have eigenvalue one.
pub fn neutral_eigpair(spec: &Spectrum, kind: MapKind, i1: usize, i2: usize) -> Result<NepEigenpair> {
    if i1 == i2 {
        return Err(Error::SamePair);
    }
    if !matches!(kind, MapKind::I2 | MapKind::Pi) {
        return Err(Error::Config(format!("no neutral eigenpair for map {kind}")));
    }
    let g1 = spec.group(i1)?;
    let g2 = spec.group(i2)?;
    let t2 = -g1.value / g2.value;
    if !(t2 > 0.0 && t2.is_finite()) {
        return Err(Error::SignConditionViolated(format!(
            "neutral direction needs a_i a_j < 0, got {} and {}",
            g1.value, g2.value
        )));
    }
    let t = t2.sqrt();
    let mut vector = g1.vectors[0].clone();
    vector.axpy(t, &g2.vectors[0])?;
    Ok(NepEigenpair {
        vector,
        value: 1.0,
        map_kind: kind,
        construction: (i1, i2, t),
    })
}

fn phi_checked(a: &DenseMatrix, v: &DenseVector, scale: f64) -> Result<DenseVector> {
    if v.norm2() <= BREAKDOWN_RTOL * scale {
        return Err(Error::Breakdown);
    }
    let av = a.matvec(v)?;
    let alpha = alpha_with(v, &av).map_err(|e| match e {
        Error::ZeroResidual => Error::Breakdown,
        other => other,
    })?;
    let mut out = v.clone();
    out.axpy(-alpha, &av)?;
    Ok(out)
}

/// Applies the map of `kind` to `u` at `u` itself, step by step.
pub fn apply_map(a: &DenseMatrix, kind: MapKind, u: &DenseVector) -> Result<DenseVector> {
    let un = u.norm2();
    if un < ZERO_NORM {
        return Err(Error::ZeroResidual);
    }
    let m = a.iteration_matrix();
    match kind {
        MapKind::I2 => {
            let au = a.matvec(u)?;
            let alpha = alpha_with(u, &au)?;
            let mut y = u.clone();
            y.axpy(-alpha, &au)?;
            let aty = a.matvec_transpose(&y)?;
            y.axpy(-alpha, &aty)?;
            Ok(y)
        }
        MapKind::Pi => {
            let y = phi_checked(a, u, un)?;
            phi_checked(a, &y, un)
        }
        MapKind::Psi => m.matvec(&phi_checked(a, u, un)?),
        MapKind::Upsilon => {
            let y = m.matvec(&phi_checked(a, u, un)?)?;
            m.matvec(&phi_checked(a, &y, un)?)
        }
    }
}

/// `‖map(u)u − value·u‖ / ‖u‖`.
pub fn verify_eigenpair(a: &DenseMatrix, pair: &NepEigenpair) -> Result<f64> {
    let image = apply_map(a, pair.map_kind, &pair.vector)?;
    let mut diff = image;
    diff.axpy(-pair.value, &pair.vector)?;
    Ok(diff.norm2() / pair.vector.norm2())
}
