//! Exact rational arithmetic for the rAA(1) counterexamples.
//!
//! Everything here runs on reduced big-integer fractions, so the verdicts
//! (`‖Υ(v)v‖ > Λ*‖v‖`, the parity certificate) carry no rounding error.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, DenseVector};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn frac(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// Parses `p`, `p/q` or a decimal such as `-0.25` or `1.5e-3`, exactly.
pub fn to_rational(s: &str) -> Result<Rational> {
    let t = s.trim();
    let bad = || Error::Parse(format!("not a rational number: `{t}`"));
    if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (ip, fp) = body.split_once('.').unwrap_or((body, ""));
    if ip.is_empty() && fp.is_empty() {
        return Err(bad());
    }
    if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("0{ip}{fp}").parse().map_err(|_| bad())?;
    let scale = exp - fp.len() as i32;
    let ten = BigInt::from(10);
    let mut r = Rational::from_integer(digits);
    if scale >= 0 {
        r *= Rational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= Rational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -r } else { r })
}

/// Nearest double; `Overflow` when the magnitude exceeds the f64 range.
pub fn to_float(r: &Rational) -> Result<f64> {
    match r.to_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(Error::Overflow),
    }
}

/// Exact value of a finite double.
pub fn from_f64(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or(Error::NonFinite(0))
}

/// Best rational approximation of `x` with denominator at most `max_den`
/// (continued-fraction convergents).
pub fn approximate(x: f64, max_den: u64) -> Result<Rational> {
    let target = from_f64(x)?;
    let max_den = BigInt::from(max_den);
    let (mut p0, mut q0) = (BigInt::zero(), BigInt::one());
    let (mut p1, mut q1) = (BigInt::one(), BigInt::zero());
    let mut rest = target.clone();
    loop {
        let a = rest.floor().to_integer();
        let p2 = &a * &p1 + &p0;
        let q2 = &a * &q1 + &q0;
        if q2 > max_den {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let f = &rest - Rational::from_integer(a);
        if f.is_zero() {
            break;
        }
        rest = f.recip();
    }
    if q1.is_zero() {
        return Ok(target.floor());
    }
    Ok(Rational::new(p1, q1))
}

/// `√r` when `r` is the square of a rational.
pub fn sqrt_exact(r: &Rational) -> Option<Rational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    (&n * &n == *r.numer() && &d * &d == *r.denom()).then(|| Rational::new(n, d))
}

/// `m/√(1 + m²)` as an exact rational, when it is one.
pub fn skew_factor_exact(m: &Rational) -> Option<Rational> {
    let m2 = m * m;
    let s = sqrt_exact(&(&m2 / (Rational::one() + &m2)))?;
    Some(if m.is_negative() { -s } else { s })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RationalVector(Vec<Rational>);

impl RationalVector {
    pub fn new(entries: Vec<Rational>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty);
        }
        Ok(Self(entries))
    }

    pub fn from_integers(entries: &[i64]) -> Result<Self> {
        Self::new(entries.iter().map(|&x| int(x)).collect())
    }

    /// Exact image of a double-precision vector.
    pub fn from_dense(v: &DenseVector) -> Result<Self> {
        v.iter()
            .enumerate()
            .map(|(i, &x)| Rational::from_float(x).ok_or(Error::NonFinite(i)))
            .collect::<Result<Vec<_>>>()
            .and_then(Self::new)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[Rational] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(())
    }

    pub fn dot(&self, other: &Self) -> Result<Rational> {
        self.check(other)?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .fold(Rational::zero(), |acc, (a, b)| acc + a * b))
    }

    pub fn norm_sq(&self) -> Rational {
        self.0.iter().fold(Rational::zero(), |acc, a| acc + a * a)
    }

    pub fn scaled(&self, c: &Rational) -> Self {
        Self(self.0.iter().map(|a| a * c).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    pub fn to_dense(&self) -> Result<DenseVector> {
        DenseVector::new(self.0.iter().map(to_float).collect::<Result<Vec<_>>>()?)
    }

    /// Least common multiple of the entry denominators.
    pub fn common_denominator(&self) -> BigInt {
        self.0.iter().fold(BigInt::one(), |l, a| l.lcm(a.denom()))
    }

    /// Same text format as [`DenseVector::parse`], entries read exactly.
    pub fn parse(text: &str) -> Result<Self> {
        let mut toks = tokens(text);
        let n = parse_len(toks.next())?;
        let entries = toks.map(to_rational).collect::<Result<Vec<_>>>()?;
        if entries.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: entries.len(),
            });
        }
        Self::new(entries)
    }
}

impl fmt::Display for RationalVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("]")
    }
}

fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(|c: char| c.is_whitespace() || c == ','))
        .filter(|t| !t.is_empty())
}

fn parse_len(tok: Option<&str>) -> Result<usize> {
    let tok = tok.ok_or(Error::Empty)?;
    let n: usize = tok
        .parse()
        .map_err(|_| Error::Parse(format!("expected a dimension, got `{tok}`")))?;
    if n == 0 {
        return Err(Error::Empty);
    }
    Ok(n)
}

/// Square matrix of rationals, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RationalMatrix {
    n: usize,
    rows: Vec<Vec<Rational>>,
}

impl RationalMatrix {
    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        for r in &rows {
            if r.len() != n {
                return Err(Error::NotSquare { rows: n, cols: r.len() });
            }
        }
        Ok(Self { n, rows })
    }

    pub fn diag(entries: &[Rational]) -> Result<Self> {
        let n = entries.len();
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { entries[i].clone() } else { Rational::zero() })
                    .collect()
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::diag(&vec![Rational::one(); n])
    }

    /// Exact image of a double-precision matrix.
    pub fn from_dense(a: &DenseMatrix) -> Result<Self> {
        let n = a.dim();
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| from_f64(a.get(i, j)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.rows[i][j]
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| i == j || self.rows[i][j].is_zero()))
    }

    pub fn diagonal(&self) -> Vec<Rational> {
        (0..self.n).map(|i| self.rows[i][i].clone()).collect()
    }

    pub fn matvec(&self, v: &RationalVector) -> Result<RationalVector> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: v.len(),
            });
        }
        Ok(RationalVector(
            self.rows
                .iter()
                .map(|r| {
                    r.iter()
                        .zip(v.entries())
                        .fold(Rational::zero(), |acc, (a, b)| acc + a * b)
                })
                .collect(),
        ))
    }

    /// `M = I − A`.
    pub fn iteration_matrix(&self) -> Self {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.iter()
                    .enumerate()
                    .map(|(j, a)| if i == j { Rational::one() - a } else { -a })
                    .collect()
            })
            .collect();
        Self { n: self.n, rows }
    }

    pub fn to_dense(&self) -> Result<DenseMatrix> {
        let rows = self
            .rows
            .iter()
            .map(|r| r.iter().map(to_float).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        DenseMatrix::from_rows(&rows)
    }

    /// Same text format as [`DenseMatrix::parse`], entries read exactly.
    pub fn parse(text: &str) -> Result<Self> {
        let mut toks = tokens(text);
        let n = parse_len(toks.next())?;
        let entries = toks.map(to_rational).collect::<Result<Vec<_>>>()?;
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: entries.len(),
            });
        }
        Self::from_rows(entries.chunks(n).map(<[_]>::to_vec).collect())
    }
}

/// `α(v) = ⟨v, Av⟩ / ⟨Av, Av⟩`, exactly.
pub fn alpha_exact(a: &RationalMatrix, v: &RationalVector) -> Result<Rational> {
    if v.is_zero() {
        return Err(Error::ZeroResidual);
    }
    let av = a.matvec(v)?;
    let den = av.norm_sq();
    if den.is_zero() {
        return Err(Error::SingularDirection);
    }
    Ok(v.dot(&av)? / den)
}

/// One rAA(1) half cycle `Ψ(v)v = M(I − α(v)A)v`.
pub fn psi_exact(a: &RationalMatrix, v: &RationalVector) -> Result<RationalVector> {
    let alpha = alpha_exact(a, v)?;
    let av = a.matvec(v)?;
    let phi = v.sub(&av.scaled(&alpha))?;
    a.iteration_matrix().matvec(&phi)
}

/// Intermediate values of one full cycle `w = Υ(v)v`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpsilonSteps {
    pub alpha_v: Rational,
    /// `u = Ψ(v)v`.
    pub u: RationalVector,
    pub alpha_u: Rational,
    /// `w = Ψ(u)u`.
    pub w: RationalVector,
}

/// `Υ(v)v` together with its intermediates; `Breakdown` when `Ψ(v)v = 0`.
pub fn upsilon_exact_steps(a: &RationalMatrix, v: &RationalVector) -> Result<UpsilonSteps> {
    let alpha_v = alpha_exact(a, v)?;
    let u = psi_exact(a, v)?;
    if u.is_zero() {
        return Err(Error::Breakdown);
    }
    let alpha_u = alpha_exact(a, &u)?;
    let w = psi_exact(a, &u)?;
    Ok(UpsilonSteps {
        alpha_v,
        u,
        alpha_u,
        w,
    })
}

/// `Υ(v)v`.
pub fn upsilon_exact(a: &RationalMatrix, v: &RationalVector) -> Result<RationalVector> {
    Ok(upsilon_exact_steps(a, v)?.w)
}

/// Pair term `((1−a)(1−b)(a−b) / (|(1−a)a| + |(1−b)b|))²`; `None` when the
/// denominator vanishes.
pub fn raa1_pair_term_exact(a: &Rational, b: &Rational) -> Option<Rational> {
    let one = Rational::one();
    let den = ((&one - a) * a).abs() + ((&one - b) * b).abs();
    if den.is_zero() {
        return None;
    }
    let t = (&one - a) * (&one - b) * (a - b) / den;
    Some(&t * &t)
}

/// `Λ*` of a diagonal matrix.
pub fn lambda_star_exact(a: &RationalMatrix) -> Result<Rational> {
    if !a.is_diagonal() {
        return Err(Error::NotDiagonal);
    }
    let mut d = a.diagonal();
    d.sort();
    d.dedup();
    let mut best = Rational::zero();
    for i in 0..d.len() {
        for j in i + 1..d.len() {
            if let Some(t) = raa1_pair_term_exact(&d[i], &d[j]) {
                if t > best {
                    best = t;
                }
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjectureCheck {
    /// `‖Υ(v)v‖² / ‖v‖²`.
    pub ratio_sq: Rational,
    pub lambda_star: Rational,
    pub lambda_star_sq: Rational,
    /// `‖Υ(v)v‖ > Λ*‖v‖`.
    pub violated: bool,
    pub steps: UpsilonSteps,
}

impl ConjectureCheck {
    /// `‖Υ(v)v‖ / ‖v‖` rounded to a double.
    pub fn ratio(&self) -> Result<f64> {
        Ok(to_float(&self.ratio_sq)?.sqrt())
    }
}

/// Compares `‖Υ(v)v‖/‖v‖` against `Λ*` with both sides squared.
pub fn check_conjecture_violation(a: &RationalMatrix, v: &RationalVector) -> Result<ConjectureCheck> {
    let lambda_star = lambda_star_exact(a)?;
    let steps = upsilon_exact_steps(a, v)?;
    let ratio_sq = steps.w.norm_sq() / v.norm_sq();
    let lambda_star_sq = &lambda_star * &lambda_star;
    Ok(ConjectureCheck {
        violated: ratio_sq > lambda_star_sq,
        ratio_sq,
        lambda_star,
        lambda_star_sq,
        steps,
    })
}

/// Outcome of the integer parity argument.
#[derive(Debug, Clone, PartialEq)]
pub enum ParityOutcome {
    /// Both sides computed; `certified` iff their parities differ.
    Computed {
        lhs: BigInt,
        rhs: BigInt,
        certified: bool,
    },
    Skipped(String),
}

impl ParityOutcome {
    pub fn is_certified(&self) -> bool {
        matches!(self, ParityOutcome::Computed { certified: true, .. })
    }
}

/// Integer form of `‖Υ(v)v‖² = (Λ*)²‖v‖²`.
///
/// With `v` scaled to integers, `Λ* = p/q` and `L` the common denominator
/// of `w = Υ(v)v`, the two sides are `q²‖Lw‖²` and `p²‖v‖²L²`. Different
/// parities rule out equality.
pub fn parity_certificate(a: &RationalMatrix, v: &RationalVector) -> Result<ParityOutcome> {
    let lambda_star = lambda_star_exact(a)?;
    let vi = v.scaled(&Rational::from_integer(v.common_denominator()));
    let w = match upsilon_exact(a, &vi) {
        Ok(w) => w,
        Err(Error::Breakdown | Error::ZeroResidual | Error::SingularDirection) => {
            return Ok(ParityOutcome::Skipped(
                "v is an eigenvector or the cycle breaks down".into(),
            ))
        }
        Err(e) => return Err(e),
    };
    let l = w.common_denominator();
    let wl = w.scaled(&Rational::from_integer(l.clone()));
    let w_sq = wl.norm_sq().to_integer();
    let v_sq = vi.norm_sq().to_integer();
    let p = lambda_star.numer();
    let q = lambda_star.denom();
    let lhs = q * q * w_sq;
    let rhs = p * p * v_sq * &l * &l;
    let certified = lhs.is_even() != rhs.is_even();
    Ok(ParityOutcome::Computed { lhs, rhs, certified })
}

/// One of the three counterexample instances `(𝒜_k, v_k)`, `k = 1, 2, 3`.
pub fn counterexample(case: usize) -> Result<(RationalMatrix, RationalVector)> {
    match case {
        1 => Ok((
            RationalMatrix::diag(&[int(1), int(2), int(3)])?,
            RationalVector::from_integers(&[15, 5, 1])?,
        )),
        2 => Ok((
            RationalMatrix::diag(&[frac(-1, 2), int(-4), int(2)])?,
            RationalVector::from_integers(&[38, 1, 45])?,
        )),
        3 => Ok((
            RationalMatrix::diag(&[frac(1, 2), frac(3, 2), frac(1, 3), int(-2)])?,
            RationalVector::from_integers(&[23, 60, 77, 1])?,
        )),
        _ => Err(Error::IndexOutOfRange { index: case, len: 3 }),
    }
}
