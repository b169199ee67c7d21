//! Dense double-precision vectors and square matrices.
//!
//! Everything here is small and sequential: dot products sum left to right in
//! index order, so traces built on top of these kernels are bit-reproducible.
//! The one piece of numerics beyond BLAS-1/2 plumbing is the step length
//! [`alpha`] and the one-step residual map [`phi_map`] built from it.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Norms below this are treated as exact zeros.
pub const ZERO_NORM: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector {
    data: Vec<f64>,
}

impl DenseVector {
    /// Builds a vector, rejecting empty input and non-finite entries.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { data })
    }

    /// Internal constructor for results of finite arithmetic.
    pub(crate) fn from_vec(data: Vec<f64>) -> Self {
        Self { data }
    }

    pub fn zeros(n: usize) -> Self {
        Self { data: vec![0.0; n] }
    }

    /// The `i`-th canonical basis vector of length `n`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.data[i] = 1.0;
        v
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    fn check_len(&self, other: &DenseVector) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(())
    }

    pub fn dot(&self, other: &DenseVector) -> Result<f64> {
        self.check_len(other)?;
        Ok(dot_slices(&self.data, &other.data))
    }

    /// Euclidean norm; rescales internally when the plain sum of squares
    /// would under- or overflow.
    pub fn norm2(&self) -> f64 {
        norm_slice(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, c: f64) -> DenseVector {
        DenseVector::from_vec(self.data.iter().map(|x| c * x).collect())
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &DenseVector) -> Result<()> {
        self.check_len(x)?;
        for (y, xi) in self.data.iter_mut().zip(&x.data) {
            *y += a * xi;
        }
        Ok(())
    }

    pub fn add(&self, other: &DenseVector) -> Result<DenseVector> {
        self.check_len(other)?;
        Ok(DenseVector::from_vec(
            self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &DenseVector) -> Result<DenseVector> {
        self.check_len(other)?;
        Ok(DenseVector::from_vec(
            self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        ))
    }

    /// Parses the vector text format: a length line followed by entries
    /// separated by arbitrary whitespace. Entries may be decimals or `p/q`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let n: usize = tokens
            .next()
            .ok_or_else(|| Error::Parse("missing length".into()))?
            .parse()
            .map_err(|_| Error::Parse("bad length".into()))?;
        let data = tokens.map(parse_entry).collect::<Result<Vec<_>>>()?;
        if data.len() != n {
            return Err(Error::Parse(format!("expected {n} entries, found {}", data.len())));
        }
        Self::new(data)
    }
}

impl Index<usize> for DenseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for DenseVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

impl From<DenseVector> for Vec<f64> {
    fn from(v: DenseVector) -> Self {
        v.data
    }
}

/// Square matrix stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty);
        }
        let mut m = Self::zeros(entries.len());
        for (i, &d) in entries.iter().enumerate() {
            m.set(i, i, d);
        }
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
            for (j, &x) in row.iter().enumerate() {
                m.set(i, j, x);
            }
        }
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_columns(cols: &[DenseVector]) -> Result<Self> {
        let n = cols.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        let mut data = Vec::with_capacity(n * n);
        for c in cols {
            if c.len() != n {
                return Err(Error::NotSquare {
                    rows: c.len(),
                    cols: n,
                });
            }
            data.extend_from_slice(c.as_slice());
        }
        Ok(Self { n, data })
    }

    fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|x| !x.is_finite()) {
            Some(i) => Err(Error::NonFinite(i)),
            None => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.data[j * self.n + i] = x;
    }

    pub fn column(&self, j: usize) -> DenseVector {
        DenseVector::from_vec(self.data[j * self.n..(j + 1) * self.n].to_vec())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|j| (0..self.n).all(|i| i == j || self.get(i, j) == 0.0))
    }

    fn check_vec(&self, v: &DenseVector) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: v.len(),
            });
        }
        Ok(())
    }

    pub fn matvec(&self, v: &DenseVector) -> Result<DenseVector> {
        self.check_vec(v)?;
        let n = self.n;
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot2((0..n).map(|j| (self.data[j * n + i], v[j])));
        }
        Ok(DenseVector::from_vec(out))
    }

    /// `Aᵀ v`
    pub fn matvec_transpose(&self, v: &DenseVector) -> Result<DenseVector> {
        self.check_vec(v)?;
        let n = self.n;
        Ok(DenseVector::from_vec(
            (0..n)
                .map(|j| dot_slices(&self.data[j * n..(j + 1) * n], v.as_slice()))
                .collect(),
        ))
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let n = self.n;
        let mut out = Self::zeros(n);
        for j in 0..n {
            for i in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.get(i, k) * other.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        Ok(out)
    }

    fn zip_with(&self, other: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> Result<DenseMatrix> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(DenseMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scaled(&self, c: f64) -> DenseMatrix {
        DenseMatrix {
            n: self.n,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    /// `M = I − A`, the fixed-point iteration matrix.
    pub fn iteration_matrix(&self) -> DenseMatrix {
        let mut m = self.scaled(-1.0);
        for i in 0..self.n {
            m.set(i, i, m.get(i, i) + 1.0);
        }
        m
    }

    pub fn frobenius(&self) -> f64 {
        norm_slice(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Largest `|a_ij − a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Largest `|a_ij + a_ji|` over all entries (diagonal included).
    pub fn skew_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..=i {
                worst = worst.max((self.get(i, j) + self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry() <= tol
    }

    pub fn is_skew_symmetric(&self, tol: f64) -> bool {
        self.skew_defect() <= tol
    }

    /// Inverse by Gauss–Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<DenseMatrix> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&p, &q| a.get(p, col).abs().total_cmp(&a.get(q, col).abs()))
                .unwrap_or(col);
            if a.get(pivot, col).abs() <= 1e-14 * scale {
                return Err(Error::Singular);
            }
            if pivot != col {
                for j in 0..n {
                    let (x, y) = (a.get(col, j), a.get(pivot, j));
                    a.set(col, j, y);
                    a.set(pivot, j, x);
                    let (x, y) = (inv.get(col, j), inv.get(pivot, j));
                    inv.set(col, j, y);
                    inv.set(pivot, j, x);
                }
            }
            let d = a.get(col, col);
            for j in 0..n {
                a.set(col, j, a.get(col, j) / d);
                inv.set(col, j, inv.get(col, j) / d);
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = a.get(i, col);
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a.set(i, j, a.get(i, j) - f * a.get(col, j));
                    inv.set(i, j, inv.get(i, j) - f * inv.get(col, j));
                }
            }
        }
        Ok(inv)
    }

    pub fn solve(&self, b: &DenseVector) -> Result<DenseVector> {
        self.inverse()?.matvec(b)
    }

    /// Parses the shared matrix text format: a first line holding `n`
    /// followed by `n` rows of `n` whitespace-separated entries. Entries may
    /// be decimals (`0.25`) or fractions (`1/4`).
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("missing dimension line".into()))?
            .parse()
            .map_err(|_| Error::Parse("bad dimension line".into()))?;
        if n == 0 {
            return Err(Error::Empty);
        }
        let mut rows = Vec::with_capacity(n);
        for line in lines {
            let row = line
                .split_whitespace()
                .map(parse_entry)
                .collect::<Result<Vec<_>>>()?;
            if row.len() != n {
                return Err(Error::Parse(format!(
                    "row {} has {} entries, expected {n}",
                    rows.len() + 1,
                    row.len()
                )));
            }
            rows.push(row);
        }
        if rows.len() != n {
            return Err(Error::Parse(format!("expected {n} rows, found {}", rows.len())));
        }
        Self::from_rows(&rows)
    }
}

impl fmt::Display for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.n)?;
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| format!("{:e}", self.get(i, j))).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

fn parse_entry(tok: &str) -> Result<f64> {
    let bad = || Error::Parse(format!("bad entry `{tok}`"));
    let x = match tok.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.parse().map_err(|_| bad())?;
            let q: f64 = q.parse().map_err(|_| bad())?;
            if q == 0.0 {
                return Err(bad());
            }
            p / q
        }
        None => tok.parse().map_err(|_| bad())?,
    };
    if !x.is_finite() {
        return Err(bad());
    }
    Ok(x)
}

fn pow2_scale(m: f64) -> f64 {
    let e = m.log2().floor() as i32;
    2f64.powi(-e.clamp(-1000, 1000))
}

fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    dot2(a.iter().copied().zip(b.iter().copied()))
}

// Compensated dot product (Ogita–Rump–Oishi Dot2): error-free products via
// FMA and error-free sums, so the result is as if computed in twice the
// working precision and then rounded.
fn dot2(pairs: impl Iterator<Item = (f64, f64)> + Clone) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for (x, y) in pairs.clone() {
        let p = x * y;
        let ep = x.mul_add(y, -p);
        let t = s + p;
        let z = t - s;
        c += ep + ((s - (t - z)) + (p - z));
        s = t;
    }
    let r = s + c;
    if r.is_finite() {
        r
    } else {
        pairs.map(|(x, y)| x * y).sum()
    }
}

fn norm_slice(x: &[f64]) -> f64 {
    let ss = dot_slices(x, x);
    if ss > 1e-290 && ss < 1e290 {
        return ss.sqrt();
    }
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let s = pow2_scale(m);
    let xs: Vec<f64> = x.iter().map(|v| v * s).collect();
    dot_slices(&xs, &xs).sqrt() / s
}

/// Step length `⟨v, Av⟩ / ⟨Av, Av⟩` minimizing `‖v − c·Av‖` over scalars `c`.
pub fn alpha(a: &DenseMatrix, v: &DenseVector) -> Result<f64> {
    let av = a.matvec(v)?;
    alpha_with(v, &av)
}

/// [`alpha`] when `Av` is already available.
pub(crate) fn alpha_with(v: &DenseVector, av: &DenseVector) -> Result<f64> {
    let vn = v.norm2();
    if vn < ZERO_NORM {
        return Err(Error::ZeroResidual);
    }
    let avn = av.norm2();
    if avn < ZERO_NORM {
        return Err(Error::SingularDirection);
    }
    // Power-of-two rescaling is exact, so α(c·v) = α(v) whenever c = 2^k,
    // and it keeps the products clear of the subnormal range.
    let s = pow2_scale(v.max_abs());
    let vs = v.scaled(s);
    let avs = av.scaled(s);
    Ok(dot_slices(vs.as_slice(), avs.as_slice()) / dot_slices(avs.as_slice(), avs.as_slice()))
}

/// One minimal-residual step `Φ(v) = (I − α(v) A) v`.
pub fn phi_map(a: &DenseMatrix, v: &DenseVector) -> Result<DenseVector> {
    let av = a.matvec(v)?;
    let alpha = alpha_with(v, &av)?;
    let mut out = v.clone();
    out.axpy(-alpha, &av)?;
    Ok(out)
}
