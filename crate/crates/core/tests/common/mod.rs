#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rkl::{DenseMatrix, DenseVector};

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DenseVector {
    DenseVector::new((0..n).map(|_| StandardNormal.sample(rng)).collect()).unwrap()
}

pub fn uniform_vector(rng: &mut ChaCha8Rng, n: usize) -> DenseVector {
    DenseVector::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Haar-ish orthogonal matrix by twice-applied modified Gram-Schmidt.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let mut cols: Vec<DenseVector> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v = gaussian_vector(rng, n);
        for _ in 0..2 {
            for q in &cols {
                let c = v.dot(q).unwrap();
                v.axpy(-c, q).unwrap();
            }
        }
        let nv = v.norm2();
        if nv > 1e-6 {
            cols.push(v.scaled(1.0 / nv));
        }
    }
    DenseMatrix::from_columns(&cols).unwrap()
}

/// `Q diag(values) Qᵀ` for a random orthogonal `Q`.
pub fn symmetric_with_spectrum(rng: &mut ChaCha8Rng, values: &[f64]) -> DenseMatrix {
    let n = values.len();
    let q = random_orthogonal(rng, n);
    let mut a = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let s: f64 = (0..n).map(|k| q.get(i, k) * values[k] * q.get(j, k)).sum();
            a.set(i, j, s);
        }
    }
    a.add(&a.transpose()).unwrap().scaled(0.5)
}

/// `I − S` with `S` skew-symmetric, entries of `S` scaled by `scale`.
pub fn skew_m_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DenseMatrix {
    let mut a = DenseMatrix::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            let z: f64 = StandardNormal.sample(rng);
            let s = scale * z;
            a.set(i, j, -s);
            a.set(j, i, s);
        }
    }
    a
}

/// `p` distinct values with `|a| ∈ [lo, hi]` (log-uniform) and random signs
/// when `signed`, separated by at least 1% relative.
pub fn random_values(rng: &mut ChaCha8Rng, p: usize, lo: f64, hi: f64, signed: bool) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(p);
    while out.len() < p {
        let mag = (rng.gen_range(lo.ln()..hi.ln())).exp();
        let x = if signed && rng.gen_bool(0.5) { -mag } else { mag };
        if out.iter().all(|&y| (x - y).abs() > 0.01 * x.abs().max(y.abs())) {
            out.push(x);
        }
    }
    out
}
