//! Spectral decompositions feeding the convergence predictors.
//!
//! * [`eig_symmetric`] runs cyclic Jacobi to full precision and groups the
//!   eigenvalues into distinct values with orthonormal eigenspace bases.
//! * [`schur_skew`] builds the real Schur form of a skew-symmetric `M` from
//!   the eigendecomposition of `K = M Mᵀ`: each eigenvector `q` of `K` with
//!   `K q = m² q` is paired with `q̃ = M q / m`, and `span{q, q̃}` is a
//!   2-dimensional invariant subspace of `M` on which it acts as a rotation
//!   generator of modulus `m`.

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, DenseVector};

/// Relative tolerance for merging eigenvalues into one distinct value.
pub const GROUP_RTOL: f64 = 1e-8;

/// Relative tolerance for the symmetric / skew-symmetric input checks.
pub const STRUCTURE_RTOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Relative grouping tolerance; eigenvalues closer than
/// `group_tolerance() * max(1, ‖A‖₂)` are treated as one.
pub fn group_tolerance() -> f64 {
    GROUP_RTOL
}

/// Eigenvalues (unsorted) and eigenvectors (columns of `V`) of a symmetric
/// matrix by cyclic Jacobi rotations.
pub fn jacobi_eigen(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = a.dim();
    let mut a = a.clone();
    let mut v = DenseMatrix::identity(n);
    let frob = a.frobenius();
    if frob == 0.0 {
        return (vec![0.0; n], v);
    }
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for q in 0..n {
            for p in 0..q {
                off += a.get(p, q) * a.get(p, q);
            }
        }
        if off.sqrt() <= f64::EPSILON * 1e-2 * frob {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                if t == 0.0 {
                    a.set(p, q, 0.0);
                    a.set(q, p, 0.0);
                    continue;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A ← Jᵀ A J
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    (a.diagonal(), v)
}

/// One distinct eigenvalue together with an orthonormal basis of its eigenspace.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenGroup {
    pub value: f64,
    pub vectors: Vec<DenseVector>,
}

impl EigenGroup {
    pub fn multiplicity(&self) -> usize {
        self.vectors.len()
    }
}

/// Grouped eigendecomposition of a symmetric matrix, distinct values ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    dim: usize,
    groups: Vec<EigenGroup>,
    tolerance: f64,
}

impl Spectrum {
    /// Builds a spectrum directly from groups (ascending, separated values).
    pub fn from_groups(dim: usize, mut groups: Vec<EigenGroup>, tolerance: f64) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::Empty);
        }
        groups.sort_by(|a, b| a.value.total_cmp(&b.value));
        for g in &groups {
            if g.vectors.is_empty() {
                return Err(Error::Empty);
            }
            for v in &g.vectors {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: v.len(),
                    });
                }
            }
        }
        Ok(Self {
            dim,
            groups,
            tolerance,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of distinct eigenvalues `p`.
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[EigenGroup] {
        &self.groups
    }

    pub fn group(&self, i: usize) -> Result<&EigenGroup> {
        self.groups.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.groups.len(),
        })
    }

    pub fn distinct_eigenvalues(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.value).collect()
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        self.groups.iter().map(EigenGroup::multiplicity).collect()
    }

    /// Absolute tolerance used when grouping.
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Eigenvalues repeated by multiplicity, in basis-column order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.groups
            .iter()
            .flat_map(|g| std::iter::repeat_n(g.value, g.multiplicity()))
            .collect()
    }

    /// All eigenvectors as columns, grouped by distinct eigenvalue.
    pub fn basis(&self) -> Result<DenseMatrix> {
        let cols: Vec<DenseVector> = self
            .groups
            .iter()
            .flat_map(|g| g.vectors.iter().cloned())
            .collect();
        DenseMatrix::from_columns(&cols)
    }

    /// The sub-spectrum made of the chosen distinct eigenvalues.
    pub fn restricted(&self, indices: &[usize]) -> Result<Spectrum> {
        let mut idx = indices.to_vec();
        idx.sort_unstable();
        idx.dedup();
        let groups = idx
            .iter()
            .map(|&i| self.group(i).cloned())
            .collect::<Result<Vec<_>>>()?;
        Spectrum::from_groups(self.dim, groups, self.tolerance)
    }

    /// Norm of the projection of `v` onto each eigenspace.
    pub fn group_coefficients(&self, v: &DenseVector) -> Result<Vec<f64>> {
        self.groups
            .iter()
            .map(|g| {
                let mut ss = 0.0;
                for u in &g.vectors {
                    let c = u.dot(v)?;
                    ss += c * c;
                }
                Ok(ss.sqrt())
            })
            .collect()
    }
}

/// Grouped eigendecomposition of a symmetric matrix.
pub fn eig_symmetric(a: &DenseMatrix) -> Result<Spectrum> {
    let scale = a.max_abs().max(1.0);
    let asym = a.asymmetry();
    if asym > STRUCTURE_RTOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = a.add(&a.transpose())?.scaled(0.5);
    let (vals, vecs) = jacobi_eigen(&sym);
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));

    let spectral_norm = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = GROUP_RTOL * spectral_norm.max(1.0);

    let mut groups: Vec<(Vec<f64>, Vec<DenseVector>)> = Vec::new();
    for &k in &order {
        let lam = vals[k];
        match groups.last_mut() {
            Some((members, vectors)) if lam - members[members.len() - 1] <= tol => {
                members.push(lam);
                vectors.push(vecs.column(k));
            }
            _ => groups.push((vec![lam], vec![vecs.column(k)])),
        }
    }
    let groups = groups
        .into_iter()
        .map(|(members, vectors)| EigenGroup {
            value: members.iter().sum::<f64>() / members.len() as f64,
            vectors,
        })
        .collect();
    Spectrum::from_groups(a.dim(), groups, tol)
}

/// One 2×2 diagonal block of the real Schur form: columns of `Q` and modulus `|m_j|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchurBlock {
    pub columns: (usize, usize),
    pub modulus: f64,
}

/// Real Schur structure of a skew-symmetric matrix; blocks sorted by
/// descending modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurBlocks {
    q: DenseMatrix,
    blocks: Vec<SchurBlock>,
    unpaired: Vec<usize>,
}

impl SchurBlocks {
    pub fn q(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn blocks(&self) -> &[SchurBlock] {
        &self.blocks
    }

    /// Columns of `Q` spanning the kernel that could not be paired (odd `n`).
    pub fn unpaired(&self) -> &[usize] {
        &self.unpaired
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block(&self, j: usize) -> Result<&SchurBlock> {
        self.blocks.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            len: self.blocks.len(),
        })
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.modulus).collect()
    }

    /// `m^*`, the spectral radius of `M`.
    pub fn max_modulus(&self) -> f64 {
        self.blocks.iter().fold(0.0f64, |m, b| m.max(b.modulus))
    }

    /// `m_*`; with `nonsingular_only` zero-modulus blocks are skipped.
    pub fn min_modulus(&self, nonsingular_only: bool) -> f64 {
        let it = self
            .blocks
            .iter()
            .map(|b| b.modulus)
            .filter(|&m| !nonsingular_only || m > 0.0);
        let m = it.fold(f64::INFINITY, f64::min);
        if m.is_finite() {
            m
        } else {
            0.0
        }
    }

    /// The pair `(q_j, q̃_j)`.
    pub fn block_basis(&self, j: usize) -> Result<(DenseVector, DenseVector)> {
        let b = self.block(j)?;
        Ok((self.q.column(b.columns.0), self.q.column(b.columns.1)))
    }

    /// `Q_j Q_jᵀ v`.
    pub fn project_onto_block(&self, j: usize, v: &DenseVector) -> Result<DenseVector> {
        let (q, qt) = self.block_basis(j)?;
        let mut out = q.scaled(q.dot(v)?);
        out.axpy(qt.dot(v)?, &qt)?;
        Ok(out)
    }

    /// Orthogonal projection onto the direct sum of the chosen blocks.
    pub fn project_onto_blocks(&self, js: &[usize], v: &DenseVector) -> Result<DenseVector> {
        let mut out = DenseVector::zeros(v.len());
        let mut seen = Vec::new();
        for &j in js {
            if seen.contains(&j) {
                continue;
            }
            seen.push(j);
            out = out.add(&self.project_onto_block(j, v)?)?;
        }
        Ok(out)
    }

    /// Eigenvalues `(1 + |m_j|²)⁻¹` of `S = ½(A⁻¹ + A⁻ᵀ)` for `A = I − M`,
    /// each block contributing twice and unpaired kernel columns once.
    pub fn s_eigenvalues(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .blocks
            .iter()
            .flat_map(|b| {
                let s = 1.0 / (1.0 + b.modulus * b.modulus);
                [s, s]
            })
            .collect();
        out.extend(std::iter::repeat_n(1.0, self.unpaired.len()));
        out
    }
}

fn orthogonalize(v: &mut DenseVector, against: &[DenseVector]) -> Result<()> {
    // two passes of modified Gram–Schmidt
    for _ in 0..2 {
        for u in against {
            let c = u.dot(v)?;
            v.axpy(-c, u)?;
        }
    }
    Ok(())
}

/// Real Schur blocks of a skew-symmetric `M`.
pub fn schur_skew(m: &DenseMatrix) -> Result<SchurBlocks> {
    let n = m.dim();
    let scale = m.max_abs().max(1.0);
    let defect = m.skew_defect();
    if defect > STRUCTURE_RTOL * scale {
        return Err(Error::NotSkewSymmetric(defect));
    }
    let mt = m.transpose();
    let m = m.sub(&mt)?.scaled(0.5);
    let k = m.matmul(&m.transpose())?;
    let k = k.add(&k.transpose())?.scaled(0.5);
    let (vals, vecs) = jacobi_eigen(&k);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    let knorm = vals.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let tol = GROUP_RTOL * knorm.max(1.0);

    // descending groups of K-eigenvalues
    let mut groups: Vec<(f64, Vec<DenseVector>)> = Vec::new();
    for &i in &order {
        match groups.last_mut() {
            Some((last, vs)) if *last - vals[i] <= tol => {
                *last = vals[i];
                vs.push(vecs.column(i));
            }
            _ => groups.push((vals[i], vec![vecs.column(i)])),
        }
    }

    let mut cols: Vec<DenseVector> = Vec::with_capacity(n);
    let mut blocks = Vec::new();
    let mut unpaired = Vec::new();
    for (kappa, candidates) in groups {
        let size = candidates.len();
        if kappa <= tol {
            // kernel of M: pair columns up with modulus zero
            let mut chosen: Vec<DenseVector> = Vec::new();
            for mut c in candidates {
                orthogonalize(&mut c, &cols)?;
                orthogonalize(&mut c, &chosen)?;
                let nc = c.norm2();
                if nc < 0.5 {
                    continue;
                }
                chosen.push(c.scaled(1.0 / nc));
            }
            let mut it = chosen.into_iter();
            loop {
                match (it.next(), it.next()) {
                    (Some(a), Some(b)) => {
                        let j = cols.len();
                        cols.push(a);
                        cols.push(b);
                        blocks.push(SchurBlock {
                            columns: (j, j + 1),
                            modulus: 0.0,
                        });
                    }
                    (Some(a), None) => {
                        unpaired.push(cols.len());
                        cols.push(a);
                    }
                    _ => break,
                }
            }
            continue;
        }
        let mut chosen: Vec<DenseVector> = Vec::new();
        for mut c in candidates {
            if chosen.len() >= size {
                break;
            }
            orthogonalize(&mut c, &cols)?;
            orthogonalize(&mut c, &chosen)?;
            let nc = c.norm2();
            if nc < 0.5 {
                continue;
            }
            let q = c.scaled(1.0 / nc);
            let mq = m.matvec(&q)?;
            let modulus = mq.norm2();
            let mut qt = mq.scaled(1.0 / modulus);
            orthogonalize(&mut qt, &cols)?;
            orthogonalize(&mut qt, &chosen)?;
            orthogonalize(&mut qt, std::slice::from_ref(&q))?;
            let qt = qt.scaled(1.0 / qt.norm2());
            chosen.push(q.clone());
            chosen.push(qt.clone());
            let j = cols.len() + chosen.len() - 2;
            blocks.push(SchurBlock {
                columns: (j, j + 1),
                modulus,
            });
        }
        cols.extend(chosen);
    }
    if cols.len() != n {
        // grouping split a conjugate pair; should not happen for skew input
        return Err(Error::NotSkewSymmetric(defect));
    }
    blocks.sort_by(|a, b| b.modulus.total_cmp(&a.modulus));
    Ok(SchurBlocks {
        q: DenseMatrix::from_columns(&cols)?,
        blocks,
        unpaired,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let mut cols: Vec<DenseVector> = Vec::new();
        while cols.len() < n {
            let mut v = DenseVector::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            orthogonalize(&mut v, &cols).unwrap();
            let nv = v.norm2();
            if nv > 1e-3 {
                cols.push(v.scaled(1.0 / nv));
            }
        }
        DenseMatrix::from_columns(&cols).unwrap()
    }

    fn check_spectrum(a: &DenseMatrix, s: &Spectrum) {
        let u = s.basis().unwrap();
        let n = a.dim();
        let lam = DenseMatrix::diag(&s.eigenvalues()).unwrap();
        let resid = a.matmul(&u).unwrap().sub(&u.matmul(&lam).unwrap()).unwrap();
        assert!(resid.frobenius() <= 1e-10 * a.frobenius().max(1e-300));
        let orth = u.transpose().matmul(&u).unwrap().sub(&DenseMatrix::identity(n)).unwrap();
        assert!(orth.frobenius() <= 1e-12 * n as f64);
        let recon = u.matmul(&lam).unwrap().matmul(&u.transpose()).unwrap();
        assert!(recon.sub(a).unwrap().frobenius() <= 1e-10 * a.frobenius());
        let d = s.distinct_eigenvalues();
        for w in d.windows(2) {
            assert!(w[1] - w[0] > s.tolerance());
        }
        assert_eq!(s.multiplicities().iter().sum::<usize>(), n);
    }

    #[test]
    fn diagonal_examples() {
        let a = DenseMatrix::diag(&[3.0, 1.0, 2.0]).unwrap();
        let s = eig_symmetric(&a).unwrap();
        assert_eq!(s.distinct_eigenvalues(), vec![1.0, 2.0, 3.0]);
        assert_eq!(s.multiplicities(), vec![1, 1, 1]);
        check_spectrum(&a, &s);

        let s = eig_symmetric(&DenseMatrix::diag(&[2.0, 2.0]).unwrap()).unwrap();
        assert_eq!(s.distinct_eigenvalues(), vec![2.0]);
        assert_eq!(s.multiplicities(), vec![2]);

        let a2 = DenseMatrix::diag(&[0.5, 0.25, 0.125, 0.0625, 0.03125]).unwrap();
        let s = eig_symmetric(&a2).unwrap();
        assert_eq!(s.len(), 5);
        check_spectrum(&a2, &s);
    }

    #[test]
    fn rejects_nonsymmetric() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(eig_symmetric(&a), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn random_rotated_spectra_with_multiplicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..30 {
            let n = 2 + trial % 7;
            let q = random_orthogonal(n, &mut rng);
            // repeat some eigenvalues
            let distinct: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let eigs: Vec<f64> = (0..n).map(|i| distinct[i / 2]).collect();
            let a = q
                .matmul(&DenseMatrix::diag(&eigs).unwrap())
                .unwrap()
                .matmul(&q.transpose())
                .unwrap();
            let a = a.add(&a.transpose()).unwrap().scaled(0.5);
            let s = eig_symmetric(&a).unwrap();
            check_spectrum(&a, &s);
            assert_eq!(s.len(), n.div_ceil(2));
        }
    }

    #[test]
    fn restriction_and_coefficients() {
        let a = DenseMatrix::diag(&[-1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = eig_symmetric(&a).unwrap();
        let r = s.restricted(&[1, 2, 3]).unwrap();
        assert_eq!(r.distinct_eigenvalues(), vec![2.0, 3.0, 4.0]);
        assert!(s.restricted(&[4]).is_err());
        let c = s
            .group_coefficients(&DenseVector::new(vec![0.0, 3.0, 0.0, 4.0]).unwrap())
            .unwrap();
        assert_relative_eq!(c[1], 3.0);
        assert_relative_eq!(c[3], 4.0);
        assert_eq!(c[0], 0.0);
    }

    fn a4_m() -> DenseMatrix {
        let rows: [[f64; 8]; 8] = [
            [0., 1., 0., -5., 0., 0., 0., 2.],
            [-1., 0., 0., 0., 5., 0., -2., 0.],
            [0., 0., 0., 0., -2., -1., 5., 0.],
            [5., 0., 0., 0., -1., -2., 0., 0.],
            [0., -5., 2., 1., 0., 0., 0., 0.],
            [0., 0., 1., 2., 0., 0., 0., -5.],
            [0., 2., -5., 0., 0., 0., 0., 1.],
            [-2., 0., 0., 0., 0., 5., -1., 0.],
        ];
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x / 8.0).collect()).collect();
        DenseMatrix::from_rows(&rows).unwrap()
    }

    fn check_blocks(m: &DenseMatrix, b: &SchurBlocks) {
        let n = m.dim();
        let q = b.q();
        let orth = q.transpose().matmul(q).unwrap().sub(&DenseMatrix::identity(n)).unwrap();
        assert!(orth.frobenius() <= 1e-12 * n as f64, "{}", orth.frobenius());
        let mf = m.frobenius().max(1e-300);
        for (j, blk) in b.blocks().iter().enumerate() {
            let (u, w) = b.block_basis(j).unwrap();
            let mu = m.matvec(&u).unwrap();
            let mw = m.matvec(&w).unwrap();
            // 2x2 restriction
            let h = [
                [u.dot(&mu).unwrap(), u.dot(&mw).unwrap()],
                [w.dot(&mu).unwrap(), w.dot(&mw).unwrap()],
            ];
            assert!(h[0][0].abs() < 1e-10 && h[1][1].abs() < 1e-10);
            assert!((h[0][1].abs() - blk.modulus).abs() < 1e-10);
            assert!((h[1][0].abs() - blk.modulus).abs() < 1e-10);
            // invariance
            let back_u = u.scaled(h[0][0]).add(&w.scaled(h[1][0])).unwrap();
            let back_w = u.scaled(h[0][1]).add(&w.scaled(h[1][1])).unwrap();
            let r = mu.sub(&back_u).unwrap().norm2().hypot(mw.sub(&back_w).unwrap().norm2());
            assert!(r <= 1e-10 * mf);
        }
        let ms = b.moduli();
        for w in ms.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn schur_of_example_matrix() {
        let m = a4_m();
        let b = schur_skew(&m).unwrap();
        check_blocks(&m, &b);
        let mods = b.moduli();
        assert_eq!(mods.len(), 4);
        for (got, want) in mods.iter().zip([1.0, 0.75, 0.5, 0.25]) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
        assert_relative_eq!(b.max_modulus(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(b.min_modulus(true), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn schur_trivial_cases() {
        let rot = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let b = schur_skew(&rot).unwrap();
        assert_eq!(b.len(), 1);
        assert_relative_eq!(b.moduli()[0], 1.0, epsilon = 1e-15);

        let b = schur_skew(&DenseMatrix::zeros(2)).unwrap();
        assert_eq!(b.moduli(), vec![0.0]);
        assert!(b.unpaired().is_empty());

        // odd dimension: one unpaired kernel column
        let m3 = DenseMatrix::from_rows(&[
            vec![0.0, 2.0, 0.0],
            vec![-2.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let b = schur_skew(&m3).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.unpaired().len(), 1);
        check_blocks(&m3, &b);

        let sym = DenseMatrix::identity(2);
        assert!(matches!(schur_skew(&sym), Err(Error::NotSkewSymmetric(_))));
    }

    #[test]
    fn random_skew_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..30 {
            let n = 2 * (1 + trial % 5);
            let mut m = DenseMatrix::zeros(n);
            for i in 0..n {
                for j in 0..i {
                    let x = rng.gen_range(-2.0..2.0);
                    m.set(i, j, x);
                    m.set(j, i, -x);
                }
            }
            let b = schur_skew(&m).unwrap();
            check_blocks(&m, &b);
        }
    }

    #[test]
    fn s_eigenvalues_match_direct_inversion() {
        let m = a4_m();
        let b = schur_skew(&m).unwrap();
        let a = m.iteration_matrix();
        let ainv = a.inverse().unwrap();
        let s = ainv.add(&ainv.transpose()).unwrap().scaled(0.5);
        let (mut direct, _) = jacobi_eigen(&s);
        direct.sort_by(f64::total_cmp);
        let mut from_blocks = b.s_eigenvalues();
        from_blocks.sort_by(f64::total_cmp);
        for (x, y) in direct.iter().zip(&from_blocks) {
            assert!((x - y).abs() < 1e-10);
        }
        // and S = (I + M Mᵀ)⁻¹
        let other = DenseMatrix::identity(8)
            .add(&m.matmul(&m.transpose()).unwrap())
            .unwrap()
            .inverse()
            .unwrap();
        assert!(other.sub(&s).unwrap().frobenius() < 1e-12);
    }

    #[test]
    fn projections() {
        let m = a4_m();
        let b = schur_skew(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = DenseVector::new((0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let p = b.project_onto_block(1, &v).unwrap();
        let pp = b.project_onto_block(1, &p).unwrap();
        assert!(p.sub(&pp).unwrap().norm2() < 1e-14);
        let (u, _) = b.block_basis(2).unwrap();
        assert!(b.project_onto_block(2, &u).unwrap().sub(&u).unwrap().norm2() < 1e-12);
        let all = b.project_onto_blocks(&[0, 1, 2, 3], &v).unwrap();
        assert!(all.sub(&v).unwrap().norm2() < 1e-12);
        assert!(b.project_onto_block(4, &v).is_err());
    }

    #[test]
    fn phi_preserves_block_spans() {
        let m = a4_m();
        let a = m.iteration_matrix();
        let b = schur_skew(&m).unwrap();
        for j in 0..b.len() {
            let (u, w) = b.block_basis(j).unwrap();
            let q = u.scaled(0.3).add(&w.scaled(-1.7)).unwrap();
            let phi = crate::linalg::phi_map(&a, &q).unwrap();
            let out = phi.sub(&b.project_onto_block(j, &phi).unwrap()).unwrap();
            assert!(out.norm2() <= 1e-10 * q.norm2());
            let m_j = b.blocks()[j].modulus;
            assert_relative_eq!(
                phi.norm2() / q.norm2(),
                m_j / (1.0 + m_j * m_j).sqrt(),
                epsilon = 1e-12
            );
        }
    }
}
