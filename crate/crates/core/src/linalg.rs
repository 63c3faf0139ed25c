//! Dense complex matrix algebra: tensor products, partial traces, Hermitian
//! eigendecomposition, and the vectorization machinery shared by every other
//! module.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex;
use std::ops::{Add, Mul, Neg, Sub};

pub type C64 = Complex<f64>;

/// Global numeric tolerance. Every boolean predicate in the toolkit is
/// decided against this value (absolute, on operator norms and eigenvalues).
pub const TOL: f64 = 1e-9;

/// Eigenvalues closer than this are merged into one degenerate eigenvalue
/// when forming spectral projections. Kept separate from [`TOL`]: arithmetic
/// noise and spectral identity are different questions.
pub const CLUSTER_TOL: f64 = 1e-7;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(
                "matrix dimensions must be positive".into(),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, C64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::Dimension("matrix must have at least one row".into()));
        }
        let c = rows[0].len();
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("rows have inconsistent lengths".into()));
        }
        Self::new(r, c, rows.iter().flatten().copied().collect())
    }

    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(
            rows,
            cols,
            entries.iter().map(|&x| C64::new(x, 0.0)).collect(),
        )
    }

    pub fn diag(entries: &[C64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &x) in entries.iter().enumerate() {
            m.set(i, i, x);
        }
        m
    }

    pub fn diag_real(entries: &[f64]) -> Self {
        Self::diag(
            &entries
                .iter()
                .map(|&x| C64::new(x, 0.0))
                .collect::<Vec<_>>(),
        )
    }

    /// Matrix unit E_ij: 1 at (i, j), zero elsewhere.
    pub fn matrix_unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m.set(i, j, C64::new(1.0, 0.0));
        m
    }

    /// Outer product |u⟩⟨v|.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.conj()).collect(),
        }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn trace(&self) -> C64 {
        debug_assert!(self.is_square());
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "dimension mismatch in matrix multiplication"
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(
            self.cols,
            v.len(),
            "dimension mismatch in matrix-vector product"
        );
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// Kronecker product: `(A⊗B)[(i·p+k),(j·q+l)] = A[i,j]·B[k,l]` for B of
    /// size p×q. The first factor is the most significant index.
    pub fn kron(&self, other: &Self) -> Self {
        let (p, q) = (other.rows, other.cols);
        Self::from_fn(self.rows * p, self.cols * q, |r, c| {
            self.get(r / p, c / q) * other.get(r % p, c % q)
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Operator norm (largest singular value), via the spectrum of M†M.
    pub fn op_norm(&self) -> f64 {
        let gram = self.dagger().matmul(self);
        // gram is Hermitian PSD by construction
        let eig = hermitian_eigensystem(&gram).expect("Gram matrix is Hermitian");
        eig.values.first().copied().unwrap_or(0.0).max(0.0).sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.rows == other.rows && self.cols == other.cols && (self - other).max_abs_entry() <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.rows {
            for j in 0..=i {
                if (self.get(i, j) - self.get(j, i).conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square()
            && self
                .dagger()
                .matmul(self)
                .approx_eq(&Self::identity(self.rows), tol)
    }

    /// Positive semidefinite iff Hermitian and min eigenvalue ≥ −tol.
    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        if !self.is_hermitian(tol) {
            return false;
        }
        match hermitian_eigensystem(self) {
            Ok(eig) => eig.values.last().copied().unwrap_or(0.0) >= -tol,
            Err(_) => false,
        }
    }

    pub fn is_projection(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && self.matmul(self).approx_eq(self, tol)
    }

    /// Column-stacking vectorization: entry (i, j) lands at index j·rows + i.
    pub fn vectorize(&self) -> Vec<C64> {
        let mut v = Vec::with_capacity(self.rows * self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                v.push(self.get(i, j));
            }
        }
        v
    }
}

/// Inverse of [`CMatrix::vectorize`] for square matrices.
pub fn devectorize(v: &[C64]) -> Result<CMatrix> {
    let d = (v.len() as f64).sqrt().round() as usize;
    if d * d != v.len() {
        return Err(Error::Dimension(format!(
            "vector length {} is not a perfect square",
            v.len()
        )));
    }
    Ok(CMatrix::from_fn(d, d, |i, j| v[j * d + i]))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    &a.matmul(b) - &b.matmul(a)
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, other: &CMatrix) -> CMatrix {
        self.matmul(other)
    }
}

/// Result of a Hermitian eigendecomposition: eigenvalues in descending order,
/// eigenvectors as orthonormal columns in matching order.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl EigenSystem {
    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        (0..self.vectors.rows())
            .map(|i| self.vectors.get(i, k))
            .collect()
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues come out descending; each eigenvector's phase is fixed by
/// making its first nonzero component real positive so serialized output is
/// reproducible.
pub fn hermitian_eigensystem(m: &CMatrix) -> Result<EigenSystem> {
    if !m.is_square() {
        return Err(Error::Dimension(
            "eigendecomposition needs a square matrix".into(),
        ));
    }
    if !m.is_hermitian(TOL) {
        return Err(Error::Hermiticity);
    }
    let n = m.rows();
    let nm = DMatrix::from_fn(n, n, |i, j| m.get(i, j));
    let se = nm.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        se.eigenvalues[b]
            .partial_cmp(&se.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let values: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v: Vec<C64> = (0..n).map(|i| se.eigenvectors[(i, k)]).collect();
        if let Some(first) = v.iter().find(|x| x.norm() > 1e-10) {
            let phase = first.conj() / first.norm();
            for x in v.iter_mut() {
                *x *= phase;
            }
        }
        for (i, x) in v.into_iter().enumerate() {
            vectors.set(i, col, x);
        }
    }
    Ok(EigenSystem { values, vectors })
}

/// Extends an orthonormal family to a full orthonormal basis of C^dim by
/// Gram–Schmidt against the standard basis. Deterministic.
pub fn complete_orthonormal_basis(partial: &[Vec<C64>], dim: usize) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = partial.to_vec();
    let mut k = 0;
    while basis.len() < dim && k < dim {
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[k] = C64::new(1.0, 0.0);
        // two orthogonalization passes for numerical stability
        for _ in 0..2 {
            for b in &basis {
                let overlap: C64 = b.iter().zip(v.iter()).map(|(bi, vi)| bi.conj() * vi).sum();
                for (vi, bi) in v.iter_mut().zip(b.iter()) {
                    *vi -= overlap * bi;
                }
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-7 {
            for x in v.iter_mut() {
                *x /= norm;
            }
            basis.push(v);
        }
        k += 1;
    }
    assert_eq!(basis.len(), dim, "orthonormal completion failed");
    basis
}

/// Ordered subsystem dimensions of a tensor-product space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimSplit {
    dims: Vec<usize>,
}

impl DimSplit {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Dimension(
                "subsystem dimensions must be positive".into(),
            ));
        }
        Ok(Self { dims })
    }

    pub fn pair(a: usize, b: usize) -> Self {
        Self::new(vec![a, b]).expect("positive dimensions")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn factor(&self, i: usize) -> usize {
        self.dims[i]
    }

    fn strides(&self) -> Vec<usize> {
        let n = self.dims.len();
        let mut s = vec![1usize; n];
        for i in (0..n - 1).rev() {
            s[i] = s[i + 1] * self.dims[i + 1];
        }
        s
    }

    fn check(&self, m: &CMatrix) -> Result<()> {
        if !m.is_square() || m.rows() != self.total() {
            return Err(Error::Dimension(format!(
                "matrix dimension {} does not match split total {}",
                m.rows(),
                self.total()
            )));
        }
        Ok(())
    }

    /// Partial trace keeping one subsystem; trace is preserved.
    pub fn partial_trace(&self, m: &CMatrix, keep: usize) -> Result<CMatrix> {
        self.check(m)?;
        if keep >= self.dims.len() {
            return Err(Error::Dimension(format!(
                "subsystem index {} out of range for {} factors",
                keep,
                self.dims.len()
            )));
        }
        let dk = self.dims[keep];
        let strides = self.strides();
        let rest_total = self.total() / dk;

        // decode a linear "rest" index into a base offset with zero in slot `keep`
        let rest_dims: Vec<usize> = self
            .dims
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != keep)
            .map(|(_, &d)| d)
            .collect();
        let rest_strides: Vec<usize> = strides
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != keep)
            .map(|(_, &s)| s)
            .collect();

        let mut out = CMatrix::zeros(dk, dk);
        for rr in 0..rest_total {
            let mut offset = 0usize;
            let mut rem = rr;
            for (f, &d) in rest_dims.iter().enumerate().rev() {
                offset += (rem % d) * rest_strides[f];
                rem /= d;
            }
            for a in 0..dk {
                let row = offset + a * strides[keep];
                for b in 0..dk {
                    let col = offset + b * strides[keep];
                    let v = out.get(a, b) + m.get(row, col);
                    out.set(a, b, v);
                }
            }
        }
        Ok(out)
    }

    /// Unitary that reorders tensor factors: the output's factor j is the
    /// input's factor `perm[j]`.
    pub fn permutation_unitary(&self, perm: &[usize]) -> Result<CMatrix> {
        let n = self.dims.len();
        if perm.len() != n {
            return Err(Error::Dimension("permutation length mismatch".into()));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::Dimension("invalid permutation".into()));
            }
            seen[p] = true;
        }
        let strides = self.strides();
        let out_dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let out_split = DimSplit::new(out_dims)?;
        let out_strides = out_split.strides();
        let total = self.total();

        let mut u = CMatrix::zeros(total, total);
        for col in 0..total {
            // decode the input multi-index
            let mut idx = vec![0usize; n];
            let mut rem = col;
            for f in 0..n {
                idx[f] = rem / strides[f];
                rem %= strides[f];
            }
            let row: usize = (0..n).map(|j| idx[perm[j]] * out_strides[j]).sum();
            u.set(row, col, C64::new(1.0, 0.0));
        }
        Ok(u)
    }
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
}

pub fn pauli_y() -> CMatrix {
    CMatrix::new(
        2,
        2,
        vec![c64(0.0, 0.0), c64(0.0, -1.0), c64(0.0, 1.0), c64(0.0, 0.0)],
    )
    .unwrap()
}

pub fn pauli_z() -> CMatrix {
    CMatrix::diag_real(&[1.0, -1.0])
}

pub fn hadamard() -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_real(2, 2, &[s, s, s, -s]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn kron_identities() {
        let i2 = CMatrix::identity(2);
        assert!(i2.kron(&i2).approx_eq(&CMatrix::identity(4), 0.0));

        let z = pauli_z();
        let expect = CMatrix::diag_real(&[1.0, 1.0, -1.0, -1.0]);
        assert!(z.kron(&i2).approx_eq(&expect, 0.0));
    }

    #[test]
    fn kron_matches_index_formula() {
        // (A⊗B)[(i·p+k),(j·q+l)] = A[i,j]·B[k,l], checked entrywise
        let a = CMatrix::new(
            2,
            2,
            vec![c(1.0, 2.0), c(0.0, -1.0), c(3.0, 0.0), c(0.5, 0.5)],
        )
        .unwrap();
        let b = CMatrix::new(
            2,
            2,
            vec![c(0.0, 1.0), c(2.0, 0.0), c(-1.0, 0.0), c(1.0, 1.0)],
        )
        .unwrap();
        let k = a.kron(&b);
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..2 {
                    for q in 0..2 {
                        let want = a.get(i, j) * b.get(p, q);
                        assert!((k.get(i * 2 + p, j * 2 + q) - want).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn kron_projectors() {
        // |0⟩⟨0| ⊗ |1⟩⟨1| has a single 1 at (1,1)
        let p0 = CMatrix::diag_real(&[1.0, 0.0]);
        let p1 = CMatrix::diag_real(&[0.0, 1.0]);
        let k = p0.kron(&p1);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == 1 && j == 1 { 1.0 } else { 0.0 };
                assert!((k.get(i, j) - c(want, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn partial_trace_product_state() {
        let rho = CMatrix::from_real(2, 2, &[0.75, 0.1, 0.1, 0.25]).unwrap();
        let sigma =
            CMatrix::from_real(3, 3, &[0.5, 0.0, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0, 0.2]).unwrap();
        let joint = rho.kron(&sigma);
        let split = DimSplit::pair(2, 3);
        let red0 = split.partial_trace(&joint, 0).unwrap();
        let red1 = split.partial_trace(&joint, 1).unwrap();
        assert!(red0.approx_eq(&rho, 1e-12));
        assert!(red1.approx_eq(&sigma, 1e-12));
        // trace preservation
        assert!((red0.trace() - joint.trace()).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_bell_state() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)];
        let rho = CMatrix::outer(&bell, &bell);
        let split = DimSplit::pair(2, 2);
        let red = split.partial_trace(&rho, 0).unwrap();
        assert!(red.approx_eq(&CMatrix::identity(2).scale_re(0.5), 1e-12));
    }

    #[test]
    fn partial_trace_dimension_error() {
        let m = CMatrix::identity(5);
        let split = DimSplit::pair(2, 3);
        assert!(matches!(
            split.partial_trace(&m, 0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn partial_trace_three_factors() {
        let a = CMatrix::from_real(2, 2, &[0.5, 0.0, 0.0, 0.5]).unwrap();
        let b = CMatrix::from_real(2, 2, &[1.0, 0.2, 0.2, 0.0]).unwrap();
        let cc = CMatrix::from_real(3, 3, &[0.1, 0.0, 0.0, 0.0, 0.4, 0.0, 0.0, 0.0, 0.5]).unwrap();
        let m = a.kron(&b).kron(&cc);
        let split = DimSplit::new(vec![2, 2, 3]).unwrap();
        let mid = split.partial_trace(&m, 1).unwrap();
        // Tr[a]·Tr[c]·b = 1·1·b
        assert!(mid.approx_eq(&b, 1e-12));
    }

    #[test]
    fn eigensystem_diagonal() {
        let m = CMatrix::diag_real(&[3.0, 1.0, 2.0]);
        let eig = hermitian_eigensystem(&m).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-12);
        assert!((eig.values[1] - 2.0).abs() < 1e-12);
        assert!((eig.values[2] - 1.0).abs() < 1e-12);
        // eigenvectors are permutation columns with real-positive leading entry
        let v0 = eig.eigenvector(0);
        assert!((v0[0] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn eigensystem_pauli_x() {
        let eig = hermitian_eigensystem(&pauli_x()).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-12);
        assert!((eig.values[1] + 1.0).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = eig.eigenvector(0);
        let minus = eig.eigenvector(1);
        assert!((plus[0] - c(s, 0.0)).norm() < 1e-10);
        assert!((plus[1] - c(s, 0.0)).norm() < 1e-10);
        assert!((minus[0] - c(s, 0.0)).norm() < 1e-10);
        assert!((minus[1] - c(-s, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn eigensystem_rejects_non_hermitian() {
        let m = CMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(hermitian_eigensystem(&m), Err(Error::Hermiticity)));
    }

    #[test]
    fn eigensystem_reconstruction() {
        let m = CMatrix::new(
            3,
            3,
            vec![
                c(2.0, 0.0),
                c(1.0, -1.0),
                c(0.0, 0.5),
                c(1.0, 1.0),
                c(3.0, 0.0),
                c(0.2, 0.0),
                c(0.0, -0.5),
                c(0.2, 0.0),
                c(-1.0, 0.0),
            ],
        )
        .unwrap();
        let eig = hermitian_eigensystem(&m).unwrap();
        let lam = CMatrix::diag_real(&eig.values);
        let recon = eig.vectors.matmul(&lam).matmul(&eig.vectors.dagger());
        assert!(recon.approx_eq(&m, 1e-10));
        let gram = eig.vectors.dagger().matmul(&eig.vectors);
        assert!(gram.approx_eq(&CMatrix::identity(3), 1e-10));
    }

    #[test]
    fn vectorize_identity() {
        let v = CMatrix::identity(2).vectorize();
        assert_eq!(v, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn vectorize_roundtrip() {
        let m = CMatrix::new(
            2,
            2,
            vec![c(1.0, 2.0), c(3.0, -1.0), c(0.0, 0.5), c(2.0, 2.0)],
        )
        .unwrap();
        let back = devectorize(&m.vectorize()).unwrap();
        assert!(back.approx_eq(&m, 0.0));
    }

    #[test]
    fn devectorize_rejects_bad_length() {
        let v = vec![c(1.0, 0.0); 3];
        assert!(matches!(devectorize(&v), Err(Error::Dimension(_))));
    }

    #[test]
    fn vectorize_sandwich_identity() {
        // vec(AρB) = (Bᵀ⊗A)·vec(ρ), brute-forced over indices
        let a = CMatrix::new(
            2,
            2,
            vec![c(1.0, 1.0), c(0.0, 2.0), c(-1.0, 0.0), c(0.5, 0.0)],
        )
        .unwrap();
        let rho = CMatrix::new(
            2,
            2,
            vec![c(0.3, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.7, 0.0)],
        )
        .unwrap();
        let b = CMatrix::new(
            2,
            2,
            vec![c(0.0, 1.0), c(1.0, 0.0), c(2.0, 0.0), c(0.0, -1.0)],
        )
        .unwrap();
        let lhs = a.matmul(&rho).matmul(&b).vectorize();
        let rhs = b.transpose().kron(&a).matvec(&rho.vectorize());
        for (x, y) in lhs.iter().zip(rhs.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn permutation_unitary_swaps_factors() {
        let split = DimSplit::pair(2, 3);
        let p = split.permutation_unitary(&[1, 0]).unwrap();
        assert!(p.is_unitary(1e-12));
        let u = vec![c(1.0, 0.0), c(2.0, 0.0)];
        let v = vec![c(0.0, 1.0), c(3.0, 0.0), c(1.0, -1.0)];
        let uv = CMatrix::new(6, 1, {
            let mut out = Vec::new();
            for a in &u {
                for b in &v {
                    out.push(a * b);
                }
            }
            out
        })
        .unwrap();
        let vu_expect = CMatrix::new(6, 1, {
            let mut out = Vec::new();
            for b in &v {
                for a in &u {
                    out.push(b * a);
                }
            }
            out
        })
        .unwrap();
        let got = p.matmul(&uv);
        assert!(got.approx_eq(&vu_expect, 1e-12));
    }

    #[test]
    fn positivity_predicate() {
        assert!(CMatrix::identity(3).is_positive_semidefinite(TOL));
        assert!(!pauli_z().is_positive_semidefinite(TOL));
        assert!(!pauli_x().matmul(&pauli_z()).is_positive_semidefinite(TOL));
    }

    #[test]
    fn op_norm_matches_known_values() {
        assert!((pauli_x().op_norm() - 1.0).abs() < 1e-10);
        let m = CMatrix::diag_real(&[3.0, -5.0]);
        assert!((m.op_norm() - 5.0).abs() < 1e-10);
    }

    #[test]
    fn completion_produces_orthonormal_basis() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let partial = vec![vec![c(s, 0.0), c(0.0, s), c(0.0, 0.0)]];
        let basis = complete_orthonormal_basis(&partial, 3);
        assert_eq!(basis.len(), 3);
        for i in 0..3 {
            for j in 0..3 {
                let g: C64 = basis[i]
                    .iter()
                    .zip(basis[j].iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - c(want, 0.0)).norm() < 1e-10);
            }
        }
    }
}
