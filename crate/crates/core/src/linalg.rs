//! Small dense complex linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex<f64>;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn vector_from_reals(values: &[f64]) -> CVector {
    CVector::from_iterator(values.len(), values.iter().map(|&x| re(x)))
}

/// `(M + M†) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * re(0.5)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// ascending order. Column `k` of the returned matrix is the eigenvector
/// for eigenvalue `k`.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut values: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn is_psd(m: &CMatrix, tol: f64) -> bool {
    min_eigenvalue(m) >= -tol
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs(&(a - b))
}

pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// `max |U†U − I|`.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let n = u.ncols();
    max_abs(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

/// Gram matrix `G_ij = ⟨v_i|v_j⟩` of a family of vectors.
pub fn gram_of(vectors: &[CVector]) -> CMatrix {
    let n = vectors.len();
    CMatrix::from_fn(n, n, |i, j| vectors[i].dotc(&vectors[j]))
}

/// Orthogonalizes `v` against an orthonormal `basis` (modified Gram-Schmidt,
/// two passes) and appends the normalized remainder if its norm exceeds
/// `tol`. Returns whether a vector was appended.
pub fn gram_schmidt_push(basis: &mut Vec<CVector>, v: &CVector, tol: f64) -> bool {
    let mut w = v.clone();
    for _ in 0..2 {
        for b in basis.iter() {
            let proj = b.dotc(&w);
            w -= b * proj;
        }
    }
    let norm = w.norm();
    if norm > tol {
        basis.push(w / re(norm));
        true
    } else {
        false
    }
}

/// Extends an orthonormal family to a full basis of `C^n` by Gram-Schmidt
/// over the standard basis vectors in index order.
pub fn complete_basis(mut basis: Vec<CVector>, n: usize) -> Vec<CVector> {
    for k in 0..n {
        if basis.len() == n {
            break;
        }
        let mut e = CVector::zeros(n);
        e[k] = re(1.0);
        gram_schmidt_push(&mut basis, &e, 1e-8);
    }
    basis
}

/// Haar-random `n × n` unitary (QR of a complex Ginibre matrix with the
/// phases of `R`'s diagonal folded back into `Q`).
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g =
        CMatrix::from_fn(n, n, |_, _| c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..n {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { re(1.0) };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

/// Uniformly random unit vector in `C^n`.
pub fn random_state_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(n, |_, _| c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)));
    let norm = v.norm();
    v / re(norm)
}
