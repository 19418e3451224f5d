//! Minimal dense linear algebra.
//!
//! Everything here is sized for this crate's workloads (factor matrices of a
//! few hundred entries at most): dense row-major storage, Cholesky-based SPD
//! inversion with Tikhonov damping, and Kronecker/outer products that mostly
//! serve as brute-force test oracles.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Deref, DerefMut, Index, IndexMut};

use crate::math;

/// Tolerance used by the oracle tests when comparing two algebraic routes.
pub const EQUIV_TOL: f64 = 1e-8;
/// Symmetry tolerance guaranteed by [`invert_spd`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Errors from the fallible linear-algebra routines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinalgError {
    /// Cholesky factorization hit a non-positive pivot: the matrix is not
    /// positive definite at the given damping level.
    NotPositiveDefinite { row: usize },
    /// Gaussian elimination found no usable pivot.
    Singular { col: usize },
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::NotPositiveDefinite { row } => write!(
                f,
                "matrix is not positive definite (pivot {row}); damping insufficient"
            ),
            LinalgError::Singular { col } => write!(f, "matrix is singular at column {col}"),
        }
    }
}

impl core::error::Error for LinalgError {}

/// Dense vector of `f64`.
///
/// Derefs to `[f64]`, so slice indexing and iteration work directly.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Vector {
            data: vec![0.0; len],
        }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Vector { data: s.to_vec() }
    }

    pub fn push(&mut self, x: f64) {
        self.data.push(x);
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        assert_eq!(self.len(), other.len(), "dot: length mismatch");
        self.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.iter().map(|x| x * x).sum())
    }

    /// `self += scale * other`, elementwise.
    pub fn add_scaled(&mut self, other: &[f64], scale: f64) {
        assert_eq!(self.len(), other.len(), "add_scaled: length mismatch");
        for (a, b) in self.data.iter_mut().zip(other) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector { data }
    }
}

impl FromIterator<f64> for Vector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Vector {
            data: iter.into_iter().collect(),
        }
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.data
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "from_vec: data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "from_rows: ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Matrix::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Row-major backing data; `data()[i*cols + j] == self[(i, j)]`.
    ///
    /// This is also the module's `vec` convention: `vec(G)` is the row-major
    /// flattening of `G`, so `(X ⊗ Y) vec(G) = vec(X G Yᵀ)`.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * v` (length `cols` in, `rows` out).
    pub fn mul_vec(&self, v: &[f64]) -> Vector {
        assert_eq!(v.len(), self.cols, "mul_vec: dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `selfᵀ * v` (length `rows` in, `cols` out).
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vector {
        assert_eq!(v.len(), self.rows, "tr_mul_vec: dimension mismatch");
        let mut out = Vector::zeros(self.cols);
        for (i, &vi) in v.iter().enumerate() {
            let row = self.row(i);
            for j in 0..self.cols {
                out[j] += row[j] * vi;
            }
        }
        out
    }

    /// `self += scale * other`, elementwise.
    pub fn add_scaled(&mut self, other: &Matrix, scale: f64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.data.iter().map(|x| x * x).sum())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| math::abs(a - b))
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Standard matrix product. Panics on inner-dimension mismatch.
pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(
        a.cols, b.rows,
        "matmul: inner dimensions differ ({}x{} * {}x{})",
        a.rows, a.cols, b.rows, b.cols
    );
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let arow = a.row(i);
        let orow = out.row_mut(i);
        for (k, &aik) in arow.iter().enumerate() {
            let brow = b.row(k);
            for j in 0..b.cols {
                orow[j] += aik * brow[j];
            }
        }
    }
    out
}

/// Outer product `u vᵀ` with shape `u.len() × v.len()`.
pub fn outer(u: &[f64], v: &[f64]) -> Matrix {
    Matrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
}

/// Kronecker product, shape `(a.rows·b.rows) × (a.cols·b.cols)`.
///
/// Only used as a brute-force oracle: under the row-major `vec` convention,
/// `(X ⊗ Y) vec(G) = vec(X G Yᵀ)`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows * b.rows, a.cols * b.cols);
    for ia in 0..a.rows {
        for ja in 0..a.cols {
            let s = a[(ia, ja)];
            for ib in 0..b.rows {
                for jb in 0..b.cols {
                    out[(ia * b.rows + ib, ja * b.cols + jb)] = s * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Cholesky factor of `m + damping·I` (lower triangular), or the offending
/// pivot row if the damped matrix is not positive definite.
fn cholesky(m: &Matrix, damping: f64) -> Result<Matrix, LinalgError> {
    assert_eq!(m.rows, m.cols, "cholesky: matrix must be square");
    let n = m.rows;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m[(i, j)];
            if i == j {
                sum += damping;
            }
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !sum.is_finite() || sum <= 0.0 {
                    return Err(LinalgError::NotPositiveDefinite { row: i });
                }
                l[(i, i)] = math::sqrt(sum);
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Inverse of `m + damping·I` for symmetric `m`, via Cholesky factorization.
///
/// Factorization failure signals that the damping is insufficient to make
/// the matrix positive definite. The result is explicitly symmetrized
/// (it is symmetric to within [`SYMMETRY_TOL`] before that).
pub fn invert_spd(m: &Matrix, damping: f64) -> Result<Matrix, LinalgError> {
    assert!(damping >= 0.0, "invert_spd: damping must be non-negative");
    let n = m.rows;
    let l = cholesky(m, damping)?;

    // Invert L in place (forward substitution per column), then form
    // (m + damping I)^-1 = L^-T L^-1.
    let mut linv = Matrix::zeros(n, n);
    for j in 0..n {
        linv[(j, j)] = 1.0 / l[(j, j)];
        for i in j + 1..n {
            let mut sum = 0.0;
            for k in j..i {
                sum -= l[(i, k)] * linv[(k, j)];
            }
            linv[(i, j)] = sum / l[(i, i)];
        }
    }
    let mut inv = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = 0.0;
            for k in i.max(j)..n {
                sum += linv[(k, i)] * linv[(k, j)];
            }
            inv[(i, j)] = sum;
            inv[(j, i)] = sum;
        }
    }
    Ok(inv)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
///
/// For the small non-symmetric systems in the tabular-MDP oracles
/// (`(I − γP_π) v = r` and its transpose).
pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vector, LinalgError> {
    assert_eq!(a.rows, a.cols, "solve: matrix must be square");
    assert_eq!(a.rows, b.len(), "solve: rhs length mismatch");
    let n = a.rows;
    let mut m = a.clone();
    let mut x = Vector::from_slice(b);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                math::abs(m[(i, col)])
                    .partial_cmp(&math::abs(m[(j, col)]))
                    .unwrap_or(core::cmp::Ordering::Equal)
            })
            .unwrap();
        if math::abs(m[(pivot, col)]) < 1e-300 {
            return Err(LinalgError::Singular { col });
        }
        if pivot != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(pivot, j)];
                m[(pivot, j)] = tmp;
            }
            x.swap(col, pivot);
        }
        for i in col + 1..n {
            let factor = m[(i, col)] / m[(col, col)];
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                m[(i, j)] -= factor * m[(col, j)];
            }
            x[i] -= factor * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut sum = x[i];
        for j in i + 1..n {
            sum -= m[(i, j)] * x[j];
        }
        x[i] = sum / m[(i, i)];
    }
    Ok(x)
}

/// Conjugate gradient for consistent symmetric positive semidefinite systems.
///
/// Starting from zero, the iterates stay in the range of `a`, so for
/// consistent singular systems this converges to the pseudo-inverse solution.
pub fn solve_psd_cg(a: &Matrix, b: &[f64]) -> Vector {
    assert_eq!(a.rows, a.cols);
    assert_eq!(a.rows, b.len());
    let n = b.len();
    let mut x = Vector::zeros(n);
    let mut r = Vector::from_slice(b);
    let mut p = r.clone();
    let bnorm = r.norm();
    if bnorm == 0.0 {
        return x;
    }
    let mut rs_old = r.dot(&r);
    for _ in 0..4 * n.max(8) {
        let ap = a.mul_vec(&p);
        let denom = p.dot(&ap);
        if denom.abs() < 1e-300 {
            break;
        }
        let alpha = rs_old / denom;
        x.add_scaled(&p, alpha);
        r.add_scaled(&ap, -alpha);
        let rs_new = r.dot(&r);
        if math::sqrt(rs_new) <= 1e-14 * bnorm {
            break;
        }
        let beta = rs_new / rs_old;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs_old = rs_new;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::Rng;

    fn random_spd(n: usize, rng: &mut Rng) -> Matrix {
        let m = Matrix::from_fn(n, n, |_, _| rng.uniform_range(-1.0, 1.0));
        let mut spd = matmul(&m.transpose(), &m);
        for i in 0..n {
            spd[(i, i)] += 0.5;
        }
        spd
    }

    #[test]
    fn matmul_identity_and_hand_cases() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(matmul(&Matrix::identity(2), &m), m);
        assert_eq!(matmul(&m, &Matrix::identity(2)), m);
        let v = Matrix::from_rows(&[&[5.0], &[6.0]]);
        let prod = matmul(&m, &v);
        assert_eq!(prod.data(), &[17.0, 39.0]);
    }

    #[test]
    #[should_panic(expected = "inner dimensions differ")]
    fn matmul_dimension_mismatch_panics() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        let _ = matmul(&a, &b);
    }

    #[test]
    fn invert_spd_trivial_cases() {
        let inv = invert_spd(&Matrix::identity(2), 0.0).unwrap();
        assert!(inv.max_abs_diff(&Matrix::identity(2)) < 1e-15);

        let inv = invert_spd(&Matrix::diag(&[2.0, 4.0]), 0.0).unwrap();
        assert!(inv.max_abs_diff(&Matrix::diag(&[0.5, 0.25])) < 1e-15);

        // Pure damping: (0 + λI)^-1 = λ^-1 I.
        let inv = invert_spd(&Matrix::zeros(2, 2), 0.01).unwrap();
        assert!(inv.max_abs_diff(&Matrix::diag(&[100.0, 100.0])) < 1e-10);
    }

    #[test]
    fn invert_spd_rejects_indefinite() {
        let m = Matrix::diag(&[1.0, -1.0]);
        assert_eq!(
            invert_spd(&m, 0.0),
            Err(LinalgError::NotPositiveDefinite { row: 1 })
        );
        // Enough damping fixes it.
        assert!(invert_spd(&m, 2.0).is_ok());
    }

    #[test]
    fn invert_spd_random_inverse_property() {
        let mut rng = Rng::new(11);
        for n in [1usize, 2, 3, 5, 8, 16] {
            let m = random_spd(n, &mut rng);
            let lambda = rng.uniform_range(0.0, 0.1);
            let inv = invert_spd(&m, lambda).unwrap();
            let mut damped = m.clone();
            for i in 0..n {
                damped[(i, i)] += lambda;
            }
            let prod = matmul(&inv, &damped);
            assert!(
                prod.max_abs_diff(&Matrix::identity(n)) <= EQUIV_TOL,
                "inverse property failed at n={n}"
            );
            // Symmetry of the inverse.
            assert!(inv.max_abs_diff(&inv.transpose()) <= SYMMETRY_TOL);
        }
    }

    #[test]
    fn kron_shapes_and_cases() {
        assert_eq!(
            kron(&Matrix::identity(2), &Matrix::identity(2)),
            Matrix::identity(4)
        );
        let swap = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let k = kron(&swap, &Matrix::identity(2));
        let expect = Matrix::from_rows(&[
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
        ]);
        assert_eq!(k, expect);
        let k = kron(&Matrix::zeros(2, 3), &Matrix::zeros(4, 5));
        assert_eq!((k.rows(), k.cols()), (8, 15));
    }

    #[test]
    fn kron_vec_identity() {
        // (X ⊗ Y) vec(G) = vec(X G Yᵀ) under row-major vec.
        let mut rng = Rng::new(5);
        for _ in 0..10 {
            let x = Matrix::from_fn(3, 3, |_, _| rng.uniform_range(-1.0, 1.0));
            let y = Matrix::from_fn(2, 2, |_, _| rng.uniform_range(-1.0, 1.0));
            let g = Matrix::from_fn(3, 2, |_, _| rng.uniform_range(-1.0, 1.0));
            let lhs = kron(&x, &y).mul_vec(g.data());
            let rhs = matmul(&matmul(&x, &g), &y.transpose());
            for (a, b) in lhs.iter().zip(rhs.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kron_inverse_factorizes() {
        // (X ⊗ Y)^-1 = X^-1 ⊗ Y^-1 for SPD factors.
        let mut rng = Rng::new(9);
        for _ in 0..5 {
            let x = random_spd(3, &mut rng);
            let y = random_spd(2, &mut rng);
            let lhs = invert_spd(&kron(&x, &y), 0.0).unwrap();
            let rhs = kron(
                &invert_spd(&x, 0.0).unwrap(),
                &invert_spd(&y, 0.0).unwrap(),
            );
            assert!(lhs.max_abs_diff(&rhs) <= EQUIV_TOL);
        }
    }

    #[test]
    fn outer_cases() {
        let m = outer(&[1.0, 0.0], &[1.0, 0.0]);
        assert_eq!(m, Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]));
        let m = outer(&[1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(m, Matrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]));
        let m = outer(&[2.0], &[3.0, 4.0]);
        assert_eq!(m, Matrix::from_rows(&[&[6.0, 8.0]]));
    }

    #[test]
    fn solve_matches_inverse() {
        let mut rng = Rng::new(3);
        for n in [1usize, 2, 4, 7] {
            let a = Matrix::from_fn(n, n, |i, j| {
                rng.uniform_range(-1.0, 1.0) + if i == j { 3.0 } else { 0.0 }
            });
            let b: Vector = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            let x = solve(&a, &b).unwrap();
            let back = a.mul_vec(&x);
            for (u, v) in back.iter().zip(b.iter()) {
                assert!((u - v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cg_solves_singular_consistent_system() {
        // Projector-like PSD matrix with a nullspace; b constructed in range.
        let f = Matrix::from_rows(&[&[0.25, -0.25], &[-0.25, 0.25]]);
        let b = f.mul_vec(&[1.0, 3.0]);
        let x = solve_psd_cg(&f, &b);
        let back = f.mul_vec(&x);
        for (u, v) in back.iter().zip(b.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}
