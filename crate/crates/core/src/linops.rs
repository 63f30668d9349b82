//! Small dense and tridiagonal linear algebra.
//!
//! Everything here works on plain `f64` slices. Grid quantities carry a
//! uniform quadrature weight (see [`weighted_dot`]); dense kernels are
//! unweighted and leave the weighting to callers.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `w · Σ a_i b_i`, the discrete L² inner product with uniform weight `w`.
pub fn weighted_dot(a: &[f64], b: &[f64], weight: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    weight * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

pub fn weighted_norm(a: &[f64], weight: f64) -> f64 {
    weighted_dot(a, a, weight).sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A linear map between finite-dimensional spaces given by its action and
/// the action of its adjoint.
///
/// The adjoint is taken with respect to whatever inner products the
/// implementor lives in; callers only rely on `apply` and `apply_adjoint`
/// being mutually adjoint.
pub trait LinearOperator {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]);
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim_in(&self) -> usize {
        (**self).dim_in()
    }
    fn dim_out(&self) -> usize {
        (**self).dim_out()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply(x, out)
    }
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        (**self).apply_adjoint(y, out)
    }
}

/// Row-major dense matrix with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite entry at ({}, {})",
                bad / cols,
                bad % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix column by column.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let mut data = vec![0.0; rows * cols];
        for (j, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    actual: col.len(),
                });
            }
            for (i, &v) in col.iter().enumerate() {
                data[i * cols + j] = v;
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    pub fn matvec_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.matvec_transpose_into(y, &mut out);
        out
    }

    pub fn matvec_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.rows);
        assert_eq!(out.len(), self.cols);
        out.fill(0.0);
        for (i, &yi) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// `AᵀA`, assembled so that the result is exactly symmetric.
    pub fn gram(&self) -> DenseMatrix {
        let n = self.cols;
        let mut g = Self::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..self.rows {
                    s += self[(k, i)] * self[(k, j)];
                }
                g[(i, j)] = s;
                g[(j, i)] = s;
            }
        }
        g
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Result<Self> {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self::new(m.nrows(), m.ncols(), data)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl LinearOperator for DenseMatrix {
    fn dim_in(&self) -> usize {
        self.cols
    }
    fn dim_out(&self) -> usize {
        self.rows
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.matvec_into(x, out)
    }
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        self.matvec_transpose_into(y, out)
    }
}

/// Applies `op` to every unit vector to obtain its matrix.
pub fn materialize(op: &dyn LinearOperator) -> DenseMatrix {
    let (n, m) = (op.dim_in(), op.dim_out());
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; m];
    let mut out = DenseMatrix::zeros(m, n);
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        e[j] = 0.0;
        for i in 0..m {
            out[(i, j)] = col[i];
        }
    }
    out
}

/// Tridiagonal matrix stored by diagonals.
///
/// `sub[i]` sits at `(i + 1, i)` and `sup[i]` at `(i, i + 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalSystem {
    pub sub: Vec<f64>,
    pub main: Vec<f64>,
    pub sup: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn new(sub: Vec<f64>, main: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        let n = main.len();
        if n == 0 {
            return Err(Error::InvalidMatrix("empty main diagonal".into()));
        }
        for d in [&sub, &sup] {
            if d.len() != n - 1 {
                return Err(Error::DimensionMismatch {
                    expected: n - 1,
                    actual: d.len(),
                });
            }
        }
        Ok(Self { sub, main, sup })
    }

    pub fn dim(&self) -> usize {
        self.main.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut s = self.main[i] * x[i];
                if i > 0 {
                    s += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.dim();
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.main[i];
            if i + 1 < n {
                m[(i + 1, i)] = self.sub[i];
                m[(i, i + 1)] = self.sup[i];
            }
        }
        m
    }

    /// Thomas elimination without pivoting. Fails on a pivot that is zero
    /// relative to the magnitude of its row.
    pub fn factorize(&self) -> Result<TridiagonalFactorization> {
        let n = self.dim();
        let mut sup_mod = vec![0.0; n.saturating_sub(1)];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_sup = 0.0;
        for i in 0..n {
            let lower = if i > 0 { self.sub[i - 1] } else { 0.0 };
            let upper = if i + 1 < n { self.sup[i] } else { 0.0 };
            let pivot = self.main[i] - lower * prev_sup;
            let scale = self.main[i].abs() + lower.abs() + upper.abs();
            if !pivot.is_finite() || pivot.abs() <= f64::EPSILON * scale || pivot == 0.0 {
                return Err(Error::SingularPivot { row: i });
            }
            inv_pivot[i] = 1.0 / pivot;
            if i + 1 < n {
                prev_sup = upper * inv_pivot[i];
                sup_mod[i] = prev_sup;
            }
        }
        Ok(TridiagonalFactorization {
            sub: self.sub.clone(),
            sup_mod,
            inv_pivot,
        })
    }
}

/// Precomputed Thomas sweep coefficients; each solve costs O(n).
#[derive(Clone, Debug)]
pub struct TridiagonalFactorization {
    sub: Vec<f64>,
    sup_mod: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl TridiagonalFactorization {
    pub fn dim(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        assert_eq!(x.len(), n);
        x[0] *= self.inv_pivot[0];
        for i in 1..n {
            x[i] = (x[i] - self.sub[i - 1] * x[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.sup_mod[i] * x[i + 1];
        }
    }
}

pub fn solve_tridiagonal(sys: &TridiagonalSystem, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            actual: rhs.len(),
        });
    }
    Ok(sys.factorize()?.solve(rhs))
}

/// `M = Q diag(λ) Qᵀ` with eigenvalues in nonincreasing order and the
/// matching eigenvectors as the columns of `Q`.
#[derive(Clone, Debug)]
pub struct SymmetricEigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DenseMatrix,
}

impl SymmetricEigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Qᵀ x`
    pub fn to_eigenbasis(&self, x: &[f64]) -> Vec<f64> {
        self.eigenvectors.matvec_transpose(x)
    }

    /// `Q c`
    pub fn from_eigenbasis(&self, c: &[f64]) -> Vec<f64> {
        self.eigenvectors.matvec(c)
    }

    /// `Q diag(f(λ)) Qᵀ x`
    pub fn apply_function(&self, x: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut c = self.to_eigenbasis(x);
        for (ci, &lam) in c.iter_mut().zip(&self.eigenvalues) {
            *ci *= f(lam);
        }
        self.from_eigenbasis(&c)
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.dim();
        let q = &self.eigenvectors;
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = (0..n).map(|k| q[(i, k)] * self.eigenvalues[k] * q[(j, k)]).sum();
            }
        }
        m
    }
}

pub fn sym_eigen(m: &DenseMatrix) -> Result<SymmetricEigenDecomposition> {
    if m.rows() != m.cols() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            actual: m.cols(),
        });
    }
    let n = m.rows();
    let mut asym = 0.0_f64;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > 1e-12 * m.max_abs().max(1.0) {
        return Err(Error::Asymmetric { asymmetry: asym });
    }

    let eig = nalgebra::SymmetricEigen::try_new(m.to_nalgebra(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("symmetric QR iteration did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut q = DenseMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        for i in 0..n {
            q[(i, col)] = eig.eigenvectors[(i, k)];
        }
    }
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    Ok(SymmetricEigenDecomposition {
        eigenvalues,
        eigenvectors: q,
    })
}

/// Result of [`estimate_operator_norm`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const NORM_MIN_ITERATIONS: usize = 50;
const NORM_MAX_ITERATIONS: usize = 2000;
const NORM_RTOL: f64 = 1e-6;

/// Largest singular value of a linear map by power iteration on `A*A`.
///
/// Runs at least 50 iterations and stops once the estimate changes by less
/// than 1e-6 relative. If the cap is hit first, the last estimate is
/// returned with `converged = false`.
pub fn estimate_operator_norm<F, G>(apply: F, apply_adjoint: G, dim_in: usize) -> NormEstimate
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if dim_in == 0 {
        return NormEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    // Deterministic start with no special alignment to coordinate axes.
    let mut v: Vec<f64> = (0..dim_in)
        .map(|i| 1.0 + 0.5 * ((i as f64) * 0.7548776662).fract())
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut estimate = 0.0;
    for it in 1..=NORM_MAX_ITERATIONS {
        let w = apply_adjoint(&apply(&v));
        let lam = norm2(&w);
        if lam == 0.0 {
            return NormEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        let next = lam.sqrt();
        let change = (next - estimate).abs() / next;
        estimate = next;
        v = w.into_iter().map(|x| x / lam).collect();
        if it >= NORM_MIN_ITERATIONS && change < NORM_RTOL {
            return NormEstimate {
                value: estimate,
                iterations: it,
                converged: true,
            };
        }
    }
    NormEstimate {
        value: estimate,
        iterations: NORM_MAX_ITERATIONS,
        converged: false,
    }
}

pub fn operator_norm(op: &dyn LinearOperator) -> NormEstimate {
    estimate_operator_norm(
        |x| {
            let mut y = vec![0.0; op.dim_out()];
            op.apply(x, &mut y);
            y
        },
        |y| {
            let mut x = vec![0.0; op.dim_in()];
            op.apply_adjoint(y, &mut x);
            x
        },
        op.dim_in(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(m: &DenseMatrix, b: &[f64]) -> Vec<f64> {
        let lu = m.to_nalgebra().lu();
        let x = lu.solve(&nalgebra::DVector::from_column_slice(b)).unwrap();
        x.iter().copied().collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        norm2(&d) / norm2(b).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn tridiagonal_identity() {
        let sys = TridiagonalSystem::new(vec![0.0], vec![1.0, 1.0], vec![0.0]).unwrap();
        assert_eq!(solve_tridiagonal(&sys, &[3.0, 5.0]).unwrap(), vec![3.0, 5.0]);
    }

    #[test]
    fn tridiagonal_poisson_matches_dense_lu() {
        let m = 3;
        let h = 1.0 / (m as f64 + 1.0);
        let ih2 = 1.0 / (h * h);
        let sys = TridiagonalSystem::new(
            vec![-ih2; m - 1],
            vec![2.0 * ih2; m],
            vec![-ih2; m - 1],
        )
        .unwrap();
        let rhs = vec![1.0; m];
        let x = solve_tridiagonal(&sys, &rhs).unwrap();
        let oracle = dense_solve(&sys.to_dense(), &rhs);
        assert!(rel_err(&x, &oracle) < 1e-12);
        let back = sys.matvec(&x);
        assert!(rel_err(&back, &rhs) < 1e-12);
    }

    #[test]
    fn tridiagonal_constant_boundary_lift() {
        // -u'' = 0 with u(0) = u(1) = 1 on the m = 100 grid.
        let m = 100;
        let h = 1.0 / (m as f64 + 1.0);
        let ih2 = 1.0 / (h * h);
        let sys = TridiagonalSystem::new(
            vec![-ih2; m - 1],
            vec![2.0 * ih2; m],
            vec![-ih2; m - 1],
        )
        .unwrap();
        let mut rhs = vec![0.0; m];
        rhs[0] += ih2;
        rhs[m - 1] += ih2;
        let u = solve_tridiagonal(&sys, &rhs).unwrap();
        for v in u {
            assert!((v - 1.0).abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn tridiagonal_zero_pivot() {
        let sys = TridiagonalSystem::new(vec![1.0], vec![0.0, 1.0], vec![1.0]).unwrap();
        assert!(matches!(
            solve_tridiagonal(&sys, &[1.0, 1.0]),
            Err(Error::SingularPivot { row: 0 })
        ));
    }

    #[test]
    fn tridiagonal_rejects_bad_shapes() {
        assert!(TridiagonalSystem::new(vec![], vec![], vec![]).is_err());
        assert!(TridiagonalSystem::new(vec![1.0, 2.0], vec![1.0, 1.0], vec![0.0]).is_err());
        let sys = TridiagonalSystem::new(vec![0.0], vec![1.0, 1.0], vec![0.0]).unwrap();
        assert!(solve_tridiagonal(&sys, &[1.0]).is_err());
    }

    #[test]
    fn eigen_of_diagonal() {
        let d = sym_eigen(&DenseMatrix::from_diagonal(&[1.0, 4.0])).unwrap();
        assert_eq!(d.eigenvalues, vec![4.0, 1.0]);
        let q = &d.eigenvectors;
        assert!((q[(1, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((q[(0, 1)].abs() - 1.0).abs() < 1e-15);
        assert_eq!(q[(0, 0)], 0.0);
    }

    #[test]
    fn eigen_two_by_two() {
        let m = DenseMatrix::new(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let d = sym_eigen(&m).unwrap();
        assert!((d.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((d.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigen_rejects_asymmetric() {
        let m = DenseMatrix::new(2, 2, vec![2.0, 1.0, 0.0, 2.0]).unwrap();
        assert!(matches!(sym_eigen(&m), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn eigen_random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 20;
        let a = DenseMatrix::new(n, n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
        let s = a.gram();
        let d = sym_eigen(&s).unwrap();
        assert!(d.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let r = d.reconstruct();
        let diff: Vec<f64> = r.as_slice().iter().zip(s.as_slice()).map(|(x, y)| x - y).collect();
        assert!(norm2(&diff) <= 1e-10 * s.frobenius_norm());
        let qtq = d.eigenvectors.gram();
        let eye = DenseMatrix::identity(n);
        let diff: Vec<f64> = qtq.as_slice().iter().zip(eye.as_slice()).map(|(x, y)| x - y).collect();
        assert!(norm2(&diff) <= 1e-10);
    }

    #[test]
    fn norm_of_diagonal_and_zero() {
        let d = DenseMatrix::from_diagonal(&[0.5, 0.2]);
        let est = operator_norm(&d);
        assert!(est.converged);
        assert!((est.value - 0.5).abs() <= 0.005);

        let z = DenseMatrix::zeros(3, 4);
        let est = operator_norm(&z);
        assert_eq!(est.value, 0.0);
        assert!(est.converged);
    }

    #[test]
    fn materialize_dense_roundtrip() {
        let a = DenseMatrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(materialize(&a), a);
    }

    #[test]
    fn dense_matrix_validation() {
        assert!(DenseMatrix::new(0, 1, vec![]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0]).is_err());
        assert!(DenseMatrix::new(1, 1, vec![f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn tridiagonal_matches_dense_on_dominant_systems(
            n in 1usize..=50,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sub: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sup: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
            let main: Vec<f64> = (0..n)
                .map(|i| {
                    let off = if i > 0 { sub[i - 1].abs() } else { 0.0 }
                        + if i + 1 < n { sup[i].abs() } else { 0.0 };
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    sign * (off + rng.random_range(0.1..2.0))
                })
                .collect();
            let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sys = TridiagonalSystem::new(sub, main, sup).unwrap();
            let x = solve_tridiagonal(&sys, &rhs).unwrap();
            let oracle = dense_solve(&sys.to_dense(), &rhs);
            prop_assert!(rel_err(&x, &oracle) <= 1e-10);
        }

        #[test]
        fn eigenvalue_sum_equals_trace(n in 1usize..=30, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DenseMatrix::new(n, n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect())
                .unwrap();
            let s = a.gram();
            let d = sym_eigen(&s).unwrap();
            let sum: f64 = d.eigenvalues.iter().sum();
            prop_assert!((sum - s.trace()).abs() <= 1e-10 * s.trace().abs().max(1e-300));
        }

        #[test]
        fn norm_estimate_invariant_under_adjoint_swap(
            rows in 1usize..=12,
            cols in 1usize..=12,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DenseMatrix::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
                .unwrap();
            let fwd = operator_norm(&a).value;
            let at = a.transpose();
            let swapped = estimate_operator_norm(|y| a.matvec_transpose(y), |x| a.matvec(x), rows).value;
            let exact = a.to_nalgebra().singular_values().max();
            prop_assert!((fwd - exact).abs() <= 0.01 * exact);
            prop_assert!((swapped - fwd).abs() <= 0.01 * fwd);
            prop_assert!((operator_norm(&at).value - fwd).abs() <= 0.01 * fwd);
        }
    }
}
