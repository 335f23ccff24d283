//! Small dense linear algebra kernel: a row-major matrix plus the handful of
//! factorizations the rest of the crate needs (Cholesky, symmetric Jacobi
//! eigensolver, Householder QR, one-sided Jacobi SVD, modified Gram-Schmidt).
//!
//! Sizes in this crate stay in the low hundreds, so everything is plain
//! `Vec<T>` storage with no blocking.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Row-major constructor; panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data has wrong length");
        Matrix { rows, cols, data }
    }

    /// Builds from a list of equal-length rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[T]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn trace(&self) -> T {
        self.diag().into_iter().sum()
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

    pub fn matmul(&self, other: &Matrix<T>) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T`, the natural product for row-major operands.
    pub fn matmul_t(&self, other: &Matrix<T>) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.cols,
            });
        }
        let mut out = Self::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out[(i, j)] = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok(self.rows_iter().map(|r| dot(r, v)).collect())
    }

    pub fn scale(&self, s: T) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix<T>) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Maximum of `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Returns `(A + A^T) / 2` when `A` is symmetric within the scalar's
    /// relative tolerance (scale = max-abs entry), otherwise an error.
    pub fn symmetrized(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::BadDims(format!(
                "expected a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let scale = self.max_abs();
        let asym = self.asymmetry();
        if asym > T::symmetry_tol() * scale {
            return Err(Error::NotSymmetric(asym.to_f64_lossy()));
        }
        let mut out = self.clone();
        let half = T::lit(0.5);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = (self[(i, j)] + self[(j, i)]) * half;
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| {
        let d = x - y;
        s + d * d
    })
}

pub fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    sq_dist(a, b).sqrt()
}

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cholesky<T> {
    lower: Matrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factorizes a symmetric matrix; only the lower triangle is read.
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::BadDims(format!(
                "cholesky needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Cholesky { lower: l })
    }

    pub fn lower(&self) -> &Matrix<T> {
        &self.lower
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// Solves `L y = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.lower.row(i);
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i];
        }
    }

    /// Squared Mahalanobis norm `v^T A^{-1} v`.
    pub fn quad_form_inv(&self, v: &[T]) -> T {
        let mut y = v.to_vec();
        self.solve_lower_in_place(&mut y);
        dot(&y, &y)
    }

    /// Computes `L v`, used to colour white noise when sampling.
    pub fn mul_lower(&self, v: &[T]) -> Vec<T> {
        (0..self.dim())
            .map(|i| dot(&self.lower.row(i)[..=i], &v[..=i]))
            .collect()
    }

    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        self.lower.diag().into_iter().map(|d| two * d.ln()).sum()
    }

    /// Cheap lower bound on the 2-norm condition number, `(max l_ii / min l_ii)^2`.
    pub fn condition_estimate(&self) -> T {
        let diag = self.lower.diag();
        let hi = diag.iter().fold(T::zero(), |m, &d| m.max(d));
        let lo = diag.iter().fold(T::infinity(), |m, &d| m.min(d));
        let r = hi / lo;
        r * r
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    /// Ascending.
    pub values: Vec<T>,
    /// Row `i` is the unit eigenvector for `values[i]`.
    pub vectors: Matrix<T>,
}

/// Cyclic Jacobi eigensolver.
///
/// A rotation is applied whenever `|a_pq| > eps * sqrt(|a_pp a_qq|)`, which
/// gives small eigenvalues of positive definite matrices to high relative
/// accuracy even at condition numbers around `1e26`.
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>) -> Result<SymmetricEigen<T>> {
    let mut a = a.symmetrized()?;
    let n = a.nrows();
    // Rows of `vt` are the eigenvectors (V^T).
    let mut vt = Matrix::identity(n);
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if apq.abs() <= eps * (app * aqq).abs().sqrt() {
                    a[(p, q)] = T::zero();
                    a[(q, p)] = T::zero();
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = if theta.abs() > T::lit(1e100) {
                    T::lit(0.5) / theta
                } else {
                    let sign = if theta >= T::zero() {
                        T::one()
                    } else {
                        -T::one()
                    };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                // A <- J^T A J with J the (p, q) rotation.
                for r in 0..n {
                    let arp = a[(r, p)];
                    let arq = a[(r, q)];
                    a[(r, p)] = c * arp - s * arq;
                    a[(r, q)] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[(p, r)];
                    let aqr = a[(q, r)];
                    a[(p, r)] = c * apr - s * aqr;
                    a[(q, r)] = s * apr + c * aqr;
                }
                a[(p, q)] = T::zero();
                a[(q, p)] = T::zero();
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                for r in 0..n {
                    let vp = vt[(p, r)];
                    let vq = vt[(q, r)];
                    vt[(p, r)] = c * vp - s * vq;
                    vt[(q, r)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            let mut order: Vec<usize> = (0..n).collect();
            let diag = a.diag();
            order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
            let values = order.iter().map(|&i| diag[i]).collect();
            let mut vectors = Matrix::zeros(n, n);
            for (dst, &src) in order.iter().enumerate() {
                vectors.row_mut(dst).copy_from_slice(vt.row(src));
            }
            return Ok(SymmetricEigen { values, vectors });
        }
    }
    Err(Error::BadDims("Jacobi eigensolver did not converge".into()))
}

/// Thin Householder QR of an `m x n` matrix with `m >= n`: `A = Q R`, where
/// `Q` is `m x n` with orthonormal columns and `R` is `n x n` upper
/// triangular.
pub fn householder_qr<T: Scalar>(a: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    let (m, n) = (a.nrows(), a.ncols());
    if m < n {
        return Err(Error::BadDims(format!(
            "QR needs rows >= cols, got {m}x{n}"
        )));
    }
    // Work on columns: store A^T so each column is a contiguous row.
    let mut w = a.transpose();
    let mut reflectors: Vec<Vec<T>> = Vec::with_capacity(n);
    for k in 0..n {
        let col = &w.row(k)[k..];
        let alpha = norm(col);
        let mut v = col.to_vec();
        if alpha == T::zero() {
            reflectors.push(v.iter().map(|_| T::zero()).collect());
            continue;
        }
        let sign = if v[0] >= T::zero() {
            T::one()
        } else {
            -T::one()
        };
        v[0] += sign * alpha;
        let vnorm = norm(&v);
        for x in v.iter_mut() {
            *x /= vnorm;
        }
        for j in k..n {
            let c = &mut w.row_mut(j)[k..];
            let proj = T::lit(2.0) * dot(&v, c);
            for (ci, &vi) in c.iter_mut().zip(&v) {
                *ci -= proj * vi;
            }
        }
        reflectors.push(v);
    }
    let mut r = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            r[(i, j)] = w[(j, i)];
        }
    }
    // Q = H_0 H_1 ... H_{n-1} applied to the first n unit columns.
    let mut qt = Matrix::zeros(n, m);
    for j in 0..n {
        qt[(j, j)] = T::one();
    }
    for j in 0..n {
        let q = qt.row_mut(j);
        for k in (0..n).rev() {
            let v = &reflectors[k];
            let tail = &mut q[k..];
            let proj = T::lit(2.0) * dot(v, tail);
            for (qi, &vi) in tail.iter_mut().zip(v) {
                *qi -= proj * vi;
            }
        }
    }
    Ok((qt.transpose(), r))
}

/// Singular values and right singular vectors of `a` (`m x n`).
#[derive(Clone, Debug)]
pub struct RightSvd<T> {
    /// Descending, length `n`.
    pub values: Vec<T>,
    /// Row `i` is the right singular vector for `values[i]`.
    pub vectors: Matrix<T>,
}

/// One-sided (Hestenes) Jacobi SVD. Tall inputs are first reduced to their
/// `n x n` triangular QR factor, which has the same right singular pairs.
pub fn right_svd<T: Scalar>(a: &Matrix<T>) -> Result<RightSvd<T>> {
    let n = a.ncols();
    let reduced;
    let base = if a.nrows() > n {
        reduced = householder_qr(a)?.1;
        &reduced
    } else {
        a
    };
    // Columns of `base` as contiguous rows.
    let mut w = base.transpose();
    let mut vt = Matrix::identity(n);
    let eps = T::epsilon();
    let mut converged = false;
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(w.row(p), w.row(p));
                let beta = dot(w.row(q), w.row(q));
                let gamma = dot(w.row(p), w.row(q));
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let sign = if zeta >= T::zero() {
                    T::one()
                } else {
                    -T::one()
                };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut w, p, q, c, s);
                rotate_rows(&mut vt, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::BadDims("Jacobi SVD did not converge".into()));
    }
    let sv: Vec<T> = (0..n).map(|i| norm(w.row(i))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap());
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.row_mut(dst).copy_from_slice(vt.row(src));
    }
    Ok(RightSvd {
        values: order.iter().map(|&i| sv[i]).collect(),
        vectors,
    })
}

fn rotate_rows<T: Scalar>(m: &mut Matrix<T>, p: usize, q: usize, c: T, s: T) {
    let cols = m.ncols();
    for k in 0..cols {
        let xp = m[(p, k)];
        let xq = m[(q, k)];
        m[(p, k)] = c * xp - s * xq;
        m[(q, k)] = s * xp + c * xq;
    }
}

/// Orthonormalizes the rows of `a` in order with modified Gram-Schmidt (one
/// reorthogonalization pass). Fails when a row's residual norm drops below
/// `Scalar::degenerate_tol()` relative to its original norm.
pub fn gram_schmidt_rows<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let mut q = a.clone();
    for i in 0..q.nrows() {
        let original = norm(q.row(i));
        if original == T::zero() {
            return Err(Error::DegenerateDraw);
        }
        for _pass in 0..2 {
            for j in 0..i {
                let (done, rest) = q.data.split_at_mut(i * q.cols);
                let qj = &done[j * q.cols..(j + 1) * q.cols];
                let qi = &mut rest[..q.cols];
                let proj = dot(qi, qj);
                for (x, &y) in qi.iter_mut().zip(qj) {
                    *x -= proj * y;
                }
            }
        }
        let residual = norm(q.row(i));
        if residual <= T::degenerate_tol() * original {
            return Err(Error::DegenerateDraw);
        }
        for x in q.row_mut(i) {
            *x /= residual;
        }
    }
    Ok(q)
}

/// `A B A^T` for symmetric `B`, symmetrized to remove rounding asymmetry.
pub fn congruence<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    let ab = a.matmul(b)?;
    let mut out = ab.matmul_t(a)?;
    let n = out.nrows();
    let half = T::lit(0.5);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (out[(i, j)] + out[(j, i)]) * half;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}
