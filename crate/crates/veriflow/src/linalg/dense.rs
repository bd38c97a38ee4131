//! Row-major dense matrix and a Cholesky factorization for SPD systems.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::Error;
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds from row slices; every row must have the same length.
    pub fn from_rows(rows: &[&[T]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &x)| a * x).sum())
            .collect()
    }

    /// `self^T * v` without materializing the transpose.
    pub fn transpose_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            if vi != T::zero() {
                for (o, &a) in out.iter_mut().zip(self.row(i)) {
                    *o += a * vi;
                }
            }
        }
        out
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let out_row = out.row_mut(i);
                for (o, &b) in out_row.iter_mut().zip(orow) {
                    *o += aik * b;
                }
            }
        }
        out
    }

    /// `self^T * self`, the Gram matrix.
    pub fn gram(&self) -> Matrix<T> {
        let mut out = Matrix::zeros(self.cols, self.cols);
        for i in 0..self.rows {
            let row = self.row(i);
            for a in 0..self.cols {
                let ra = row[a];
                if ra == T::zero() {
                    continue;
                }
                for b in a..self.cols {
                    out[(a, b)] += ra * row[b];
                }
            }
        }
        for a in 0..self.cols {
            for b in 0..a {
                out[(a, b)] = out[(b, a)];
            }
        }
        out
    }

    /// `self += scale * other`.
    pub fn add_assign_scaled(&mut self, other: &Matrix<T>, scale: T) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    /// Adds `scale` to each listed diagonal entry.
    pub fn add_diagonal(&mut self, entries: &[(usize, T)]) {
        for &(i, v) in entries {
            self[(i, i)] += v;
        }
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

impl<T: Scalar> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

/// Cholesky factorization `A = L L^T` of a symmetric positive definite matrix.
#[derive(Clone)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Scalar> fmt::Debug for Cholesky<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cholesky({}x{})", self.l.rows(), self.l.cols())
    }
}

impl<T: Scalar> Cholesky<T> {
    /// Factors `a`; fails if the matrix is not positive definite (for
    /// example when a region has unobservable variables).
    pub fn factor(a: &Matrix<T>) -> Result<Self, Error> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::Linalg(format!("cannot factor {}x{} matrix", a.rows(), a.cols())));
        }
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if diag <= T::zero() || !diag.is_finite() {
                return Err(Error::Linalg(format!(
                    "matrix not positive definite at pivot {j} (value {:e})",
                    diag.into_f64()
                )));
            }
            let djj = diag.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut sum = a[(i, j)];
                for k in 0..j {
                    sum -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = sum / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let lik = self.l[(i, k)];
                y[i] = y[i] - lik * y[k];
            }
            y[i] = y[i] / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let lki = self.l[(k, i)];
                y[i] = y[i] - lki * y[k];
            }
            y[i] = y[i] / self.l[(i, i)];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_and_gram_agree() {
        let a = Matrix::from_rows(&[&[1.0f64, 2.0, 0.0], &[0.0, 1.0, -1.0]]);
        let g = a.gram();
        for i in 0..3 {
            for j in 0..3 {
                let direct: f64 = (0..2).map(|r| a[(r, i)] * a[(r, j)]).sum();
                assert!((g[(i, j)] - direct).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn transpose_mul_matches_explicit() {
        let a = Matrix::from_rows(&[&[1.0f64, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let v = [1.0, -1.0, 2.0];
        let got = a.transpose_mul_vec(&v);
        assert_eq!(got, vec![1.0 - 3.0 + 10.0, 2.0 - 4.0 + 12.0]);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        // A = M^T M + I is SPD for any M.
        let m = Matrix::from_rows(&[&[2.0f64, -1.0, 0.5], &[0.0, 1.0, 1.0]]);
        let mut a = m.gram();
        a.add_diagonal(&[(0, 1.0), (1, 1.0), (2, 1.0)]);
        let chol = Cholesky::factor(&a).unwrap();
        let x_true = vec![1.0, -2.0, 3.0];
        let b = a.mul_vec(&x_true);
        let x = chol.solve(&b);
        for (got, want) in x.iter().zip(&x_true) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_rows(&[&[1.0f64, 2.0], &[2.0, 1.0]]);
        assert!(Cholesky::factor(&a).is_err());
    }

    #[test]
    fn cholesky_rejects_semidefinite() {
        // rank 1: the second pivot is exactly zero.
        let a = Matrix::from_rows(&[&[1.0f64, 1.0], &[1.0, 1.0]]);
        assert!(Cholesky::factor(&a).is_err());
    }
}
