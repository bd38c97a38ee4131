//! Null-space extraction via one-sided Jacobi orthogonalization.
//!
//! Matrices passed here are tiny (constraint rows restricted to a shared
//! interface, tens of columns at most), so a plain Jacobi sweep is both
//! adequate and easy to keep generic over the scalar type.

use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Orthonormal basis of `{ v : A v = 0 }`.
#[derive(Clone, Debug)]
pub struct NullSpace<T> {
    /// Basis vectors, one per column, each of length `A.cols()`.
    pub basis: Vec<Vec<T>>,
    /// All singular values of `A`, descending.
    pub singular_values: Vec<T>,
}

impl<T: Scalar> NullSpace<T> {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Computes the null space of `a`, treating singular values below
/// `rel_tol * sigma_max` as zero.
pub fn null_space_basis<T: Scalar>(a: &Matrix<T>, rel_tol: T) -> NullSpace<T> {
    let (rows, cols) = (a.rows(), a.cols());
    // Column-major working copy of A; V accumulates the right rotations.
    let mut u: Vec<Vec<T>> = (0..cols).map(|j| (0..rows).map(|i| a[(i, j)]).collect()).collect();
    let mut v: Vec<Vec<T>> = (0..cols)
        .map(|j| (0..cols).map(|i| if i == j { T::one() } else { T::zero() }).collect())
        .collect();

    let sweep_tol = T::from_f64(1e-30);
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (mut app, mut aqq, mut apq) = (T::zero(), T::zero(), T::zero());
                for i in 0..rows {
                    app += u[p][i] * u[p][i];
                    aqq += u[q][i] * u[q][i];
                    apq += u[p][i] * u[q][i];
                }
                if apq * apq <= sweep_tol * app * aqq || apq == T::zero() {
                    continue;
                }
                rotated = true;
                let two = T::from_f64(2.0);
                let theta = (aqq - app) / (two * apq);
                let t = {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (T::one() + theta * theta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (up, uq) = (u[p][i], u[q][i]);
                    u[p][i] = c * up - s * uq;
                    u[q][i] = s * up + c * uq;
                }
                for i in 0..cols {
                    let (vp, vq) = (v[p][i], v[q][i]);
                    v[p][i] = c * vp - s * vq;
                    v[q][i] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<(T, usize)> = (0..cols)
        .map(|j| (u[j].iter().map(|&x| x * x).sum::<T>().sqrt(), j))
        .collect();
    sigma.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite singular values"));
    let sigma_max = sigma.first().map_or(T::zero(), |&(s, _)| s);
    let cutoff = rel_tol * sigma_max;
    let mut basis = Vec::new();
    for &(s, j) in &sigma {
        if s <= cutoff {
            basis.push(v[j].clone());
        }
    }
    NullSpace { basis, singular_values: sigma.into_iter().map(|(s, _)| s).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, l2_norm};

    const REL_TOL: f64 = 1e-10;

    #[test]
    fn full_rank_square_has_empty_null_space() {
        let a = Matrix::from_rows(&[&[2.0f64, 1.0], &[0.0, 3.0]]);
        let ns = null_space_basis(&a, REL_TOL);
        assert_eq!(ns.dim(), 0);
        let prod: f64 = ns.singular_values.iter().product();
        assert!((prod - 6.0).abs() < 1e-9, "det via sigmas: {prod}");
    }

    #[test]
    fn rank_one_matrix_has_null_dim_two() {
        // rows are multiples of (1, 2, -1)
        let a = Matrix::from_rows(&[&[1.0f64, 2.0, -1.0], &[2.0, 4.0, -2.0]]);
        let ns = null_space_basis(&a, REL_TOL);
        assert_eq!(ns.dim(), 2);
        for b in &ns.basis {
            assert!((l2_norm(b) - 1.0).abs() < 1e-10);
            let residual = l2_norm(&a.mul_vec(b));
            assert!(residual < 1e-10, "A b = {residual}");
        }
        assert!(dot(&ns.basis[0], &ns.basis[1]).abs() < 1e-10);
    }

    #[test]
    fn wide_matrix_null_dim_at_least_cols_minus_rows() {
        let a = Matrix::from_rows(&[&[1.0f64, 0.0, 1.0, -2.0]]);
        let ns = null_space_basis(&a, REL_TOL);
        assert_eq!(ns.dim(), 3);
    }

    #[test]
    fn zero_matrix_null_space_is_everything() {
        let a = Matrix::<f64>::zeros(3, 2);
        let ns = null_space_basis(&a, REL_TOL);
        assert_eq!(ns.dim(), 2);
    }
}
