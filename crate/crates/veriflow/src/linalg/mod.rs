//! Minimal generic linear algebra: dense matrices with a Cholesky solver,
//! CSR sparse matrices, and a one-sided Jacobi SVD for null spaces.
//!
//! The systems solved here are small (a few hundred unknowns per region)
//! and symmetric positive definite, so a compact hand-rolled kernel keeps
//! the whole stack generic over [`Scalar`](crate::scalar::Scalar) without
//! pulling in a full matrix library.

mod dense;
mod sparse;
mod svd;

pub use dense::{Cholesky, Matrix};
pub use sparse::CsrMatrix;
pub use svd::{null_space_basis, NullSpace};

use crate::scalar::Scalar;

/// `max_k |a_k - b_k|`; the convergence metric used throughout.
pub fn inf_norm_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs())
        .fold(T::zero(), T::max)
}

/// `max_k |a_k|`.
pub fn inf_norm<T: Scalar>(a: &[T]) -> T {
    a.iter().map(|&x| x.abs()).fold(T::zero(), T::max)
}

/// Euclidean norm.
pub fn l2_norm<T: Scalar>(a: &[T]) -> T {
    a.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Dot product.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_and_dot() {
        let a = [3.0f64, -4.0];
        let b = [0.0f64, 0.0];
        assert_eq!(l2_norm(&a), 5.0);
        assert_eq!(inf_norm(&a), 4.0);
        assert_eq!(inf_norm_diff(&a, &b), 4.0);
        assert_eq!(dot(&a, &a), 25.0);
    }
}
