//! Self-contained linear algebra kernels: vectors, dense and compressed-row
//! matrices, LU factorizations and a symmetric eigensolver.

mod band;
mod dense;
mod eigen;
mod sparse;

pub use band::BandLu;
pub use dense::{DenseLu, DenseMatrix};
pub use eigen::{sym_eig, sym_eigvals, SymEig};
pub use sparse::{write_vector, CsrMatrix, Triplet};

use crate::{Error, Real, Result};

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn max_abs<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// `y += alpha * x`
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `r = b - A x`
pub fn residual<T: Real>(a: &CsrMatrix<T>, x: &[T], b: &[T]) -> Result<Vec<T>> {
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "rhs has length {} but matrix has {} rows",
            b.len(),
            a.nrows()
        )));
    }
    let ax = a.spmv(x)?;
    Ok(b.iter().zip(&ax).map(|(&bi, &axi)| bi - axi).collect())
}
