//! Small linear-algebra toolkit: a complex CSR matrix for operators and
//! superoperators, a banded LU solver with bandwidth-reducing ordering, and
//! helpers for dense Hermitian matrices.

mod banded;
mod dense;
mod sparse;

pub use banded::{reverse_cuthill_mckee, BandedLu};
pub use dense::{
    commutes, hermitian_deviation, hermitian_eigenvalues, hermitian_expm, kron_dense,
    min_eigenvalue, unitary_from_generator,
};
pub use sparse::SparseMatrix;

pub type C64 = num_complex::Complex64;
pub type DMat = nalgebra::DMatrix<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);
