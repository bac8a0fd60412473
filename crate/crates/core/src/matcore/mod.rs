//! Dense complex linear algebra.

mod eigen;
mod functions;
mod matrix;
mod schur;
mod svd;

pub use eigen::{hermitian_eigen, HermitianEigen};
pub use functions::{
    expm_i_hermitian, image_projector, matrix_sign, numerical_rank, op_norm,
    partial_isometry_defect, psd_eigen, psd_pinv, psd_pinv_sqrt, psd_sqrt, pseudoinverse,
    trace_norm, unitary_defect,
};
pub use matrix::{vec_inner, vec_norm, ComplexMatrix};
pub use schur::{schur_psd_check, SchurCheck};
pub use svd::{complete_orthonormal, svd, Svd};
