//! Dense real/complex kernels: QR, SVD (deterministic and randomized),
//! eigendecomposition, pseudo-inverse, and rank selection.

mod eig;
mod matrix;
mod qr;
mod randomized;
mod solve;
mod svd;

pub use eig::{canonical_order, eig, eig_complex, max_residual, phase_normalize, EigenDecomposition};
pub use matrix::{dot_conj, norm2, Matrix};
pub use qr::{lstsq, orthonormalize, Qr};
pub use randomized::{randomized_svd, SketchOptions};
pub use solve::{cholesky, cholesky_solve, inverse, matrix_power, Lu};
pub use svd::{pseudo_inverse, select_rank, tail_energy, thin_svd, truncated_svd, TruncatedSvd};

/// Default relative cutoff for pseudo-inverses.
pub const DEFAULT_PINV_CUTOFF: f64 = 1e-12;
