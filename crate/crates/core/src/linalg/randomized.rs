use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::matrix::Matrix;
use super::qr::orthonormalize;
use super::svd::{thin_svd, TruncatedSvd};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Sketch parameters for [`randomized_svd`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SketchOptions {
    pub oversample: usize,
    pub power_iters: usize,
    pub seed: u64,
}

impl Default for SketchOptions {
    fn default() -> Self {
        Self {
            oversample: 10,
            power_iters: 2,
            seed: 0,
        }
    }
}

/// Randomized range finder with subspace (power) iterations, followed by an
/// exact SVD of the small projected matrix.
///
/// Bit-reproducible for a fixed seed.
pub fn randomized_svd<T: Real>(
    m: &Matrix<T>,
    rank: usize,
    opts: SketchOptions,
) -> Result<TruncatedSvd<T>> {
    let max = m.rows().min(m.cols());
    if rank == 0 || rank + opts.oversample > max {
        return Err(Error::RankOutOfRange {
            rank: rank + opts.oversample,
            max,
        });
    }
    if !m.all_finite() {
        return Err(Error::NonFinite("randomized svd input"));
    }
    let width = rank + opts.oversample;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let omega = Matrix::from_fn(m.cols(), width, |_, _| {
        let x: f64 = StandardNormal.sample(&mut rng);
        T::c(x)
    });
    let mut q = orthonormalize(&m.matmul(&omega));
    for _ in 0..opts.power_iters {
        let z = orthonormalize(&m.adjoint_matmul(&q));
        q = orthonormalize(&m.matmul(&z));
    }
    // B = Qᵀ M is width × cols.
    let b = q.adjoint_matmul(m);
    let small = thin_svd(&b);
    let modes_u = q.matmul(&small.modes_u);
    let full = TruncatedSvd {
        modes_u,
        singular_values: small.singular_values,
        right_v: small.right_v,
    };
    Ok(full.truncate(rank))
}
