//! Reduced operators interpolation.
//!
//! Offline: one latent DMD operator per training parameter, a second SVD over
//! the unfolded operators, and regressors for the expansion coefficients and
//! the initial latent state. Online: evaluate the regressors, fold, and step.

use rayon::prelude::*;

use crate::dmd::{fit_dmd_matrix, DmdOptions, RankPolicy};
use crate::error::{Error, Result};
use crate::linalg::{truncated_svd, Matrix};
use crate::reduction::{lift, GlobalBasis, LatentDataset};
use crate::regression::{fit, FittedRegressor, RegressorSpec};
use crate::scalar::Real;
use crate::snapshot::lattice_indices;

#[derive(Clone, Debug, PartialEq)]
pub struct RoiModel<T> {
    pub basis: GlobalBasis<T>,
    /// `𝔽`, r²×r_a with orthonormal columns.
    pub op_modes: Matrix<T>,
    pub op_singular_values: Vec<T>,
    pub coeff_regressor: FittedRegressor<T>,
    pub init_regressor: FittedRegressor<T>,
    pub dt: T,
    pub t0: T,
    /// `‖Ṽ^{μ_i} − V̂^{μ_i}‖_F` of each training member's latent DMD reconstruction.
    pub latent_residuals: Vec<T>,
}

impl<T: Real> RoiModel<T> {
    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    pub fn op_rank(&self) -> usize {
        self.op_modes.cols()
    }
}

/// Column-major flattening of an r×r operator.
pub fn unfold<T: Real>(op: &Matrix<T>) -> Vec<T> {
    op.data().to_vec()
}

pub fn fold<T: Real>(v: &[T], r: usize) -> Result<Matrix<T>> {
    Matrix::from_col_major(r, r, v.to_vec())
}

/// Full-rank latent operator of one trajectory, with its reconstruction residual.
pub(crate) fn latent_operator<T: Real>(v: &Matrix<T>, grid: &crate::snapshot::TimeGrid<T>) -> Result<(Matrix<T>, T)> {
    let r = v.rows();
    let opts = DmdOptions {
        rank_policy: RankPolicy::ClampNumerical,
        ..Default::default()
    };
    let rank = r.min(v.cols() - 1);
    let m = fit_dmd_matrix(v, grid, rank, &opts)?;
    let op = m.full_operator();
    let rec = step(&op, v.col(0), v.cols());
    Ok((op, rec.sub(v).frobenius_norm()))
}

/// `[v, A v, A² v, …]` with `n` columns.
pub(crate) fn step<T: Real>(a: &Matrix<T>, v1: &[T], n: usize) -> Matrix<T> {
    let mut out = Matrix::zeros(v1.len(), n);
    if n == 0 {
        return out;
    }
    out.set_col(0, v1);
    for k in 1..n {
        let next = a.matvec(out.col(k - 1));
        out.set_col(k, &next);
    }
    out
}

pub fn fit_roi<T: Real>(latent: &LatentDataset<T>, op_rank: usize, spec: &RegressorSpec) -> Result<RoiModel<T>> {
    let grid = &latent.grid;
    let dt = grid.uniform_dt()?;
    let r = latent.rank();
    let n_p = latent.n_params();
    let max = (r * r).min(n_p);
    if op_rank == 0 || op_rank > max {
        return Err(Error::RankOutOfRange { rank: op_rank, max });
    }
    let fits: Vec<(Matrix<T>, T)> = latent
        .latents
        .par_iter()
        .map(|v| latent_operator(v, grid))
        .collect::<Result<_>>()?;

    let columns: Vec<Vec<T>> = fits.iter().map(|(op, _)| unfold(op)).collect();
    let stacked = Matrix::from_columns(r * r, &columns)?;
    let svd = truncated_svd(&stacked, op_rank)?;
    // ξ(μ_i) = 𝔽ᵀ a_i, one row per training parameter.
    let xi = svd.modes_u.adjoint_matmul(&stacked).transpose();
    let v1 = Matrix::from_fn(n_p, r, |i, j| latent.latents[i][(j, 0)]);

    let spec = spec.effective(n_p);
    let coeff_regressor = fit(&spec, &latent.params, &xi)?;
    let init_regressor = fit(&spec, &latent.params, &v1)?;
    Ok(RoiModel {
        basis: latent.basis.clone(),
        op_modes: svd.modes_u,
        op_singular_values: svd.singular_values,
        coeff_regressor,
        init_regressor,
        dt,
        t0: grid.start(),
        latent_residuals: fits.into_iter().map(|(_, res)| res).collect(),
    })
}

/// `fold(Σ_k ξ_k(μ) 𝔽_k)`.
pub fn synthesize_operator<T: Real>(m: &RoiModel<T>, mu: &[T]) -> Result<Matrix<T>> {
    let xi = m.coeff_regressor.predict(mu)?;
    fold(&m.op_modes.matvec(&xi), m.rank())
}

/// Latent trajectory at `times`, which must lie on the model lattice.
pub fn predict_roi_latent<T: Real>(m: &RoiModel<T>, mu: &[T], times: &[T]) -> Result<Matrix<T>> {
    let ks = lattice_indices(times, m.t0, m.dt)?;
    let a = synthesize_operator(m, mu)?;
    let v1 = m.init_regressor.predict(mu)?;
    let horizon = ks.iter().copied().max().unwrap_or(0);
    let traj = step(&a, &v1, horizon);
    let idx: Vec<usize> = ks.iter().map(|&k| k - 1).collect();
    Ok(traj.select_columns(&idx))
}

pub fn predict_roi<T: Real>(m: &RoiModel<T>, mu: &[T], times: &[T]) -> Result<Matrix<T>> {
    lift(&predict_roi_latent(m, mu, times)?, &m.basis)
}
