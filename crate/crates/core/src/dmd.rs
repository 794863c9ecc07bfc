//! Reduced DMD on a uniform grid and spectral time advancement.

use std::sync::Arc;

use num_traits::One;

use crate::error::{Error, Result};
use crate::linalg::{eig, lstsq, pseudo_inverse, thin_svd, Matrix, DEFAULT_PINV_CUTOFF};
use crate::scalar::{Real, C};
use crate::snapshot::{lattice_indices, SnapshotMatrix, TimeGrid};

/// Largest state dimension for which [`exact_operator`] is allowed.
pub const EXACT_OPERATOR_MAX_DIM: usize = 512;

/// What to do when a requested rank exceeds the numerical rank of `X⁻`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RankPolicy {
    #[default]
    Strict,
    /// Lower the rank to the numerical rank and log a warning.
    ClampNumerical,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DmdOptions<T> {
    /// Singular values below `pinv_cutoff · σ₁` count as zero.
    pub pinv_cutoff: T,
    pub rank_policy: RankPolicy,
}

impl<T: Real> Default for DmdOptions<T> {
    fn default() -> Self {
        Self {
            pinv_cutoff: T::c(DEFAULT_PINV_CUTOFF),
            rank_policy: RankPolicy::Strict,
        }
    }
}

/// Fitted reduced DMD.
#[derive(Clone, Debug, PartialEq)]
pub struct DmdModel<T> {
    pub rank: usize,
    /// `Ã`, r×r.
    pub reduced_op: Matrix<T>,
    /// POD basis `Ũ` of `X⁻`, N×r.
    pub pod_modes: Matrix<T>,
    pub singular_values: Vec<T>,
    /// Discrete-time eigenvalues in canonical order.
    pub eigenvalues: Vec<C<T>>,
    /// Eigenvectors `W` of `Ã`, matching `eigenvalues`.
    pub reduced_eigenvectors: Matrix<C<T>>,
    /// `Φ`, N×r.
    pub modes: Matrix<C<T>>,
    pub amplitudes: Vec<C<T>>,
    pub dt: T,
    pub t0: T,
}

pub fn fit_dmd<T: Real>(x: &SnapshotMatrix<T>, rank: usize) -> Result<DmdModel<T>> {
    fit_dmd_with(x, rank, &DmdOptions::default())
}

pub fn fit_dmd_with<T: Real>(
    x: &SnapshotMatrix<T>,
    rank: usize,
    opts: &DmdOptions<T>,
) -> Result<DmdModel<T>> {
    fit_dmd_matrix(&x.state, &x.grid, rank, opts)
}

/// Same as [`fit_dmd_with`] for a bare state matrix sampled on `grid`.
pub fn fit_dmd_matrix<T: Real>(
    state: &Matrix<T>,
    grid: &TimeGrid<T>,
    rank: usize,
    opts: &DmdOptions<T>,
) -> Result<DmdModel<T>> {
    let dt = grid.uniform_dt()?;
    let (n_h, n_t) = state.shape();
    if n_t != grid.len() {
        return Err(Error::DimensionMismatch {
            context: "snapshot columns vs time grid",
            expected: grid.len(),
            found: n_t,
        });
    }
    if n_t < 3 {
        return Err(Error::TimeGridTooShort { min: 3, found: n_t });
    }
    let max = n_h.min(n_t - 1);
    if rank == 0 || rank > max {
        return Err(Error::RankOutOfRange { rank, max });
    }
    if !state.all_finite() {
        return Err(Error::NonFinite("snapshot matrix"));
    }
    let x_minus = state.columns(0..n_t - 1);
    let x_plus = state.columns(1..n_t);

    let full = thin_svd(&x_minus);
    let s1 = full.singular_values[0];
    let cutoff = opts.pinv_cutoff * s1;
    let numerical = full.singular_values.iter().take_while(|&&s| s > T::zero() && s >= cutoff).count();
    if numerical == 0 {
        return Err(Error::AllBelowCutoff);
    }
    let rank = if rank > numerical {
        match opts.rank_policy {
            RankPolicy::Strict => {
                return Err(Error::SingularSigma {
                    rank,
                    sigma: full.singular_values[rank - 1].to_f64_(),
                    cutoff: cutoff.to_f64_(),
                })
            }
            RankPolicy::ClampNumerical => {
                log::warn!("dmd rank {rank} exceeds numerical rank {numerical}; clamping");
                numerical
            }
        }
    } else {
        rank
    };
    let svd = full.truncate(rank);

    // X⁺ Ṽ Σ̃⁻¹
    let mut xvs = x_plus.matmul(&svd.right_v);
    for (j, &s) in svd.singular_values.iter().enumerate() {
        let inv = s.recip();
        xvs.col_mut(j).iter_mut().for_each(|v| *v *= inv);
    }
    let reduced_op = svd.modes_u.adjoint_matmul(&xvs);
    let e = eig(&reduced_op)?;

    let mut modes = xvs.to_complex().matmul(&e.eigenvectors);
    let projected = svd.modes_u.to_complex().matmul(&e.eigenvectors);
    let lam_floor = T::c(1e-12) * e.eigenvalues.first().map_or(T::one(), |l| l.norm()).max(T::c(1e-300));
    for (j, l) in e.eigenvalues.iter().enumerate() {
        // Exact modes vanish with λ; the projected mode is the stable substitute.
        if l.norm() <= lam_floor {
            modes.set_col(j, projected.col(j));
        }
    }
    let x1 = Matrix::from_col_major(n_h, 1, state.col(0).iter().map(|&v| C::new(v, T::zero())).collect())?;
    let amplitudes = lstsq(&modes, &x1, T::c(1e-13)).into_data();

    Ok(DmdModel {
        rank,
        reduced_op,
        pod_modes: svd.modes_u,
        singular_values: svd.singular_values,
        eigenvalues: e.eigenvalues,
        reduced_eigenvectors: e.eigenvectors,
        modes,
        amplitudes,
        dt,
        t0: grid.start(),
    })
}

impl<T: Real> DmdModel<T> {
    pub fn state_dim(&self) -> usize {
        self.modes.rows()
    }

    /// Continuous-time eigenvalues `ln(λ)/dt`.
    pub fn omegas(&self) -> Vec<C<T>> {
        self.eigenvalues.iter().map(|l| l.ln() / self.dt).collect()
    }

    /// `Ũ Ã Ũᵀ`, the rank-r operator in the ambient coordinates.
    pub fn full_operator(&self) -> Matrix<T> {
        self.pod_modes
            .matmul(&self.reduced_op)
            .matmul(&self.pod_modes.transpose())
    }

    /// `Σ_j φ_j λ_j^{k−1} b_j` before taking the real part.
    pub fn advance_complex(&self, k: usize) -> Vec<C<T>> {
        assert!(k >= 1, "time index is 1-based");
        let coeff: Vec<C<T>> = self
            .eigenvalues
            .iter()
            .zip(&self.amplitudes)
            .map(|(&l, &b)| power(l, k - 1) * b)
            .collect();
        self.modes.matvec(&coeff)
    }

    /// State at lattice index `k` (1 is the initial instant), real part.
    pub fn advance(&self, k: usize) -> Vec<T> {
        real_part_checked(&self.advance_complex(k))
    }

    /// Evaluates on every instant of `grid`, which must lie on the model lattice.
    pub fn reconstruct(&self, grid: &Arc<TimeGrid<T>>) -> Result<SnapshotMatrix<T>> {
        let ks = lattice_indices(grid.instants(), self.t0, self.dt)?;
        let cols: Vec<Vec<T>> = ks.iter().map(|&k| self.advance(k)).collect();
        SnapshotMatrix::new(Matrix::from_columns(self.state_dim(), &cols)?, Arc::clone(grid))
    }

    /// Instants `t0 + k·dt`, `k = 0..n`.
    pub fn lattice(&self, n: usize) -> Result<Arc<TimeGrid<T>>> {
        Ok(Arc::new(TimeGrid::uniform(self.t0, self.dt, n)?))
    }
}

/// `z^n` by repeated squaring; exact for `n = 0`.
pub(crate) fn power<T: Real>(z: C<T>, n: usize) -> C<T> {
    let mut acc = C::<T>::one();
    let mut base = z;
    let mut n = n;
    while n > 0 {
        if n & 1 == 1 {
            acc *= base;
        }
        base = base * base;
        n >>= 1;
    }
    acc
}

/// Real part, logging when the discarded imaginary part is not negligible.
pub(crate) fn real_part_checked<T: Real>(v: &[C<T>]) -> Vec<T> {
    let re: Vec<T> = v.iter().map(|z| z.re).collect();
    let im = v.iter().map(|z| z.im * z.im).sum::<T>().sqrt();
    let nr = re.iter().map(|&x| x * x).sum::<T>().sqrt();
    if im > T::c(1e-6) * nr && im > T::zero() {
        log::debug!("discarding imaginary residual {im} (real norm {nr})");
    }
    re
}

/// Full least-squares operator `X⁺ (X⁻)⁺` for small state dimensions.
pub fn exact_operator<T: Real>(x: &SnapshotMatrix<T>, rel_cutoff: T) -> Result<Matrix<T>> {
    let (n_h, n_t) = x.state.shape();
    if n_h > EXACT_OPERATOR_MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "exact operator limited to N_h ≤ {EXACT_OPERATOR_MAX_DIM}, got {n_h}"
        )));
    }
    if n_t < 2 {
        return Err(Error::TimeGridTooShort { min: 2, found: n_t });
    }
    let x_minus = x.state.columns(0..n_t - 1);
    let pinv = pseudo_inverse(&thin_svd(&x_minus), rel_cutoff)?;
    Ok(x.state.columns(1..n_t).matmul(&pinv))
}
