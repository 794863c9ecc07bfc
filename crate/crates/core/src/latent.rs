//! Latent-space interpolation.
//!
//! Offline, the latent trajectories are advanced either by one DMD of the
//! stacked latent state (monolithic) or by one DMD per training parameter
//! (partitioned). Online, the training latents at each requested instant are
//! regressed over μ and the regressor is evaluated at the query.

use std::ops::Range;

use rayon::prelude::*;

use crate::dmd::{fit_dmd_matrix, DmdModel, DmdOptions, RankPolicy};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::optdmd::{fit_optdmd_matrix, OptDmdModel, SolverOptions};
use crate::reduction::{lift, GlobalBasis, LatentDataset};
use crate::regression::{fit, RegressorSpec};
use crate::scalar::Real;
use crate::snapshot::lattice_indices;

#[derive(Clone, Debug, PartialEq)]
pub struct MonolithicModel<T> {
    pub basis: GlobalBasis<T>,
    /// DMD over the `r·N_p` stacked latent state.
    pub stacked_dmd: DmdModel<T>,
    pub params: Vec<Vec<T>>,
    /// Rows of the stacked state owned by each training parameter.
    pub block_map: Vec<Range<usize>>,
    pub dt: T,
    pub t0: T,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Member<T> {
    Dmd(DmdModel<T>),
    Opt(OptDmdModel<T>),
}

impl<T: Real> Member<T> {
    /// Latent state at lattice index `k` (1-based).
    fn advance(&self, k: usize, t0: T, dt: T) -> Vec<T> {
        match self {
            Member::Dmd(m) => m.advance(k),
            Member::Opt(m) => m.predict(t0 + dt * T::from_usize_(k - 1)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionedModel<T> {
    pub basis: GlobalBasis<T>,
    pub members: Vec<Member<T>>,
    pub params: Vec<Vec<T>>,
    pub dt: T,
    pub t0: T,
}

fn stack_latents<T: Real>(latent: &LatentDataset<T>) -> (Matrix<T>, Vec<Range<usize>>) {
    let blocks: Vec<&Matrix<T>> = latent.latents.iter().collect();
    let r = latent.rank();
    let map = (0..blocks.len()).map(|i| i * r..(i + 1) * r).collect();
    (Matrix::vcat(&blocks).expect("latents share N_t"), map)
}

/// Largest admissible stacked rank, `min(r·N_p, N_t − 1)`.
pub fn default_stacked_rank<T: Real>(latent: &LatentDataset<T>) -> usize {
    (latent.rank() * latent.n_params()).min(latent.grid.len() - 1)
}

pub fn fit_monolithic<T: Real>(latent: &LatentDataset<T>, stacked_rank: Option<usize>) -> Result<MonolithicModel<T>> {
    let dt = latent.grid.uniform_dt()?;
    let (stacked, block_map) = stack_latents(latent);
    let rank = stacked_rank.unwrap_or_else(|| default_stacked_rank(latent));
    let opts = DmdOptions {
        rank_policy: RankPolicy::ClampNumerical,
        ..Default::default()
    };
    let stacked_dmd = fit_dmd_matrix(&stacked, &latent.grid, rank, &opts)?;
    Ok(MonolithicModel {
        basis: latent.basis.clone(),
        stacked_dmd,
        params: latent.params.clone(),
        block_map,
        dt,
        t0: latent.grid.start(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PartitionedOptions {
    /// Members default to the latent rank.
    pub member_rank: Option<usize>,
    /// Optimized DMD members instead of basic DMD.
    pub optimized: Option<SolverOptions>,
}

pub fn fit_partitioned<T: Real>(latent: &LatentDataset<T>, opts: &PartitionedOptions) -> Result<PartitionedModel<T>> {
    let dt = latent.grid.uniform_dt()?;
    let rank = opts.member_rank.unwrap_or(latent.rank());
    let grid = &latent.grid;
    let members = latent
        .latents
        .par_iter()
        .map(|v| match &opts.optimized {
            None => {
                let o = DmdOptions {
                    rank_policy: RankPolicy::ClampNumerical,
                    ..Default::default()
                };
                fit_dmd_matrix(v, grid, rank, &o).map(Member::Dmd)
            }
            Some(s) => fit_optdmd_matrix(v, grid.instants(), grid.start(), rank, None, s).map(Member::Opt),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PartitionedModel {
        basis: latent.basis.clone(),
        members,
        params: latent.params.clone(),
        dt,
        t0: latent.grid.start(),
    })
}

/// Regresses the training latents at one instant and evaluates at `mu`.
fn regress_instant<T: Real>(params: &[Vec<T>], rows: Matrix<T>, mu: &[T], spec: &RegressorSpec) -> Result<Vec<T>> {
    fit(&spec.effective(params.len()), params, &rows)?.predict(mu)
}

pub fn predict_monolithic_latent<T: Real>(
    m: &MonolithicModel<T>,
    mu: &[T],
    times: &[T],
    spec: &RegressorSpec,
) -> Result<Matrix<T>> {
    let ks = lattice_indices(times, m.t0, m.dt)?;
    let r = m.basis.rank();
    let mut out = Matrix::zeros(r, times.len());
    for (c, &k) in ks.iter().enumerate() {
        let state = m.stacked_dmd.advance(k);
        let rows = Matrix::from_fn(m.params.len(), r, |i, j| state[m.block_map[i].start + j]);
        out.set_col(c, &regress_instant(&m.params, rows, mu, spec)?);
    }
    Ok(out)
}

pub fn predict_partitioned_latent<T: Real>(
    m: &PartitionedModel<T>,
    mu: &[T],
    times: &[T],
    spec: &RegressorSpec,
) -> Result<Matrix<T>> {
    let ks = lattice_indices(times, m.t0, m.dt)?;
    let r = m.basis.rank();
    let mut out = Matrix::zeros(r, times.len());
    for (c, &k) in ks.iter().enumerate() {
        let states: Vec<Vec<T>> = m.members.par_iter().map(|mem| mem.advance(k, m.t0, m.dt)).collect();
        let rows = Matrix::from_fn(m.params.len(), r, |i, j| states[i][j]);
        out.set_col(c, &regress_instant(&m.params, rows, mu, spec)?);
    }
    Ok(out)
}

pub fn predict_monolithic<T: Real>(m: &MonolithicModel<T>, mu: &[T], times: &[T], spec: &RegressorSpec) -> Result<Matrix<T>> {
    lift(&predict_monolithic_latent(m, mu, times, spec)?, &m.basis)
}

pub fn predict_partitioned<T: Real>(m: &PartitionedModel<T>, mu: &[T], times: &[T], spec: &RegressorSpec) -> Result<Matrix<T>> {
    lift(&predict_partitioned_latent(m, mu, times, spec)?, &m.basis)
}

/// Training block `i` of the monolithic reconstruction at `times`.
pub fn monolithic_block<T: Real>(m: &MonolithicModel<T>, i: usize, times: &[T]) -> Result<Matrix<T>> {
    let range = m.block_map.get(i).ok_or(Error::DimensionMismatch {
        context: "training block index",
        expected: m.block_map.len(),
        found: i,
    })?;
    let ks = lattice_indices(times, m.t0, m.dt)?;
    let cols: Vec<Vec<T>> = ks.iter().map(|&k| m.stacked_dmd.advance(k)[range.clone()].to_vec()).collect();
    Matrix::from_columns(range.len(), &cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmd::fit_dmd;
    use crate::linalg::{eig, matrix_power};
    use crate::reduction::GlobalBasis;
    use crate::regression::{fit_count, RegressorKind};
    use crate::snapshot::{SnapshotMatrix, TimeGrid};
    use crate::scalar::C;
    use std::sync::Arc;

    fn identity_basis(r: usize) -> GlobalBasis<f64> {
        GlobalBasis {
            modes_u: Matrix::identity(r),
            singular_values: vec![1.0; r],
            energy_captured: 1.0,
            center: None,
        }
    }

    fn traj(a: &Matrix<f64>, x1: &[f64], n: usize) -> Matrix<f64> {
        let cols: Vec<Vec<f64>> = (0..n).map(|k| matrix_power(a, k as u64).matvec(x1)).collect();
        Matrix::from_columns(x1.len(), &cols).unwrap()
    }

    fn latent(params: &[f64], ops: &[Matrix<f64>], x1: &[Vec<f64>], n_t: usize) -> LatentDataset<f64> {
        let r = x1[0].len();
        LatentDataset {
            basis: identity_basis(r),
            params: params.iter().map(|&p| vec![p]).collect(),
            latents: ops.iter().zip(x1).map(|(a, x)| traj(a, x, n_t)).collect(),
            grid: Arc::new(TimeGrid::uniform(0.0, 0.5, n_t).unwrap()),
        }
    }

    fn rot(theta: f64, rho: f64) -> Matrix<f64> {
        Matrix::from_rows(2, 2, &[rho * theta.cos(), -rho * theta.sin(), rho * theta.sin(), rho * theta.cos()])
    }

    fn sorted(mut v: Vec<C<f64>>) -> Vec<C<f64>> {
        v.sort_by(|a, b| ((a.re * 1e6).round(), a.im).partial_cmp(&((b.re * 1e6).round(), b.im)).unwrap());
        v
    }

    #[test]
    fn stacked_spectrum_is_union() {
        let a1 = rot(0.3, 0.95);
        let a2 = Matrix::from_rows(2, 2, &[0.7, 0.0, 0.0, 0.4]);
        let l = latent(&[0.0, 1.0], &[a1.clone(), a2.clone()], &[vec![1.0, 0.5], vec![1.0, 1.0]], 12);
        let m = fit_monolithic(&l, Some(4)).unwrap();
        let mut want = eig(&a1).unwrap().eigenvalues;
        want.extend(eig(&a2).unwrap().eigenvalues);
        let got = sorted(m.stacked_dmd.eigenvalues.clone());
        for (g, w) in got.iter().zip(sorted(want)) {
            assert!((g - w).norm() <= 1e-8, "{g} vs {w}");
        }
        assert_eq!(m.block_map, vec![0..2, 2..4]);

        let times = l.grid.instants();
        for i in 0..2 {
            let rec = monolithic_block(&m, i, times).unwrap();
            assert!(rec.sub(&l.latents[i]).max_abs() <= 1e-8);
            let solo = fit_dmd(&SnapshotMatrix::new(l.latents[i].clone(), Arc::clone(&l.grid)).unwrap(), 2).unwrap();
            let solo_rec = solo.reconstruct(&l.grid).unwrap().state;
            assert!(rec.sub(&solo_rec).max_abs() <= 1e-7);
        }
    }

    #[test]
    fn single_parameter_matches_dmd() {
        let a = rot(0.2, 0.9);
        let l = latent(&[0.5], &[a], &[vec![1.0, 0.0]], 10);
        let spec = RegressorSpec::new(RegressorKind::LinearInterp);
        let mono = fit_monolithic(&l, None).unwrap();
        let part = fit_partitioned(&l, &PartitionedOptions::default()).unwrap();
        let solo = fit_dmd(&SnapshotMatrix::new(l.latents[0].clone(), Arc::clone(&l.grid)).unwrap(), 2).unwrap();
        let want = solo.reconstruct(&l.grid).unwrap().state;
        let times = l.grid.instants();
        assert!(predict_monolithic(&mono, &[0.5], times, &spec).unwrap().sub(&want).max_abs() <= 1e-9);
        assert!(predict_partitioned(&part, &[0.5], times, &spec).unwrap().sub(&want).max_abs() <= 1e-9);
    }

    #[test]
    fn partitioned_members_and_training_points() {
        let ops = [rot(0.3, 0.95), rot(0.5, 0.9), rot(0.7, 0.85)];
        let x1 = vec![vec![1.0, 0.2]; 3];
        let l = latent(&[0.0, 0.5, 1.0], &ops, &x1, 10);
        let m = fit_partitioned(&l, &PartitionedOptions::default()).unwrap();
        for (mem, a) in m.members.iter().zip(&ops) {
            let Member::Dmd(d) = mem else { panic!() };
            for (g, w) in sorted(d.eigenvalues.clone()).iter().zip(sorted(eig(a).unwrap().eigenvalues)) {
                assert!((g - w).norm() <= 1e-8);
            }
        }
        let spec = RegressorSpec::new(RegressorKind::LinearInterp);
        let times = l.grid.instants();
        for (i, mu) in [0.0, 0.5, 1.0].iter().enumerate() {
            let Member::Dmd(d) = &m.members[i] else { panic!() };
            let want = d.reconstruct(&l.grid).unwrap().state;
            let got = predict_partitioned_latent(&m, &[*mu], times, &spec).unwrap();
            assert!(got.sub(&want).max_abs() <= 1e-9);
        }
    }

    #[test]
    fn linear_family_is_exact_and_fits_online() {
        // v(μ, t) = x(t) + μ y(t): both trajectories come from the same operator.
        let a = rot(0.4, 0.9);
        let ops = [a.clone(), a.clone(), a.clone()];
        let x1: Vec<Vec<f64>> = [0.0, 1.0, 2.0].iter().map(|&mu| vec![1.0 + mu, 0.5 - 0.25 * mu]).collect();
        let l = latent(&[0.0, 1.0, 2.0], &ops, &x1, 10);
        let spec = RegressorSpec::new(RegressorKind::LinearInterp);
        let mono = fit_monolithic(&l, Some(2)).unwrap();
        let part = fit_partitioned(&l, &PartitionedOptions::default()).unwrap();
        let truth = traj(&a, &[1.0 + 1.3, 0.5 - 0.25 * 1.3], 10);
        let times = l.grid.instants();

        let before = fit_count();
        let p = predict_partitioned_latent(&part, &[1.3], times, &spec).unwrap();
        assert_eq!(fit_count() - before, times.len() as u64);
        assert!(p.sub(&truth).max_abs() <= 1e-8);
        let q = predict_monolithic_latent(&mono, &[1.3], times, &spec).unwrap();
        assert!(q.sub(&truth).max_abs() <= 1e-8);

        let one = predict_monolithic(&mono, &[1.3], &[2.0], &spec).unwrap();
        assert_eq!(one.cols(), 1);
        assert!(predict_monolithic(&mono, &[1.3], &[0.3], &spec).is_err());
    }

    #[test]
    fn permutation_invariance() {
        let ops = [rot(0.3, 0.95), rot(0.5, 0.9), rot(0.7, 0.85)];
        let x1 = vec![vec![1.0, 0.2], vec![0.8, 0.1], vec![0.5, 0.3]];
        let l = latent(&[0.0, 0.5, 1.0], &ops, &x1, 10);
        let perm = [2, 0, 1];
        let lp = LatentDataset {
            params: perm.iter().map(|&i| l.params[i].clone()).collect(),
            latents: perm.iter().map(|&i| l.latents[i].clone()).collect(),
            ..l.clone()
        };
        let spec = RegressorSpec::new(RegressorKind::LinearInterp);
        let a = fit_partitioned(&l, &PartitionedOptions::default()).unwrap();
        let b = fit_partitioned(&lp, &PartitionedOptions::default()).unwrap();
        let times = l.grid.instants();
        let pa = predict_partitioned(&a, &[0.3], times, &spec).unwrap();
        let pb = predict_partitioned(&b, &[0.3], times, &spec).unwrap();
        assert!(pa.sub(&pb).max_abs() <= 1e-12);
    }

    #[test]
    fn optimized_members() {
        let ops = [rot(0.3, 0.95), rot(0.5, 0.9)];
        let x1 = vec![vec![1.0, 0.2]; 2];
        let l = latent(&[0.0, 1.0], &ops, &x1, 20);
        let opts = PartitionedOptions {
            member_rank: None,
            optimized: Some(SolverOptions::default()),
        };
        let m = fit_partitioned(&l, &opts).unwrap();
        let got = predict_partitioned_latent(&m, &[1.0], l.grid.instants(), &RegressorSpec::new(RegressorKind::LinearInterp)).unwrap();
        assert!(got.sub(&l.latents[1]).max_abs() <= 1e-8);
    }
}
