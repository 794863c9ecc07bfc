//! Reduced Koopman operator interpolation.
//!
//! Each training parameter gets an optimized-DMD model of its latent
//! trajectory. Triplets `(φ_j, ω_j, b_j)` are aligned across parameters and
//! regressed channel-wise (real and imaginary parts separately).

use rayon::prelude::*;

use crate::dmd::real_part_checked;
use crate::error::{Error, Result};
use crate::linalg::{dot_conj, Matrix};
use std::sync::Arc;

use crate::optdmd::{fit_bopdmd, fit_optdmd_matrix, OptDmdModel, SolverOptions};
use crate::snapshot::{SnapshotMatrix, TimeGrid};
use crate::reduction::{lift, GlobalBasis, LatentDataset};
use crate::regression::{fit, FittedRegressor, RegressorSpec};
use crate::scalar::{Real, C};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RkoiOptions {
    pub solver: SolverOptions,
    /// Exponentials per member; defaults to the latent rank.
    pub member_rank: Option<usize>,
    /// Largest `|ω_a − ω_b|` accepted when matching consecutive members.
    pub align_max_distance: Option<f64>,
    /// Bagged member fits; each member then uses the ensemble-mean `ω`.
    pub bagging: Option<Bagging>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bagging {
    pub trials: usize,
    pub fraction: f64,
    pub seed: u64,
}

impl Default for RkoiOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            member_rank: None,
            align_max_distance: None,
            bagging: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RkoiModel<T> {
    pub basis: GlobalBasis<T>,
    /// Exponentials per member.
    pub member_rank: usize,
    /// `μ ↦ [Re vec Φ, Im vec Φ]`.
    pub mode_regressor: FittedRegressor<T>,
    /// `μ ↦ [Re ω, Im ω]`.
    pub omega_regressor: FittedRegressor<T>,
    /// `μ ↦ [Re b, Im b]`.
    pub amp_regressor: FittedRegressor<T>,
    pub t0: T,
    /// Conjugate partner of each exponential; real ones point to themselves.
    pub partners: Vec<usize>,
    /// Solver and alignment notes collected while fitting.
    pub warnings: Vec<String>,
}

/// Regressed triplets at one parameter value.
#[derive(Clone, Debug, PartialEq)]
pub struct Triplets<T> {
    pub modes: Matrix<C<T>>,
    pub omegas: Vec<C<T>>,
    pub amplitudes: Vec<C<T>>,
}

pub fn fit_rkoi<T: Real>(latent: &LatentDataset<T>, spec: &RegressorSpec, opts: &RkoiOptions) -> Result<RkoiModel<T>> {
    let r = latent.rank();
    let rank = opts.member_rank.unwrap_or(r);
    let t0 = latent.grid.start();
    let members: Vec<OptDmdModel<T>> = latent
        .latents
        .par_iter()
        .map(|v| fit_member(v, &latent.grid, rank, opts))
        .collect::<Result<_>>()?;
    let mut warnings = Vec::new();
    for (i, m) in members.iter().enumerate() {
        if !m.converged {
            warnings.push(format!("member {i}: optimized dmd did not converge in {} iterations", m.iterations));
        }
    }

    let order = processing_order(&latent.params);
    let mut aligned: Vec<Option<OptDmdModel<T>>> = vec![None; members.len()];
    aligned[order[0]] = Some(members[order[0]].clone());
    for w in order.windows(2) {
        let prev = aligned[w[0]].as_ref().expect("aligned in order");
        let (m, distances) = align(prev, &members[w[1]]);
        if let Some(limit) = opts.align_max_distance {
            let distances: Vec<f64> = distances.iter().map(|d| d.to_f64_()).collect();
            if distances.iter().any(|&d| d > limit) {
                return Err(Error::AlignmentFailure {
                    from: w[0],
                    to: w[1],
                    distances,
                });
            }
        }
        if let Some(c) = collision(&m.omegas) {
            warnings.push(format!("member {}: eigenvalues {c:?} nearly collide", w[1]));
        }
        aligned[w[1]] = Some(m);
    }
    let aligned: Vec<OptDmdModel<T>> = aligned.into_iter().map(|m| m.expect("all aligned")).collect();
    for w in &warnings {
        log::warn!("{w}");
    }

    let n_p = aligned.len();
    let complex_rows = |f: &dyn Fn(&OptDmdModel<T>) -> Vec<C<T>>| {
        let rows: Vec<Vec<C<T>>> = aligned.iter().map(f).collect();
        let d = rows[0].len();
        Matrix::from_fn(n_p, 2 * d, |i, j| if j < d { rows[i][j].re } else { rows[i][j - d].im })
    };
    let phi = complex_rows(&|m| m.modes.data().to_vec());
    let om = complex_rows(&|m| m.omegas.clone());
    let amp = complex_rows(&|m| m.amplitudes.clone());

    let spec = spec.effective(n_p);
    Ok(RkoiModel {
        basis: latent.basis.clone(),
        member_rank: rank,
        mode_regressor: fit(&spec, &latent.params, &phi)?,
        omega_regressor: fit(&spec, &latent.params, &om)?,
        amp_regressor: fit(&spec, &latent.params, &amp)?,
        t0,
        partners: conjugate_partners(&aligned[order[0]].omegas),
        warnings,
    })
}

fn fit_member<T: Real>(v: &Matrix<T>, grid: &Arc<TimeGrid<T>>, rank: usize, opts: &RkoiOptions) -> Result<OptDmdModel<T>> {
    let (times, t0) = (grid.instants(), grid.start());
    match opts.bagging {
        None => fit_optdmd_matrix(v, times, t0, rank, None, &opts.solver),
        Some(b) => {
            let x = SnapshotMatrix::new(v.clone(), Arc::clone(grid))?;
            let bag = fit_bopdmd(&x, rank, b.trials, b.fraction, b.seed, &opts.solver)?;
            let fixed = SolverOptions {
                max_iters: 0,
                ..opts.solver
            };
            let mut m = fit_optdmd_matrix(v, times, t0, rank, Some(&bag.mean_omegas()), &fixed)?;
            m.converged = bag.members.iter().all(|b| b.converged);
            Ok(m)
        }
    }
}

/// Ascending parameter order for scalar parameters, dataset order otherwise.
fn processing_order<T: Real>(params: &[Vec<T>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..params.len()).collect();
    if params[0].len() == 1 {
        idx.sort_by(|&a, &b| params[a][0].partial_cmp(&params[b][0]).unwrap());
    }
    idx
}

/// Permutes `next` onto `prev` by greedy minimal `|Δω|` and rotates each mode
/// so its overlap with the matched previous mode is real and non-negative.
fn align<T: Real>(prev: &OptDmdModel<T>, next: &OptDmdModel<T>) -> (OptDmdModel<T>, Vec<T>) {
    let r = prev.rank;
    let mut pairs: Vec<(usize, usize, T)> = Vec::with_capacity(r * r);
    for a in 0..r {
        for b in 0..r {
            pairs.push((a, b, (prev.omegas[a] - next.omegas[b]).norm()));
        }
    }
    pairs.sort_by(|x, y| x.2.partial_cmp(&y.2).unwrap().then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));
    let mut perm = vec![usize::MAX; r];
    let mut used = vec![false; r];
    let mut distances = vec![T::zero(); r];
    for (a, b, d) in pairs {
        if perm[a] == usize::MAX && !used[b] {
            perm[a] = b;
            used[b] = true;
            distances[a] = d;
        }
    }
    let mut modes = next.modes.select_columns(&perm);
    let mut amplitudes: Vec<C<T>> = perm.iter().map(|&j| next.amplitudes[j]).collect();
    for j in 0..r {
        let overlap = dot_conj(modes.col(j), prev.modes.col(j));
        let mag = overlap.norm();
        if mag > T::zero() {
            let rot = overlap.unscale(mag);
            modes.col_mut(j).iter_mut().for_each(|z| *z *= rot);
            amplitudes[j] *= rot.conj();
        }
    }
    let aligned = OptDmdModel {
        omegas: perm.iter().map(|&j| next.omegas[j]).collect(),
        modes,
        amplitudes,
        ..next.clone()
    };
    (aligned, distances)
}

fn collision<T: Real>(omegas: &[C<T>]) -> Option<(usize, usize)> {
    let scale = omegas.iter().fold(T::one(), |a, z| a.max(z.norm()));
    for i in 0..omegas.len() {
        for j in i + 1..omegas.len() {
            if omegas[i] != omegas[j].conj() && (omegas[i] - omegas[j]).norm() < T::c(1e-6) * scale {
                return Some((i, j));
            }
        }
    }
    None
}

/// Partner index under conjugation, matched greedily by distance.
pub fn conjugate_partners<T: Real>(omegas: &[C<T>]) -> Vec<usize> {
    let scale = omegas.iter().fold(T::one(), |a, z| a.max(z.norm()));
    let tiny = T::c(1e-9) * scale;
    let mut partner: Vec<usize> = (0..omegas.len()).collect();
    let mut neg: Vec<usize> = (0..omegas.len()).filter(|&i| omegas[i].im < -tiny).collect();
    for i in (0..omegas.len()).filter(|&i| omegas[i].im > tiny) {
        let best = neg
            .iter()
            .enumerate()
            .map(|(k, &j)| (k, (omegas[i] - omegas[j].conj()).norm()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        if let Some((k, _)) = best {
            let j = neg.remove(k);
            partner[i] = j;
            partner[j] = i;
        }
    }
    partner
}

fn complex_channels<T: Real>(v: &[T]) -> Vec<C<T>> {
    let d = v.len() / 2;
    (0..d).map(|j| C::new(v[j], v[d + j])).collect()
}

/// Regressed `(Φ, ω, b)` at `mu`, symmetrized over conjugate pairs.
pub fn predict_triplets<T: Real>(m: &RkoiModel<T>, mu: &[T]) -> Result<Triplets<T>> {
    let r = m.basis.rank();
    let k = m.member_rank;
    let mut modes = Matrix::from_col_major(r, k, complex_channels(&m.mode_regressor.predict(mu)?))?;
    let mut omegas = complex_channels(&m.omega_regressor.predict(mu)?);
    let mut amplitudes = complex_channels(&m.amp_regressor.predict(mu)?);
    for j in 0..k {
        let p = m.partners[j];
        if p < j {
            continue;
        }
        let half = T::c(0.5);
        if p == j {
            omegas[j] = C::new(omegas[j].re, T::zero());
            amplitudes[j] = C::new(amplitudes[j].re, T::zero());
            modes.col_mut(j).iter_mut().for_each(|z| *z = C::new(z.re, T::zero()));
        } else {
            let w = (omegas[j] + omegas[p].conj()).scale(half);
            omegas[j] = w;
            omegas[p] = w.conj();
            let b = (amplitudes[j] + amplitudes[p].conj()).scale(half);
            amplitudes[j] = b;
            amplitudes[p] = b.conj();
            for i in 0..r {
                let z = (modes[(i, j)] + modes[(i, p)].conj()).scale(half);
                modes[(i, j)] = z;
                modes[(i, p)] = z.conj();
            }
        }
    }
    Ok(Triplets {
        modes,
        omegas,
        amplitudes,
    })
}

pub fn predict_rkoi_latent<T: Real>(m: &RkoiModel<T>, mu: &[T], times: &[T]) -> Result<Matrix<T>> {
    let tr = predict_triplets(m, mu)?;
    let r = m.basis.rank();
    let mut out = Matrix::zeros(r, times.len());
    for (c, &t) in times.iter().enumerate() {
        let dt = t - m.t0;
        let coeff: Vec<C<T>> = tr
            .omegas
            .iter()
            .zip(&tr.amplitudes)
            .map(|(&w, &b)| (w * dt).exp() * b)
            .collect();
        let v = tr.modes.matvec(&coeff);
        out.set_col(c, &real_part_checked(&v));
    }
    Ok(out)
}

pub fn predict_rkoi<T: Real>(m: &RkoiModel<T>, mu: &[T], times: &[T]) -> Result<Matrix<T>> {
    lift(&predict_rkoi_latent(m, mu, times)?, &m.basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optdmd::fit_optdmd_matrix;
    use crate::reduction::{fit_global_basis, project, BasisOptions};
    use crate::regression::RegressorKind;
    use crate::snapshot::{ParametricDataset, TimeGrid};
    use std::sync::Arc;

    fn dataset(mus: &[f64], n_t: usize, dt: f64, f: impl Fn(f64, f64) -> Vec<f64>) -> ParametricDataset<f64> {
        let grid = Arc::new(TimeGrid::uniform(0.0, dt, n_t).unwrap());
        let trajs = mus
            .iter()
            .map(|&mu| {
                let cols: Vec<Vec<f64>> = grid.instants().iter().map(|&t| f(mu, t)).collect();
                Matrix::from_columns(cols[0].len(), &cols).unwrap()
            })
            .collect();
        ParametricDataset::new(mus.iter().map(|&m| vec![m]).collect(), trajs, grid).unwrap()
    }

    fn latent(d: &ParametricDataset<f64>, r: usize) -> LatentDataset<f64> {
        let b = fit_global_basis(d, r, &BasisOptions::default()).unwrap();
        project(d, &b).unwrap()
    }

    #[test]
    fn decay_family_midpoint() {
        let d = dataset(&[0.1, 0.2, 0.3], 41, 0.25, |mu, t| vec![(-mu * t).exp(), 0.5 * (-mu * t).exp()]);
        let l = latent(&d, 1);
        let m = fit_rkoi(&l, &RegressorSpec::new(RegressorKind::LinearInterp), &RkoiOptions::default()).unwrap();
        let tr = predict_triplets(&m, &[0.25]).unwrap();
        assert!((tr.omegas[0] - C::new(-0.25, 0.0)).norm() < 1e-4);

        let times: Vec<f64> = (0..60).map(|k| 0.25 * k as f64).collect();
        let pred = predict_rkoi(&m, &[0.25], &times).unwrap();
        for (k, &t) in times.iter().enumerate() {
            assert!((pred[(0, k)] - (-0.25 * t).exp()).abs() < 1e-3);
        }
    }

    #[test]
    fn frequency_family() {
        let d = dataset(&[0.0, 0.5, 1.0], 81, 0.1, |mu, t| {
            let w = 1.0 + mu;
            vec![(w * t).cos(), (w * t).sin()]
        });
        let l = latent(&d, 2);
        let m = fit_rkoi(&l, &RegressorSpec::new(RegressorKind::LinearInterp), &RkoiOptions::default()).unwrap();
        let tr = predict_triplets(&m, &[0.25]).unwrap();
        let mut im: Vec<f64> = tr.omegas.iter().map(|w| w.im).collect();
        im.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((im[0] - 1.25).abs() < 1e-3 && (im[1] + 1.25).abs() < 1e-3, "{im:?}");
        assert_eq!(tr.omegas[0], tr.omegas[m.partners[0]].conj());
    }

    #[test]
    fn training_points_reproduce_members() {
        let d = dataset(&[0.2, 0.4, 0.7], 30, 0.2, |mu, t| {
            vec![(-mu * t).exp() * (2.0 * t).cos(), (-mu * t).exp() * (2.0 * t).sin(), (-0.5 * t).exp()]
        });
        let l = latent(&d, 3);
        let opts = RkoiOptions::default();
        let m = fit_rkoi(&l, &RegressorSpec::new(RegressorKind::LinearInterp), &opts).unwrap();
        let times = l.grid.instants();
        for (i, mu) in [0.2, 0.4, 0.7].iter().enumerate() {
            let member = fit_optdmd_matrix(&l.latents[i], times, 0.0, 3, None, &opts.solver).unwrap();
            let want = member.reconstruct(times);
            let got = predict_rkoi_latent(&m, &[*mu], times).unwrap();
            assert!(got.sub(&want).max_abs() <= 1e-8, "{}", got.sub(&want).max_abs());
        }
        // exp(0) = 1: the first instant is the initial latent state up to fit error.
        let v0 = predict_rkoi_latent(&m, &[0.4], &[0.0]).unwrap();
        let err: f64 = (0..3).map(|j| (v0[(j, 0)] - l.latents[1][(j, 0)]).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-8);
    }

    #[test]
    fn single_parameter_is_constant() {
        let d = dataset(&[0.3], 20, 0.2, |mu, t| vec![(-mu * t).exp()]);
        let l = latent(&d, 1);
        let m = fit_rkoi(&l, &RegressorSpec::new(RegressorKind::LinearInterp), &RkoiOptions::default()).unwrap();
        let a = predict_rkoi(&m, &[0.3], &[1.0]).unwrap();
        let b = predict_rkoi(&m, &[5.0], &[1.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn alignment_limit() {
        let d = dataset(&[0.1, 1.5], 30, 0.2, |mu, t| vec![(-mu * t).exp()]);
        let l = latent(&d, 1);
        let opts = RkoiOptions {
            align_max_distance: Some(0.5),
            ..Default::default()
        };
        let err = fit_rkoi(&l, &RegressorSpec::new(RegressorKind::LinearInterp), &opts).unwrap_err();
        assert!(matches!(err, Error::AlignmentFailure { .. }));
    }

    #[test]
    fn bagged_members() {
        let d = dataset(&[0.1, 0.2, 0.3], 41, 0.25, |mu, t| vec![(-mu * t).exp(), 0.5 * (-mu * t).exp()]);
        let l = latent(&d, 1);
        let opts = RkoiOptions {
            bagging: Some(Bagging {
                trials: 8,
                fraction: 0.8,
                seed: 3,
            }),
            ..Default::default()
        };
        let m = fit_rkoi(&l, &RegressorSpec::new(RegressorKind::LinearInterp), &opts).unwrap();
        let tr = predict_triplets(&m, &[0.25]).unwrap();
        assert!((tr.omegas[0] - C::new(-0.25, 0.0)).norm() < 1e-4);
    }

    #[test]
    fn partners() {
        let w = [C::new(0.0, 1.0), C::new(-1.0, 0.0), C::new(0.0, -1.0)];
        assert_eq!(conjugate_partners(&w), vec![2, 1, 0]);
    }
}
