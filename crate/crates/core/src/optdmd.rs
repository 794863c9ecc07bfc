//! Optimized DMD by variable projection, and bagged ensembles of it.
//!
//! The snapshots are fit as `x(t) ≈ Σ_j φ_j b_j exp(ω_j (t − t0))`. For fixed
//! `ω` the coefficients solve a linear least-squares problem; the outer
//! Levenberg–Marquardt loop runs over `ω` alone with the Kaufman Jacobian.

use std::sync::Arc;

use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dmd::{fit_dmd_matrix, real_part_checked, DmdOptions, RankPolicy};
use crate::error::{Error, Result};
use crate::linalg::{canonical_order, eig, lstsq, phase_normalize, thin_svd, Matrix, Qr};
use crate::scalar::{Field, Real, C};
use crate::snapshot::{SnapshotMatrix, TimeGrid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Relative objective decrease below which an accepted step ends the solve.
    pub tol_obj: f64,
    /// Step norm (relative to `1 + ‖ω‖`) below which the solve ends.
    pub tol_step: f64,
    pub max_iters: usize,
    pub damping: f64,
    pub damping_up: f64,
    pub damping_down: f64,
    /// Consecutive rejected trial steps tolerated before giving up.
    pub max_stall: usize,
    /// Project `ω` onto conjugate-closed sets after each step.
    pub conjugate_pairs: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_obj: 1e-10,
            tol_step: 1e-12,
            max_iters: 200,
            damping: 1e-2,
            damping_up: 2.0,
            damping_down: 3.0,
            max_stall: 30,
            conjugate_pairs: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptDmdModel<T> {
    pub rank: usize,
    /// Continuous eigenvalues, descending real part then descending imaginary part.
    pub omegas: Vec<C<T>>,
    /// Unit-norm columns, N×r.
    pub modes: Matrix<C<T>>,
    pub amplitudes: Vec<C<T>>,
    pub t0: T,
    /// `‖X − Φ diag(b) E(ω)ᵀ‖_F` at the returned `ω`.
    pub residual: T,
    /// Same quantity at the initial guess.
    pub initial_residual: T,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Real> OptDmdModel<T> {
    pub fn state_dim(&self) -> usize {
        self.modes.rows()
    }

    pub fn predict_complex(&self, t: T) -> Vec<C<T>> {
        let dt = t - self.t0;
        let coeff: Vec<C<T>> = self
            .omegas
            .iter()
            .zip(&self.amplitudes)
            .map(|(&w, &b)| (w * dt).exp() * b)
            .collect();
        self.modes.matvec(&coeff)
    }

    /// Real part of `Φ diag(b) exp(ω (t − t0))`.
    pub fn predict(&self, t: T) -> Vec<T> {
        real_part_checked(&self.predict_complex(t))
    }

    pub fn reconstruct(&self, times: &[T]) -> Matrix<T> {
        let cols: Vec<Vec<T>> = times.iter().map(|&t| self.predict(t)).collect();
        Matrix::from_columns(self.state_dim(), &cols).expect("uniform column length")
    }
}

pub fn fit_optdmd<T: Real>(
    x: &SnapshotMatrix<T>,
    rank: usize,
    init: Option<&[C<T>]>,
    opts: &SolverOptions,
) -> Result<OptDmdModel<T>> {
    fit_optdmd_matrix(&x.state, x.grid.instants(), x.grid.start(), rank, init, opts)
}

/// Variable-projection fit of `state` sampled at `times`, exponentials anchored at `t0`.
pub fn fit_optdmd_matrix<T: Real>(
    state: &Matrix<T>,
    times: &[T],
    t0: T,
    rank: usize,
    init: Option<&[C<T>]>,
    opts: &SolverOptions,
) -> Result<OptDmdModel<T>> {
    let (n, m) = state.shape();
    if m != times.len() {
        return Err(Error::DimensionMismatch {
            context: "snapshot columns vs time instants",
            expected: times.len(),
            found: m,
        });
    }
    if rank == 0 || 2 * rank > m {
        return Err(Error::RankOutOfRange { rank, max: m / 2 });
    }
    if !state.all_finite() {
        return Err(Error::NonFinite("snapshot matrix"));
    }
    let omega0 = match init {
        Some(w) => {
            if w.len() != rank {
                return Err(Error::DimensionMismatch {
                    context: "initial omega count",
                    expected: rank,
                    found: w.len(),
                });
            }
            w.to_vec()
        }
        None => initial_omegas(state, times, rank)?,
    };
    let tau: Vec<T> = times.iter().map(|&t| t - t0).collect();
    let xt = state.transpose().to_complex();
    let sol = varpro(&xt, &tau, omega0, opts);

    let order = canonical_order(&sol.omega, |z| z.re, |z| z.im);
    let mut modes = Matrix::zeros(n, rank);
    let mut amplitudes = Vec::with_capacity(rank);
    let mut omegas = Vec::with_capacity(rank);
    for (col, &j) in order.iter().enumerate() {
        let mut v: Vec<C<T>> = (0..n).map(|k| sol.b[(j, k)]).collect();
        let norm = crate::linalg::norm2(&v);
        if norm > T::zero() {
            let rot = phase_normalize(&mut v);
            v.iter_mut().for_each(|z| *z = z.unscale(norm));
            amplitudes.push(rot.conj().scale(norm));
        } else {
            v[0] = C::one();
            amplitudes.push(C::zero());
        }
        modes.set_col(col, &v);
        omegas.push(sol.omega[j]);
    }
    Ok(OptDmdModel {
        rank,
        omegas,
        modes,
        amplitudes,
        t0,
        residual: sol.objective.sqrt(),
        initial_residual: sol.initial_objective.sqrt(),
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

struct Varpro<T> {
    omega: Vec<C<T>>,
    /// r×N coefficient rows `b_j φ_jᵀ`.
    b: Matrix<C<T>>,
    objective: T,
    initial_objective: T,
    iterations: usize,
    converged: bool,
}

struct Eval<T> {
    e: Matrix<C<T>>,
    q: Matrix<C<T>>,
    b: Matrix<C<T>>,
    r: Matrix<C<T>>,
    f: T,
}

fn exp_matrix<T: Real>(tau: &[T], omega: &[C<T>]) -> Matrix<C<T>> {
    Matrix::from_fn(tau.len(), omega.len(), |k, j| (omega[j] * tau[k]).exp())
}

fn evaluate<T: Real>(xt: &Matrix<C<T>>, tau: &[T], omega: &[C<T>]) -> Option<Eval<T>> {
    let e = exp_matrix(tau, omega);
    if !e.all_finite() {
        return None;
    }
    let qr = Qr::new(&e);
    let q = qr.thin_q();
    let mut b = Matrix::zeros(omega.len(), xt.cols());
    for j in 0..xt.cols() {
        b.set_col(j, &qr.solve_least_squares(xt.col(j), T::c(1e-14)));
    }
    let r = xt.sub(&e.matmul(&b));
    let f = r.frobenius_norm().powi(2);
    if !f.is_finite() {
        return None;
    }
    Some(Eval { e, q, b, r, f })
}

fn varpro<T: Real>(xt: &Matrix<C<T>>, tau: &[T], omega0: Vec<C<T>>, opts: &SolverOptions) -> Varpro<T> {
    let r = omega0.len();
    let mut omega = omega0;
    if opts.conjugate_pairs {
        project_conjugate(&mut omega);
    }
    let scale2 = xt.frobenius_norm().powi(2);
    let floor = (T::eps() * T::c(10.0)).powi(2) * scale2;
    let mut cur = match evaluate(xt, tau, &omega) {
        Some(ev) => ev,
        None => {
            // Initial guess overflows; fall back to a neutral start.
            omega.iter_mut().for_each(|w| w.re = T::zero().min(w.re).max(-T::one()));
            evaluate(xt, tau, &omega).expect("bounded exponentials")
        }
    };
    let initial_objective = cur.f;
    let mut lambda = T::c(opts.damping);
    let mut iterations = 0;
    let mut converged = cur.f <= floor;

    while !converged && iterations < opts.max_iters {
        iterations += 1;
        // g_j = P⊥ ∂E/∂ω_j
        let mut g = Matrix::zeros(tau.len(), r);
        for j in 0..r {
            let de: Vec<C<T>> = (0..tau.len()).map(|k| cur.e[(k, j)].scale(tau[k])).collect();
            let coef = cur.q.adjoint_matvec(&de);
            let proj = cur.q.matvec(&coef);
            let col: Vec<C<T>> = de.iter().zip(&proj).map(|(&a, &b)| a - b).collect();
            g.set_col(j, &col);
        }
        let gg = g.adjoint_matmul(&g);
        let bb = Matrix::from_fn(r, r, |i, j| {
            (0..cur.b.cols()).fold(C::zero(), |acc, n| acc + cur.b[(i, n)].conj() * cur.b[(j, n)])
        });
        let h = Matrix::from_fn(r, r, |i, j| gg[(i, j)] * bb[(i, j)]);
        let rhs: Vec<C<T>> = (0..r)
            .map(|j| {
                let rb: Vec<C<T>> = (0..tau.len())
                    .map(|k| (0..cur.b.cols()).fold(C::zero(), |acc, n| acc + cur.r[(k, n)] * cur.b[(j, n)].conj()))
                    .collect();
                crate::linalg::dot_conj(g.col(j), &rb)
            })
            .collect();
        let dmax = (0..r).fold(T::zero(), |a, i| a.max(h[(i, i)].re));
        let mut accepted = false;
        let mut stall = 0;
        while stall <= opts.max_stall {
            let mut sys = h.clone();
            for i in 0..r {
                let d = h[(i, i)].re.max(T::c(1e-12) * dmax).max(T::min_positive_value());
                sys[(i, i)] += C::from_real(lambda * d);
            }
            let rhs_m = Matrix::from_col_major(r, 1, rhs.clone()).expect("r entries");
            let delta = lstsq(&sys, &rhs_m, T::c(1e-15)).into_data();
            let mut trial: Vec<C<T>> = omega.iter().zip(&delta).map(|(&w, &d)| w + d).collect();
            if opts.conjugate_pairs {
                project_conjugate(&mut trial);
            }
            let step = crate::linalg::norm2(
                &trial.iter().zip(&omega).map(|(&a, &b)| a - b).collect::<Vec<_>>(),
            );
            let wnorm = crate::linalg::norm2(&omega);
            match evaluate(xt, tau, &trial) {
                Some(ev) if ev.f < cur.f => {
                    let rel = (cur.f - ev.f) / cur.f;
                    omega = trial;
                    cur = ev;
                    lambda /= T::c(opts.damping_down);
                    accepted = true;
                    if rel < T::c(opts.tol_obj)
                        || step <= T::c(opts.tol_step) * (T::one() + wnorm)
                        || cur.f <= floor
                    {
                        converged = true;
                    }
                    break;
                }
                _ => {
                    if step <= T::c(opts.tol_step) * (T::one() + wnorm) {
                        // No decrease even for a negligible step: stationary.
                        converged = true;
                        break;
                    }
                    lambda *= T::c(opts.damping_up);
                    stall += 1;
                }
            }
        }
        if !accepted {
            break;
        }
    }
    if !converged {
        log::warn!("optimized dmd stopped after {iterations} iterations without meeting tolerances");
    }
    Varpro {
        omega,
        b: cur.b,
        objective: cur.f,
        initial_objective,
        iterations,
        converged,
    }
}

/// Makes `ω` closed under conjugation by averaging matched `(z, z̄)` pairs.
pub fn project_conjugate<T: Real>(omega: &mut [C<T>]) {
    let scale = omega.iter().fold(T::zero(), |a, z| a.max(z.norm())).max(T::one());
    let tiny = T::c(1e-12) * scale;
    let pos: Vec<usize> = (0..omega.len()).filter(|&i| omega[i].im > tiny).collect();
    let mut neg: Vec<usize> = (0..omega.len()).filter(|&i| omega[i].im < -tiny).collect();
    for w in omega.iter_mut().filter(|w| w.im.abs() <= tiny) {
        w.im = T::zero();
    }
    for &i in &pos {
        let best = neg
            .iter()
            .enumerate()
            .map(|(k, &j)| (k, (omega[i] - omega[j].conj()).norm()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        match best {
            Some((k, _)) => {
                let j = neg.remove(k);
                let z = (omega[i] + omega[j].conj()).unscale(T::c(2.0));
                omega[i] = z;
                omega[j] = z.conj();
            }
            None => omega[i].im = T::zero(),
        }
    }
    for j in neg {
        omega[j].im = T::zero();
    }
}

/// Warm start for `ω`: DMD eigenvalue logarithms on uniform grids, a trapezoid
/// surrogate otherwise.
fn initial_omegas<T: Real>(state: &Matrix<T>, times: &[T], rank: usize) -> Result<Vec<C<T>>> {
    let grid = TimeGrid::new(times.to_vec())?;
    let n = state.rows();
    if grid.is_uniform() {
        return hankel_dmd_omegas(state, grid.dt(), rank);
    }
    if n >= rank {
        return trapezoid_omegas(state, times, rank);
    }
    // Resample onto a uniform grid with the same count, then use delays.
    let m = times.len();
    let dt = (grid.end() - grid.start()) / T::from_usize_(m - 1);
    let mut cols = Vec::with_capacity(m);
    let mut seg = 0;
    for k in 0..m {
        let t = grid.start() + dt * T::from_usize_(k);
        while seg + 2 < m && times[seg + 1] < t {
            seg += 1;
        }
        let w = ((t - times[seg]) / (times[seg + 1] - times[seg])).max(T::zero()).min(T::one());
        let col: Vec<T> = (0..n)
            .map(|i| state[(i, seg)] * (T::one() - w) + state[(i, seg + 1)] * w)
            .collect();
        cols.push(col);
    }
    hankel_dmd_omegas(&Matrix::from_columns(n, &cols)?, dt, rank)
}

fn hankel_dmd_omegas<T: Real>(state: &Matrix<T>, dt: T, rank: usize) -> Result<Vec<C<T>>> {
    let (n, m) = state.shape();
    let d = rank.div_ceil(n).max(1);
    let cols = m - d + 1;
    let h = Matrix::from_fn(n * d, cols, |i, j| state[(i % n, j + i / n)]);
    let grid = TimeGrid::uniform(T::zero(), dt, cols)?;
    let r = rank.min(n * d).min(cols - 1);
    let opts = DmdOptions {
        rank_policy: RankPolicy::ClampNumerical,
        ..Default::default()
    };
    let mut omegas: Vec<C<T>> = match fit_dmd_matrix(&h, &grid, r, &opts) {
        Ok(model) => model.omegas(),
        Err(Error::AllBelowCutoff) => vec![],
        Err(e) => return Err(e),
    };
    finish_guess(&mut omegas, rank, dt);
    Ok(omegas)
}

fn trapezoid_omegas<T: Real>(state: &Matrix<T>, times: &[T], rank: usize) -> Result<Vec<C<T>>> {
    let (n, m) = state.shape();
    let mid = Matrix::from_fn(n, m - 1, |i, k| (state[(i, k)] + state[(i, k + 1)]) / T::c(2.0));
    let diff = Matrix::from_fn(n, m - 1, |i, k| (state[(i, k + 1)] - state[(i, k)]) / (times[k + 1] - times[k]));
    let svd = thin_svd(&mid);
    let s1 = svd.singular_values.first().copied().unwrap_or_else(T::zero);
    let r = svd
        .singular_values
        .iter()
        .take(rank)
        .take_while(|&&s| s > T::c(1e-12) * s1 && s > T::zero())
        .count();
    let mut omegas = if r == 0 {
        vec![]
    } else {
        let svd = svd.truncate(r);
        let mut dvs = diff.matmul(&svd.right_v);
        for (j, &s) in svd.singular_values.iter().enumerate() {
            dvs.col_mut(j).iter_mut().for_each(|v| *v /= s);
        }
        eig(&svd.modes_u.adjoint_matmul(&dvs))?.eigenvalues
    };
    let span = (times[m - 1] - times[0]) / T::from_usize_(m - 1);
    finish_guess(&mut omegas, rank, span);
    Ok(omegas)
}

/// Replaces non-finite guesses and pads to `rank` with decaying real rates.
fn finish_guess<T: Real>(omegas: &mut Vec<C<T>>, rank: usize, dt: T) {
    let floor = -T::c(30.0) / dt;
    for w in omegas.iter_mut() {
        if !w.re.is_finite() || w.re < floor {
            w.re = floor;
        }
        if !w.im.is_finite() {
            w.im = T::zero();
        }
    }
    let mut k = 1;
    while omegas.len() < rank {
        omegas.push(C::new(-T::from_usize_(k) / dt, T::zero()));
        k += 1;
    }
}

/// Ensemble of optimized-DMD fits on random time subsets.
#[derive(Clone, Debug, PartialEq)]
pub struct BaggedOptDmd<T> {
    /// Members with `ω` matched to the first member's ordering.
    pub members: Vec<OptDmdModel<T>>,
    pub subset_fraction: f64,
    pub trials: usize,
}

impl<T: Real> BaggedOptDmd<T> {
    /// Component-wise mean of the matched `ω`.
    pub fn mean_omegas(&self) -> Vec<C<T>> {
        let k = T::from_usize_(self.members.len());
        let r = self.members[0].rank;
        (0..r)
            .map(|j| self.members.iter().fold(C::zero(), |acc, m| acc + m.omegas[j]).unscale(k))
            .collect()
    }

    /// Mean of the member predictions at `t`, real part.
    pub fn predict(&self, t: T) -> Vec<T> {
        ensemble_predict(self, t)
    }
}

pub fn ensemble_predict<T: Real>(e: &BaggedOptDmd<T>, t: T) -> Vec<T> {
    let n = e.members[0].state_dim();
    let mut acc = vec![C::<T>::zero(); n];
    for m in &e.members {
        for (a, v) in acc.iter_mut().zip(m.predict_complex(t)) {
            *a += v;
        }
    }
    let k = T::from_usize_(e.members.len());
    acc.iter_mut().for_each(|a| *a = a.unscale(k));
    real_part_checked(&acc)
}

pub fn fit_bopdmd<T: Real>(
    x: &SnapshotMatrix<T>,
    rank: usize,
    trials: usize,
    subset_fraction: f64,
    seed: u64,
    opts: &SolverOptions,
) -> Result<BaggedOptDmd<T>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("bagging needs at least one trial".into()));
    }
    if !(subset_fraction > 0.0 && subset_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "subset fraction must lie in (0, 1], got {subset_fraction}"
        )));
    }
    let m = x.n_t();
    let subset = ((subset_fraction * m as f64).round() as usize).min(m);
    if subset < 2 * rank {
        return Err(Error::SubsetTooSmall {
            subset,
            rank,
            needed: 2 * rank,
        });
    }
    let full = fit_optdmd(x, rank, None, opts)?;
    let members: Vec<OptDmdModel<T>> = if subset == m {
        vec![full; trials]
    } else {
        (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(trial as u64);
                let mut idx = rand::seq::index::sample(&mut rng, m, subset).into_vec();
                idx.sort_unstable();
                let times: Vec<T> = idx.iter().map(|&k| x.grid.instants()[k]).collect();
                fit_optdmd_matrix(&x.state.select_columns(&idx), &times, full.t0, rank, Some(&full.omegas), opts)
            })
            .collect::<Result<_>>()?
    };
    let reference = members[0].omegas.clone();
    let members = members.into_iter().map(|m| match_to(&reference, m)).collect();
    Ok(BaggedOptDmd {
        members,
        subset_fraction,
        trials,
    })
}

/// Reorders a member so its `ω_j` is the nearest unclaimed match to `reference[j]`.
fn match_to<T: Real>(reference: &[C<T>], m: OptDmdModel<T>) -> OptDmdModel<T> {
    let mut free: Vec<usize> = (0..m.rank).collect();
    let mut perm = Vec::with_capacity(m.rank);
    for r in reference {
        let (k, _) = free
            .iter()
            .enumerate()
            .map(|(k, &j)| (k, (m.omegas[j] - r).norm()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("equal ranks");
        perm.push(free.remove(k));
    }
    OptDmdModel {
        omegas: perm.iter().map(|&j| m.omegas[j]).collect(),
        amplitudes: perm.iter().map(|&j| m.amplitudes[j]).collect(),
        modes: m.modes.select_columns(&perm),
        ..m
    }
}

/// Convenience for building a shared grid from a slice.
pub fn grid_of<T: Real>(times: &[T]) -> Result<Arc<TimeGrid<T>>> {
    Ok(Arc::new(TimeGrid::new(times.to_vec())?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal(f: impl Fn(f64) -> Vec<f64>, times: &[f64]) -> SnapshotMatrix<f64> {
        let cols: Vec<Vec<f64>> = times.iter().map(|&t| f(t)).collect();
        let n = cols[0].len();
        SnapshotMatrix::new(Matrix::from_columns(n, &cols).unwrap(), grid_of(times).unwrap()).unwrap()
    }

    fn uniform(t_end: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn scalar_decay() {
        let x = signal(|t| vec![(-0.3 * t).exp()], &uniform(5.0, 51));
        let m = fit_optdmd(&x, 1, None, &SolverOptions::default()).unwrap();
        assert!((m.omegas[0] - C::new(-0.3, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn two_tone() {
        let x = signal(|t| vec![2.0 * (2.0 * t).cos() * (-0.1 * t).exp()], &uniform(10.0, 201));
        let m = fit_optdmd(&x, 2, None, &SolverOptions::default()).unwrap();
        assert!((m.omegas[0] - C::new(-0.1, 2.0)).norm() < 1e-5, "{:?}", m.omegas);
        assert!((m.omegas[1] - C::new(-0.1, -2.0)).norm() < 1e-5);
        assert!(m.residual <= m.initial_residual);
    }

    #[test]
    fn two_tone_from_poor_guess() {
        let x = signal(|t| vec![2.0 * (2.0 * t).cos() * (-0.1 * t).exp()], &uniform(10.0, 201));
        let init = [C::new(-0.3, 1.8), C::new(-0.3, -1.8)];
        let m = fit_optdmd(&x, 2, Some(&init), &SolverOptions::default()).unwrap();
        assert!((m.omegas[0] - C::new(-0.1, 2.0)).norm() < 1e-5, "{:?}", m.omegas);
        assert!(m.residual <= m.initial_residual);
    }

    #[test]
    fn constant_signal() {
        let x = signal(|_| vec![1.5, -0.5], &uniform(1.0, 11));
        let m = fit_optdmd(&x, 1, None, &SolverOptions::default()).unwrap();
        assert!(m.omegas[0].norm() < 1e-8);
    }

    #[test]
    fn nonuniform_grid() {
        let times: Vec<f64> = (0..60).map(|k| 0.1 * k as f64 + 0.03 * ((k * 7 % 5) as f64)).collect();
        let x = signal(|t| vec![(-0.2 * t).exp() + 0.5 * (-1.0 * t).exp(), (-0.2 * t).exp()], &times);
        let m = fit_optdmd(&x, 2, None, &SolverOptions::default()).unwrap();
        assert!((m.omegas[0] - C::new(-0.2, 0.0)).norm() < 1e-6, "{:?}", m.omegas);
        assert!((m.omegas[1] - C::new(-1.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn residual_self_consistency() {
        let times = uniform(4.0, 41);
        let x = signal(|t| vec![(-0.5 * t).exp() + 0.01 * (13.0 * t).sin(), (0.1 * t).cos()], &times);
        let m = fit_optdmd(&x, 2, None, &SolverOptions::default()).unwrap();
        let rec = m.reconstruct(&times);
        let err = rec.sub(&x.state).frobenius_norm();
        assert!((err - m.residual).abs() <= 1e-8 * x.state.frobenius_norm());
    }

    #[test]
    fn modes_unit_norm() {
        let x = signal(|t| vec![3.0 * (-0.3 * t).exp(), 4.0 * (-0.3 * t).exp()], &uniform(5.0, 51));
        let m = fit_optdmd(&x, 1, None, &SolverOptions::default()).unwrap();
        assert!((crate::linalg::norm2(m.modes.col(0)) - 1.0).abs() < 1e-12);
        assert!((m.amplitudes[0].norm() - 5.0).abs() < 1e-8);
    }

    #[test]
    fn rank_too_large() {
        let x = signal(|t| vec![t], &uniform(1.0, 5));
        assert!(matches!(
            fit_optdmd(&x, 3, None, &SolverOptions::default()),
            Err(Error::RankOutOfRange { .. })
        ));
    }

    #[test]
    fn bagging_degenerate_and_noiseless() {
        let x = signal(|t| vec![2.0 * (2.0 * t).cos() * (-0.1 * t).exp()], &uniform(10.0, 201));
        let opts = SolverOptions::default();
        let single = fit_bopdmd(&x, 2, 1, 1.0, 7, &opts).unwrap();
        assert_eq!(single.members[0], fit_optdmd(&x, 2, None, &opts).unwrap());
        let t = 3.3;
        assert_eq!(ensemble_predict(&single, t), single.members[0].predict(t));

        let bag = fit_bopdmd(&x, 2, 10, 0.8, 7, &opts).unwrap();
        assert_eq!(bag.members.len(), 10);
        for m in &bag.members {
            assert!((m.omegas[0] - C::new(-0.1, 2.0)).norm() < 1e-4);
            assert!((m.omegas[1] - C::new(-0.1, -2.0)).norm() < 1e-4);
        }
        let p = ensemble_predict(&bag, 4.2)[0];
        let truth = 2.0 * (2.0f64 * 4.2).cos() * (-0.42f64).exp();
        assert!((p - truth).abs() < 1e-4);

        let again = fit_bopdmd(&x, 2, 10, 0.8, 7, &opts).unwrap();
        assert_eq!(bag, again);
        assert!(matches!(fit_bopdmd(&x, 2, 3, 0.015, 7, &opts), Err(Error::SubsetTooSmall { .. })));
    }

    #[test]
    fn conjugate_projection() {
        let mut w = vec![C::new(-0.1, 2.0 + 1e-3), C::new(-0.12, -2.0), C::new(0.5, 1e-15)];
        project_conjugate(&mut w);
        assert_eq!(w[0], w[1].conj());
        assert_eq!(w[2].im, 0.0);
    }
}
