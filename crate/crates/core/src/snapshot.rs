//! Snapshot data model: time grids, single trajectories, and parametric datasets.

use std::collections::BTreeSet;
use std::sync::Arc;


use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Relative tolerance used to decide whether a grid is uniformly spaced.
pub const UNIFORM_TOL: f64 = 1e-9;

/// Strictly increasing sampling instants.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid<T> {
    instants: Vec<T>,
    uniform: bool,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(instants: Vec<T>) -> Result<Self> {
        if instants.len() < 2 {
            return Err(Error::TimeGridTooShort {
                min: 2,
                found: instants.len(),
            });
        }
        if instants.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("time grid"));
        }
        if instants.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::TimeGridNotIncreasing);
        }
        let uniform = is_uniform(&instants);
        Ok(Self { instants, uniform })
    }

    /// `n` instants `t0, t0 + dt, …`.
    pub fn uniform(t0: T, dt: T, n: usize) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        Self::new((0..n).map(|k| t0 + dt * T::from_usize_(k)).collect())
    }

    pub fn instants(&self) -> &[T] {
        &self.instants
    }

    pub fn len(&self) -> usize {
        self.instants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instants.is_empty()
    }

    pub fn start(&self) -> T {
        self.instants[0]
    }

    pub fn end(&self) -> T {
        self.instants[self.instants.len() - 1]
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Mean step; meaningful as "the" step only when the grid is uniform.
    pub fn dt(&self) -> T {
        (self.end() - self.start()) / T::from_usize_(self.len() - 1)
    }

    /// Step for uniform grids, otherwise an error.
    pub fn uniform_dt(&self) -> Result<T> {
        if self.uniform {
            Ok(self.dt())
        } else {
            Err(Error::NonUniformGrid)
        }
    }
}

fn is_uniform<T: Real>(t: &[T]) -> bool {
    let n = t.len();
    let mean = (t[n - 1] - t[0]) / T::from_usize_(n - 1);
    let tol = T::c(UNIFORM_TOL) * mean.abs();
    t.windows(2).all(|w| ((w[1] - w[0]) - mean).abs() <= tol)
}

/// Maps instants onto integer lattice indices `k ≥ 1` with `t = t0 + (k−1)·dt`.
pub fn lattice_indices<T: Real>(times: &[T], t0: T, dt: T) -> Result<Vec<usize>> {
    times
        .iter()
        .map(|&t| {
            let x = (t - t0) / dt;
            let k = x.round();
            let tol = T::c(UNIFORM_TOL) * k.abs().max(T::one());
            if !x.is_finite() || (x - k).abs() > tol || k < T::zero() {
                return Err(Error::OffLattice {
                    t: t.to_f64_(),
                    t0: t0.to_f64_(),
                    dt: dt.to_f64_(),
                });
            }
            Ok(k.to_usize().unwrap_or(0) + 1)
        })
        .collect()
}

/// One trajectory: `N_h × N_t` state matrix sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMatrix<T> {
    pub state: Matrix<T>,
    pub grid: Arc<TimeGrid<T>>,
}

impl<T: Real> SnapshotMatrix<T> {
    pub fn new(state: Matrix<T>, grid: Arc<TimeGrid<T>>) -> Result<Self> {
        if state.cols() != grid.len() {
            return Err(Error::DimensionMismatch {
                context: "snapshot columns vs time grid",
                expected: grid.len(),
                found: state.cols(),
            });
        }
        if state.rows() == 0 {
            return Err(Error::InvalidArgument("snapshot state must have at least one row".into()));
        }
        if !state.all_finite() {
            return Err(Error::NonFinite("snapshot matrix"));
        }
        Ok(Self { state, grid })
    }

    pub fn n_h(&self) -> usize {
        self.state.rows()
    }

    pub fn n_t(&self) -> usize {
        self.state.cols()
    }
}

/// Trajectories for several parameter vectors sharing one time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ParametricDataset<T> {
    param_dim: usize,
    params: Vec<Vec<T>>,
    trajectories: Vec<Matrix<T>>,
    grid: Arc<TimeGrid<T>>,
}

impl<T: Real> ParametricDataset<T> {
    pub fn new(
        params: Vec<Vec<T>>,
        trajectories: Vec<Matrix<T>>,
        grid: Arc<TimeGrid<T>>,
    ) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidArgument("dataset needs at least one parameter".into()));
        }
        if params.len() != trajectories.len() {
            return Err(Error::DimensionMismatch {
                context: "parameters vs trajectories",
                expected: params.len(),
                found: trajectories.len(),
            });
        }
        let param_dim = params[0].len();
        if param_dim == 0 {
            return Err(Error::InvalidArgument("parameter dimension must be at least 1".into()));
        }
        for p in &params {
            if p.len() != param_dim {
                return Err(Error::DimensionMismatch {
                    context: "parameter dimension",
                    expected: param_dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("parameters"));
            }
        }
        for (i, a) in params.iter().enumerate() {
            for b in &params[i + 1..] {
                if a == b {
                    return Err(Error::DuplicateParameters(a.iter().map(|x| x.to_f64_()).collect()));
                }
            }
        }
        let n_h = trajectories[0].rows();
        for x in &trajectories {
            if x.rows() != n_h {
                return Err(Error::DimensionMismatch {
                    context: "trajectory state dimension",
                    expected: n_h,
                    found: x.rows(),
                });
            }
            if x.cols() != grid.len() {
                return Err(Error::DimensionMismatch {
                    context: "trajectory length vs time grid",
                    expected: grid.len(),
                    found: x.cols(),
                });
            }
            if !x.all_finite() {
                return Err(Error::NonFinite("snapshot payload"));
            }
        }
        if n_h == 0 {
            return Err(Error::InvalidArgument("state dimension must be at least 1".into()));
        }
        Ok(Self {
            param_dim,
            params,
            trajectories,
            grid,
        })
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn n_h(&self) -> usize {
        self.trajectories[0].rows()
    }

    pub fn n_t(&self) -> usize {
        self.grid.len()
    }

    pub fn params(&self) -> &[Vec<T>] {
        &self.params
    }

    pub fn trajectories(&self) -> &[Matrix<T>] {
        &self.trajectories
    }

    pub fn grid(&self) -> &Arc<TimeGrid<T>> {
        &self.grid
    }

    pub fn snapshot(&self, i: usize) -> SnapshotMatrix<T> {
        SnapshotMatrix {
            state: self.trajectories[i].clone(),
            grid: Arc::clone(&self.grid),
        }
    }

    fn subset(&self, idx: &[usize]) -> Self {
        Self {
            param_dim: self.param_dim,
            params: idx.iter().map(|&i| self.params[i].clone()).collect(),
            trajectories: idx.iter().map(|&i| self.trajectories[i].clone()).collect(),
            grid: Arc::clone(&self.grid),
        }
    }

    /// Partitions into `(train, test)` preserving dataset order.
    pub fn split_train_test(&self, test_indices: &[usize]) -> Result<(Self, Self)> {
        let test: BTreeSet<usize> = test_indices.iter().copied().collect();
        if let Some(&bad) = test.iter().find(|&&i| i >= self.n_params()) {
            return Err(Error::InvalidArgument(format!(
                "test index {bad} out of range for {} parameters",
                self.n_params()
            )));
        }
        let train: Vec<usize> = (0..self.n_params()).filter(|i| !test.contains(i)).collect();
        if train.is_empty() {
            return Err(Error::EmptyTrainSplit);
        }
        if test.is_empty() {
            return Err(Error::EmptyTestSplit);
        }
        let test: Vec<usize> = test.into_iter().collect();
        Ok((self.subset(&train), self.subset(&test)))
    }

    /// Keeps the instants inside the closed window `[t_start, t_end]`.
    pub fn restrict_time(&self, t_start: T, t_end: T) -> Result<Self> {
        let span = (self.grid.end() - self.grid.start()).abs().max(T::one());
        let tol = T::c(UNIFORM_TOL) * span;
        let keep: Vec<usize> = self
            .grid
            .instants()
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= t_start - tol && t <= t_end + tol)
            .map(|(k, _)| k)
            .collect();
        if keep.len() < 2 {
            return Err(Error::EmptyWindow {
                start: t_start.to_f64_(),
                end: t_end.to_f64_(),
            });
        }
        let grid = Arc::new(TimeGrid::new(
            keep.iter().map(|&k| self.grid.instants()[k]).collect(),
        )?);
        Ok(Self {
            param_dim: self.param_dim,
            params: self.params.clone(),
            trajectories: self.trajectories.iter().map(|x| x.select_columns(&keep)).collect(),
            grid,
        })
    }

    /// Affine map of every entry onto `[0, 1]` using the global extrema.
    pub fn rescale_unit(&self) -> Result<(Self, ScaleInfo<T>)> {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for x in &self.trajectories {
            for &v in x.data() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !(hi > lo) {
            return Err(Error::ConstantDataset);
        }
        let info = ScaleInfo { min: lo, max: hi };
        let trajectories = self.trajectories.iter().map(|x| info.apply(x)).collect();
        Ok((
            Self {
                param_dim: self.param_dim,
                params: self.params.clone(),
                trajectories,
                grid: Arc::clone(&self.grid),
            },
            info,
        ))
    }
}

/// Extrema used by [`ParametricDataset::rescale_unit`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleInfo<T> {
    pub min: T,
    pub max: T,
}

impl<T: Real> ScaleInfo<T> {
    pub fn apply(&self, x: &Matrix<T>) -> Matrix<T> {
        let range = self.max - self.min;
        x.map(|v| (v - self.min) / range)
    }

    pub fn invert(&self, x: &Matrix<T>) -> Matrix<T> {
        let range = self.max - self.min;
        x.map(|v| v * range + self.min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(n_p: usize, n_h: usize, grid: Vec<f64>) -> ParametricDataset<f64> {
        let grid = Arc::new(TimeGrid::new(grid).unwrap());
        let n_t = grid.len();
        let params = (0..n_p).map(|i| vec![i as f64]).collect();
        let traj = (0..n_p)
            .map(|i| Matrix::from_fn(n_h, n_t, |r, c| (i * 100 + r * 10 + c) as f64))
            .collect();
        ParametricDataset::new(params, traj, grid).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(TimeGrid::new(vec![0.0, 2.0, 1.0]), Err(Error::TimeGridNotIncreasing)));
        assert!(matches!(TimeGrid::new(vec![0.0]), Err(Error::TimeGridTooShort { .. })));
        assert!(TimeGrid::new(vec![0.0, 0.1, 0.2, 0.3]).unwrap().is_uniform());
        assert!(!TimeGrid::new(vec![0.0, 0.1, 0.25]).unwrap().is_uniform());
    }

    #[test]
    fn split_cases() {
        let d = dataset(5, 2, vec![0.0, 1.0, 2.0]);
        let (train, test) = d.split_train_test(&[4]).unwrap();
        assert_eq!(train.n_params(), 4);
        assert_eq!(test.n_params(), 1);
        assert_eq!(test.params()[0], vec![4.0]);
        assert!(Arc::ptr_eq(train.grid(), d.grid()));
        assert!(matches!(d.split_train_test(&[0, 1, 2, 3, 4]), Err(Error::EmptyTrainSplit)));
        assert!(d.split_train_test(&[7]).is_err());
    }

    #[test]
    fn forced_test_parameter() {
        // Twenty heater-power-like levels; the distinguished level must end up in test.
        let d = dataset(20, 1, vec![0.0, 1.0]);
        let forced = d.params().iter().position(|p| p[0] == 13.0).unwrap();
        let (train, test) = d.split_train_test(&[2, forced, 17]).unwrap();
        assert!(test.params().iter().any(|p| p[0] == 13.0));
        assert!(!train.params().iter().any(|p| p[0] == 13.0));
        assert_eq!(train.n_params() + test.n_params(), 20);
    }

    #[test]
    fn restrict_window() {
        let d = dataset(2, 1, vec![0.0, 1.0, 2.0, 3.0]);
        let w = d.restrict_time(1.0, 2.0).unwrap();
        assert_eq!(w.n_t(), 2);
        assert_eq!(w.grid().instants(), &[1.0, 2.0]);
        assert_eq!(w.trajectories()[0].col(0), d.trajectories()[0].col(1));
        assert!(matches!(d.restrict_time(10.0, 20.0), Err(Error::EmptyWindow { .. })));

        let grid: Vec<f64> = (0..=160).map(|k| 1400.0 + 10.0 * k as f64).collect();
        let d = dataset(2, 1, grid);
        assert_eq!(d.restrict_time(1400.0, 2800.0).unwrap().n_t(), 141);
    }

    #[test]
    fn rescale_roundtrip() {
        let grid = Arc::new(TimeGrid::new(vec![0.0, 1.0]).unwrap());
        let x = Matrix::from_rows(2, 2, &[300.0, 350.0, 400.0, 325.0]);
        let d = ParametricDataset::new(vec![vec![1.0]], vec![x.clone()], grid.clone()).unwrap();
        let (s, info) = d.rescale_unit().unwrap();
        assert_eq!(info.min, 300.0);
        assert_eq!(info.max, 400.0);
        assert_eq!(s.trajectories()[0][(0, 1)], 0.5);
        assert!(info.invert(&s.trajectories()[0]).sub(&x).max_abs() <= 1e-12);

        let c = ParametricDataset::new(vec![vec![1.0]], vec![Matrix::from_rows(1, 2, &[2.0, 2.0])], grid).unwrap();
        assert!(matches!(c.rescale_unit(), Err(Error::ConstantDataset)));
    }

    #[test]
    fn lattice_mapping() {
        let k = lattice_indices(&[0.0, 0.5, 2.0], 0.0, 0.5).unwrap();
        assert_eq!(k, vec![1, 2, 5]);
        assert!(lattice_indices(&[0.3], 0.0, 0.5).is_err());
        assert!(lattice_indices(&[-0.5], 0.0, 0.5).is_err());
    }
}
