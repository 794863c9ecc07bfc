//! One entry point over the four algorithms: offline fit and online prediction.

use crate::error::{Error, Result};
use crate::latent::{
    fit_monolithic, fit_partitioned, predict_monolithic, predict_partitioned, MonolithicModel, PartitionedModel,
    PartitionedOptions,
};
use crate::linalg::{select_rank, thin_svd, Matrix};
use crate::metrics::{timed, Algorithm};
use crate::optdmd::SolverOptions;
use crate::reduction::{fit_global_basis, project, stack_snapshots, BasisOptions, GlobalBasis};
use crate::regression::RegressorSpec;
use crate::rkoi::{fit_rkoi, predict_rkoi, Bagging, RkoiModel, RkoiOptions};
use crate::roi::{fit_roi, predict_roi, RoiModel};
use crate::scalar::Real;
use crate::snapshot::ParametricDataset;

#[derive(Clone, Debug, PartialEq)]
pub enum PdmdModel<T> {
    Roi(RoiModel<T>),
    Rkoi(RkoiModel<T>),
    Monolithic(MonolithicModel<T>),
    Partitioned(PartitionedModel<T>),
}

impl<T: Real> PdmdModel<T> {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            PdmdModel::Roi(_) => Algorithm::Roi,
            PdmdModel::Rkoi(_) => Algorithm::Rkoi,
            PdmdModel::Monolithic(_) => Algorithm::Monolithic,
            PdmdModel::Partitioned(_) => Algorithm::Partitioned,
        }
    }

    pub fn basis(&self) -> &GlobalBasis<T> {
        match self {
            PdmdModel::Roi(m) => &m.basis,
            PdmdModel::Rkoi(m) => &m.basis,
            PdmdModel::Monolithic(m) => &m.basis,
            PdmdModel::Partitioned(m) => &m.basis,
        }
    }

    /// Full-order prediction; `online` is the regressor fitted at prediction
    /// time by the latent-space variants and ignored otherwise.
    pub fn predict(&self, mu: &[T], times: &[T], online: &RegressorSpec) -> Result<Matrix<T>> {
        match self {
            PdmdModel::Roi(m) => predict_roi(m, mu, times),
            PdmdModel::Rkoi(m) => predict_rkoi(m, mu, times),
            PdmdModel::Monolithic(m) => predict_monolithic(m, mu, times, online),
            PdmdModel::Partitioned(m) => predict_partitioned(m, mu, times, online),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub algorithm: Algorithm,
    /// Basis rank; when absent it is chosen by `energy`.
    pub rank: Option<usize>,
    pub energy: f64,
    /// Second-SVD rank for ROI; defaults to `min(r², N_p)`.
    pub op_rank: Option<usize>,
    pub regressor: RegressorSpec,
    pub basis: BasisOptions,
    pub solver: SolverOptions,
    pub bagging: Option<Bagging>,
    pub stacked_rank: Option<usize>,
    pub optimized_members: bool,
}

impl FitConfig {
    pub fn new(algorithm: Algorithm, rank: usize, param_dim: usize) -> Self {
        Self {
            algorithm,
            rank: Some(rank),
            energy: 0.9999,
            op_rank: None,
            regressor: RegressorSpec::default_for(param_dim),
            basis: BasisOptions::default(),
            solver: SolverOptions::default(),
            bagging: None,
            stacked_rank: None,
            optimized_members: false,
        }
    }
}

/// Model plus what prediction and reporting need besides it.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel<T> {
    pub model: PdmdModel<T>,
    pub regressor: RegressorSpec,
    pub train_params: Vec<Vec<T>>,
    pub rank: usize,
    pub op_rank: usize,
    pub t0: T,
    pub dt: T,
    pub n_t: usize,
    pub offline_seconds: f64,
}

impl<T: Real> TrainedModel<T> {
    pub fn algorithm(&self) -> Algorithm {
        self.model.algorithm()
    }

    pub fn predict(&self, mu: &[T], times: &[T]) -> Result<Matrix<T>> {
        if mu.len() != self.train_params[0].len() {
            return Err(Error::DimensionMismatch {
                context: "parameter dimension",
                expected: self.train_params[0].len(),
                found: mu.len(),
            });
        }
        self.model.predict(mu, times, &self.regressor)
    }

    /// `t0 + k·dt` for `k = 0..n`.
    pub fn lattice(&self, n: usize) -> Vec<T> {
        (0..n).map(|k| self.t0 + self.dt * T::from_usize_(k)).collect()
    }
}

/// Basis rank from the config, or the smallest rank reaching the energy target.
pub fn choose_rank<T: Real>(d: &ParametricDataset<T>, cfg: &FitConfig) -> Result<usize> {
    if let Some(r) = cfg.rank {
        return Ok(r);
    }
    let s = thin_svd(&stack_snapshots(d));
    let max = s.singular_values.len();
    select_rank(&s.singular_values, T::c(cfg.energy), max)
}

/// Runs the offline phase and records its wall time.
pub fn fit_model<T: Real>(d: &ParametricDataset<T>, cfg: &FitConfig) -> Result<TrainedModel<T>> {
    cfg.regressor.validate()?;
    let (fitted, secs) = timed(|| -> Result<_> {
        let rank = choose_rank(d, cfg)?;
        let basis = fit_global_basis(d, rank, &cfg.basis)?;
        let latent = project(d, &basis)?;
        Ok(match cfg.algorithm {
            Algorithm::Roi => {
                let op_rank = cfg.op_rank.unwrap_or((rank * rank).min(d.n_params()));
                (PdmdModel::Roi(fit_roi(&latent, op_rank, &cfg.regressor)?), rank, op_rank)
            }
            Algorithm::Rkoi => {
                let opts = RkoiOptions {
                    solver: cfg.solver,
                    bagging: cfg.bagging,
                    ..Default::default()
                };
                (PdmdModel::Rkoi(fit_rkoi(&latent, &cfg.regressor, &opts)?), rank, 0)
            }
            Algorithm::Monolithic => {
                let m = fit_monolithic(&latent, cfg.stacked_rank)?;
                let r = m.stacked_dmd.rank;
                (PdmdModel::Monolithic(m), rank, r)
            }
            Algorithm::Partitioned => {
                let opts = PartitionedOptions {
                    member_rank: None,
                    optimized: cfg.optimized_members.then_some(cfg.solver),
                };
                (PdmdModel::Partitioned(fit_partitioned(&latent, &opts)?), rank, 0)
            }
        })
    });
    let (model, rank, op_rank) = fitted?;
    let grid = d.grid();
    Ok(TrainedModel {
        model,
        regressor: cfg.regressor,
        train_params: d.params().to_vec(),
        rank,
        op_rank,
        t0: grid.start(),
        dt: grid.dt(),
        n_t: grid.len(),
        offline_seconds: secs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::frobenius_rel_error;
    use crate::regression::fit_count;
    use crate::synth::{generate, SynthSpec};

    #[test]
    fn all_algorithms_on_linear_family() {
        let spec = SynthSpec::linear(24, 4, 6, 30, 21);
        let (d, o) = generate(&spec).unwrap();
        let mu = [0.45];
        let times: Vec<f64> = d.grid().instants().to_vec();
        let truth = o.trajectory(&mu, &times).unwrap();
        for alg in Algorithm::ALL {
            let m = fit_model(&d, &FitConfig::new(alg, 4, 1)).unwrap();
            assert!(m.offline_seconds >= 0.0);
            let before = fit_count();
            let pred = m.predict(&mu, &times).unwrap();
            let fits = fit_count() - before;
            assert_eq!(fits > 0, alg.regresses_online(), "{alg}");
            let err = frobenius_rel_error(&truth, &pred).unwrap();
            assert!(err <= 1e-2, "{alg}: {err}");
        }
    }

    #[test]
    fn energy_rank_selection() {
        let spec = SynthSpec::linear(16, 4, 3, 20, 2);
        let (d, _) = generate(&spec).unwrap();
        let mut cfg = FitConfig::new(Algorithm::Roi, 4, 1);
        cfg.rank = None;
        cfg.energy = 1.0 - 1e-12;
        assert_eq!(choose_rank(&d, &cfg).unwrap(), 4);
        let m = fit_model(&d, &FitConfig::new(Algorithm::Roi, 4, 1)).unwrap();
        assert!(m.predict(&[0.1, 0.2], &[0.0]).is_err());
        assert_eq!(m.lattice(3), vec![0.0, 0.1, 0.2]);
    }
}
