//! Shared spatial basis across parameters and the latent trajectories it induces.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{randomized_svd, truncated_svd, Matrix, SketchOptions};
use crate::scalar::Real;
use crate::snapshot::{ParametricDataset, TimeGrid};

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalBasis<T> {
    /// `Ũ`, N_h×r with orthonormal columns.
    pub modes_u: Matrix<T>,
    pub singular_values: Vec<T>,
    /// `Σ_{j≤r} σ_j² / ‖𝒳‖_F²`.
    pub energy_captured: T,
    /// Column mean removed before the SVD, when centering is on.
    pub center: Option<Vec<T>>,
}

impl<T: Real> GlobalBasis<T> {
    pub fn rank(&self) -> usize {
        self.modes_u.cols()
    }

    pub fn state_dim(&self) -> usize {
        self.modes_u.rows()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct BasisOptions {
    pub randomized: bool,
    pub seed: u64,
    pub center: bool,
    /// Sketch overrides; the oversample default is clamped to the data size.
    pub oversample: Option<usize>,
    pub power_iters: Option<usize>,
}

/// Latent coordinates `Ṽ^{μ_i} = Ũᵀ 𝕏^{μ_i}` for every training parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentDataset<T> {
    pub basis: GlobalBasis<T>,
    pub params: Vec<Vec<T>>,
    pub latents: Vec<Matrix<T>>,
    pub grid: Arc<TimeGrid<T>>,
}

impl<T: Real> LatentDataset<T> {
    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn param_dim(&self) -> usize {
        self.params[0].len()
    }
}

/// `[𝕏^{μ_1} | 𝕏^{μ_2} | …]`, blocks in dataset order.
pub fn stack_snapshots<T: Real>(d: &ParametricDataset<T>) -> Matrix<T> {
    let blocks: Vec<&Matrix<T>> = d.trajectories().iter().collect();
    Matrix::hcat(&blocks).expect("dataset trajectories share N_h")
}

pub fn fit_global_basis<T: Real>(
    d: &ParametricDataset<T>,
    rank: usize,
    opts: &BasisOptions,
) -> Result<GlobalBasis<T>> {
    let mut stacked = stack_snapshots(d);
    let max = stacked.rows().min(stacked.cols());
    if rank == 0 || rank > max {
        return Err(Error::RankOutOfRange { rank, max });
    }
    let center = if opts.center {
        let n = T::from_usize_(stacked.cols());
        let mut mean = vec![T::zero(); stacked.rows()];
        for j in 0..stacked.cols() {
            for (m, &v) in mean.iter_mut().zip(stacked.col(j)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        for j in 0..stacked.cols() {
            for (v, &m) in stacked.col_mut(j).iter_mut().zip(&mean) {
                *v -= m;
            }
        }
        Some(mean)
    } else {
        None
    };
    let total = stacked.frobenius_norm().powi(2);
    let svd = if opts.randomized {
        let defaults = SketchOptions::default();
        let sketch = SketchOptions {
            oversample: opts.oversample.unwrap_or(defaults.oversample.min(max - rank)),
            power_iters: opts.power_iters.unwrap_or(defaults.power_iters),
            seed: opts.seed,
        };
        randomized_svd(&stacked, rank, sketch)?
    } else {
        truncated_svd(&stacked, rank)?
    };
    let kept: T = svd.singular_values.iter().map(|&s| s * s).sum();
    let energy_captured = if total > T::zero() {
        (kept / total).min(T::one())
    } else {
        T::one()
    };
    Ok(GlobalBasis {
        modes_u: svd.modes_u,
        singular_values: svd.singular_values,
        energy_captured,
        center,
    })
}

/// `Ũᵀ (𝕏 − c)` for one trajectory.
pub fn project_matrix<T: Real>(x: &Matrix<T>, basis: &GlobalBasis<T>) -> Result<Matrix<T>> {
    if x.rows() != basis.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "basis rows vs state dimension",
            expected: basis.state_dim(),
            found: x.rows(),
        });
    }
    match &basis.center {
        None => Ok(basis.modes_u.adjoint_matmul(x)),
        Some(c) => {
            let mut xc = x.clone();
            for j in 0..xc.cols() {
                for (v, &m) in xc.col_mut(j).iter_mut().zip(c) {
                    *v -= m;
                }
            }
            Ok(basis.modes_u.adjoint_matmul(&xc))
        }
    }
}

pub fn project<T: Real>(d: &ParametricDataset<T>, basis: &GlobalBasis<T>) -> Result<LatentDataset<T>> {
    let latents = d
        .trajectories()
        .par_iter()
        .map(|x| project_matrix(x, basis))
        .collect::<Result<Vec<_>>>()?;
    Ok(LatentDataset {
        basis: basis.clone(),
        params: d.params().to_vec(),
        latents,
        grid: Arc::clone(d.grid()),
    })
}

/// `Ũ Ṽ (+ c)`.
pub fn lift<T: Real>(latent: &Matrix<T>, basis: &GlobalBasis<T>) -> Result<Matrix<T>> {
    if latent.rows() != basis.rank() {
        return Err(Error::DimensionMismatch {
            context: "latent rows vs basis rank",
            expected: basis.rank(),
            found: latent.rows(),
        });
    }
    let mut x = basis.modes_u.matmul(latent);
    if let Some(c) = &basis.center {
        for j in 0..x.cols() {
            for (v, &m) in x.col_mut(j).iter_mut().zip(c) {
                *v += m;
            }
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orthonormalize, tail_energy, thin_svd};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn dataset(trajs: Vec<Matrix<f64>>) -> ParametricDataset<f64> {
        let n_t = trajs[0].cols();
        let grid = Arc::new(TimeGrid::uniform(0.0, 1.0, n_t).unwrap());
        let params = (0..trajs.len()).map(|i| vec![i as f64]).collect();
        ParametricDataset::new(params, trajs, grid).unwrap()
    }

    #[test]
    fn stacking_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = dataset(vec![random(4, 3, &mut rng), random(4, 3, &mut rng)]);
        let s = stack_snapshots(&d);
        assert_eq!(s.cols(), 6);
        for i in 0..2 {
            for k in 0..3 {
                assert_eq!(s.col(i * 3 + k), d.trajectories()[i].col(k));
            }
        }
        let single = dataset(vec![d.trajectories()[0].clone()]);
        assert_eq!(stack_snapshots(&single), single.trajectories()[0]);
    }

    #[test]
    fn subspace_and_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = orthonormalize(&random(20, 3, &mut rng));
        let d = dataset((0..3).map(|_| q.matmul(&random(3, 6, &mut rng))).collect());
        let b = fit_global_basis(&d, 3, &BasisOptions::default()).unwrap();
        let latent = project(&d, &b).unwrap();
        for (x, v) in d.trajectories().iter().zip(&latent.latents) {
            assert!(lift(v, &b).unwrap().sub(x).max_abs() <= 1e-10);
        }
        assert!((b.energy_captured - 1.0).abs() <= 1e-12);
        assert!(matches!(
            fit_global_basis(&d, 19, &BasisOptions::default()),
            Err(Error::RankOutOfRange { .. })
        ));
    }

    #[test]
    fn tail_energy_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = dataset(vec![random(12, 5, &mut rng), random(12, 5, &mut rng)]);
        let b = fit_global_basis(&d, 4, &BasisOptions::default()).unwrap();
        let l = project(&d, &b).unwrap();
        let stacked = stack_snapshots(&d);
        let rec: Vec<&Matrix<f64>> = l.latents.iter().collect();
        let err = lift(&Matrix::hcat(&rec).unwrap(), &b).unwrap().sub(&stacked).frobenius_norm();
        let tail = tail_energy(&thin_svd(&stacked).singular_values, 4);
        assert!((err - tail).abs() <= 1e-9 * tail.max(1.0));
    }

    #[test]
    fn randomized_close_to_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = orthonormalize(&random(60, 20, &mut rng));
        let v = orthonormalize(&random(40, 20, &mut rng));
        let s: Vec<f64> = (0..20).map(|k| (-(k as f64) * 0.5).exp()).collect();
        let x = u.matmul(&Matrix::from_diag(&s)).matmul(&v.transpose());
        let d = dataset(vec![x.columns(0..20), x.columns(20..40)]);
        let det = fit_global_basis(&d, 5, &BasisOptions::default()).unwrap();
        let opts = BasisOptions { randomized: true, seed: 9, ..Default::default() };
        let rnd = fit_global_basis(&d, 5, &opts).unwrap();
        for (a, b) in det.singular_values.iter().zip(&rnd.singular_values) {
            assert!((a - b).abs() <= 0.01 * a);
        }
    }

    #[test]
    fn identity_basis_and_orthogonal_data() {
        let basis = GlobalBasis {
            modes_u: Matrix::identity(3),
            singular_values: vec![1.0; 3],
            energy_captured: 1.0,
            center: None,
        };
        let x = Matrix::from_rows(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(project_matrix(&x, &basis).unwrap(), x);

        let e1 = GlobalBasis {
            modes_u: Matrix::from_rows(3, 1, &[1.0, 0.0, 0.0]),
            ..basis.clone()
        };
        let orth = Matrix::from_rows(3, 2, &[0.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(project_matrix(&orth, &e1).unwrap().max_abs(), 0.0);
        assert_eq!(lift(&Matrix::zeros(1, 4), &e1).unwrap().max_abs(), 0.0);
        assert!(project_matrix(&Matrix::zeros(2, 2), &e1).is_err());
    }

    #[test]
    fn centering_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = orthonormalize(&random(10, 2, &mut rng));
        let offset: Vec<f64> = (0..10).map(|i| 3.0 + i as f64).collect();
        let mk = |rng: &mut ChaCha8Rng| {
            let mut x = q.matmul(&random(2, 5, rng));
            for j in 0..5 {
                for (v, o) in x.col_mut(j).iter_mut().zip(&offset) {
                    *v += o;
                }
            }
            x
        };
        let d = dataset(vec![mk(&mut rng), mk(&mut rng)]);
        let opts = BasisOptions { center: true, ..Default::default() };
        let b = fit_global_basis(&d, 2, &opts).unwrap();
        let l = project(&d, &b).unwrap();
        assert!(lift(&l.latents[0], &b).unwrap().sub(&d.trajectories()[0]).max_abs() <= 1e-10);
    }
}
