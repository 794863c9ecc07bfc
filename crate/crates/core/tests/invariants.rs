use std::sync::Arc;

use pdmd_core::archive::{decode_model, encode_model};
use pdmd_core::dmd::fit_dmd;
use pdmd_core::io::{decode_dataset, encode_dataset};
use pdmd_core::linalg::{thin_svd, Matrix};
use pdmd_core::metrics::{frobenius_rel_error, time_rel_error, Algorithm};
use pdmd_core::model::{fit_model, FitConfig};
use pdmd_core::regression::{fit, RbfKernel, RegressorKind, RegressorSpec};
use pdmd_core::snapshot::{ParametricDataset, SnapshotMatrix, TimeGrid};
use pdmd_core::synth::{generate, SynthSpec};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix<f64>> {
    prop::collection::vec(-10.0..10.0f64, rows * cols).prop_map(move |v| Matrix::from_col_major(rows, cols, v).unwrap())
}

fn sized_matrix() -> impl Strategy<Value = Matrix<f64>> {
    (1usize..7, 1usize..7).prop_flat_map(|(r, c)| matrix(r, c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn svd_reconstructs(a in sized_matrix()) {
        let s = thin_svd(&a);
        let scale = a.frobenius_norm().max(1.0);
        prop_assert!(s.reconstruct().sub(&a).frobenius_norm() <= 1e-10 * scale);
        prop_assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(s.singular_values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn error_is_scale_covariant(x in matrix(4, 5), y in matrix(4, 5), c in 0.1..50.0f64) {
        prop_assume!(x.frobenius_norm() > 1e-3 && (0..5).all(|j| x.col(j).iter().any(|v| v.abs() > 1e-3)));
        let e = frobenius_rel_error(&x, &y).unwrap();
        let es = frobenius_rel_error(&x.scaled(c), &y.scaled(c)).unwrap();
        prop_assert!((e - es).abs() <= 1e-12 * e.max(1.0));
        prop_assert_eq!(frobenius_rel_error(&x, &x).unwrap(), 0.0);
        let cols = time_rel_error(&x, &y).unwrap();
        prop_assert_eq!(cols.len(), 5);
        prop_assert!(cols.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn pdmd1_roundtrip(n_p in 1usize..4, n_h in 1usize..6, n_t in 2usize..8, seed in any::<u64>()) {
        let mut k = seed;
        let mut next = move || { k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (k >> 11) as f64 / (1u64 << 53) as f64 - 0.5 };
        let params: Vec<Vec<f64>> = (0..n_p).map(|i| vec![i as f64 + next()]).collect();
        let trajs: Vec<Matrix<f64>> = (0..n_p).map(|_| Matrix::from_fn(n_h, n_t, |_, _| next())).collect();
        let grid = Arc::new(TimeGrid::uniform(0.0, 0.25, n_t).unwrap());
        let d = ParametricDataset::new(params, trajs, grid).unwrap();
        let mut bytes = Vec::new();
        encode_dataset(&d, &mut bytes).unwrap();
        let back: ParametricDataset<f64> = decode_dataset(&mut bytes.as_slice()).unwrap();
        let mut again = Vec::new();
        encode_dataset(&back, &mut again).unwrap();
        prop_assert_eq!(bytes, again);
        prop_assert_eq!(back.trajectories(), d.trajectories());
    }

    #[test]
    fn interpolating_regressors_hit_samples(vals in prop::collection::vec(-5.0..5.0f64, 4), shift in 0.0..0.1f64) {
        let params: Vec<Vec<f64>> = [0.0, 0.35, 0.6, 1.0].iter().map(|&m| vec![m + shift]).collect();
        let y = Matrix::from_col_major(4, 1, vals.clone()).unwrap();
        for kind in [
            RegressorKind::LinearInterp,
            RegressorKind::Nearest,
            RegressorKind::Rbf { kernel: RbfKernel::Gaussian, shape: Some(2.0) },
        ] {
            let r = fit(&RegressorSpec::new(kind), &params, &y).unwrap();
            for (p, v) in params.iter().zip(&vals) {
                prop_assert!((r.predict(p).unwrap()[0] - v).abs() <= 1e-8, "{kind:?}");
            }
        }
    }

    #[test]
    fn dmd_is_exact_on_linear_data(seed in 0u64..500) {
        let (d, oracle) = generate(&SynthSpec::linear(20, 4, 1, 16, seed)).unwrap();
        let x = SnapshotMatrix::new(d.trajectories()[0].clone(), Arc::clone(d.grid())).unwrap();
        let m = fit_dmd(&x, 4).unwrap();
        let grid = m.lattice(30).unwrap();
        let truth = oracle.trajectory(&d.params()[0], grid.instants()).unwrap();
        prop_assert!(frobenius_rel_error(&truth, &m.reconstruct(&grid).unwrap().state).unwrap() <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn archive_roundtrip_is_bit_exact(seed in 0u64..1000, alg in 0usize..4) {
        let (d, _) = generate(&SynthSpec::linear(16, 4, 4, 20, seed)).unwrap();
        let m = fit_model(&d, &FitConfig::new(Algorithm::ALL[alg], 4, 1)).unwrap();
        let bytes = encode_model(&m);
        let back = decode_model(&bytes).unwrap();
        prop_assert_eq!(encode_model(&back), bytes);
        let times = d.grid().instants();
        let a = m.predict(&[0.4], times).unwrap();
        let b = back.predict(&[0.4], times).unwrap();
        prop_assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
