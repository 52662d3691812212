use nalgebra::DMatrix;
use proptest::prelude::*;
use ssanova_core::anova::{build_model, gram_matrices, Design, Family, ModelSpec, Variable};
use ssanova_core::gaussian::influence_matrix;
use ssanova_core::kernels::{center_kernel, cubic_spline_kernel, Domain, Part};
use ssanova_core::mvb::MvbParams;

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cubic_gram_is_symmetric_psd(xs in prop::collection::vec(0.0f64..1.0, 2..25)) {
        let n = xs.len();
        let k = DMatrix::from_fn(n, n, |i, j| cubic_spline_kernel(xs[i], xs[j], Part::Smooth).unwrap());
        prop_assert!((&k - k.transpose()).amax() < 1e-14);
        prop_assert!(min_eigenvalue(&k) >= -1e-8 * k.norm());
    }

    #[test]
    fn centering_annihilates_weights(xs in prop::collection::vec(0.0f64..1.0, 2..20), raw in prop::collection::vec(0.1f64..1.0, 20)) {
        let n = xs.len();
        let total: f64 = raw[..n].iter().sum();
        let w: Vec<f64> = raw[..n].iter().map(|v| v / total).collect();
        let k = DMatrix::from_fn(n, n, |i, j| cubic_spline_kernel(xs[i], xs[j], Part::Smooth).unwrap());
        let c = center_kernel(&k, &w).unwrap();
        let cw = &c * nalgebra::DVector::from_column_slice(&w);
        prop_assert!(cw.amax() < 1e-10 * (1.0 + k.amax()));
    }

    #[test]
    fn joint_table_round_trip(m in 1usize..5, seed in prop::collection::vec(-2.0f64..2.0, 16)) {
        let mut values = seed[..1 << m].to_vec();
        values[0] = 0.0;
        let params = MvbParams::from_values(m, values).unwrap();
        let table = params.joint_table();
        prop_assert!((table.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let back = MvbParams::from_joint_table(m, &table).unwrap();
        for (a, b) in back.values().iter().zip(params.values()).skip(1) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn influence_trace_between_null_dim_and_n(xs in prop::collection::vec(0.0f64..1.0, 6..30), log_lambda in -8.0f64..1.0) {
        let spec = ModelSpec::new(vec![Variable::new("t", Domain::UnitInterval)], Family::Gaussian).with_effect(&[0], &[]);
        let grams = gram_matrices(&build_model(&spec).unwrap(), &Design::from_scalars(&xs)).unwrap();
        let a = influence_matrix(&grams, 10f64.powf(log_lambda), &[1.0]).unwrap();
        let tr = a.trace();
        prop_assert!(tr >= 2.0 - 1e-8 && tr <= xs.len() as f64 + 1e-8);
        prop_assert!((&a - a.transpose()).amax() < 1e-8);
    }
}
