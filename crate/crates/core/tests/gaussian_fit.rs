use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use ssanova_core::anova::{build_model, gram_matrices, Design, Family, GramSet, ModelSpec, Variable};
use ssanova_core::gaussian::*;
use ssanova_core::kernels::Domain;

fn spline_grams(xs: &[f64]) -> GramSet {
    let spec = ModelSpec::new(vec![Variable::new("t", Domain::UnitInterval)], Family::Gaussian).with_effect(&[0], &[]);
    gram_matrices(&build_model(&spec).unwrap(), &Design::from_scalars(xs)).unwrap()
}

fn additive_grams(x1: &[f64], x2: &[f64]) -> GramSet {
    let spec = ModelSpec::new(
        vec![Variable::new("a", Domain::UnitInterval), Variable::new("b", Domain::UnitInterval)],
        Family::Gaussian,
    )
    .with_effect(&[0], &[])
    .with_effect(&[1], &[]);
    let design = Design::new(vec![
        x1.iter().map(|&v| ssanova_core::Value::Scalar(v)).collect(),
        x2.iter().map(|&v| ssanova_core::Value::Scalar(v)).collect(),
    ]);
    gram_matrices(&build_model(&spec).unwrap(), &design).unwrap()
}

fn sample(seed: u64, n: usize, sigma: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let y = xs.iter().map(|x| (2.0 * std::f64::consts::PI * x).sin() + noise.sample(&mut rng)).collect();
    (xs, y)
}

#[test]
fn natural_cubic_spline_midpoint() {
    let xs = [0.1, 0.4, 0.9];
    let ys = [1.0, -0.5, 2.0];
    let g = spline_grams(&xs);
    let fit = solve_penalized_ls(&g, &ys, 1e-12, &[1.0]).unwrap();
    // natural spline: second derivatives vanish at the end knots
    let (h0, h1) = (xs[1] - xs[0], xs[2] - xs[1]);
    let m1 = 6.0 * ((ys[2] - ys[1]) / h1 - (ys[1] - ys[0]) / h0) / (2.0 * (h0 + h1));
    let x = 0.5 * (xs[0] + xs[1]);
    let oracle = m1 * (x - xs[0]).powi(3) / (6.0 * h0) + ys[0] / h0 * (xs[1] - x) + (ys[1] / h0 - m1 * h0 / 6.0) * (x - xs[0]);
    let got = predict(&fit, &g, &Design::from_scalars(&[x])).unwrap()[0];
    assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
}

#[test]
fn predict_at_training_points_equals_fitted() {
    let (xs, y) = sample(3, 40, 0.2);
    let g = spline_grams(&xs);
    let fit = solve_penalized_ls(&g, &y, 1e-4, &[1.0]).unwrap();
    let p = predict(&fit, &g, &Design::from_scalars(&xs)).unwrap();
    for (a, b) in p.iter().zip(&fit.fitted) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn objective_certificate() {
    let (xs, y) = sample(5, 30, 0.3);
    let g = spline_grams(&xs);
    let lam = 1e-4;
    let fit = solve_penalized_ls(&g, &y, lam, &[1.0]).unwrap();
    let base = penalized_ls_objective(&g, &y, &fit.c, &fit.d, lam, &[1.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let normal = Normal::new(0.0, 1.0).unwrap();
    for _ in 0..20 {
        let mut dc = DVector::from_fn(30, |_, _| normal.sample(&mut rng));
        dc *= 1e-3 / dc.norm();
        let mut dd = DVector::from_fn(2, |_, _| normal.sample(&mut rng));
        dd *= 1e-3 / dd.norm();
        let c: Vec<f64> = fit.c.iter().zip(dc.iter()).map(|(a, b)| a + b).collect();
        let d: Vec<f64> = fit.d.iter().zip(dd.iter()).map(|(a, b)| a + b).collect();
        assert!(penalized_ls_objective(&g, &y, &c, &fit.d, lam, &[1.0]) >= base - 1e-15);
        assert!(penalized_ls_objective(&g, &y, &fit.c, &d, lam, &[1.0]) >= base - 1e-15);
    }
}

#[test]
fn objective_value_monotone_in_lambda() {
    let (xs, y) = sample(8, 30, 0.3);
    let g = spline_grams(&xs);
    let mut prev = f64::INFINITY;
    for k in (0..20).rev() {
        let lam = 10f64.powf(-8.0 + 0.5 * k as f64);
        let fit = solve_penalized_ls(&g, &y, lam, &[1.0]).unwrap();
        let v = penalized_ls_objective(&g, &y, &fit.c, &fit.d, lam, &[1.0]);
        assert!(v <= prev * (1.0 + 1e-10));
        prev = v;
    }
}

#[test]
fn influence_matrix_properties() {
    let (xs, _) = sample(9, 30, 0.1);
    let g = spline_grams(&xs);
    let mut prev = f64::INFINITY;
    for k in 0..20 {
        let lam = 10f64.powf(-9.0 + 0.5 * k as f64);
        let a = influence_matrix(&g, lam, &[1.0]).unwrap();
        assert!((&a - a.transpose()).amax() < 1e-10);
        let eig = a.clone().symmetric_eigenvalues();
        assert!(eig.iter().all(|&e| e > -1e-8 && e < 1.0 + 1e-8));
        let tr = a.trace();
        assert!(tr <= prev + 1e-9 && tr >= 2.0 - 1e-8);
        prev = tr;
    }
}

#[test]
fn gcv_via_columnwise_solves() {
    let (xs, y) = sample(10, 25, 0.2);
    let g = spline_grams(&xs);
    let lam = 3e-5;
    let mut a = DMatrix::zeros(25, 25);
    for j in 0..25 {
        let mut e = vec![0.0; 25];
        e[j] = 1.0;
        let fit = solve_penalized_ls(&g, &e, lam, &[1.0]).unwrap();
        for i in 0..25 {
            a[(i, j)] = fit.fitted[i];
        }
    }
    let r = (DMatrix::identity(25, 25) - &a) * DVector::from_column_slice(&y);
    let tr = 25.0 - a.trace();
    let v = 25.0 * r.norm_squared() / (tr * tr);
    let fast = gcv_score(&g, &y, lam, &[1.0]).unwrap();
    assert!((v - fast).abs() < 1e-10 * v);
}

#[test]
fn p1_theta_is_redundant() {
    let (xs, y) = sample(12, 50, 0.2);
    let g = spline_grams(&xs);
    let base = tune(&g, &y, &FitConfig::default()).unwrap();
    let cfg = FitConfig { theta0: Some(vec![37.0]), ..FitConfig::default() };
    let other = tune(&g, &y, &cfg).unwrap();
    for (a, b) in base.fitted.iter().zip(&other.fitted) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn gram_scaling_is_absorbed() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x1: Vec<f64> = (0..60).map(|_| rng.random()).collect();
    let x2: Vec<f64> = (0..60).map(|_| rng.random()).collect();
    let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| (3.0 * a).sin() + b * b + 0.1 * rng.random::<f64>()).collect();
    let g = additive_grams(&x1, &x2);
    let mut scaled = g.clone();
    for s in &mut scaled.sigma {
        *s *= 10.0;
    }
    let a = tune(&g, &y, &FitConfig::default()).unwrap();
    let b = tune(&scaled, &y, &FitConfig::default()).unwrap();
    for (u, v) in a.fitted.iter().zip(&b.fitted) {
        assert!((u - v).abs() < 1e-6);
    }
}

#[test]
fn noise_variable_is_suppressed() {
    let mut wins = 0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let x1: Vec<f64> = (0..100).map(|_| rng.random()).collect();
        let x2: Vec<f64> = (0..100).map(|_| rng.random()).collect();
        let y: Vec<f64> = x1.iter().map(|a| (2.0 * std::f64::consts::PI * a).sin() + noise.sample(&mut rng)).collect();
        let g = additive_grams(&x1, &x2);
        let fit = tune(&g, &y, &FitConfig::default()).unwrap();
        let c = DVector::from_column_slice(&fit.c);
        let signal = (&g.sigma[0] * &c * fit.theta[0]).norm();
        let junk = (&g.sigma[1] * &c * fit.theta[1]).norm();
        if junk < 0.1 * signal {
            wins += 1;
        }
    }
    assert!(wins >= 8, "{wins}/10");
}

#[test]
fn posterior_variance_at_design_is_sigma2_times_leverage() {
    let (xs, y) = sample(14, 30, 0.2);
    let g = spline_grams(&xs);
    let fit = solve_penalized_ls(&g, &y, 2e-5, &[1.0]).unwrap();
    let a = influence_matrix(&g, 2e-5, &[1.0]).unwrap();
    let bands = bayesian_intervals(&fit, &g, &Design::from_scalars(&xs), 0.95, None).unwrap();
    for (i, b) in bands.iter().enumerate() {
        let want = fit.sigma2_hat * a[(i, i)];
        assert!((b.std_err * b.std_err - want).abs() < 1e-8 * want.max(1e-12));
    }
}

#[test]
fn band_shape() {
    let (xs, y) = sample(15, 40, 0.2);
    let g = spline_grams(&xs);
    let fit = tune(&g, &y, &FitConfig::default()).unwrap();
    let pts = Design::from_scalars(&[0.1, 0.33, 0.8]);
    let zero = bayesian_intervals(&fit, &g, &pts, 0.0, None).unwrap();
    let half = bayesian_intervals(&fit, &g, &pts, 0.5, None).unwrap();
    let wide = bayesian_intervals(&fit, &g, &pts, 0.95, None).unwrap();
    for i in 0..3 {
        assert!((zero[i].upper - zero[i].lower).abs() < 1e-15);
        assert!(wide[i].upper - wide[i].lower > half[i].upper - half[i].lower);
        assert!(((wide[i].upper - wide[i].estimate) - (wide[i].estimate - wide[i].lower)).abs() < 1e-12);
    }
    for label in ["1", "p(t)", "s(t)"] {
        let comp = bayesian_intervals(&fit, &g, &pts, 0.95, Some(label)).unwrap();
        assert!(comp.iter().all(|b| b.lower <= b.upper));
    }
    assert!(bayesian_intervals(&fit, &g, &pts, 0.95, Some("s(q)")).is_err());
}
