use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use ssanova_core::anova::{build_model, gram_matrices, Design, Family, Flavor, GramSet, ModelSpec, Variable};
use ssanova_core::expfam::*;
use ssanova_core::gaussian::lambda_scale;
use ssanova_core::kernels::Domain;
use ssanova_core::math::{logistic, logit};
use ssanova_core::Value;

fn spline_grams(xs: &[f64], exclude_linear: bool) -> GramSet {
    let excl: &[&[Flavor]] = if exclude_linear { &[&[Flavor::Parametric]] } else { &[] };
    let spec = ModelSpec::new(vec![Variable::new("t", Domain::UnitInterval)], Family::Bernoulli).with_effect(&[0], excl);
    gram_matrices(&build_model(&spec).unwrap(), &Design::from_scalars(xs)).unwrap()
}

fn logistic_sample(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let y = xs
        .iter()
        .map(|&x| if rng.random::<f64>() < truth(x) { 1.0 } else { 0.0 })
        .collect();
    (xs, y)
}

fn truth(x: f64) -> f64 {
    1.0 / (1.0 + (-4.0 * (x - 0.5)).exp())
}

fn central_diff(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let x0 = x[i];
            x[i] = x0 + h;
            let up = f(&x);
            x[i] = x0 - h;
            let dn = f(&x);
            x[i] = x0;
            (up - dn) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300);
    num / den
}

#[test]
fn likelihood_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let normal = Normal::new(0.0, 2.0).unwrap();
    for _ in 0..20 {
        let n = rng.random_range(1..=20);
        let f: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..2) as f64).collect();
        let fd = central_diff(|f| bernoulli_nll(f, &y), &f, 1e-5);
        assert!(rel_err(&bernoulli_grad(&f, &y), &fd) < 1e-6);

        let k = rng.random_range(1..=4);
        let data = PolyData::new(k, (0..n).map(|_| rng.random_range(0..=k)).collect()).unwrap();
        let flat: Vec<f64> = (0..n * k).map(|_| normal.sample(&mut rng)).collect();
        let unflat = |v: &[f64]| -> Vec<Vec<f64>> { v.chunks(n).map(|c| c.to_vec()).collect() };
        let fd = central_diff(|v| poly_nll(&unflat(v), &data), &flat, 1e-5);
        let an: Vec<f64> = poly_grad(&unflat(&flat), &data).concat();
        assert!(rel_err(&an, &fd) < 1e-6);
    }
}

#[test]
fn penalized_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let normal = Normal::new(0.0, 1.0).unwrap();
    for _ in 0..20 {
        let n = rng.random_range(4..=12);
        let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let g = spline_grams(&xs, false);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..2) as f64).collect();
        let c: Vec<f64> = (0..n).map(|_| 30.0 * normal.sample(&mut rng)).collect();
        let d: Vec<f64> = (0..2).map(|_| normal.sample(&mut rng)).collect();
        let lam = 1e-3;
        let (_, gc, gd) = bernoulli_penalized(&g, &y, &c, &d, lam, &[1.0]);
        let x: Vec<f64> = c.iter().chain(&d).copied().collect();
        let fd = central_diff(|v| bernoulli_penalized(&g, &y, &v[..n], &v[n..], lam, &[1.0]).0, &x, 1e-5);
        assert!(rel_err(&[gc, gd].concat(), &fd) < 1e-6);

        let data = PolyData::new(2, (0..n).map(|_| rng.random_range(0..=2)).collect()).unwrap();
        let grams = vec![g.clone(), g.clone()];
        let cs = vec![c.clone(), c.iter().map(|v| -0.5 * v).collect::<Vec<_>>()];
        let ds = vec![d.clone(), vec![0.3, -0.2]];
        let thetas = vec![vec![1.0], vec![2.0]];
        let lams = [1e-3, 4e-3];
        let (_, blocks) = poly_penalized(&grams, &data, &cs, &ds, &lams, &thetas);
        let x: Vec<f64> = cs[0].iter().chain(&ds[0]).chain(&cs[1]).chain(&ds[1]).copied().collect();
        let m = n + 2;
        let fd = central_diff(
            |v| {
                let cs = vec![v[..n].to_vec(), v[m..m + n].to_vec()];
                let ds = vec![v[n..m].to_vec(), v[m + n..].to_vec()];
                poly_penalized(&grams, &data, &cs, &ds, &lams, &thetas).0
            },
            &x,
            1e-5,
        );
        let an: Vec<f64> = blocks.into_iter().flat_map(|(a, b)| [a, b].concat()).collect();
        assert!(rel_err(&an, &fd) < 1e-6);
    }
}

#[test]
fn poly_k1_matches_bernoulli() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let normal = Normal::new(0.0, 3.0).unwrap();
    for _ in 0..50 {
        let n = rng.random_range(1..30);
        let f: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let cats: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let y: Vec<f64> = cats.iter().map(|&c| c as f64).collect();
        let data = PolyData::new(1, cats).unwrap();
        assert!((poly_nll(std::slice::from_ref(&f), &data) - bernoulli_nll(&f, &y)).abs() < 1e-12);
    }
    for _ in 0..10 {
        let (xs, y) = logistic_sample(&mut rng, 60);
        let g = spline_grams(&xs, false);
        let lam = 1e-3 * lambda_scale(&g, &[1.0]);
        let cfg = NewtonConfig::default();
        let b = irls_fit(&g, &y, lam, &[1.0], &cfg).unwrap();
        let data = PolyData::new(1, y.iter().map(|&v| v as usize).collect()).unwrap();
        let p = poly_fit(std::slice::from_ref(&g), &data, &[lam], &[vec![1.0]], &cfg, 50).unwrap();
        for (u, v) in b.fitted.iter().zip(&p.fits[0].fitted) {
            assert!((u - v).abs() < 1e-8);
        }
    }
}

#[test]
fn constant_and_saturated_penalty_give_logit_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (xs, y) = logistic_sample(&mut rng, 80);
    let ybar = y.iter().sum::<f64>() / 80.0;
    let spec = ModelSpec::new(vec![Variable::new("t", Domain::UnitInterval)], Family::Bernoulli);
    let g0 = gram_matrices(&build_model(&spec).unwrap(), &Design::from_scalars(&xs)).unwrap();
    let fit = irls_fit(&g0, &y, 1.0, &[], &NewtonConfig::default()).unwrap();
    assert!((fit.d[0] - logit(ybar)).abs() < 1e-8);

    let g = spline_grams(&xs, true);
    let fit = irls_fit(&g, &y, 1e8, &[1.0], &NewtonConfig::default()).unwrap();
    assert!(fit.fitted.iter().all(|f| (f - logit(ybar)).abs() < 1e-4));
}

#[test]
fn accepted_steps_never_increase_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (xs, y) = logistic_sample(&mut rng, 100);
    let g = spline_grams(&xs, false);
    let fit = irls_fit(&g, &y, 1e-6, &[1.0], &NewtonConfig::default()).unwrap();
    for w in fit.trace.windows(2) {
        assert!(w[1].1 <= w[0].1);
    }
    assert!(fit.fitted.iter().all(|&f| logistic(f) > 0.0 && logistic(f) < 1.0));
}

#[test]
fn separated_data_warns() {
    let xs: Vec<f64> = (0..20).map(|i| (i as f64 + 0.5) / 20.0).collect();
    let y: Vec<f64> = xs.iter().map(|&x| if x > 0.5 { 1.0 } else { 0.0 }).collect();
    let g = spline_grams(&xs, false);
    let fit = irls_fit(&g, &y, 1e-12, &[1.0], &NewtonConfig { max_newton: 200, ..NewtonConfig::default() }).unwrap();
    assert!(!fit.warnings.is_empty());
}

fn relative_grid(g: &GramSet, lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let scale = lambda_scale(g, &[1.0]);
    (0..points)
        .map(|i| scale * 10f64.powf(lo + (hi - lo) * i as f64 / (points - 1) as f64))
        .collect()
}

#[test]
fn tuned_logistic_curve_recovery() {
    let cfg = NewtonConfig::default();
    let mut good = 0;
    for seed in 1000..1040 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (xs, y) = logistic_sample(&mut rng, 300);
        let g = spline_grams(&xs, false);
        let strata: Vec<usize> = y.iter().map(|&v| v as usize).collect();
        let folds = stratified_folds(&strata, 5, &mut rng).unwrap();
        let grid = relative_grid(&g, -6.0, 1.0, 15);
        let curve = cv_tune(&folds, &grid, |tr, te, lam| bernoulli_heldout_deviance(&g, &y, tr, te, lam, &[1.0], &cfg)).unwrap();
        let fit = irls_fit(&g, &y, curve.best_candidate(), &[1.0], &cfg).unwrap();
        let err = xs.iter().zip(&fit.fitted).map(|(&x, &f)| (logistic(f) - truth(x)).abs()).fold(0.0, f64::max);
        if err < 0.15 {
            good += 1;
        }
    }
    // at least 90% of replicates
    assert!(good >= 36, "{good}/40");
}

#[test]
fn pure_noise_selects_heavy_smoothing() {
    let cfg = NewtonConfig::default();
    let mut heavy = 0;
    for seed in 1000..1040 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..120).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..120).map(|_| rng.random_range(0..2) as f64).collect();
        let g = spline_grams(&xs, true);
        let strata: Vec<usize> = y.iter().map(|&v| v as usize).collect();
        let folds = stratified_folds(&strata, 5, &mut rng).unwrap();
        let grid = relative_grid(&g, -6.0, 2.0, 15);
        let curve = cv_tune(&folds, &grid, |tr, te, lam| bernoulli_heldout_deviance(&g, &y, tr, te, lam, &[1.0], &cfg)).unwrap();
        if 4 * curve.best >= 3 * (grid.len() - 1) {
            heavy += 1;
        }
    }
    // K-fold deviance lands in the top quarter for roughly three replicates in four
    assert!(heavy >= 28, "{heavy}/40");
}

#[test]
fn duplicated_copies_cross_validate_to_training_deviance() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (xs, y) = logistic_sample(&mut rng, 40);
    let xx: Vec<f64> = xs.iter().chain(&xs).copied().collect();
    let yy: Vec<f64> = y.iter().chain(&y).copied().collect();
    let g = spline_grams(&xx, false);
    let folds: Vec<usize> = (0..80).map(|i| i / 40).collect();
    let cfg = NewtonConfig::default();
    let lam = 1e-3;
    let curve = cv_tune(&folds, &[lam], |tr, te, l| bernoulli_heldout_deviance(&g, &yy, tr, te, l, &[1.0], &cfg)).unwrap();
    let half = spline_grams(&xs, false);
    let fit = irls_fit(&half, &y, lam, &[1.0], &cfg).unwrap();
    let train_dev = 2.0 * bernoulli_nll(&fit.fitted, &y);
    assert!((curve.scores[0] - 2.0 * train_dev).abs() < 1e-6 * train_dev);
}

#[test]
fn poly_fit_four_categories() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 150;
    let vars = vec![
        Variable::new("x1", Domain::UnitInterval),
        Variable::new("x2", Domain::UnitInterval),
        Variable::new("x3", Domain::UnitInterval),
    ];
    let spec = ModelSpec::new(vars, Family::Polychotomous(3))
        .with_effect(&[0], &[])
        .with_effect(&[1], &[])
        .with_effect(&[2], &[])
        .with_effect(&[1, 2], &[]);
    let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.random()).collect()).collect();
    let design = Design::new(cols.iter().map(|c| c.iter().map(|&v| Value::Scalar(v)).collect()).collect());
    let g = gram_matrices(&build_model(&spec).unwrap(), &design).unwrap();
    let cats: Vec<usize> = (0..n)
        .map(|i| {
            let f = [0.0, 2.0 * cols[0][i] - 1.0, (3.0 * cols[1][i]).sin(), cols[1][i] * cols[2][i]];
            let z: f64 = f.iter().map(|v| v.exp()).sum();
            let u: f64 = rng.random::<f64>() * z;
            let mut acc = 0.0;
            f.iter().position(|v| {
                acc += v.exp();
                u < acc
            })
            .unwrap_or(3)
        })
        .collect();
    let data = PolyData::new(3, cats).unwrap();
    let p = g.p();
    let grams = vec![g.clone(), g.clone(), g];
    let lam = 1e-4;
    let fit = poly_fit(&grams, &data, &[lam; 3], &vec![vec![1.0; p]; 3], &NewtonConfig::default(), 100).unwrap();
    for w in fit.objectives.windows(2) {
        assert!(w[1] <= w[0]);
    }
    for row in fit.probabilities() {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(row.iter().all(|&v| v > 0.0 && v < 1.0));
    }
}

#[test]
fn poly_fit_respects_category_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 60;
    let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let cats: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
    let swapped: Vec<usize> = cats.iter().map(|&c| [0, 2, 1][c]).collect();
    let g = spline_grams(&xs, false);
    let cfg = NewtonConfig::default();
    let th = vec![vec![1.0], vec![1.0]];
    let a = poly_fit(&[g.clone(), g.clone()], &PolyData::new(2, cats).unwrap(), &[1e-3; 2], &th, &cfg, 200).unwrap();
    let b = poly_fit(&[g.clone(), g], &PolyData::new(2, swapped).unwrap(), &[1e-3; 2], &th, &cfg, 200).unwrap();
    for i in 0..n {
        assert!((a.fits[0].fitted[i] - b.fits[1].fitted[i]).abs() < 1e-6);
        assert!((a.fits[1].fitted[i] - b.fits[0].fitted[i]).abs() < 1e-6);
    }
}
