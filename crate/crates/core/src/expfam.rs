//! Penalized likelihood for Bernoulli and polychotomous responses.
//!
//! Every Newton step is a weighted penalized least-squares problem with
//! working response `z = f + (y − p)/w`, solved by the Gaussian machinery.
//! The objective is `(1/n) Σ [b(f) − y f] + (λ/2) cᵀ Σ_θ c`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::anova::{Family, GramSet};
use crate::error::{Error, Result};
use crate::gaussian::{solve_system, FitResult, Weights};
use crate::linalg::{Mat, Vector};
use crate::math;

/// Fitted values beyond this magnitude signal (quasi-)separation.
pub const SEPARATION_THRESHOLD: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonConfig {
    pub max_newton: usize,
    pub max_halvings: usize,
    /// Relative objective change that counts as converged.
    pub rel_tol: f64,
    /// Gradient norm (in `(c, d)`) that counts as converged.
    pub grad_tol: f64,
    /// Lower bound on working weights.
    pub weight_floor: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { max_newton: 100, max_halvings: 30, rel_tol: 1e-9, grad_tol: 1e-8, weight_floor: 1e-12 }
    }
}

/// `Σ [log(1 + e^f) − y f]`.
pub fn bernoulli_nll(f: &[f64], y: &[f64]) -> f64 {
    f.iter().zip(y).map(|(&fi, &yi)| math::log1p_exp(fi) - yi * fi).sum()
}

/// `∂/∂f_i = p_i − y_i`.
pub fn bernoulli_grad(f: &[f64], y: &[f64]) -> Vec<f64> {
    f.iter().zip(y).map(|(&fi, &yi)| math::logistic(fi) - yi).collect()
}

/// Polychotomous response: category `0` is the reference, `1..=k` the modeled ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyData {
    pub k: usize,
    pub category: Vec<usize>,
}

impl PolyData {
    pub fn new(k: usize, category: Vec<usize>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("polychotomous data needs k >= 1".into()));
        }
        if let Some(&c) = category.iter().find(|&&c| c > k) {
            return Err(Error::Data(format!("category {c} exceeds k = {k}")));
        }
        Ok(PolyData { k, category })
    }

    /// From an `n × k` 0/1 indicator matrix; an all-zero row is the reference class.
    pub fn from_indicators(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, |r| r.len());
        let mut category = Vec::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            if r.len() != k || r.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::Data(format!("row {i} is not a 0/1 indicator of length {k}")));
            }
            match r.iter().filter(|&&v| v == 1.0).count() {
                0 => category.push(0),
                1 => category.push(r.iter().position(|&v| v == 1.0).unwrap() + 1),
                _ => return Err(Error::Data(format!("row {i} has more than one category"))),
            }
        }
        PolyData::new(k, category)
    }

    pub fn n(&self) -> usize {
        self.category.len()
    }

    /// Indicator `y_ij` for modeled category `j ∈ 1..=k`.
    pub fn indicator(&self, j: usize) -> Vec<f64> {
        self.category.iter().map(|&c| if c == j { 1.0 } else { 0.0 }).collect()
    }
}

/// `log(1 + Σ_j e^{f_j})`.
fn poly_normalizer(fi: &[f64]) -> f64 {
    let mut buf = Vec::with_capacity(fi.len() + 1);
    buf.push(0.0);
    buf.extend_from_slice(fi);
    math::log_sum_exp(&buf)
}

/// `Σ_i [−Σ_j y_ij f_ij + log(1 + Σ_j e^{f_ij})]`; `f[j]` holds `f^{j+1}` at every observation.
pub fn poly_nll(f: &[Vec<f64>], data: &PolyData) -> f64 {
    let mut total = 0.0;
    let mut row = vec![0.0; data.k];
    for (i, &c) in data.category.iter().enumerate() {
        for (j, r) in row.iter_mut().enumerate() {
            *r = f[j][i];
        }
        total += poly_normalizer(&row) - if c > 0 { row[c - 1] } else { 0.0 };
    }
    total
}

/// Class probabilities `p_0..p_k` at each observation.
pub fn poly_probabilities(f: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = f.len();
    let n = f.first().map_or(0, |v| v.len());
    (0..n)
        .map(|i| {
            let row: Vec<f64> = (0..k).map(|j| f[j][i]).collect();
            let lz = poly_normalizer(&row);
            let mut p = Vec::with_capacity(k + 1);
            p.push(math::exp(-lz));
            p.extend(row.iter().map(|&v| math::exp(v - lz)));
            p
        })
        .collect()
}

/// `∂/∂f_ij = p_ij − y_ij`.
pub fn poly_grad(f: &[Vec<f64>], data: &PolyData) -> Vec<Vec<f64>> {
    let probs = poly_probabilities(f);
    (0..data.k)
        .map(|j| {
            probs
                .iter()
                .zip(&data.category)
                .map(|(p, &c)| p[j + 1] - if c == j + 1 { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Value and `(c, d)` gradient of `L(f)/n + (λ/2) cᵀ Σ_θ c` given `∂L/∂f`.
pub(crate) fn penalized_value_grad(
    grams: &GramSet,
    sigma: &Mat,
    c: &[f64],
    loss: f64,
    loss_grad: &[f64],
    lambda: f64,
    n: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let cv = Vector::from_column_slice(c);
    let sc = sigma * &cv;
    let value = loss / n + 0.5 * lambda * cv.dot(&sc);
    let g = Vector::from_column_slice(loss_grad) / n;
    let gc = sigma * (&g + &cv * lambda);
    let gd = grams.t.transpose() * &g;
    (value, gc.iter().copied().collect(), gd.iter().copied().collect())
}

pub(crate) fn fitted(grams: &GramSet, sigma: &Mat, c: &[f64], d: &[f64]) -> Vec<f64> {
    let f = sigma * Vector::from_column_slice(c) + &grams.t * Vector::from_column_slice(d);
    f.iter().copied().collect()
}

/// Penalized Bernoulli objective and its gradient in `(c, d)`.
pub fn bernoulli_penalized(
    grams: &GramSet,
    y: &[f64],
    c: &[f64],
    d: &[f64],
    lambda: f64,
    theta: &[f64],
) -> (f64, Vec<f64>, Vec<f64>) {
    let sigma = grams.weighted_sigma(theta);
    let f = fitted(grams, &sigma, c, d);
    penalized_value_grad(grams, &sigma, c, bernoulli_nll(&f, y), &bernoulli_grad(&f, y), lambda, grams.n() as f64)
}

/// Penalized polychotomous objective `L/n + Σ_j (λ_j/2) c_jᵀ Σ_{θ_j} c_j` and per-block gradients.
#[allow(clippy::type_complexity)]
pub fn poly_penalized(
    grams: &[GramSet],
    data: &PolyData,
    c: &[Vec<f64>],
    d: &[Vec<f64>],
    lambdas: &[f64],
    thetas: &[Vec<f64>],
) -> (f64, Vec<(Vec<f64>, Vec<f64>)>) {
    let sigmas: Vec<Mat> = grams.iter().zip(thetas).map(|(g, t)| g.weighted_sigma(t)).collect();
    let f: Vec<Vec<f64>> = (0..data.k).map(|j| fitted(&grams[j], &sigmas[j], &c[j], &d[j])).collect();
    let grad = poly_grad(&f, data);
    let loss = poly_nll(&f, data);
    let mut value = loss / data.n() as f64;
    let mut blocks = Vec::with_capacity(data.k);
    for j in 0..data.k {
        let (v, gc, gd) = penalized_value_grad(&grams[j], &sigmas[j], &c[j], 0.0, &grad[j], lambdas[j], data.n() as f64);
        value += v;
        blocks.push((gc, gd));
    }
    (value, blocks)
}

/// Second derivative of a loss in `f`: diagonal, or `2×2` blocks over consecutive pairs.
pub(crate) enum Curvature {
    Diagonal(Vec<f64>),
    Block2(Vec<[f64; 3]>),
}

/// Loss callback: given `f`, return `(loss, ∂loss/∂f, ∂²loss/∂f²)`.
pub(crate) type LossFn<'a> = dyn FnMut(&[f64]) -> (f64, Vec<f64>, Curvature) + 'a;

/// Working response `z = f − H⁻¹ g` and solver weights `scale · H`.
fn working_problem(f: &[f64], g: &[f64], h: &Curvature, floor: f64, scale: f64) -> (Vec<f64>, Weights) {
    match h {
        Curvature::Diagonal(w) => {
            let w: Vec<f64> = w.iter().map(|&x| x.max(floor)).collect();
            let z = f.iter().zip(g).zip(&w).map(|((fi, gi), wi)| fi - gi / wi).collect();
            (z, Weights::Diagonal(w.iter().map(|x| x * scale).collect()))
        }
        Curvature::Block2(bs) => {
            let mut z = f.to_vec();
            let mut ws = Vec::with_capacity(bs.len());
            for (k, &[a, b, c]) in bs.iter().enumerate() {
                let (a, c) = (a + floor, c + floor);
                let det = a * c - b * b;
                let (g1, g2) = (g[2 * k], g[2 * k + 1]);
                z[2 * k] -= (c * g1 - b * g2) / det;
                z[2 * k + 1] -= (a * g2 - b * g1) / det;
                ws.push([a * scale, b * scale, c * scale]);
            }
            (z, Weights::Block2(ws))
        }
    }
}

pub(crate) struct NewtonOutcome {
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub f: Vec<f64>,
    pub iterations: usize,
    pub trajectory: Vec<f64>,
}

/// Damped Newton on `loss(f)/n_norm + (λ/2) cᵀ Σ_θ c` from `(c0, d0)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn penalized_newton(
    grams: &GramSet,
    lambda: f64,
    theta: &[f64],
    c0: Vec<f64>,
    d0: Vec<f64>,
    n_norm: f64,
    cfg: &NewtonConfig,
    loss: &mut LossFn<'_>,
) -> Result<NewtonOutcome> {
    if grams.p() > 0 && !(lambda > 0.0) {
        return Err(Error::Config("penalized likelihood fits need λ > 0".into()));
    }
    let sigma = grams.weighted_sigma(theta);
    let (mut c, mut d) = (c0, d0);
    let mut f = fitted(grams, &sigma, &c, &d);
    let (l, mut g, mut w) = loss(&f);
    let (mut obj, mut gc, mut gd) = penalized_value_grad(grams, &sigma, &c, l, &g, lambda, n_norm);
    let scale = grams.n() as f64 / n_norm;
    let mut trajectory = vec![obj];
    for it in 0..cfg.max_newton {
        let gnorm = math::sqrt(gc.iter().chain(&gd).map(|v| v * v).sum::<f64>());
        if gnorm < cfg.grad_tol {
            return Ok(NewtonOutcome { c, d, f, iterations: it, trajectory });
        }
        let (z, weights) = working_problem(&f, &g, &w, cfg.weight_floor, scale);
        let sol = solve_system(grams, &z, &weights, lambda, theta, false)?;
        let dc: Vec<f64> = sol.c.iter().zip(&c).map(|(a, b)| a - b).collect();
        let dd: Vec<f64> = sol.d.iter().zip(&d).map(|(a, b)| a - b).collect();
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let ct: Vec<f64> = c.iter().zip(&dc).map(|(a, b)| a + step * b).collect();
            let dt: Vec<f64> = d.iter().zip(&dd).map(|(a, b)| a + step * b).collect();
            let ft = fitted(grams, &sigma, &ct, &dt);
            let (lt, gt, wt) = loss(&ft);
            let (ot, gct, gdt) = penalized_value_grad(grams, &sigma, &ct, lt, &gt, lambda, n_norm);
            if ot.is_finite() && ot <= obj {
                accepted = Some((ct, dt, ft, gt, wt, ot, gct, gdt));
                break;
            }
            step *= 0.5;
        }
        let Some((ct, dt, ft, gt, wt, ot, gct, gdt)) = accepted else {
            // No descent left at machine precision: the iterate is optimal to rounding.
            if gnorm < 1e3 * cfg.grad_tol {
                return Ok(NewtonOutcome { c, d, f, iterations: it + 1, trajectory });
            }
            return Err(Error::NonConvergence { iterations: it + 1, objective: obj });
        };
        let change = obj - ot;
        (c, d, f, g, w, gc, gd) = (ct, dt, ft, gt, wt, gct, gdt);
        obj = ot;
        trajectory.push(obj);
        if change <= cfg.rel_tol * obj.abs().max(f64::MIN_POSITIVE) {
            return Ok(NewtonOutcome { c, d, f, iterations: it + 1, trajectory });
        }
    }
    Err(Error::NonConvergence { iterations: cfg.max_newton, objective: obj })
}

fn separation_warning(f: &[f64]) -> Option<String> {
    let m = f.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    (m > SEPARATION_THRESHOLD).then(|| {
        let msg = format!("max |f| = {m:.1} exceeds {SEPARATION_THRESHOLD}; data may be (quasi-)separated");
        #[cfg(feature = "std")]
        std::eprintln!("warning: {msg}");
        msg
    })
}

fn check_binary(y: &[f64], n: usize) -> Result<()> {
    if y.len() != n {
        return Err(Error::Data(format!("{} responses for {n} observations", y.len())));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Data("Bernoulli responses must be 0 or 1".into()));
    }
    if !y.contains(&0.0) || !y.contains(&1.0) {
        return Err(Error::Data("Bernoulli responses need at least one 0 and one 1".into()));
    }
    Ok(())
}

fn outcome_to_fit(out: NewtonOutcome, lambda: f64, theta: &[f64], family: Family) -> FitResult {
    let warnings = separation_warning(&out.f).into_iter().collect();
    FitResult {
        c: out.c,
        d: out.d,
        lambda,
        theta: theta.to_vec(),
        fitted: out.f,
        trace_a: f64::NAN,
        sigma2_hat: f64::NAN,
        gcv: f64::NAN,
        family,
        iterations: out.iterations,
        trace: out.trajectory.into_iter().enumerate().map(|(i, v)| (i as f64, v)).collect(),
        warnings,
    }
}

/// Penalized logistic regression by iteratively reweighted penalized least squares.
///
/// `trace` of the result holds the objective after every accepted step.
pub fn irls_fit(grams: &GramSet, y: &[f64], lambda: f64, theta: &[f64], cfg: &NewtonConfig) -> Result<FitResult> {
    check_binary(y, grams.n())?;
    let mut loss = |f: &[f64]| {
        let g = bernoulli_grad(f, y);
        let w = f.iter().map(|&fi| {
            let p = math::logistic(fi);
            p * (1.0 - p)
        });
        (bernoulli_nll(f, y), g, Curvature::Diagonal(w.collect()))
    };
    let n = grams.n();
    let out = penalized_newton(grams, lambda, theta, vec![0.0; n], vec![0.0; grams.null_dim()], n as f64, cfg, &mut loss)?;
    Ok(outcome_to_fit(out, lambda, theta, Family::Bernoulli))
}

/// A fitted polychotomous model: one function per modeled category.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    pub fits: Vec<FitResult>,
    /// Penalized objective after each block cycle (first entry: start).
    pub objectives: Vec<f64>,
    pub cycles: usize,
}

impl PolyFit {
    pub fn probabilities(&self) -> Vec<Vec<f64>> {
        let f: Vec<Vec<f64>> = self.fits.iter().map(|r| r.fitted.clone()).collect();
        poly_probabilities(&f)
    }
}

/// Blockwise Newton for the multinomial logit: cycle over `j`, Newton in block `j` with the others fixed.
pub fn poly_fit(
    grams: &[GramSet],
    data: &PolyData,
    lambdas: &[f64],
    thetas: &[Vec<f64>],
    cfg: &NewtonConfig,
    max_cycles: usize,
) -> Result<PolyFit> {
    let k = data.k;
    if grams.len() != k || lambdas.len() != k || thetas.len() != k {
        return Err(Error::Config(format!("need one gram set, λ and θ per category (k = {k})")));
    }
    let n = data.n();
    if grams.iter().any(|g| g.n() != n) {
        return Err(Error::Data("gram sets and responses disagree on n".into()));
    }
    let mut c: Vec<Vec<f64>> = grams.iter().map(|g| vec![0.0; g.n()]).collect();
    let mut d: Vec<Vec<f64>> = grams.iter().map(|g| vec![0.0; g.null_dim()]).collect();
    let mut f: Vec<Vec<f64>> = vec![vec![0.0; n]; k];
    let mut iterations = vec![0; k];
    let mut objectives = vec![poly_penalized(grams, data, &c, &d, lambdas, thetas).0];
    for cycle in 1..=max_cycles {
        for j in 0..k {
            let yj = data.indicator(j + 1);
            let others = f.clone();
            let mut loss = |fj: &[f64]| {
                let mut full = others.clone();
                full[j] = fj.to_vec();
                let probs = poly_probabilities(&full);
                let g: Vec<f64> = probs.iter().zip(&yj).map(|(p, y)| p[j + 1] - y).collect();
                let w: Vec<f64> = probs.iter().map(|p| p[j + 1] * (1.0 - p[j + 1])).collect();
                (poly_nll(&full, data), g, Curvature::Diagonal(w))
            };
            let out = penalized_newton(
                &grams[j],
                lambdas[j],
                &thetas[j],
                core::mem::take(&mut c[j]),
                core::mem::take(&mut d[j]),
                n as f64,
                cfg,
                &mut loss,
            )?;
            c[j] = out.c;
            d[j] = out.d;
            f[j] = out.f;
            iterations[j] += out.iterations;
        }
        let (obj, blocks) = poly_penalized(grams, data, &c, &d, lambdas, thetas);
        let gnorm = math::sqrt(blocks.iter().flat_map(|(a, b)| a.iter().chain(b)).map(|v| v * v).sum::<f64>());
        let prev = *objectives.last().unwrap();
        objectives.push(obj);
        // Block cycling converges linearly, so a small objective change alone is not enough.
        if gnorm < cfg.grad_tol || prev - obj <= f64::EPSILON * obj.abs() {
            let fits = (0..k)
                .map(|j| {
                    let mut fit = outcome_to_fit(
                        NewtonOutcome {
                            c: c[j].clone(),
                            d: d[j].clone(),
                            f: f[j].clone(),
                            iterations: iterations[j],
                            trajectory: Vec::new(),
                        },
                        lambdas[j],
                        &thetas[j],
                        Family::Polychotomous(k),
                    );
                    fit.trace = objectives.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect();
                    fit
                })
                .collect();
            return Ok(PolyFit { fits, objectives, cycles: cycle });
        }
    }
    Err(Error::NonConvergence { iterations: max_cycles, objective: *objectives.last().unwrap() })
}

/// Values `Σ_θ[test, train] c + T[test] d` of a fit trained on the `train` rows of `grams`.
pub fn heldout_values(grams: &GramSet, train: &[usize], test: &[usize], fit: &FitResult) -> Vec<f64> {
    let t = grams.t.select_rows(test);
    let mut out = t * Vector::from_column_slice(&fit.d);
    let c = Vector::from_column_slice(&fit.c);
    for (s, &th) in grams.sigma.iter().zip(&fit.theta) {
        out += s.select_rows(test).select_columns(train) * &c * th;
    }
    out.iter().copied().collect()
}

/// Fold assignment keeping each stratum's members spread evenly across folds.
pub fn stratified_folds<R: rand::Rng + ?Sized>(strata: &[usize], folds: usize, rng: &mut R) -> Result<Vec<usize>> {
    use rand::seq::SliceRandom;
    if folds < 2 || folds > strata.len() {
        return Err(Error::Config(format!("need 2 <= folds <= n, got {folds}")));
    }
    let mut out = vec![0; strata.len()];
    let mut keys: Vec<usize> = strata.to_vec();
    keys.sort_unstable();
    keys.dedup();
    let mut offset = 0;
    for key in keys {
        let mut members: Vec<usize> = (0..strata.len()).filter(|&i| strata[i] == key).collect();
        members.shuffle(rng);
        for (r, i) in members.into_iter().enumerate() {
            out[i] = (offset + r) % folds;
        }
        offset += 1;
    }
    check_strata(strata, &out, folds)?;
    Ok(out)
}

/// Fold assignment that never splits a group.
pub fn grouped_folds<R: rand::Rng + ?Sized>(groups: &[usize], folds: usize, rng: &mut R) -> Result<Vec<usize>> {
    use rand::seq::SliceRandom;
    let mut keys: Vec<usize> = groups.to_vec();
    keys.sort_unstable();
    keys.dedup();
    if folds < 2 || folds > keys.len() {
        return Err(Error::Config(format!("need 2 <= folds <= number of groups, got {folds}")));
    }
    keys.shuffle(rng);
    let fold_of_key: alloc::collections::BTreeMap<usize, usize> =
        keys.iter().enumerate().map(|(r, &k)| (k, r % folds)).collect();
    Ok(groups.iter().map(|g| fold_of_key[g]).collect())
}

/// Every training split must keep every stratum.
pub fn check_strata(strata: &[usize], fold_of: &[usize], folds: usize) -> Result<()> {
    for f in 0..folds {
        for &s in strata {
            if !strata.iter().zip(fold_of).any(|(&t, &g)| t == s && g != f) {
                return Err(Error::Stratification(format!("training split of fold {f} has no member of stratum {s}")));
            }
        }
    }
    Ok(())
}

/// Held-out score along a grid of candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct CvCurve {
    pub candidates: Vec<f64>,
    pub scores: Vec<f64>,
    pub best: usize,
}

impl CvCurve {
    pub fn best_candidate(&self) -> f64 {
        self.candidates[self.best]
    }
}

/// K-fold cross-validation: `heldout(train, test, candidate)` returns the held-out deviance.
pub fn cv_tune(
    fold_of: &[usize],
    candidates: &[f64],
    mut heldout: impl FnMut(&[usize], &[usize], f64) -> Result<f64>,
) -> Result<CvCurve> {
    if candidates.is_empty() {
        return Err(Error::Config("empty candidate grid".into()));
    }
    let folds = fold_of.iter().max().map_or(0, |m| m + 1);
    if folds < 2 {
        return Err(Error::Config("cross-validation needs at least two folds".into()));
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| {
            let train = (0..fold_of.len()).filter(|&i| fold_of[i] != f).collect();
            let test = (0..fold_of.len()).filter(|&i| fold_of[i] == f).collect();
            (train, test)
        })
        .filter(|(_, test): &(Vec<usize>, Vec<usize>)| !test.is_empty())
        .collect();
    let mut scores = Vec::with_capacity(candidates.len());
    for &cand in candidates {
        let mut total = 0.0;
        for (train, test) in &splits {
            total += heldout(train, test, cand)?;
        }
        scores.push(total);
    }
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |b, (i, &s)| if s < scores[b] { i } else { b });
    Ok(CvCurve { candidates: candidates.to_vec(), scores, best })
}

/// Held-out Bernoulli deviance `2 Σ_test [b(f) − y f]` for a fit on `train`.
pub fn bernoulli_heldout_deviance(
    grams: &GramSet,
    y: &[f64],
    train: &[usize],
    test: &[usize],
    lambda: f64,
    theta: &[f64],
    cfg: &NewtonConfig,
) -> Result<f64> {
    let sub = grams.subset(train);
    let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let fit = irls_fit(&sub, &ytr, lambda, theta, cfg)?;
    let f = heldout_values(grams, train, test, &fit);
    let yte: Vec<f64> = test.iter().map(|&i| y[i]).collect();
    Ok(2.0 * bernoulli_nll(&f, &yte))
}
