//! Multivariate Bernoulli log-linear model.
//!
//! For `Y ∈ {0,1}^M` the joint law is
//!
//! ```text
//! log P(Y = y) = Σ_{S ⊆ supp(y), S ≠ ∅} θ_S − b(θ)
//! ```
//!
//! with one parameter per nonempty subset `S` (`f`'s for singletons, `α`'s for
//! larger sets). Subsets are stored as bitmasks; the normalizer is computed by
//! enumerating all `2^M` outcomes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::anova::{Family, GramSet};
use crate::error::{Error, Result};
use crate::expfam::{fitted, penalized_newton, penalized_value_grad, Curvature, NewtonConfig};
use crate::gaussian::FitResult;
use crate::linalg::Mat;
use crate::math;

/// Largest outcome length the enumeration accepts.
pub const MAX_OUTCOMES: usize = 20;

/// Endpoint layout: `K_j` repeats of endpoint `j`, `M = Σ K_j` positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeIndex {
    pub repeats: Vec<usize>,
}

impl OutcomeIndex {
    pub fn new(repeats: Vec<usize>) -> Result<Self> {
        let m: usize = repeats.iter().sum();
        if m == 0 || repeats.contains(&0) {
            return Err(Error::Config("every endpoint needs at least one repeat".into()));
        }
        if m > MAX_OUTCOMES {
            return Err(Error::Capacity(format!("M = {m} outcomes exceeds the enumeration limit {MAX_OUTCOMES}")));
        }
        Ok(OutcomeIndex { repeats })
    }

    pub fn len(&self) -> usize {
        self.repeats.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat position of repeat `k` of endpoint `j` (both zero-based).
    pub fn position(&self, j: usize, k: usize) -> usize {
        self.repeats[..j].iter().sum::<usize>() + k
    }
}

/// The `2^M − 1` parameters, indexed by subset bitmask (entry 0 is unused and zero).
#[derive(Debug, Clone, PartialEq)]
pub struct MvbParams {
    m: usize,
    values: Vec<f64>,
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::Config("M must be at least 1".into()));
    }
    if m > MAX_OUTCOMES {
        return Err(Error::Capacity(format!("M = {m} outcomes exceeds the enumeration limit {MAX_OUTCOMES}")));
    }
    Ok(())
}

impl MvbParams {
    pub fn zeros(m: usize) -> Result<Self> {
        check_m(m)?;
        Ok(MvbParams { m, values: vec![0.0; 1 << m] })
    }

    /// From a full bitmask-indexed vector of length `2^M`; entry 0 must be 0.
    pub fn from_values(m: usize, values: Vec<f64>) -> Result<Self> {
        check_m(m)?;
        if values.len() != 1 << m {
            return Err(Error::Config(format!("expected {} values, got {}", 1usize << m, values.len())));
        }
        if values[0] != 0.0 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("parameters must be finite with the empty-set entry 0".into()));
        }
        Ok(MvbParams { m, values })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, subset: u32) -> f64 {
        self.values[subset as usize]
    }

    pub fn set(&mut self, subset: u32, value: f64) -> Result<()> {
        if subset == 0 || subset as usize >= self.values.len() || !value.is_finite() {
            return Err(Error::Config(format!("invalid parameter write at subset {subset:#b}")));
        }
        self.values[subset as usize] = value;
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `s(y) = Σ_{∅ ≠ S ⊆ y} θ_S` for every outcome `y` (subset-sum transform).
    pub fn scores(&self) -> Vec<f64> {
        let mut s = self.values.clone();
        for bit in 0..self.m {
            let b = 1usize << bit;
            for mask in 0..s.len() {
                if mask & b != 0 {
                    s[mask] += s[mask ^ b];
                }
            }
        }
        s
    }

    /// Probabilities of every outcome, indexed by bitmask.
    pub fn joint_table(&self) -> Vec<f64> {
        let s = self.scores();
        let b = math::log_sum_exp(&s);
        s.iter().map(|&v| math::exp(v - b)).collect()
    }

    /// Parameters reproducing a strictly positive joint table (Möbius inversion of `log P`).
    pub fn from_joint_table(m: usize, probs: &[f64]) -> Result<Self> {
        check_m(m)?;
        if probs.len() != 1 << m || probs.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::Config("joint table must hold 2^M positive probabilities".into()));
        }
        let mut v: Vec<f64> = probs.iter().map(|&p| math::ln(p)).collect();
        for bit in 0..m {
            let b = 1usize << bit;
            for mask in 0..v.len() {
                if mask & b != 0 {
                    v[mask] -= v[mask ^ b];
                }
            }
        }
        v[0] = 0.0;
        MvbParams::from_values(m, v)
    }
}

fn outcome_mask(y: &[u8], m: usize) -> Result<usize> {
    if y.len() != m {
        return Err(Error::Data(format!("outcome has length {}, expected {m}", y.len())));
    }
    let mut mask = 0;
    for (i, &v) in y.iter().enumerate() {
        match v {
            0 => {}
            1 => mask |= 1 << i,
            _ => return Err(Error::Data("outcomes must be 0 or 1".into())),
        }
    }
    Ok(mask)
}

/// `b(θ) = log Σ_y exp s(y)`.
pub fn log_normalizer(params: &MvbParams) -> f64 {
    math::log_sum_exp(&params.scores())
}

/// `log P(Y = y)`.
pub fn joint_logprob(y: &[u8], params: &MvbParams) -> Result<f64> {
    let mask = outcome_mask(y, params.m)?;
    let s = params.scores();
    Ok(s[mask] - math::log_sum_exp(&s))
}

/// Conditional logits and pairwise conditional log odds ratios, all other positions at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditionals {
    /// `logit P(Y_j = 1 | Y_{−j} = 0)`.
    pub logits: Vec<f64>,
    /// `((j, k), log OR(Y_j, Y_k | rest = 0))` for `j < k`.
    pub log_odds_ratios: Vec<((usize, usize), f64)>,
}

/// Evaluate the conditional definitions on the joint table.
pub fn conditional_quantities(params: &MvbParams) -> Conditionals {
    let p = params.joint_table();
    let m = params.m;
    let logits = (0..m).map(|j| math::ln(p[1 << j] / p[0])).collect();
    let mut log_odds_ratios = Vec::new();
    for j in 0..m {
        for k in j + 1..m {
            let (a, b) = (1usize << j, 1usize << k);
            let v = math::ln(p[a | b]) + math::ln(p[0]) - math::ln(p[a]) - math::ln(p[b]);
            log_odds_ratios.push(((j, k), v));
        }
    }
    Conditionals { logits, log_odds_ratios }
}

/// `P(Y_j = 1)`.
pub fn marginal(params: &MvbParams, j: usize) -> f64 {
    params
        .joint_table()
        .iter()
        .enumerate()
        .filter(|(mask, _)| mask & (1 << j) != 0)
        .map(|(_, p)| p)
        .sum()
}

/// Exact inverse-CDF draw from the joint law.
pub fn sample<R: rand::Rng + ?Sized>(params: &MvbParams, rng: &mut R) -> Vec<u8> {
    let table = params.joint_table();
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut pick = table.len() - 1;
    for (mask, &p) in table.iter().enumerate() {
        acc += p;
        if u < acc {
            pick = mask;
            break;
        }
    }
    (0..params.m).map(|i| ((pick >> i) & 1) as u8).collect()
}

/// Per-subject two-eye quantities at `(f₁, f₂, α)`.
struct EyePair {
    nll: f64,
    p1: f64,
    p2: f64,
    p11: f64,
}

fn eye_pair(f1: f64, f2: f64, a: f64, y: [u8; 2]) -> EyePair {
    let s = [0.0, f1, f2, f1 + f2 + a];
    let b = math::log_sum_exp(&s);
    let p: Vec<f64> = s.iter().map(|&v| math::exp(v - b)).collect();
    let mask = y[0] as usize | ((y[1] as usize) << 1);
    EyePair { nll: b - s[mask], p1: p[1] + p[3], p2: p[2] + p[3], p11: p[3] }
}

/// Two-eye data: one `[left, right]` outcome pair per subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoEyeData {
    pub y: Vec<[u8; 2]>,
}

impl TwoEyeData {
    pub fn new(y: Vec<[u8; 2]>) -> Result<Self> {
        if y.iter().flatten().any(|&v| v > 1) {
            return Err(Error::Data("eye outcomes must be 0 or 1".into()));
        }
        Ok(TwoEyeData { y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }
}

/// `Σ_i −log P(y_i)` with `f` laid out as `[f(x_{1,1}), f(x_{1,2}), f(x_{2,1}), …]`.
pub fn two_eye_nll(f: &[f64], alpha: &[f64], data: &TwoEyeData) -> f64 {
    data.y
        .iter()
        .enumerate()
        .map(|(i, &y)| eye_pair(f[2 * i], f[2 * i + 1], alpha[i], y).nll)
        .sum()
}

/// Gradients of [`two_eye_nll`] in `f` (length `2n`) and `α` (length `n`).
pub fn two_eye_grad(f: &[f64], alpha: &[f64], data: &TwoEyeData) -> (Vec<f64>, Vec<f64>) {
    let mut gf = Vec::with_capacity(2 * data.n());
    let mut ga = Vec::with_capacity(data.n());
    for (i, &y) in data.y.iter().enumerate() {
        let e = eye_pair(f[2 * i], f[2 * i + 1], alpha[i], y);
        gf.push(e.p1 - y[0] as f64);
        gf.push(e.p2 - y[1] as f64);
        ga.push(e.p11 - (y[0] * y[1]) as f64);
    }
    (gf, ga)
}

/// Smoothing parameters and iteration limits for [`fit_two_eye`].
#[derive(Debug, Clone, PartialEq)]
pub struct TwoEyeConfig {
    pub lambda: f64,
    pub theta: Vec<f64>,
    /// Ignored when the `α` model has no penalized terms.
    pub alpha_lambda: f64,
    pub alpha_theta: Vec<f64>,
    pub newton: NewtonConfig,
    pub max_cycles: usize,
}

/// Gram set for a constant `α` over `n` subjects.
pub fn constant_alpha_grams(n: usize) -> Result<GramSet> {
    GramSet::from_matrices(Mat::from_element(n, 1, 1.0), Vec::new())
}

/// Penalized two-eye objective and its gradient in `(c_f, d_f, c_α, d_α)`.
///
/// `(1/n) Σ_i −log P(y_i) + (λ/2) c_fᵀ Σ_θ c_f + (λ_α/2) c_αᵀ Σ_{θ_α} c_α`.
#[allow(clippy::type_complexity)]
pub fn two_eye_penalized(
    f_grams: &GramSet,
    alpha_grams: &GramSet,
    data: &TwoEyeData,
    coef_f: (&[f64], &[f64]),
    coef_a: (&[f64], &[f64]),
    cfg: &TwoEyeConfig,
) -> (f64, [Vec<f64>; 4]) {
    let n = data.n() as f64;
    let sf = f_grams.weighted_sigma(&cfg.theta);
    let sa = alpha_grams.weighted_sigma(&cfg.alpha_theta);
    let f = fitted(f_grams, &sf, coef_f.0, coef_f.1);
    let a = fitted(alpha_grams, &sa, coef_a.0, coef_a.1);
    let (gf, ga) = two_eye_grad(&f, &a, data);
    let loss = two_eye_nll(&f, &a, data);
    let (v1, gcf, gdf) = penalized_value_grad(f_grams, &sf, coef_f.0, loss, &gf, cfg.lambda, n);
    let (v2, gca, gda) = penalized_value_grad(alpha_grams, &sa, coef_a.0, 0.0, &ga, cfg.alpha_lambda, n);
    (v1 + v2, [gcf, gdf, gca, gda])
}

/// A fitted two-eye model.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoEyeFit {
    /// Shared eye function on the `2n` eye observations.
    pub f: FitResult,
    /// Log odds ratio per subject.
    pub alpha: FitResult,
    /// Penalized objective after each block cycle (first entry: start).
    pub objectives: Vec<f64>,
}

/// Penalized likelihood fit of the shared-function two-eye model.
///
/// `f_grams` indexes eye observations `(subject 1 left, subject 1 right, subject 2 left, …)`;
/// `alpha_grams` indexes subjects. Block-coordinate Newton alternates between the two.
pub fn fit_two_eye(f_grams: &GramSet, alpha_grams: &GramSet, data: &TwoEyeData, cfg: &TwoEyeConfig) -> Result<TwoEyeFit> {
    let n = data.n();
    if n < 10 {
        return Err(Error::Data(format!("two-eye fits need at least 10 subjects, got {n}")));
    }
    if f_grams.n() != 2 * n || alpha_grams.n() != n {
        return Err(Error::Data("gram sets must index 2n eyes and n subjects".into()));
    }
    let nf = n as f64;
    let mut cf = vec![0.0; 2 * n];
    let mut df = vec![0.0; f_grams.null_dim()];
    let mut ca = vec![0.0; n];
    let mut da = vec![0.0; alpha_grams.null_dim()];
    let sa = alpha_grams.weighted_sigma(&cfg.alpha_theta);
    let mut f: Vec<f64>;
    let mut a = fitted(alpha_grams, &sa, &ca, &da);
    let objective = |cf: &[f64], df: &[f64], ca: &[f64], da: &[f64]| two_eye_penalized(f_grams, alpha_grams, data, (cf, df), (ca, da), cfg);
    let mut objectives = vec![objective(&cf, &df, &ca, &da).0];
    let (mut it_f, mut it_a) = (0, 0);
    for _ in 0..cfg.max_cycles {
        {
            let alpha = a.clone();
            let mut loss = |fv: &[f64]| {
                let mut g = Vec::with_capacity(2 * n);
                let mut h = Vec::with_capacity(n);
                let mut total = 0.0;
                for (i, &y) in data.y.iter().enumerate() {
                    let e = eye_pair(fv[2 * i], fv[2 * i + 1], alpha[i], y);
                    total += e.nll;
                    g.push(e.p1 - y[0] as f64);
                    g.push(e.p2 - y[1] as f64);
                    h.push([e.p1 * (1.0 - e.p1), e.p11 - e.p1 * e.p2, e.p2 * (1.0 - e.p2)]);
                }
                (total, g, Curvature::Block2(h))
            };
            let out = penalized_newton(f_grams, cfg.lambda, &cfg.theta, cf, df, nf, &cfg.newton, &mut loss)?;
            (cf, df, f, it_f) = (out.c, out.d, out.f, it_f + out.iterations);
        }
        {
            let fv = f.clone();
            let mut loss = |av: &[f64]| {
                let mut g = Vec::with_capacity(n);
                let mut w = Vec::with_capacity(n);
                let mut total = 0.0;
                for (i, &y) in data.y.iter().enumerate() {
                    let e = eye_pair(fv[2 * i], fv[2 * i + 1], av[i], y);
                    total += e.nll;
                    g.push(e.p11 - (y[0] * y[1]) as f64);
                    w.push(e.p11 * (1.0 - e.p11));
                }
                (total, g, Curvature::Diagonal(w))
            };
            let out = penalized_newton(alpha_grams, cfg.alpha_lambda, &cfg.alpha_theta, ca, da, nf, &cfg.newton, &mut loss)?;
            (ca, da, a, it_a) = (out.c, out.d, out.f, it_a + out.iterations);
        }
        let (obj, grads) = objective(&cf, &df, &ca, &da);
        let gnorm = math::sqrt(grads.iter().flatten().map(|v| v * v).sum::<f64>());
        let prev = *objectives.last().unwrap();
        objectives.push(obj);
        if gnorm < cfg.newton.grad_tol || prev - obj <= f64::EPSILON * obj.abs() {
            let trace: Vec<(f64, f64)> = objectives.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect();
            let wrap = |c: Vec<f64>, d: Vec<f64>, fitted: Vec<f64>, lambda: f64, theta: &[f64], iterations: usize| FitResult {
                c,
                d,
                lambda,
                theta: theta.to_vec(),
                fitted,
                trace_a: f64::NAN,
                sigma2_hat: f64::NAN,
                gcv: f64::NAN,
                family: Family::MvBernoulli(2),
                iterations,
                trace: trace.clone(),
                warnings: Vec::new(),
            };
            return Ok(TwoEyeFit {
                f: wrap(cf, df, f, cfg.lambda, &cfg.theta, it_f),
                alpha: wrap(ca, da, a, cfg.alpha_lambda, &cfg.alpha_theta, it_a),
                objectives,
            });
        }
    }
    Err(Error::NonConvergence { iterations: cfg.max_cycles, objective: *objectives.last().unwrap() })
}
