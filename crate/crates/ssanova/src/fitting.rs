//! Family dispatch: smoothing-parameter choice and the final fit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use ssanova_core::expfam::{
    bernoulli_heldout_deviance, cv_tune, grouped_folds, heldout_values, irls_fit, poly_fit, poly_nll,
    stratified_folds, NewtonConfig, PolyData,
};
use ssanova_core::gaussian::{default_theta, lambda_scale, solve_penalized_ls, tune, FitConfig, LambdaGrid};
use ssanova_core::linalg::Mat;
use ssanova_core::msvm::{anova_kernel, classify, fit_msvm, msvm_objective, MsvmModel};
use ssanova_core::mvb::{constant_alpha_grams, fit_two_eye, two_eye_nll, TwoEyeConfig, TwoEyeData};
use ssanova_core::qp::QpConfig;
use ssanova_core::GramSet;

use crate::data::Dataset;
use crate::error::{CliError, Result};
use crate::spec::{FamilyName, SpecFile};

/// How λ was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Fixed,
    Gcv,
    CvDeviance,
    /// Held-out misclassifications plus a hinge-loss tie-breaker below one.
    CvError,
}

impl Criterion {
    pub fn column(&self) -> &'static str {
        match self {
            Criterion::Fixed | Criterion::Gcv => "gcv",
            Criterion::CvDeviance => "cv_deviance",
            Criterion::CvError => "cv_error",
        }
    }
}

/// One fitted function `Σ_β θ_β Σ_i c_i K_β(t_i, ·) + Σ_ν d_ν φ_ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionFit {
    pub name: String,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    /// Values at the training rows.
    pub fitted: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub kkt_residual: f64,
    pub duality_gap: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fitted {
    pub lambda: f64,
    pub theta: Vec<f64>,
    pub functions: Vec<FunctionFit>,
    /// Between-eye log odds ratio of the two-eye model.
    pub alpha: Option<f64>,
    pub trace_a: Option<f64>,
    pub sigma2_hat: Option<f64>,
    pub gcv: Option<f64>,
    pub criterion: Criterion,
    /// `(λ, score)` over the search grid.
    pub path: Vec<(f64, f64)>,
    pub iterations: usize,
    pub solver: Option<SolverReport>,
    pub warnings: Vec<String>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn fit(spec: &SpecFile, data: &Dataset, grams: &GramSet, seed: u64) -> Result<Fitted> {
    let theta = match &spec.tuning.theta {
        Some(t) if t.len() != grams.p() => {
            return Err(CliError::Schema(format!(
                "tuning.theta: expected {} values, one per penalized term",
                grams.p()
            )))
        }
        Some(t) if t.iter().any(|&v| !(v > 0.0)) => {
            return Err(CliError::Schema("tuning.theta: values must be positive".into()))
        }
        Some(t) => t.clone(),
        None => default_theta(grams),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec.family {
        FamilyName::Gaussian => fit_gaussian(spec, data, grams, theta),
        FamilyName::Bernoulli => fit_bernoulli(spec, data, grams, theta, &mut rng),
        FamilyName::Polychotomous => fit_poly(spec, data, grams, theta, &mut rng),
        FamilyName::Msvm => fit_svm(spec, data, grams, theta, &mut rng),
        FamilyName::Mvbernoulli => fit_eyes(spec, data, grams, theta, &mut rng),
    }
}

fn fit_gaussian(spec: &SpecFile, data: &Dataset, grams: &GramSet, theta: Vec<f64>) -> Result<Fitted> {
    let y = &data.responses[0];
    let (res, criterion, path) = match spec.tuning.lambda {
        Some(l) => {
            let res = solve_penalized_ls(grams, y, l, &theta)?;
            let path = vec![(l, res.gcv)];
            (res, Criterion::Fixed, path)
        }
        None => {
            let cfg = FitConfig {
                lambda_grid: spec.tuning.grid_or(LambdaGrid::default()),
                theta_search: spec.tuning.theta_search(),
                theta0: Some(theta),
                ..FitConfig::default()
            };
            let res = tune(grams, y, &cfg)?;
            let path = res.trace.iter().map(|&(lg, s)| (10f64.powf(lg), s)).collect();
            (res, Criterion::Gcv, path)
        }
    };
    Ok(Fitted {
        lambda: res.lambda,
        theta: res.theta.clone(),
        functions: vec![FunctionFit { name: "f".into(), c: res.c, d: res.d, fitted: res.fitted }],
        alpha: None,
        trace_a: finite(res.trace_a),
        sigma2_hat: finite(res.sigma2_hat),
        gcv: finite(res.gcv),
        criterion,
        path,
        iterations: res.iterations,
        solver: None,
        warnings: res.warnings,
    })
}

/// Candidate λ values: the relative grid times `tr(Σ_θ)/n`.
fn candidates(spec: &SpecFile, default: LambdaGrid, scale: f64) -> Vec<f64> {
    spec.tuning.grid_or(default).values().into_iter().map(|g| 10f64.powf(g) * scale).collect()
}

/// Fixed λ, or the CV choice over `cands` with `heldout` scoring one split.
fn choose_lambda(
    spec: &SpecFile,
    p: usize,
    fold_of: impl FnOnce() -> Result<Vec<usize>>,
    cands: Vec<f64>,
    heldout: impl FnMut(&[usize], &[usize], f64) -> ssanova_core::Result<f64>,
) -> Result<(f64, Criterion, Vec<(f64, f64)>)> {
    if let Some(l) = spec.tuning.lambda {
        return Ok((l, Criterion::Fixed, Vec::new()));
    }
    if p == 0 {
        return Ok((0.0, Criterion::Fixed, Vec::new()));
    }
    let folds = fold_of()?;
    let curve = cv_tune(&folds, &cands, heldout)?;
    let path = curve.candidates.iter().copied().zip(curve.scores.iter().copied()).collect();
    Ok((curve.best_candidate(), Criterion::CvDeviance, path))
}

fn binary(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(CliError::Schema(format!("{what}: responses must be 0 or 1")));
    }
    Ok(())
}

fn fit_bernoulli(spec: &SpecFile, data: &Dataset, grams: &GramSet, theta: Vec<f64>, rng: &mut ChaCha8Rng) -> Result<Fitted> {
    let y = &data.responses[0];
    binary(y, spec.response())?;
    let cfg = NewtonConfig::default();
    let strata: Vec<usize> = y.iter().map(|&v| v as usize).collect();
    let grid = LambdaGrid { log10_lo: -6.0, log10_hi: 1.0, points: 15 };
    let (lambda, criterion, path) = choose_lambda(
        spec,
        grams.p(),
        || Ok(stratified_folds(&strata, spec.tuning.folds(), rng)?),
        candidates(spec, grid, lambda_scale(grams, &theta)),
        |tr, te, l| bernoulli_heldout_deviance(grams, y, tr, te, l, &theta, &cfg),
    )?;
    let res = irls_fit(grams, y, lambda, &theta, &cfg)?;
    Ok(Fitted {
        lambda,
        theta,
        functions: vec![FunctionFit { name: "f".into(), c: res.c, d: res.d, fitted: res.fitted }],
        alpha: None,
        trace_a: None,
        sigma2_hat: None,
        gcv: None,
        criterion,
        path,
        iterations: res.iterations,
        solver: None,
        warnings: res.warnings,
    })
}

/// Category codes `0..k` from a numeric column.
fn categories(values: &[f64], k: usize, first: usize, what: &str) -> Result<Vec<usize>> {
    values
        .iter()
        .map(|&v| {
            let top = first + k - 1;
            if v.fract() != 0.0 || v < first as f64 || v > top as f64 {
                Err(CliError::Schema(format!("{what}: categories must be integers {first}..={top}, got {v}")))
            } else {
                Ok(v as usize - first)
            }
        })
        .collect()
}

fn fit_poly(spec: &SpecFile, data: &Dataset, grams: &GramSet, theta: Vec<f64>, rng: &mut ChaCha8Rng) -> Result<Fitted> {
    let total = spec.categories.unwrap_or(2);
    let k = total - 1;
    let cats = categories(&data.responses[0], total, 0, spec.response())?;
    let cfg = NewtonConfig::default();
    let cycles = spec.tuning.max_cycles();
    let grid = LambdaGrid { log10_lo: -6.0, log10_hi: 1.0, points: 15 };
    let fit_at = |g: &GramSet, cats: Vec<usize>, l: f64| {
        let data = PolyData::new(k, cats)?;
        poly_fit(&vec![g.clone(); k], &data, &vec![l; k], &vec![theta.clone(); k], &cfg, cycles)
    };
    let (lambda, criterion, path) = choose_lambda(
        spec,
        grams.p(),
        || Ok(stratified_folds(&cats, spec.tuning.folds(), rng)?),
        candidates(spec, grid, lambda_scale(grams, &theta)),
        |tr, te, l| {
            let fit = fit_at(&grams.subset(tr), tr.iter().map(|&i| cats[i]).collect(), l)?;
            let f: Vec<Vec<f64>> = fit.fits.iter().map(|r| heldout_values(grams, tr, te, r)).collect();
            let test = PolyData::new(k, te.iter().map(|&i| cats[i]).collect())?;
            Ok(2.0 * poly_nll(&f, &test))
        },
    )?;
    let res = fit_at(grams, cats.clone(), lambda)?;
    let iterations = res.cycles;
    let mut warnings = Vec::new();
    let functions = res
        .fits
        .into_iter()
        .enumerate()
        .map(|(j, r)| {
            warnings.extend(r.warnings);
            FunctionFit { name: format!("f{}", j + 1), c: r.c, d: r.d, fitted: r.fitted }
        })
        .collect();
    Ok(Fitted {
        lambda,
        theta,
        functions,
        alpha: None,
        trace_a: None,
        sigma2_hat: None,
        gcv: None,
        criterion,
        path,
        iterations,
        solver: None,
        warnings,
    })
}

/// Rewrite an MSVM decision function `K c_j + d_j` over the kernel
/// `Σ_θ + T₁T₁ᵀ` (T₁: non-constant null columns) as ordinary coefficients.
fn svm_function(grams: &GramSet, model: &MsvmModel, j: usize, fitted: Vec<f64>) -> FunctionFit {
    let c: Vec<f64> = model.c.column(j).iter().copied().collect();
    let cv = model.c.column(j);
    let d = (0..grams.t.ncols())
        .map(|col| {
            if grams.null_labels.get(col).is_some_and(|l| l == "1") {
                model.d[j]
            } else {
                grams.t.column(col).dot(&cv)
            }
        })
        .collect();
    FunctionFit { name: format!("f{}", j + 1), c, d, fitted }
}

fn fit_svm(spec: &SpecFile, data: &Dataset, grams: &GramSet, theta: Vec<f64>, rng: &mut ChaCha8Rng) -> Result<Fitted> {
    let k = spec.categories.unwrap_or(2);
    let labels = categories(&data.responses[0], k, 1, spec.response())?;
    if !grams.null_labels.iter().any(|l| l == "1") {
        return Err(CliError::Schema("terms: msvm needs the constant term".into()));
    }
    let kernel = anova_kernel(grams, &theta);
    let qp = QpConfig::default();
    let n = labels.len();
    let scale = kernel.trace() / n as f64;
    let grid = LambdaGrid { log10_lo: -6.0, log10_hi: -1.0, points: 11 };
    let mut path = Vec::new();
    let (lambda, criterion) = match spec.tuning.lambda {
        Some(l) => (l, Criterion::Fixed),
        None => {
            let folds = stratified_folds(&labels, spec.tuning.folds(), rng)?;
            let curve = cv_tune(&folds, &candidates(spec, grid, scale), |tr, te, l| {
                let sub = kernel.select_rows(tr).select_columns(tr);
                let ltr: Vec<usize> = tr.iter().map(|&i| labels[i]).collect();
                let model = fit_msvm(&sub, &ltr, k, l, &qp)?;
                let cross: Mat = kernel.select_rows(te).select_columns(tr);
                let f = model.decision(&cross);
                let lte: Vec<usize> = te.iter().map(|&i| labels[i]).collect();
                let errors = classify(&f).iter().zip(&lte).filter(|(a, b)| a != b).count() as f64;
                let hinge = msvm_objective(&f, &lte, 0.0, &vec![0.0; k]);
                Ok(errors + hinge / (1.0 + hinge))
            })?;
            path = curve.candidates.iter().copied().zip(curve.scores.iter().copied()).collect();
            (curve.best_candidate(), Criterion::CvError)
        }
    };
    let model = fit_msvm(&kernel, &labels, k, lambda, &qp)?;
    let f = model.decision(&kernel);
    let mut warnings = Vec::new();
    if !model.converged {
        warnings.push(format!(
            "MSVM solver stopped at KKT residual {:.2e} (gap {:.2e})",
            model.kkt_residual, model.duality_gap
        ));
    }
    let functions = (0..k).map(|j| svm_function(grams, &model, j, f.iter().map(|r| r[j]).collect())).collect();
    Ok(Fitted {
        lambda,
        theta,
        functions,
        alpha: None,
        trace_a: None,
        sigma2_hat: None,
        gcv: None,
        criterion,
        path,
        iterations: model.iterations,
        solver: Some(SolverReport {
            kkt_residual: model.kkt_residual,
            duality_gap: model.duality_gap,
            converged: model.converged,
            iterations: model.iterations,
        }),
        warnings,
    })
}

fn eyes_of(subjects: &[usize]) -> Vec<usize> {
    subjects.iter().flat_map(|&i| [2 * i, 2 * i + 1]).collect()
}

fn fit_eyes(spec: &SpecFile, data: &Dataset, grams: &GramSet, theta: Vec<f64>, rng: &mut ChaCha8Rng) -> Result<Fitted> {
    for (r, name) in data.responses.iter().zip(crate::data::EYE_RESPONSES) {
        binary(r, name)?;
    }
    let pairs: Vec<[u8; 2]> = data.responses[0]
        .iter()
        .zip(&data.responses[1])
        .map(|(&a, &b)| [a as u8, b as u8])
        .collect();
    let n = pairs.len();
    let eyes = TwoEyeData::new(pairs.clone())?;
    let cfg_at = |l: f64| TwoEyeConfig {
        lambda: l,
        theta: theta.clone(),
        alpha_lambda: 0.0,
        alpha_theta: Vec::new(),
        newton: NewtonConfig::default(),
        max_cycles: spec.tuning.max_cycles(),
    };
    let grid = LambdaGrid { log10_lo: -6.0, log10_hi: 0.0, points: 7 };
    let subjects: Vec<usize> = (0..n).collect();
    let (lambda, criterion, path) = choose_lambda(
        spec,
        grams.p(),
        || Ok(grouped_folds(&subjects, spec.tuning.folds(), rng)?),
        candidates(spec, grid, lambda_scale(grams, &theta)),
        |tr, te, l| {
            let (etr, ete) = (eyes_of(tr), eyes_of(te));
            let train = TwoEyeData::new(tr.iter().map(|&i| pairs[i]).collect())?;
            let fit = fit_two_eye(&grams.subset(&etr), &constant_alpha_grams(tr.len())?, &train, &cfg_at(l))?;
            let f = heldout_values(grams, &etr, &ete, &fit.f);
            let test = TwoEyeData::new(te.iter().map(|&i| pairs[i]).collect())?;
            Ok(2.0 * two_eye_nll(&f, &vec![fit.alpha.d[0]; te.len()], &test))
        },
    )?;
    let res = fit_two_eye(grams, &constant_alpha_grams(n)?, &eyes, &cfg_at(lambda))?;
    let mut warnings = res.f.warnings.clone();
    warnings.extend(res.alpha.warnings.iter().cloned());
    Ok(Fitted {
        lambda,
        theta,
        functions: vec![FunctionFit { name: "f".into(), c: res.f.c, d: res.f.d, fitted: res.f.fitted }],
        alpha: Some(res.alpha.d[0]),
        trace_a: None,
        sigma2_hat: None,
        gcv: None,
        criterion,
        path,
        iterations: res.objectives.len().saturating_sub(1),
        solver: None,
        warnings,
    })
}
