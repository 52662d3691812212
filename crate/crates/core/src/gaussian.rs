//! Penalized least squares in the representer form
//!
//! ```text
//! (Σ_θ + nλ I) c + T d = y,   Tᵀ c = 0,   Σ_θ = Σ_β θ_β Σ_β
//! ```
//!
//! solved through the QR decomposition `T = [Q₁ Q₂] [R; 0]`, which reduces the
//! bordered system to the positive definite `(Q₂ᵀ Σ_θ Q₂ + nλ I) u = Q₂ᵀ y` with
//! `c = Q₂ u`. Smoothing parameters are chosen by generalized cross validation
//! on the eigendecomposition of `Q₂ᵀ Σ_θ Q₂`, which prices every `λ` at `O(n)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::anova::{Coefficients, Design, Family, GramSet};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, PivotedQr, Vector};
use crate::math;
use crate::optim::golden_section;

const JITTER: f64 = 1e-10;

/// Observation weights of a weighted least-squares fit `Σ (z − f)ᵀ W (z − f) / n`.
#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    Unit,
    Diagonal(Vec<f64>),
    /// Consecutive pairs share a `2×2` block `[[a, b], [b, c]]`.
    Block2(Vec<[f64; 3]>),
}

/// Factor `W = L Lᵀ`.
enum Whitener {
    Unit,
    Diagonal(Vec<f64>),
    Block2(Vec<[f64; 3]>),
}

impl Whitener {
    fn new(w: &Weights, n: usize) -> Result<Self> {
        match w {
            Weights::Unit => Ok(Whitener::Unit),
            Weights::Diagonal(ws) => {
                if ws.len() != n || ws.iter().any(|&x| !(x > 0.0)) {
                    return Err(Error::Config("diagonal weights must be positive, one per observation".into()));
                }
                Ok(Whitener::Diagonal(ws.iter().map(|&x| math::sqrt(x)).collect()))
            }
            Weights::Block2(bs) => {
                if bs.len() * 2 != n {
                    return Err(Error::Config("block weights must cover consecutive observation pairs".into()));
                }
                let mut out = Vec::with_capacity(bs.len());
                for &[a, b, c] in bs {
                    if !(a > 0.0) {
                        return Err(Error::Config("block weights must be positive definite".into()));
                    }
                    let l11 = math::sqrt(a);
                    let l21 = b / l11;
                    let rest = c - l21 * l21;
                    if !(rest > 0.0) {
                        return Err(Error::Config("block weights must be positive definite".into()));
                    }
                    out.push([l11, l21, math::sqrt(rest)]);
                }
                Ok(Whitener::Block2(out))
            }
        }
    }

    /// `Lᵀ v` on each column of `m`.
    fn lt_left(&self, m: &mut Mat) {
        match self {
            Whitener::Unit => {}
            Whitener::Diagonal(s) => {
                for (i, &si) in s.iter().enumerate() {
                    m.row_mut(i).scale_mut(si);
                }
            }
            Whitener::Block2(ls) => {
                for (k, &[l11, l21, l22]) in ls.iter().enumerate() {
                    for j in 0..m.ncols() {
                        let (a, b) = (m[(2 * k, j)], m[(2 * k + 1, j)]);
                        m[(2 * k, j)] = l11 * a + l21 * b;
                        m[(2 * k + 1, j)] = l22 * b;
                    }
                }
            }
        }
    }

    /// `L v`.
    fn l_vec(&self, v: &Vector) -> Vector {
        match self {
            Whitener::Unit => v.clone(),
            Whitener::Diagonal(s) => Vector::from_iterator(v.len(), v.iter().zip(s).map(|(a, b)| a * b)),
            Whitener::Block2(ls) => {
                let mut out = v.clone();
                for (k, &[l11, l21, l22]) in ls.iter().enumerate() {
                    let (a, b) = (v[2 * k], v[2 * k + 1]);
                    out[2 * k] = l11 * a;
                    out[2 * k + 1] = l21 * a + l22 * b;
                }
                out
            }
        }
    }

    fn lt_vec(&self, v: &Vector) -> Vector {
        let mut m = Mat::from_column_slice(v.len(), 1, v.as_slice());
        self.lt_left(&mut m);
        m.column(0).into_owned()
    }

    /// `Lᵀ Σ L` for symmetric `Σ`.
    fn congruence(&self, s: &Mat) -> Mat {
        if matches!(self, Whitener::Unit) {
            return s.clone();
        }
        let mut m = s.clone();
        self.lt_left(&mut m);
        let mut mt = m.transpose();
        self.lt_left(&mut mt);
        linalg::symmetrize(&mut mt);
        mt
    }
}

/// A fitted smoothing-spline ANOVA model (any likelihood).
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub lambda: f64,
    pub theta: Vec<f64>,
    /// Fitted values `Σ_θ c + T d` at the training points.
    pub fitted: Vec<f64>,
    /// `tr A` of the (working) influence matrix; NaN when not computed.
    pub trace_a: f64,
    /// `‖(I − A) y‖² / tr(I − A)`; NaN when not computed.
    pub sigma2_hat: f64,
    /// GCV score at the returned parameters; NaN when not computed.
    pub gcv: f64,
    pub family: Family,
    pub iterations: usize,
    /// Search trace: `(log10 λ, score)` pairs over the tuning grid.
    pub trace: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn coefficients(&self) -> Coefficients<'_> {
        Coefficients { c: &self.c, d: &self.d, theta: &self.theta }
    }
}

pub(crate) struct Solution {
    pub c: Vector,
    pub d: Vector,
    pub fitted: Vector,
    pub trace_i_minus_a: f64,
    /// `‖Lᵀ(z − f)‖²`.
    pub weighted_rss: f64,
    pub warnings: Vec<String>,
}

fn check_inputs(grams: &GramSet, y: &[f64], lambda: f64, theta: &[f64]) -> Result<()> {
    if y.len() != grams.n() {
        return Err(Error::Data(format!("{} responses for {} observations", y.len(), grams.n())));
    }
    if theta.len() != grams.p() {
        return Err(Error::Config(format!("{} θ values for {} penalized terms", theta.len(), grams.p())));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("λ must be finite and nonnegative, got {lambda}")));
    }
    if theta.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Config("θ must be positive".into()));
    }
    Ok(())
}

/// Weighted representer solve shared by every likelihood.
pub(crate) fn solve_system(
    grams: &GramSet,
    y: &[f64],
    weights: &Weights,
    lambda: f64,
    theta: &[f64],
    diagnostics: bool,
) -> Result<Solution> {
    check_inputs(grams, y, lambda, theta)?;
    let n = grams.n();
    let m0 = grams.null_dim();
    let delta = n as f64 * lambda;
    let wh = Whitener::new(weights, n)?;
    let yv = Vector::from_column_slice(y);
    let yw = wh.lt_vec(&yv);
    let mut tw = grams.t.clone();
    wh.lt_left(&mut tw);
    let qr = PivotedQr::new(&tw, crate::anova::RANK_TOL);
    if qr.rank() < m0 {
        return Err(Error::Data("weighted null-space basis is rank deficient".into()));
    }
    let z = qr.qt_vec(&yw);
    let mut warnings = Vec::new();

    if grams.p() == 0 {
        let d = qr.solve_r(&z.as_slice()[..m0]);
        let fitted = &grams.t * &d;
        let rss: f64 = z.as_slice()[m0..].iter().map(|v| v * v).sum();
        return Ok(Solution {
            c: Vector::zeros(n),
            d,
            fitted,
            trace_i_minus_a: (n - m0) as f64,
            weighted_rss: rss,
            warnings,
        });
    }

    let sigma = grams.weighted_sigma(theta);
    let sw = wh.congruence(&sigma);
    let full = qr.congruence(&sw);
    let m = n - m0;
    let mut a = full.view((m0, m0), (m, m)).into_owned();
    for i in 0..m {
        a[(i, i)] += delta;
    }
    let chol = match nalgebra::Cholesky::new(a.clone()) {
        Some(ch) => ch,
        None if lambda == 0.0 => {
            return Err(Error::Solver(
                "interpolation system is singular (duplicated design points?); use λ > 0".into(),
            ));
        }
        None => {
            let tr: f64 = (0..m).map(|i| a[(i, i)]).sum();
            let jitter = JITTER * tr;
            let msg = format!("Cholesky failed at λ={lambda:.3e}; added ridge jitter {jitter:.3e}");
            #[cfg(feature = "std")]
            std::eprintln!("warning: {msg}");
            warnings.push(msg);
            for i in 0..m {
                a[(i, i)] += jitter;
            }
            nalgebra::Cholesky::new(a).ok_or_else(|| Error::Solver("system is not positive definite".into()))?
        }
    };
    let z2 = Vector::from_column_slice(&z.as_slice()[m0..]);
    let u = chol.solve(&z2);
    let mut cu = Vector::zeros(n);
    cu.rows_mut(m0, m).copy_from(&u);
    let cw = qr.q_vec(&cu);
    let rhs = qr.qt_vec(&(&yw - &sw * &cw));
    let d = qr.solve_r(&rhs.as_slice()[..m0]);
    let c = wh.l_vec(&cw);
    let fitted = &sigma * &c + &grams.t * &d;
    let weighted_rss = delta * delta * cw.norm_squared();
    let trace_i_minus_a = if diagnostics {
        let inv = chol.inverse();
        delta * (0..m).map(|i| inv[(i, i)]).sum::<f64>()
    } else {
        f64::NAN
    };
    Ok(Solution { c, d, fitted, trace_i_minus_a, weighted_rss, warnings })
}

fn gcv_from(n: usize, rss: f64, tr: f64) -> Result<f64> {
    if !(tr > 1e-8 * n as f64) {
        return Err(Error::Degenerate { trace: tr });
    }
    Ok(n as f64 * rss / (tr * tr))
}

/// Solve the penalized least-squares problem at fixed `(λ, θ)`.
pub fn solve_penalized_ls(grams: &GramSet, y: &[f64], lambda: f64, theta: &[f64]) -> Result<FitResult> {
    let sol = solve_system(grams, y, &Weights::Unit, lambda, theta, true)?;
    let n = grams.n();
    let tr = sol.trace_i_minus_a;
    let (gcv, sigma2) = if tr > 1e-8 * n as f64 {
        (gcv_from(n, sol.weighted_rss, tr)?, sol.weighted_rss / tr)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(FitResult {
        c: sol.c.iter().copied().collect(),
        d: sol.d.iter().copied().collect(),
        lambda,
        theta: theta.to_vec(),
        fitted: sol.fitted.iter().copied().collect(),
        trace_a: n as f64 - tr,
        sigma2_hat: sigma2,
        gcv,
        family: Family::Gaussian,
        iterations: 1,
        trace: Vec::new(),
        warnings: sol.warnings,
    })
}

/// `(1/n) ‖y − Σ_θ c − T d‖² + λ cᵀ Σ_θ c`.
pub fn penalized_ls_objective(grams: &GramSet, y: &[f64], c: &[f64], d: &[f64], lambda: f64, theta: &[f64]) -> f64 {
    let sigma = grams.weighted_sigma(theta);
    let c = Vector::from_column_slice(c);
    let sc = &sigma * &c;
    let f = &sc + &grams.t * Vector::from_column_slice(d);
    let r = Vector::from_column_slice(y) - f;
    r.norm_squared() / grams.n() as f64 + lambda * c.dot(&sc)
}

/// GCV evaluation at one `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcvPoint {
    pub lambda: f64,
    pub score: f64,
    pub trace_i_minus_a: f64,
    pub rss: f64,
}

/// Eigendecomposition of `Q₂ᵀ Σ_θ Q₂` for fast evaluation across `λ`.
#[derive(Debug, Clone)]
pub struct GcvPath {
    n: usize,
    eigenvalues: Vector,
    /// `Uᵀ Q₂ᵀ y`.
    projected: Vector,
}

impl GcvPath {
    pub fn new(grams: &GramSet, y: &[f64], theta: &[f64]) -> Result<Self> {
        check_inputs(grams, y, 0.0, theta)?;
        let n = grams.n();
        let m0 = grams.null_dim();
        let qr = PivotedQr::new(&grams.t, crate::anova::RANK_TOL);
        let z = qr.qt_vec(&Vector::from_column_slice(y));
        let z2 = Vector::from_column_slice(&z.as_slice()[m0..]);
        let m = n - m0;
        let (eigenvalues, projected) = if grams.p() == 0 {
            (Vector::zeros(m), z2)
        } else {
            let full = qr.congruence(&grams.weighted_sigma(theta));
            let s = full.view((m0, m0), (m, m)).into_owned();
            let (vals, vecs) = linalg::sym_eigen(&s);
            (vals, vecs.transpose() * z2)
        };
        Ok(GcvPath { n, eigenvalues, projected })
    }

    pub fn eval(&self, lambda: f64) -> Result<GcvPoint> {
        let delta = self.n as f64 * lambda;
        let mut rss = 0.0;
        let mut tr = 0.0;
        for (&e, &w) in self.eigenvalues.iter().zip(self.projected.iter()) {
            let denom = e.max(0.0) + delta;
            if denom <= 0.0 {
                return Err(Error::Degenerate { trace: 0.0 });
            }
            let r = delta / denom;
            rss += r * r * w * w;
            tr += r;
        }
        let score = gcv_from(self.n, rss, tr)?;
        Ok(GcvPoint { lambda, score, trace_i_minus_a: tr, rss })
    }
}

/// `V(λ) = n ‖(I − A) y‖² / [tr(I − A)]²`.
pub fn gcv_score(grams: &GramSet, y: &[f64], lambda: f64, theta: &[f64]) -> Result<f64> {
    GcvPath::new(grams, y, theta)?.eval(lambda).map(|p| p.score)
}

/// Explicit influence matrix `A(λ, θ)`.
pub fn influence_matrix(grams: &GramSet, lambda: f64, theta: &[f64]) -> Result<Mat> {
    let n = grams.n();
    let m0 = grams.null_dim();
    let m = n - m0;
    let qr = PivotedQr::new(&grams.t, crate::anova::RANK_TOL);
    let delta = n as f64 * lambda;
    let mut inner = Mat::zeros(n, n);
    if grams.p() == 0 {
        for i in m0..n {
            inner[(i, i)] = 1.0;
        }
    } else {
        let full = qr.congruence(&grams.weighted_sigma(theta));
        let mut a = full.view((m0, m0), (m, m)).into_owned();
        for i in 0..m {
            a[(i, i)] += delta;
        }
        let inv = linalg::cholesky(&a)?.inverse() * delta;
        inner.view_mut((m0, m0), (m, m)).copy_from(&inv);
    }
    // I − A = Q inner Qᵀ
    qr.q_mul(&mut inner);
    let mut t = inner.transpose();
    qr.q_mul(&mut t);
    let mut out = Mat::identity(n, n) - t;
    linalg::symmetrize(&mut out);
    Ok(out)
}

/// Log-spaced `λ` grid, in units of `tr(Σ_θ)/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid {
    pub log10_lo: f64,
    pub log10_hi: f64,
    pub points: usize,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid { log10_lo: -8.0, log10_hi: 2.0, points: 40 }
    }
}

impl LambdaGrid {
    /// Relative `log10` grid values.
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.log10_lo];
        }
        let step = (self.log10_hi - self.log10_lo) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.log10_lo + step * i as f64).collect()
    }

    pub fn step(&self) -> f64 {
        if self.points < 2 {
            return 1.0;
        }
        (self.log10_hi - self.log10_lo) / (self.points - 1) as f64
    }

    fn validate(&self) -> Result<()> {
        if self.points == 0 || !(self.log10_hi >= self.log10_lo) {
            return Err(Error::Config("λ grid must be nonempty with lo <= hi".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaSearch {
    Fixed,
    CoordinateDescent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub lambda_grid: LambdaGrid,
    pub theta_search: ThetaSearch,
    /// Starting (or fixed) θ; defaults to `1 / tr(Σ_β)`.
    pub theta0: Option<Vec<f64>>,
    /// Coordinate-descent sweeps.
    pub max_iters: usize,
    /// Relative GCV change that ends the sweeps.
    pub tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lambda_grid: LambdaGrid::default(),
            theta_search: ThetaSearch::CoordinateDescent,
            theta0: None,
            max_iters: 3,
            tol: 1e-6,
        }
    }
}

/// `tr(Σ_θ)/n`, the unit of the relative `λ` grid.
pub fn lambda_scale(grams: &GramSet, theta: &[f64]) -> f64 {
    let n = grams.n() as f64;
    let tr: f64 = grams.sigma.iter().zip(theta).map(|(s, &t)| t * s.trace()).sum();
    if tr > 0.0 {
        tr / n
    } else {
        1.0
    }
}

/// Default θ: each term scaled to unit trace.
pub fn default_theta(grams: &GramSet) -> Vec<f64> {
    grams
        .sigma
        .iter()
        .map(|s| {
            let tr = s.trace();
            if tr > 0.0 {
                1.0 / tr
            } else {
                1.0
            }
        })
        .collect()
}

const GOLDEN_TOL: f64 = 1e-7;
const GOLDEN_ITERS: usize = 100;
const THETA_BRACKET: f64 = 3.0;

/// Minimize GCV over `λ` on the grid, then refine by golden section within one grid step.
fn tune_lambda(grams: &GramSet, y: &[f64], theta: &[f64], grid: &LambdaGrid) -> Result<(f64, f64, Vec<(f64, f64)>)> {
    let path = GcvPath::new(grams, y, theta)?;
    let scale = lambda_scale(grams, theta);
    let mut trace = Vec::new();
    let mut best = (f64::NAN, f64::INFINITY);
    for g in grid.values() {
        let s = path.eval(math::powf(10.0, g) * scale)?.score;
        trace.push((math::log10(math::powf(10.0, g) * scale), s));
        if s < best.1 {
            best = (g, s);
        }
    }
    let h = grid.step();
    let (g, s) = golden_section(
        |g| path.eval(math::powf(10.0, g) * scale).map(|p| p.score),
        best.0 - h,
        best.0 + h,
        GOLDEN_TOL,
        GOLDEN_ITERS,
    )?;
    let (g, s) = if s < best.1 { (g, s) } else { best };
    Ok((math::powf(10.0, g) * scale, s, trace))
}

/// Choose `(λ, θ)` by GCV and return the fit there.
pub fn tune(grams: &GramSet, y: &[f64], config: &FitConfig) -> Result<FitResult> {
    config.lambda_grid.validate()?;
    if !(config.tol > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    let p = grams.p();
    let mut theta = match &config.theta0 {
        Some(t) => t.clone(),
        None => default_theta(grams),
    };
    if p == 0 {
        let mut fit = solve_penalized_ls(grams, y, 0.0, &theta)?;
        fit.trace = vec![(f64::NEG_INFINITY, fit.gcv)];
        return Ok(fit);
    }
    let (mut lambda, mut score, trace) = tune_lambda(grams, y, &theta, &config.lambda_grid)?;
    let mut sweeps = 0;
    // With one penalized term θ only rescales λ, so there is nothing to search.
    if p > 1 && config.theta_search == ThetaSearch::CoordinateDescent {
        while sweeps < config.max_iters {
            sweeps += 1;
            let start = score;
            for b in 0..p {
                let x0 = math::log10(theta[b]);
                let mut trial = theta.clone();
                let (x, s) = golden_section(
                    |x| {
                        trial[b] = math::powf(10.0, x);
                        GcvPath::new(grams, y, &trial)?.eval(lambda).map(|pt| pt.score)
                    },
                    x0 - THETA_BRACKET,
                    x0 + THETA_BRACKET,
                    GOLDEN_TOL,
                    GOLDEN_ITERS,
                )?;
                if s < score {
                    theta[b] = math::powf(10.0, x);
                    score = s;
                }
            }
            let path = GcvPath::new(grams, y, &theta)?;
            let l0 = math::log10(lambda);
            let (l, s) = golden_section(|l| path.eval(math::powf(10.0, l)).map(|pt| pt.score), l0 - 1.0, l0 + 1.0, GOLDEN_TOL, GOLDEN_ITERS)?;
            if s < score {
                lambda = math::powf(10.0, l);
                score = s;
            }
            if (start - score) <= config.tol * start.abs() {
                break;
            }
        }
    }
    let mut fit = solve_penalized_ls(grams, y, lambda, &theta)?;
    fit.iterations = sweeps;
    fit.trace = trace;
    Ok(fit)
}

/// Pointwise Bayesian confidence band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub estimate: f64,
    pub std_err: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Posterior bands for the whole fit (`component = None`) or one ANOVA term.
///
/// Uses the Gaussian-process prior whose posterior mean is the fit, with a
/// diffuse prior on `H⁰` and `σ²` replaced by its estimate.
pub fn bayesian_intervals(
    fit: &FitResult,
    grams: &GramSet,
    points: &Design,
    level: f64,
    component: Option<&str>,
) -> Result<Vec<Band>> {
    if fit.family != Family::Gaussian {
        return Err(Error::UnsupportedFamily(format!("Bayesian intervals need a Gaussian fit, not {:?}", fit.family)));
    }
    if !(0.0..1.0).contains(&level) {
        return Err(Error::Config(format!("level must be in [0, 1), got {level}")));
    }
    let basis = grams
        .basis
        .as_ref()
        .ok_or_else(|| Error::Query("gram set carries no evaluation basis".into()))?;
    let n = grams.n();
    let m0 = grams.null_dim();
    let npts = points.len();
    let delta = n as f64 * fit.lambda;
    if !(delta > 0.0) {
        return Err(Error::Config("Bayesian intervals need λ > 0".into()));
    }
    let b = fit.sigma2_hat / delta;
    let mut m = grams.weighted_sigma(&fit.theta);
    for i in 0..n {
        m[(i, i)] += delta;
    }
    let chol = linalg::cholesky(&m)?;
    let minv_t = chol.solve(&grams.t);
    let tmt = grams.t.transpose() * &minv_t;
    let tmt_chol = linalg::cholesky(&tmt)?;

    let coef = fit.coefficients();
    let (estimate, prior_diag, xi, phi) = match component {
        None => {
            let est = basis.predict(&coef, points)?;
            let mut kxx = vec![0.0; npts];
            let mut xi = Mat::zeros(n, npts);
            for (beta, &th) in fit.theta.iter().enumerate() {
                for (k, v) in kxx.iter_mut().zip(basis.term_diag(beta, points)?) {
                    *k += th * v;
                }
                xi += basis.term_gram(beta, points, basis.train())?.transpose() * th;
            }
            (est, kxx, xi, basis.null_matrix(points)?.transpose())
        }
        Some(label) => {
            let which = basis.component_ref(label)?;
            let est = basis.evaluate_component(&coef, &which, points)?;
            match which {
                crate::anova::ComponentRef::Penalized(beta) => {
                    let th = fit.theta[beta];
                    let kxx = basis.term_diag(beta, points)?.into_iter().map(|v| th * v).collect();
                    let xi = basis.term_gram(beta, points, basis.train())?.transpose() * th;
                    (est, kxx, xi, Mat::zeros(m0, npts))
                }
                crate::anova::ComponentRef::Null(cols) => {
                    let full = basis.null_matrix(points)?;
                    let mut phi = Mat::zeros(m0, npts);
                    for j in cols {
                        for i in 0..npts {
                            phi[(j, i)] = full[(i, j)];
                        }
                    }
                    (est, vec![0.0; npts], Mat::zeros(n, npts), phi)
                }
            }
        }
    };
    let minv_xi = chol.solve(&xi);
    let r = phi - grams.t.transpose() * &minv_xi;
    let g_r = tmt_chol.solve(&r);
    let z = math::normal_quantile(0.5 + level / 2.0);
    let mut out = Vec::with_capacity(npts);
    for i in 0..npts {
        let quad = xi.column(i).dot(&minv_xi.column(i));
        let fixed = r.column(i).dot(&g_r.column(i));
        let var = (b * (prior_diag[i] - quad + fixed)).max(0.0);
        let se = math::sqrt(var);
        out.push(Band { estimate: estimate[i], std_err: se, lower: estimate[i] - z * se, upper: estimate[i] + z * se });
    }
    Ok(out)
}

/// Evaluate a fit at new points.
pub fn predict(fit: &FitResult, grams: &GramSet, points: &Design) -> Result<Vec<f64>> {
    let basis = grams
        .basis
        .as_ref()
        .ok_or_else(|| Error::Query("gram set carries no evaluation basis".into()))?;
    basis.predict(&fit.coefficients(), points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anova::{build_model, gram_matrices, ModelSpec, Variable};
    use crate::kernels::Domain;

    fn spline_grams(xs: &[f64]) -> GramSet {
        let spec = ModelSpec::new(vec![Variable::new("t", Domain::UnitInterval)], Family::Gaussian).with_effect(&[0], &[]);
        gram_matrices(&build_model(&spec).unwrap(), &Design::from_scalars(xs)).unwrap()
    }

    fn constant_grams(n: usize) -> GramSet {
        let spec = ModelSpec::new(vec![Variable::new("t", Domain::UnitInterval)], Family::Gaussian);
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        gram_matrices(&build_model(&spec).unwrap(), &Design::from_scalars(&xs)).unwrap()
    }

    #[test]
    fn constant_model_gives_mean() {
        let y = [1.0, 4.0, 2.0, 7.0];
        let g = constant_grams(4);
        for &lam in &[0.0, 1e-3, 10.0] {
            let fit = solve_penalized_ls(&g, &y, lam, &[]).unwrap();
            assert!((fit.d[0] - 3.5).abs() < 1e-14);
            assert!(fit.c.iter().all(|&c| c == 0.0));
        }
        let ss: f64 = y.iter().map(|v| (v - 3.5) * (v - 3.5)).sum();
        let v = gcv_score(&g, &y, 1.0, &[]).unwrap();
        assert!((v - 4.0 * ss / 9.0).abs() < 1e-12);
        let fit = solve_penalized_ls(&g, &y, 1.0, &[]).unwrap();
        assert!((fit.sigma2_hat - ss / 3.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_limit() {
        let xs = [0.05, 0.3, 0.45, 0.7, 0.95];
        let y = [0.3, -1.0, 0.4, 2.0, 0.1];
        let g = spline_grams(&xs);
        let fit = solve_penalized_ls(&g, &y, 1e-12, &[1.0]).unwrap();
        for (f, v) in fit.fitted.iter().zip(&y) {
            assert!((f - v).abs() < 1e-4);
        }
        // direct dense solve of the bordered interpolation system
        let n = 5;
        let mut k = Mat::zeros(n + 2, n + 2);
        k.view_mut((0, 0), (n, n)).copy_from(&g.sigma[0]);
        k.view_mut((0, n), (n, 2)).copy_from(&g.t);
        k.view_mut((n, 0), (2, n)).copy_from(&g.t.transpose());
        let mut rhs = Vector::zeros(n + 2);
        rhs.rows_mut(0, n).copy_from(&Vector::from_column_slice(&y));
        let sol = k.lu().solve(&rhs).unwrap();
        for i in 0..n {
            assert!((sol[i] - fit.c[i]).abs() < 1e-4 * sol.amax());
        }
    }

    #[test]
    fn singular_interpolation_is_reported() {
        let g = spline_grams(&[0.1, 0.1, 0.5, 0.9]);
        let y = [1.0, 2.0, 0.0, 1.0];
        assert!(matches!(solve_penalized_ls(&g, &y, 0.0, &[1.0]), Err(Error::Solver(_))));
        assert!(solve_penalized_ls(&g, &y, 1e-4, &[1.0]).is_ok());
    }

    #[test]
    fn saturation_limit_is_null_space_fit() {
        let xs: Vec<f64> = (0..20).map(|i| (i as f64 + 0.5) / 20.0).collect();
        let y: Vec<f64> = xs.iter().map(|x| math::sin(6.0 * x) + x).collect();
        let g = spline_grams(&xs);
        let fit = solve_penalized_ls(&g, &y, 1e12, &[1.0]).unwrap();
        let ls = solve_penalized_ls(&constant_and_linear(&g), &y, 1.0, &[]).unwrap();
        let ynorm = Vector::from_column_slice(&y).norm();
        for (a, b) in fit.fitted.iter().zip(&ls.fitted) {
            assert!((a - b).abs() < 1e-4 * ynorm);
        }
    }

    fn constant_and_linear(g: &GramSet) -> GramSet {
        GramSet::from_matrices(g.t.clone(), Vec::new()).unwrap()
    }

    #[test]
    fn representer_orthogonality_and_null_reproduction() {
        let xs: Vec<f64> = (0..15).map(|i| (i as f64 * 0.37) % 1.0).collect();
        let g = spline_grams(&xs);
        let y: Vec<f64> = xs.iter().map(|x| math::cos(4.0 * x)).collect();
        let fit = solve_penalized_ls(&g, &y, 1e-4, &[1.0]).unwrap();
        let tc = g.t.transpose() * Vector::from_column_slice(&fit.c);
        let cn = Vector::from_column_slice(&fit.c).norm();
        assert!(tc.amax() < 1e-8 * cn.max(1.0));

        let y_null: Vec<f64> = (0..15).map(|i| 2.0 - 3.0 * g.t[(i, 1)]).collect();
        for &lam in &[1e-6, 1e-2, 10.0] {
            let fit = solve_penalized_ls(&g, &y_null, lam, &[1.0]).unwrap();
            for (a, b) in fit.fitted.iter().zip(&y_null) {
                assert!((a - b).abs() < 1e-9);
            }
            assert!(fit.c.iter().all(|c| c.abs() < 1e-9));
        }
    }

    #[test]
    fn gcv_path_matches_explicit_influence() {
        let xs: Vec<f64> = (0..25).map(|i| (i as f64 * 0.61) % 1.0).collect();
        let y: Vec<f64> = xs.iter().map(|x| math::sin(5.0 * x) + 0.1 * math::cos(40.0 * x)).collect();
        let g = spline_grams(&xs);
        for &lam in &[1e-7, 1e-5, 1e-3] {
            let a = influence_matrix(&g, lam, &[1.0]).unwrap();
            let r = (Mat::identity(25, 25) - &a) * Vector::from_column_slice(&y);
            let tr = 25.0 - a.trace();
            let v = 25.0 * r.norm_squared() / (tr * tr);
            assert!((v - gcv_score(&g, &y, lam, &[1.0]).unwrap()).abs() < 1e-10 * v);
            let fit = solve_penalized_ls(&g, &y, lam, &[1.0]).unwrap();
            assert!((fit.trace_a - a.trace()).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_trace_is_an_error() {
        let g = spline_grams(&[0.1, 0.5, 0.9]);
        assert!(matches!(gcv_score(&g, &[1.0, 3.0, 2.0], 0.0, &[1.0]), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn bands_require_gaussian() {
        let g = spline_grams(&[0.1, 0.4, 0.6, 0.9]);
        let mut fit = solve_penalized_ls(&g, &[1.0, 0.0, 1.0, 2.0], 1e-3, &[1.0]).unwrap();
        fit.family = Family::Bernoulli;
        let r = bayesian_intervals(&fit, &g, &Design::from_scalars(&[0.5]), 0.95, None);
        assert!(matches!(r, Err(Error::UnsupportedFamily(_))));
    }
}
