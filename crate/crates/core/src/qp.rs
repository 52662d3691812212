//! Dense convex quadratic programming by a primal-dual interior-point method.
//!
//! ```text
//! minimize ½ xᵀ P x + qᵀ x   subject to   A x = b,   G x ≥ h
//! ```
//!
//! Mehrotra predictor-corrector on the slack form `G x − s = h`, `s, z ≥ 0`.

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub struct QpConfig {
    pub max_iter: usize,
    /// Target for the scaled KKT residual and mean complementarity.
    pub tol: f64,
    /// Added to the diagonal of the reduced Hessian.
    pub regularization: f64,
}

impl Default for QpConfig {
    fn default() -> Self {
        QpConfig { max_iter: 200, tol: 1e-10, regularization: 1e-12 }
    }
}

pub struct QpProblem<'a> {
    pub p: &'a Mat,
    pub q: &'a Vector,
    pub a: &'a Mat,
    pub b: &'a Vector,
    pub g: &'a Mat,
    pub h: &'a Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vector,
    /// Equality multipliers.
    pub y: Vector,
    /// Inequality multipliers.
    pub z: Vector,
    pub s: Vector,
    pub objective: f64,
    pub iterations: usize,
    /// Largest of the scaled stationarity, feasibility and complementarity residuals.
    pub kkt_residual: f64,
    /// `sᵀ z`, which bounds the suboptimality of a feasible iterate.
    pub duality_gap: f64,
    pub converged: bool,
}

struct Residuals {
    dual: Vector,
    eq: Vector,
    ineq: Vector,
    kkt: f64,
    mu: f64,
}

fn residuals(pr: &QpProblem<'_>, x: &Vector, y: &Vector, z: &Vector, s: &Vector) -> Residuals {
    let dual = pr.p * x + pr.q - pr.a.transpose() * y - pr.g.transpose() * z;
    let eq = pr.a * x - pr.b;
    let ineq = pr.g * x - s - pr.h;
    let m = s.len().max(1) as f64;
    let mu = s.dot(z) / m;
    let scale = |v: &Vector| v.amax() / (1.0 + pr.q.amax().max(pr.b.amax()).max(pr.h.amax()));
    let kkt = scale(&dual).max(scale(&eq)).max(scale(&ineq)).max(mu);
    Residuals { dual, eq, ineq, kkt, mu }
}

fn max_step(v: &Vector, dv: &Vector) -> f64 {
    v.iter().zip(dv.iter()).filter(|(_, &d)| d < 0.0).map(|(&a, &d)| -a / d).fold(1.0, f64::min)
}

/// Reduced Newton system `[H −Aᵀ; A 0]` via the Schur complement on `A`.
struct Kkt {
    h: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    schur: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    a: Mat,
}

impl Kkt {
    fn new(pr: &QpProblem<'_>, d: &Vector, reg: f64) -> Result<Self> {
        let mut gd = pr.g.clone();
        for (i, &di) in d.iter().enumerate() {
            gd.row_mut(i).scale_mut(di);
        }
        let mut h = pr.p + pr.g.transpose() * gd;
        let n = h.nrows();
        let tr = (0..n).map(|i| h[(i, i)]).sum::<f64>() / n.max(1) as f64;
        for i in 0..n {
            h[(i, i)] += reg * (1.0 + tr);
        }
        let h = nalgebra::Cholesky::new(h).ok_or_else(|| Error::Solver("interior-point Hessian is not positive definite".into()))?;
        let schur = if pr.a.nrows() > 0 {
            let hinv_at = h.solve(&pr.a.transpose());
            Some(
                nalgebra::Cholesky::new(pr.a * hinv_at)
                    .ok_or_else(|| Error::Solver("equality constraints are rank deficient".into()))?,
            )
        } else {
            None
        };
        Ok(Kkt { h, schur, a: pr.a.clone() })
    }

    /// Solve `H dx − Aᵀ dy = r1`, `A dx = r2`.
    fn solve(&self, r1: &Vector, r2: &Vector) -> (Vector, Vector) {
        let hr = self.h.solve(r1);
        match &self.schur {
            None => (hr, Vector::zeros(0)),
            Some(s) => {
                let dy = s.solve(&(r2 - &self.a * &hr));
                let dx = self.h.solve(&(r1 + self.a.transpose() * &dy));
                (dx, dy)
            }
        }
    }
}

pub fn solve_qp(pr: &QpProblem<'_>, cfg: &QpConfig) -> Result<QpSolution> {
    let nx = pr.p.nrows();
    let (me, mi) = (pr.a.nrows(), pr.g.nrows());
    if pr.p.ncols() != nx || pr.q.len() != nx || pr.a.ncols() != nx || pr.g.ncols() != nx || pr.b.len() != me || pr.h.len() != mi {
        return Err(Error::Config("quadratic program dimensions disagree".into()));
    }
    let mut x = Vector::zeros(nx);
    let mut y = Vector::zeros(me);
    let mut z = Vector::from_element(mi, 1.0);
    let mut s = Vector::from_element(mi, 1.0);
    // Shift the start so the slacks are comfortably interior.
    let gx = pr.g * &x - pr.h;
    let shift = gx.iter().fold(0.0f64, |a, &v| a.max(-v)) + 1.0;
    s.iter_mut().zip(gx.iter()).for_each(|(si, &g)| *si = (g + shift).max(1.0));

    let mut best: Option<(f64, QpSolution)> = None;
    let objective = |x: &Vector| 0.5 * x.dot(&(pr.p * x)) + pr.q.dot(x);
    for it in 0..=cfg.max_iter {
        let r = residuals(pr, &x, &y, &z, &s);
        let snapshot = |converged| QpSolution {
            x: x.clone(),
            y: y.clone(),
            z: z.clone(),
            s: s.clone(),
            objective: objective(&x),
            iterations: it,
            kkt_residual: r.kkt,
            duality_gap: s.dot(&z),
            converged,
        };
        if r.kkt <= cfg.tol {
            return Ok(snapshot(true));
        }
        if best.as_ref().is_none_or(|(k, _)| r.kkt < *k) {
            best = Some((r.kkt, snapshot(false)));
        }
        if it == cfg.max_iter {
            break;
        }
        let d = Vector::from_iterator(mi, z.iter().zip(s.iter()).map(|(zi, si)| zi / si));
        // Near convergence D spans many orders of magnitude; escalate the ridge if needed.
        let mut reg = cfg.regularization;
        let kkt = loop {
            match Kkt::new(pr, &d, reg) {
                Ok(k) => break k,
                Err(e) if reg >= 1e-4 => return Err(e),
                Err(_) => reg *= 100.0,
            }
        };
        // dz = S⁻¹ (rc − Z ds),  ds = G dx + r_ineq
        let direction = |rc: &Vector| {
            let s_inv_rc = rc.component_div(&s);
            let r1 = -&r.dual + pr.g.transpose() * (&s_inv_rc - d.component_mul(&r.ineq));
            let (dx, dy) = kkt.solve(&r1, &(-&r.eq));
            let ds = pr.g * &dx + &r.ineq;
            let dz = s_inv_rc - d.component_mul(&ds);
            (dx, dy, ds, dz)
        };
        let sz = s.component_mul(&z);
        let (_, _, ds_a, dz_a) = direction(&(-&sz));
        let alpha_a = max_step(&s, &ds_a).min(max_step(&z, &dz_a));
        let mu_aff = (&s + &ds_a * alpha_a).dot(&(&z + &dz_a * alpha_a)) / mi.max(1) as f64;
        let sigma = math::powi(mu_aff / r.mu.max(f64::MIN_POSITIVE), 3).clamp(0.0, 1.0);
        let rc = -sz + Vector::from_element(mi, sigma * r.mu) - ds_a.component_mul(&dz_a);
        let (dx, dy, ds, dz) = direction(&rc);
        let alpha = (0.99 * max_step(&s, &ds).min(max_step(&z, &dz))).min(1.0);
        x += &dx * alpha;
        y += &dy * alpha;
        s += &ds * alpha;
        z += &dz * alpha;
    }
    Ok(best.expect("at least one iterate").1)
}

/// Quadratic program with hinge slacks:
///
/// ```text
/// minimize ½ xᵀ P x + qᵀ x + Σ_m w_m ξ_m
/// subject to A x = b,  ξ ≥ 0,  ξ ≥ G x + h
/// ```
///
/// Each `ξ_m` is eliminated analytically from the Newton system, so the reduced
/// Hessian `P + Gᵀ E G` carries the harmonic mean `E = D₁D₂/(D₁+D₂)` of the two
/// bound scalings instead of their difference.
pub struct HingeQp<'a> {
    pub p: &'a Mat,
    pub q: &'a Vector,
    pub a: &'a Mat,
    pub b: &'a Vector,
    pub g: &'a Mat,
    pub h: &'a Vector,
    /// Positive loss weights.
    pub w: &'a Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HingeSolution {
    pub x: Vector,
    pub xi: Vector,
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    /// `s₁ᵀz₁ + s₂ᵀz₂`.
    pub duality_gap: f64,
    pub converged: bool,
}

const STALL_ITERS: usize = 25;

pub fn solve_hinge_qp(pr: &HingeQp<'_>, cfg: &QpConfig) -> Result<HingeSolution> {
    let nx = pr.p.nrows();
    let (me, m) = (pr.a.nrows(), pr.g.nrows());
    if pr.p.ncols() != nx
        || pr.q.len() != nx
        || pr.a.ncols() != nx
        || pr.g.ncols() != nx
        || pr.b.len() != me
        || pr.h.len() != m
        || pr.w.len() != m
    {
        return Err(Error::Config("hinge program dimensions disagree".into()));
    }
    if pr.w.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Config("hinge weights must be positive".into()));
    }
    let mut x = Vector::zeros(nx);
    let mut y = Vector::zeros(me);
    let gxh = pr.g * &x + pr.h;
    let mut xi = Vector::from_iterator(m, gxh.iter().map(|&v| v.max(0.0) + 1.0));
    let mut s1 = xi.clone();
    let mut s2 = &xi - &gxh;
    let mut z1 = pr.w * 0.5;
    let mut z2 = pr.w * 0.5;

    let objective = |x: &Vector, xi: &Vector| 0.5 * x.dot(&(pr.p * x)) + pr.q.dot(x) + pr.w.dot(xi);
    let scale = 1.0 + pr.q.amax().max(pr.b.amax()).max(pr.h.amax()).max(pr.w.amax());
    let mut best: Option<HingeSolution> = None;
    for it in 0..=cfg.max_iter {
        let r_x = pr.p * &x + pr.q - pr.a.transpose() * &y + pr.g.transpose() * &z2;
        let r_xi = pr.w - &z1 - &z2;
        let r_1 = &xi - &s1;
        let r_2 = &xi - pr.g * &x - pr.h - &s2;
        let r_a = pr.a * &x - pr.b;
        let gap = s1.dot(&z1) + s2.dot(&z2);
        let obj = objective(&x, &xi);
        let kkt = [r_x.amax(), r_xi.amax(), r_1.amax(), r_2.amax(), r_a.amax()]
            .iter()
            .fold(0.0f64, |a, &v| a.max(v))
            / scale;
        let kkt = kkt.max(gap / (1.0 + obj.abs()));
        let snapshot = |converged| HingeSolution {
            x: x.clone(),
            xi: xi.clone(),
            objective: obj,
            iterations: it,
            kkt_residual: kkt,
            duality_gap: gap,
            converged,
        };
        if kkt <= cfg.tol {
            return Ok(snapshot(true));
        }
        if best.as_ref().is_none_or(|b| kkt < b.kkt_residual) {
            best = Some(snapshot(false));
        }
        // rounding floor reached: further iterations only wander
        let stalled = best.as_ref().is_some_and(|b| it >= b.iterations + STALL_ITERS);
        if it == cfg.max_iter || stalled {
            break;
        }
        let d1 = z1.component_div(&s1);
        let d2 = z2.component_div(&s2);
        let dsum = &d1 + &d2;
        let t = d2.component_div(&dsum);
        let e = d1.component_mul(&t);
        let mut reg = cfg.regularization;
        let kkt_sys = loop {
            match Kkt::new(&QpProblem { p: pr.p, q: pr.q, a: pr.a, b: pr.b, g: pr.g, h: pr.h }, &e, reg) {
                Ok(k) => break k,
                Err(err) if reg >= 1e-4 => return Err(err),
                Err(_) => reg *= 100.0,
            }
        };
        let direction = |rc1: &Vector, rc2: &Vector| {
            let a1 = rc1.component_div(&s1);
            let a2 = rc2.component_div(&s2);
            let numer = &a1 + &a2 - d1.component_mul(&r_1) - d2.component_mul(&r_2) - &r_xi;
            let u = numer.component_div(&dsum);
            // D₂ u = t ∘ numer avoids forming a large product
            let v = &a2 - t.component_mul(&numer) - d2.component_mul(&r_2);
            let rhs = -&r_x - pr.g.transpose() * &v;
            let (dx, dy) = kkt_sys.solve(&rhs, &(-&r_a));
            let gdx = pr.g * &dx;
            let dxi = &u + t.component_mul(&gdx);
            let dz2 = &v + e.component_mul(&gdx);
            let ds1 = &dxi + &r_1;
            let ds2 = &dxi - &gdx + &r_2;
            let dz1 = &a1 - d1.component_mul(&ds1);
            (dx, dy, dxi, ds1, ds2, dz1, dz2)
        };
        let sz1 = s1.component_mul(&z1);
        let sz2 = s2.component_mul(&z2);
        let (_, _, _, ds1a, ds2a, dz1a, dz2a) = direction(&(-&sz1), &(-&sz2));
        let alpha_a = max_step(&s1, &ds1a)
            .min(max_step(&s2, &ds2a))
            .min(max_step(&z1, &dz1a))
            .min(max_step(&z2, &dz2a));
        let mu = gap / (2 * m).max(1) as f64;
        let mu_aff = ((&s1 + &ds1a * alpha_a).dot(&(&z1 + &dz1a * alpha_a))
            + (&s2 + &ds2a * alpha_a).dot(&(&z2 + &dz2a * alpha_a)))
            / (2 * m).max(1) as f64;
        let sigma = math::powi(mu_aff / mu.max(f64::MIN_POSITIVE), 3).clamp(0.0, 1.0);
        let target = Vector::from_element(m, sigma * mu);
        let rc1 = -sz1 + &target - ds1a.component_mul(&dz1a);
        let rc2 = -sz2 + &target - ds2a.component_mul(&dz2a);
        let (dx, dy, dxi, ds1, ds2, dz1, dz2) = direction(&rc1, &rc2);
        let alpha = (0.99
            * max_step(&s1, &ds1)
                .min(max_step(&s2, &ds2))
                .min(max_step(&z1, &dz1))
                .min(max_step(&z2, &dz2)))
        .min(1.0);
        x += &dx * alpha;
        y += &dy * alpha;
        xi += &dxi * alpha;
        s1 += &ds1 * alpha;
        s2 += &ds2 * alpha;
        z1 += &dz1 * alpha;
        z2 += &dz2 * alpha;
    }
    Ok(best.expect("at least one iterate"))
}
