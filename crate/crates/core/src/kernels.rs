//! Reproducing kernels for each marginal domain, split into a parametric
//! (unpenalized) part and a smooth (penalized) part, together with the
//! centering that makes every component average to zero under its measure.
//!
//! | domain        | parametric basis      | smooth kernel                              |
//! |---------------|-----------------------|--------------------------------------------|
//! | unit interval | `k₁(t) = t − ½`       | `k₂(s)k₂(t) − k₄(|s − t|)`                 |
//! | plane         | `x, y`                | `r² log r / 8π`, projected off `{1, x, y}` |
//! | sphere        | none                  | truncated Legendre series                  |
//! | finite grid   | centered linear index | pseudo-inverse of the second-difference penalty |

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::math::{self, PI};

/// Default smoothness order of the spherical spline.
pub const DEFAULT_SPHERE_ORDER: u32 = 2;
/// Default truncation of the Legendre series.
pub const DEFAULT_SPHERE_TRUNCATION: usize = 50;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// The space a single covariate lives on.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    UnitInterval,
    Plane2D,
    Sphere { order: u32, truncation: usize },
    /// Ordered points `1..=size`.
    FiniteGrid { size: usize },
}

impl Domain {
    pub fn sphere() -> Self {
        Domain::Sphere { order: DEFAULT_SPHERE_ORDER, truncation: DEFAULT_SPHERE_TRUNCATION }
    }

    pub fn default_measure(&self) -> Measure {
        match self {
            Domain::UnitInterval => Measure::LebesgueUniform,
            Domain::Plane2D | Domain::Sphere { .. } => Measure::EmpiricalOnData { weights: None },
            Domain::FiniteGrid { .. } => Measure::UniformGrid,
        }
    }

    /// Dimension of the parametric (unpenalized, non-constant) part.
    pub fn parametric_dim(&self) -> usize {
        match self {
            Domain::UnitInterval | Domain::FiniteGrid { .. } => 1,
            Domain::Plane2D => 2,
            Domain::Sphere { .. } => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Domain::FiniteGrid { size } if size < 3 => Err(Error::Config(format!(
                "finite grid needs at least 3 points for second differences, got {size}"
            ))),
            Domain::Sphere { order, truncation } if order < 2 || truncation < 1 => Err(Error::Config(format!(
                "sphere kernel needs order >= 2 and truncation >= 1 (got m={order}, L={truncation})"
            ))),
            _ => Ok(()),
        }
    }

    /// Check that `v` is a point of this domain.
    pub fn check(&self, v: &Value) -> Result<()> {
        match (self, v) {
            (Domain::UnitInterval, Value::Scalar(t)) => {
                if !(0.0..=1.0).contains(t) {
                    return Err(Error::Domain(format!(
                        "{t} is outside [0, 1]; rescale the covariate to the unit interval first"
                    )));
                }
                Ok(())
            }
            (Domain::FiniteGrid { size }, Value::Scalar(t)) => {
                if libm::trunc(*t) != *t || *t < 1.0 || *t > *size as f64 {
                    return Err(Error::Domain(format!("{t} is not a grid index in 1..={size}")));
                }
                Ok(())
            }
            (Domain::Plane2D, Value::Pair(x, y)) => {
                if !x.is_finite() || !y.is_finite() {
                    return Err(Error::Domain(format!("non-finite planar point ({x}, {y})")));
                }
                Ok(())
            }
            (Domain::Sphere { .. }, Value::Pair(lat, lon)) => check_latlon(*lat, *lon),
            _ => Err(Error::Domain(format!("value {v:?} does not match domain {self:?}"))),
        }
    }
}

/// Probability measure defining the averaging operator of a domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    LebesgueUniform,
    /// Observed design points; uniform weights unless given.
    EmpiricalOnData { weights: Option<Vec<f64>> },
    UniformSphere,
    UniformGrid,
}

/// A covariate value: scalars for intervals and grids, pairs for the plane
/// and for (latitude, longitude) in degrees on the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Scalar(f64),
    Pair(f64, f64),
}

impl Value {
    pub fn scalar(&self) -> f64 {
        match *self {
            Value::Scalar(t) => t,
            Value::Pair(a, _) => a,
        }
    }

    fn key(&self) -> (f64, f64) {
        match *self {
            Value::Scalar(t) => (t, 0.0),
            Value::Pair(a, b) => (a, b),
        }
    }
}

/// Which half of a marginal kernel to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Parametric,
    Smooth,
}

#[inline]
pub fn k1(u: f64) -> f64 {
    u - 0.5
}

#[inline]
pub fn k2(u: f64) -> f64 {
    let a = k1(u);
    (a * a - 1.0 / 12.0) / 2.0
}

#[inline]
pub fn k4(u: f64) -> f64 {
    let a = k1(u);
    let a2 = a * a;
    (a2 * a2 - a2 / 2.0 + 7.0 / 240.0) / 24.0
}

fn check_unit(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!(
            "{t} is outside [0, 1]; rescale the covariate to the unit interval first"
        )));
    }
    Ok(())
}

/// Cubic-spline kernel on `[0, 1]` (Bernoulli-polynomial form).
pub fn cubic_spline_kernel(s: f64, t: f64, part: Part) -> Result<f64> {
    check_unit(s)?;
    check_unit(t)?;
    Ok(match part {
        Part::Parametric => k1(s) * k1(t),
        Part::Smooth => cubic_smooth(s, t),
    })
}

#[inline]
fn cubic_smooth(s: f64, t: f64) -> f64 {
    k2(s) * k2(t) - k4(math::abs(s - t))
}

/// Thin-plate semikernel `r² log r / (8π)` in the plane.
pub fn thin_plate_semikernel(p: [f64; 2], q: [f64; 2]) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    let r2 = dx * dx + dy * dy;
    if r2 == 0.0 {
        return 0.0;
    }
    // r² log r = r² log(r²) / 2
    r2 * math::ln(r2) / (16.0 * PI)
}

fn check_latlon(lat: f64, lon: f64) -> Result<()> {
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(Error::Domain(format!(
            "({lat}, {lon}) is not a valid (latitude, longitude) in degrees"
        )));
    }
    Ok(())
}

/// Cosine of the great-circle angle between two (lat, lon) points in degrees.
pub fn cos_angle(p: (f64, f64), q: (f64, f64)) -> f64 {
    let to_rad = PI / 180.0;
    let (la1, lo1) = (p.0 * to_rad, p.1 * to_rad);
    let (la2, lo2) = (q.0 * to_rad, q.1 * to_rad);
    let c = math::sin(la1) * math::sin(la2) + math::cos(la1) * math::cos(la2) * math::cos(lo1 - lo2);
    c.clamp(-1.0, 1.0)
}

/// `Σ_{ℓ=1..L} (2ℓ+1)/(4π) [ℓ(ℓ+1)]^{-m} P_ℓ(x)` by the three-term recurrence.
pub fn sphere_series(x: f64, order: u32, truncation: usize) -> f64 {
    let mut p_prev = 1.0;
    let mut p = x;
    let mut sum = 0.0;
    for l in 1..=truncation {
        let lf = l as f64;
        let w = (2.0 * lf + 1.0) / (4.0 * PI) * math::powi(lf * (lf + 1.0), -(order as i32));
        sum += w * p;
        let next = ((2.0 * lf + 1.0) * x * p - lf * p_prev) / (lf + 1.0);
        p_prev = p;
        p = next;
    }
    sum
}

/// Spherical-spline reproducing kernel between two (lat, lon) points in degrees.
pub fn sphere_kernel(p: (f64, f64), q: (f64, f64), order: u32, truncation: usize) -> Result<f64> {
    check_latlon(p.0, p.1)?;
    check_latlon(q.0, q.1)?;
    if order < 2 || truncation < 1 {
        return Err(Error::Config(format!("sphere kernel needs m >= 2 and L >= 1 (got m={order}, L={truncation})")));
    }
    let (a, b) = if (p.0, p.1) <= (q.0, q.1) { (p, q) } else { (q, p) };
    Ok(sphere_series(cos_angle(a, b), order, truncation))
}

/// The `(N−2)×N` second-difference operator.
pub fn second_difference(n: usize) -> Result<Mat> {
    if n < 3 {
        return Err(Error::Config(format!("second differences need N >= 3, got {n}")));
    }
    let mut d = Mat::zeros(n - 2, n);
    for i in 0..n - 2 {
        d[(i, i)] = 1.0;
        d[(i, i + 1)] = -2.0;
        d[(i, i + 2)] = 1.0;
    }
    Ok(d)
}

/// `D₂ᵀ D₂`, the sum-of-squared-second-differences penalty.
pub fn second_difference_penalty(n: usize) -> Result<Mat> {
    let d = second_difference(n)?;
    Ok(d.transpose() * d)
}

/// Marginal kernel of an ordered grid of `N` points.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    /// `φ(x) = (x − (N+1)/2) / s`, unit mean square over the grid.
    pub parametric: Vec<f64>,
    /// `N×N` smooth Gram (pseudo-inverse of the penalty).
    pub gram: Mat,
}

pub fn discrete_diff_kernel(n: usize) -> Result<DiscreteKernel> {
    let penalty = second_difference_penalty(n)?;
    let gram = linalg::sym_pinv(&penalty, 1e-10);
    let nf = n as f64;
    let scale = math::sqrt((nf * nf - 1.0) / 12.0);
    let parametric = (1..=n).map(|x| (x as f64 - (nf + 1.0) / 2.0) / scale).collect();
    Ok(DiscreteKernel { parametric, gram })
}

fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::Config(format!("expected {n} weights, got {}", weights.len())));
    }
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::Config("weights must be nonnegative".into()));
    }
    let sum: f64 = weights.iter().sum();
    if math::abs(sum - 1.0) > WEIGHT_SUM_TOL {
        return Err(Error::Config(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

/// Apply `(I − E)` to both arguments of a Gram matrix, `E` averaging against `weights`.
pub fn center_kernel(gram: &Mat, weights: &[f64]) -> Result<Mat> {
    let n = gram.nrows();
    if gram.ncols() != n {
        return Err(Error::Config("gram must be square".into()));
    }
    check_weights(weights, n)?;
    let w = Vector::from_column_slice(weights);
    let kw = gram * &w;
    let wkw = w.dot(&kw);
    let mut out = gram.clone();
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] += -kw[j] - kw[i] + wkw;
        }
    }
    linalg::symmetrize(&mut out);
    Ok(out)
}

/// Weighted least-squares projection onto a small function space, evaluated
/// through the anchor points that carry the empirical measure.
#[derive(Debug, Clone)]
struct Projection {
    anchors: Vec<Value>,
    weights: Vec<f64>,
    /// `W X (Xᵀ W X)⁻¹`, `n × q`.
    coef: Mat,
    /// Raw kernel among anchors.
    anchor_gram: Mat,
    /// Whether the projected space includes the planar coordinates.
    planar: bool,
}

impl Projection {
    fn basis(&self, v: &Value) -> Vec<f64> {
        if self.planar {
            let (x, y) = v.key();
            vec![1.0, x, y]
        } else {
            vec![1.0]
        }
    }

    /// `Π_S`: rows are `x(s)ᵀ coefᵀ`.
    fn pi(&self, pts: &[Value]) -> Mat {
        let q = self.coef.ncols();
        let x = Mat::from_fn(pts.len(), q, |i, j| self.basis(&pts[i])[j]);
        x * self.coef.transpose()
    }
}

/// A marginal reproducing kernel bound to its measure.
///
/// Empirical measures keep the design points as anchors so the centered
/// kernel can be evaluated anywhere, not only at the training points.
#[derive(Debug, Clone)]
pub struct MarginalKernel {
    domain: Domain,
    measure: Measure,
    discrete: Option<DiscreteKernel>,
    projection: Option<Projection>,
    /// Means of the raw parametric functions under the measure.
    parametric_shift: Vec<f64>,
}

impl MarginalKernel {
    /// Resolve `domain` and `measure` against the observed values `data`.
    pub fn new(domain: Domain, measure: Measure, data: &[Value]) -> Result<Self> {
        domain.validate()?;
        for v in data {
            domain.check(v)?;
        }
        match (&domain, &measure) {
            (Domain::UnitInterval, Measure::LebesgueUniform)
            | (Domain::Sphere { .. }, Measure::UniformSphere)
            | (Domain::FiniteGrid { .. }, Measure::UniformGrid)
            | (_, Measure::EmpiricalOnData { .. }) => {}
            _ => {
                return Err(Error::Config(format!("measure {measure:?} is not available on {domain:?}")));
            }
        }
        let discrete = match domain {
            Domain::FiniteGrid { size } => Some(discrete_diff_kernel(size)?),
            _ => None,
        };
        let mut kernel = MarginalKernel {
            domain,
            measure: measure.clone(),
            discrete,
            projection: None,
            parametric_shift: Vec::new(),
        };
        kernel.parametric_shift = vec![0.0; kernel.domain.parametric_dim()];
        if let Measure::EmpiricalOnData { weights } = measure {
            if data.is_empty() {
                return Err(Error::Config("empirical measure needs at least one observed value".into()));
            }
            let n = data.len();
            let w = match weights {
                Some(w) => {
                    check_weights(&w, n)?;
                    w
                }
                None => vec![1.0 / n as f64; n],
            };
            for (v, &wi) in data.iter().zip(&w) {
                let raw = kernel.raw_parametric(v);
                for (s, r) in kernel.parametric_shift.iter_mut().zip(raw) {
                    *s += wi * r;
                }
            }
            let planar = matches!(kernel.domain, Domain::Plane2D);
            let q = if planar { 3 } else { 1 };
            let basis = |v: &Value| -> Vec<f64> {
                if planar {
                    let (x, y) = v.key();
                    vec![1.0, x, y]
                } else {
                    vec![1.0]
                }
            };
            let xa = Mat::from_fn(n, q, |i, j| basis(&data[i])[j]);
            let mut wx = xa.clone();
            for i in 0..n {
                for j in 0..q {
                    wx[(i, j)] *= w[i];
                }
            }
            let xtwx = xa.transpose() * &wx;
            let inv = xtwx.try_inverse().ok_or_else(|| {
                Error::Data("planar design points are collinear; thin-plate projection is undefined".into())
            })?;
            let coef = wx * inv;
            let anchor_gram = kernel.raw_gram(data, data);
            kernel.projection = Some(Projection { anchors: data.to_vec(), weights: w, coef, anchor_gram, planar });
        }
        Ok(kernel)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn parametric_dim(&self) -> usize {
        self.domain.parametric_dim()
    }

    /// Weights of the empirical measure, if any.
    pub fn empirical_weights(&self) -> Option<&[f64]> {
        self.projection.as_ref().map(|p| p.weights.as_slice())
    }

    fn raw_parametric(&self, v: &Value) -> Vec<f64> {
        match (&self.domain, v) {
            (Domain::UnitInterval, Value::Scalar(t)) => vec![k1(*t)],
            (Domain::FiniteGrid { .. }, Value::Scalar(t)) => {
                let d = self.discrete.as_ref().expect("grid kernel");
                vec![d.parametric[*t as usize - 1]]
            }
            (Domain::Plane2D, Value::Pair(x, y)) => vec![*x, *y],
            _ => Vec::new(),
        }
    }

    /// Parametric basis functions at `v`, each averaging to zero under the measure.
    pub fn parametric(&self, v: &Value) -> Result<Vec<f64>> {
        self.domain.check(v)?;
        let mut raw = self.raw_parametric(v);
        for (r, s) in raw.iter_mut().zip(&self.parametric_shift) {
            *r -= s;
        }
        Ok(raw)
    }

    fn raw_smooth(&self, a: &Value, b: &Value) -> f64 {
        let (a, b) = if a.key() <= b.key() { (a, b) } else { (b, a) };
        match (&self.domain, a, b) {
            (Domain::UnitInterval, Value::Scalar(s), Value::Scalar(t)) => cubic_smooth(*s, *t),
            (Domain::Plane2D, Value::Pair(x1, y1), Value::Pair(x2, y2)) => {
                thin_plate_semikernel([*x1, *y1], [*x2, *y2])
            }
            (Domain::Sphere { order, truncation }, Value::Pair(la1, lo1), Value::Pair(la2, lo2)) => {
                sphere_series(cos_angle((*la1, *lo1), (*la2, *lo2)), *order, *truncation)
            }
            (Domain::FiniteGrid { .. }, Value::Scalar(s), Value::Scalar(t)) => {
                let d = self.discrete.as_ref().expect("grid kernel");
                d.gram[(*s as usize - 1, *t as usize - 1)]
            }
            _ => unreachable!("values are checked against the domain before evaluation"),
        }
    }

    fn raw_gram(&self, a: &[Value], b: &[Value]) -> Mat {
        Mat::from_fn(a.len(), b.len(), |i, j| self.raw_smooth(&a[i], &b[j]))
    }

    fn check_all(&self, pts: &[Value]) -> Result<()> {
        pts.iter().try_for_each(|v| self.domain.check(v))
    }

    /// Smooth-part kernel between two point sets, centered under the measure.
    pub fn smooth_gram(&self, a: &[Value], b: &[Value]) -> Result<Mat> {
        self.check_all(a)?;
        self.check_all(b)?;
        let raw = self.raw_gram(a, b);
        let Some(proj) = &self.projection else {
            return Ok(raw);
        };
        let pa = proj.pi(a);
        let pb = proj.pi(b);
        let ea = self.raw_gram(a, &proj.anchors);
        let eb = self.raw_gram(b, &proj.anchors);
        // K − Π_a E(A,b) − E(a,A) Π_bᵀ + Π_a E(A,A) Π_bᵀ
        let mut out = raw - &pa * eb.transpose() - ea * pb.transpose();
        out += &pa * &proj.anchor_gram * pb.transpose();
        if a == b {
            linalg::symmetrize(&mut out);
        }
        Ok(out)
    }

    /// Diagonal `K(v, v)` of the centered smooth kernel.
    pub fn smooth_diag(&self, pts: &[Value]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(pts.len());
        for v in pts {
            let one = [*v];
            out.push(self.smooth_gram(&one, &one)?[(0, 0)]);
        }
        Ok(out)
    }

    /// Parametric design `Φ`, one row per point.
    pub fn parametric_matrix(&self, pts: &[Value]) -> Result<Mat> {
        let q = self.parametric_dim();
        let mut m = Mat::zeros(pts.len(), q);
        for (i, v) in pts.iter().enumerate() {
            for (j, x) in self.parametric(v)?.into_iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        Ok(m)
    }

    /// Kernel of the parametric subspace, `Φ_a Φ_bᵀ`.
    pub fn parametric_gram(&self, a: &[Value], b: &[Value]) -> Result<Mat> {
        Ok(self.parametric_matrix(a)? * self.parametric_matrix(b)?.transpose())
    }

    /// Evaluate one half of the kernel at a single pair.
    pub fn eval(&self, a: &Value, b: &Value, part: Part) -> Result<f64> {
        let (sa, sb) = ([*a], [*b]);
        Ok(match part {
            Part::Parametric => self.parametric_gram(&sa, &sb)?[(0, 0)],
            Part::Smooth => self.smooth_gram(&sa, &sb)?[(0, 0)],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cubic_examples() {
        assert_abs_diff_eq!(cubic_spline_kernel(0.0, 0.0, Part::Parametric).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(cubic_spline_kernel(0.0, 0.0, Part::Smooth).unwrap(), 1.0 / 120.0, epsilon = 1e-15);
        assert!(matches!(cubic_spline_kernel(1.2, 0.0, Part::Smooth), Err(Error::Domain(_))));
    }

    #[test]
    fn thin_plate_examples() {
        assert_eq!(thin_plate_semikernel([0.3, 0.4], [0.3, 0.4]), 0.0);
        assert_abs_diff_eq!(thin_plate_semikernel([0.0, 0.0], [1.0, 0.0]), 0.0, epsilon = 1e-16);
        let expected = 4.0 * core::f64::consts::LN_2 / (8.0 * PI);
        assert_abs_diff_eq!(thin_plate_semikernel([0.0, 0.0], [0.0, 2.0]), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.110318, epsilon = 1e-6);
    }

    #[test]
    fn sphere_examples() {
        let v = sphere_kernel((10.0, 20.0), (10.0, 20.0), 2, 1).unwrap();
        assert_abs_diff_eq!(v, 3.0 / (16.0 * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.059683, epsilon = 1e-6);
        let anti = sphere_kernel((10.0, 20.0), (-10.0, -160.0), 2, 1).unwrap();
        assert_abs_diff_eq!(anti, -3.0 / (16.0 * PI), epsilon = 1e-12);
        assert!(sphere_kernel((91.0, 0.0), (0.0, 0.0), 2, 10).is_err());
        assert!(sphere_kernel((0.0, 0.0), (0.0, 181.0), 2, 10).is_err());
    }

    #[test]
    fn sphere_truncation_gap_equals_tail_sum() {
        // At P = Q every Legendre value is 1, so L=50 vs L=100 differ by the
        // partial tail sum; for m = 2 that is about 2.4e-5.
        let p = (33.0, -71.0);
        let gap = sphere_kernel(p, p, 2, 100).unwrap() - sphere_kernel(p, p, 2, 50).unwrap();
        let tail: f64 = (51..=100)
            .map(|l| {
                let l = l as f64;
                (2.0 * l + 1.0) / (4.0 * PI * (l * (l + 1.0)).powi(2))
            })
            .sum();
        assert_abs_diff_eq!(gap, tail, epsilon = 1e-15);
        assert!(gap > 2e-5 && gap < 3e-5);
    }

    #[test]
    fn discrete_examples() {
        let pen = second_difference_penalty(3).unwrap();
        let c = Vector::from_vec(vec![1.0, -2.0, 1.0]);
        assert_abs_diff_eq!(c.dot(&(&pen * &c)), 36.0, epsilon = 1e-12);
        let pen7 = second_difference_penalty(7).unwrap();
        let line = Vector::from_fn(7, |i, _| 0.3 + 1.7 * i as f64);
        assert_abs_diff_eq!(line.dot(&(&pen7 * &line)), 0.0, epsilon = 1e-10);

        let k = discrete_diff_kernel(5).unwrap();
        let phi = Vector::from_vec(k.parametric.clone());
        for j in 0..5 {
            assert_abs_diff_eq!(k.gram.column(j).sum(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(k.gram.column(j).dot(&phi), 0.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(phi.sum(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(phi.norm_squared() / 5.0, 1.0, epsilon = 1e-12);
        assert!(matches!(discrete_diff_kernel(2), Err(Error::Config(_))));
    }

    #[test]
    fn center_examples() {
        let ones = Mat::from_element(4, 4, 1.0);
        let w = [0.1, 0.2, 0.3, 0.4];
        assert!(center_kernel(&ones, &w).unwrap().amax() < 1e-15);

        let id = Mat::identity(2, 2);
        let c = center_kernel(&id, &[0.5, 0.5]).unwrap();
        let expected = Mat::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!((c - expected).amax() < 1e-15);

        let b = Mat::from_fn(4, 4, |i, j| math::cos((i + 2 * j) as f64));
        let g = &b * b.transpose();
        let once = center_kernel(&g, &w).unwrap();
        let twice = center_kernel(&once, &w).unwrap();
        assert!((&once - &twice).amax() < 1e-12);
        let wv = Vector::from_column_slice(&w);
        assert!((&once * wv).amax() < 1e-12);

        assert!(matches!(center_kernel(&g, &[0.5, 0.5, 0.5, 0.5]), Err(Error::Config(_))));
        assert!(matches!(center_kernel(&g, &[1.5, -0.5, 0.0, 0.0]), Err(Error::Config(_))));
    }

    #[test]
    fn empirical_kernel_matches_center_kernel() {
        let pts: Vec<Value> = [0.1, 0.35, 0.5, 0.9].iter().map(|&t| Value::Scalar(t)).collect();
        let mk = MarginalKernel::new(Domain::UnitInterval, Measure::EmpiricalOnData { weights: None }, &pts).unwrap();
        let raw = Mat::from_fn(4, 4, |i, j| cubic_smooth(pts[i].scalar(), pts[j].scalar()));
        let expected = center_kernel(&raw, &[0.25; 4]).unwrap();
        let got = mk.smooth_gram(&pts, &pts).unwrap();
        assert!((got - expected).amax() < 1e-15);
        let phi = mk.parametric_matrix(&pts).unwrap();
        assert_abs_diff_eq!(phi.column(0).sum(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn thin_plate_projection_is_psd_and_annihilates_linear() {
        let pts: Vec<Value> = (0..12)
            .map(|i| {
                let t = i as f64;
                Value::Pair(math::cos(1.3 * t) * (1.0 + 0.1 * t), math::sin(0.7 * t))
            })
            .collect();
        let mk = MarginalKernel::new(Domain::Plane2D, Domain::Plane2D.default_measure(), &pts).unwrap();
        let g = mk.smooth_gram(&pts, &pts).unwrap();
        let (lo, hi) = linalg::eig_range(&g);
        assert!(lo >= -1e-10 * hi, "{lo} {hi}");
        let xs = Vector::from_fn(12, |i, _| pts[i].key().0);
        assert!((&g * Vector::from_element(12, 1.0 / 12.0)).amax() < 1e-12);
        assert!((&g * xs / 12.0).amax() < 1e-12);
    }

    #[test]
    fn mismatched_measure_is_rejected() {
        let pts = [Value::Scalar(0.5)];
        assert!(MarginalKernel::new(Domain::UnitInterval, Measure::UniformSphere, &pts).is_err());
        assert!(MarginalKernel::new(Domain::Plane2D, Measure::EmpiricalOnData { weights: None }, &[]).is_err());
    }
}
