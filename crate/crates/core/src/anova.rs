//! Model space assembly: declarative term lists are expanded into the
//! unpenalized space `H⁰` (basis matrix `T`) and the penalized subspaces
//! `H^β` (Gram matrices `Σ_β`), plus evaluation of single fitted components.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::{Domain, MarginalKernel, Measure, Value};
use crate::linalg::{Mat, PivotedQr, Vector};
use crate::math;

/// Relative pivot tolerance for the rank check on `T`.
pub const RANK_TOL: f64 = 1e-10;

/// A named covariate with its domain and averaging measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub domain: Domain,
    pub measure: Measure,
}

impl Variable {
    /// Variable with the default measure for its domain.
    pub fn new(name: impl Into<String>, domain: Domain) -> Self {
        let measure = domain.default_measure();
        Variable { name: name.into(), domain, measure }
    }

    pub fn with_measure(mut self, measure: Measure) -> Self {
        self.measure = measure;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Flavor {
    Parametric,
    Smooth,
}

/// One subspace of the tensor-sum construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermSpec {
    pub variables: Vec<usize>,
    pub flavors: Vec<Flavor>,
    pub penalized: bool,
}

impl TermSpec {
    pub fn constant() -> Self {
        TermSpec { variables: Vec::new(), flavors: Vec::new(), penalized: false }
    }

    /// Single-variable subspace; parametric ones go into `H⁰`.
    pub fn main(variable: usize, flavor: Flavor) -> Self {
        TermSpec { variables: vec![variable], flavors: vec![flavor], penalized: flavor == Flavor::Smooth }
    }

    /// Product subspace; penalized iff any factor is smooth.
    pub fn product(variables: &[usize], flavors: &[Flavor]) -> Self {
        TermSpec {
            variables: variables.to_vec(),
            flavors: flavors.to_vec(),
            penalized: flavors.contains(&Flavor::Smooth),
        }
    }

    fn key(&self) -> Vec<(usize, Flavor)> {
        let mut k: Vec<_> = self.variables.iter().copied().zip(self.flavors.iter().copied()).collect();
        k.sort();
        k
    }

    pub fn is_constant(&self) -> bool {
        self.variables.is_empty()
    }
}

/// Response family of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Bernoulli,
    /// `k` non-reference categories.
    Polychotomous(usize),
    /// Length `M` of the outcome vector.
    MvBernoulli(usize),
    /// `k` categories.
    Msvm(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub variables: Vec<Variable>,
    pub terms: Vec<TermSpec>,
    pub family: Family,
}

impl ModelSpec {
    pub fn new(variables: Vec<Variable>, family: Family) -> Self {
        ModelSpec { variables, terms: Vec::new(), family }
    }

    /// Add a single subspace.
    pub fn with_term(mut self, term: TermSpec) -> Self {
        self.terms.push(term);
        self
    }

    /// Add every flavor combination of the effect on `variables`: for an
    /// interaction this yields all four subspaces (π⊗π into `H⁰`, the rest
    /// penalized). Flavors a domain cannot carry (a sphere has no parametric
    /// part) are skipped. `exclude` drops individual combinations.
    pub fn with_effect(mut self, variables: &[usize], exclude: &[&[Flavor]]) -> Self {
        for flavors in flavor_combinations(variables.len()) {
            if exclude.contains(&flavors.as_slice()) {
                continue;
            }
            let supported = variables.iter().zip(&flavors).all(|(&v, &f)| {
                f == Flavor::Smooth || self.variables.get(v).is_none_or(|var| var.domain.parametric_dim() > 0)
            });
            if supported {
                self.terms.push(TermSpec::product(variables, &flavors));
            }
        }
        self
    }
}

fn flavor_combinations(k: usize) -> Vec<Vec<Flavor>> {
    (0..(1usize << k))
        .map(|mask| {
            (0..k)
                .map(|i| if mask & (1 << i) == 0 { Flavor::Parametric } else { Flavor::Smooth })
                .collect()
        })
        .collect()
}

/// A validated model: `H⁰` terms and penalized terms in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    null_terms: Vec<TermSpec>,
    penalized: Vec<TermSpec>,
}

pub fn build_model(spec: &ModelSpec) -> Result<Model> {
    for v in &spec.variables {
        v.domain.validate()?;
    }
    let mut seen: Vec<Vec<(usize, Flavor)>> = Vec::new();
    let mut null_terms = vec![TermSpec::constant()];
    let mut penalized = Vec::new();
    for term in &spec.terms {
        if term.variables.len() != term.flavors.len() {
            return Err(Error::Specification(format!(
                "term has {} variables but {} flavors",
                term.variables.len(),
                term.flavors.len()
            )));
        }
        if term.is_constant() {
            if term.penalized {
                return Err(Error::Specification("the constant term cannot be penalized".into()));
            }
            continue;
        }
        for (i, &v) in term.variables.iter().enumerate() {
            let Some(var) = spec.variables.get(v) else {
                return Err(Error::Specification(format!("unknown variable index {v}")));
            };
            if term.variables[..i].contains(&v) {
                return Err(Error::Specification(format!("variable {} repeated within a term", var.name)));
            }
            if term.flavors[i] == Flavor::Parametric && var.domain.parametric_dim() == 0 {
                return Err(Error::Specification(format!(
                    "variable {} has no parametric part on its domain",
                    var.name
                )));
            }
        }
        let key = term.key();
        if seen.contains(&key) {
            return Err(Error::Specification(format!("duplicate term {}", label_of(&spec.variables, term))));
        }
        seen.push(key);
        let smooth = term.flavors.contains(&Flavor::Smooth);
        if smooth && !term.penalized {
            return Err(Error::Specification(format!(
                "term {} has a smooth factor and must be penalized",
                label_of(&spec.variables, term)
            )));
        }
        if term.penalized {
            penalized.push(term.clone());
        } else {
            null_terms.push(term.clone());
        }
    }
    Ok(Model { spec: spec.clone(), null_terms, penalized })
}

fn factor_label(var: &Variable, flavor: Flavor) -> String {
    match flavor {
        Flavor::Parametric => format!("p({})", var.name),
        Flavor::Smooth => format!("s({})", var.name),
    }
}

fn label_of(vars: &[Variable], term: &TermSpec) -> String {
    if term.is_constant() {
        return String::from("1");
    }
    let parts: Vec<String> = term
        .variables
        .iter()
        .zip(&term.flavors)
        .map(|(&v, &f)| match vars.get(v) {
            Some(var) => factor_label(var, f),
            None => format!("?{v}"),
        })
        .collect();
    parts.join(":")
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn null_terms(&self) -> &[TermSpec] {
        &self.null_terms
    }

    pub fn penalized_terms(&self) -> &[TermSpec] {
        &self.penalized
    }

    /// Dimension `M₀` of `H⁰`.
    pub fn null_dim(&self) -> usize {
        self.null_terms.iter().map(|t| self.term_width(t)).sum()
    }

    /// Number `p` of penalized subspaces.
    pub fn n_penalized(&self) -> usize {
        self.penalized.len()
    }

    fn term_width(&self, term: &TermSpec) -> usize {
        term.variables.iter().map(|&v| self.spec.variables[v].domain.parametric_dim()).product()
    }

    pub fn label(&self, term: &TermSpec) -> String {
        label_of(&self.spec.variables, term)
    }

    pub fn penalized_labels(&self) -> Vec<String> {
        self.penalized.iter().map(|t| self.label(t)).collect()
    }

    /// Labels of the columns of `T`.
    pub fn null_labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        for t in &self.null_terms {
            let base = self.label(t);
            let w = self.term_width(t);
            if w == 1 {
                out.push(base);
            } else {
                for k in 0..w {
                    out.push(format!("{base}[{k}]"));
                }
            }
        }
        out
    }

    /// Resolve each variable's measure against the training design.
    pub fn bind(&self, design: &Design) -> Result<Basis> {
        design.check_shape(self.spec.variables.len())?;
        let marginals = self
            .spec
            .variables
            .iter()
            .zip(&design.columns)
            .map(|(var, col)| {
                MarginalKernel::new(var.domain.clone(), var.measure.clone(), col)
                    .map_err(|e| annotate(e, &var.name))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Basis { model: self.clone(), marginals, train: design.clone() })
    }
}

fn annotate(e: Error, name: &str) -> Error {
    match e {
        Error::Domain(m) => Error::Domain(format!("variable {name}: {m}")),
        Error::Config(m) => Error::Config(format!("variable {name}: {m}")),
        Error::Data(m) => Error::Data(format!("variable {name}: {m}")),
        other => other,
    }
}

/// Covariate values, one column per model variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub columns: Vec<Vec<Value>>,
}

impl Design {
    pub fn new(columns: Vec<Vec<Value>>) -> Self {
        Design { columns }
    }

    /// Single scalar covariate.
    pub fn from_scalars(xs: &[f64]) -> Self {
        Design { columns: vec![xs.iter().map(|&x| Value::Scalar(x)).collect()] }
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> Vec<Value> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Rows at `idx`, in order.
    pub fn subset(&self, idx: &[usize]) -> Design {
        Design { columns: self.columns.iter().map(|c| idx.iter().map(|&i| c[i]).collect()).collect() }
    }

    fn check_shape(&self, nvars: usize) -> Result<()> {
        if self.columns.len() != nvars {
            return Err(Error::Data(format!("design has {} columns, model has {nvars} variables", self.columns.len())));
        }
        let n = self.len();
        if self.columns.iter().any(|c| c.len() != n) {
            return Err(Error::Data("design columns differ in length".into()));
        }
        Ok(())
    }
}

/// A model bound to its training design; evaluates `T` and `Σ_β` anywhere.
#[derive(Debug, Clone)]
pub struct Basis {
    model: Model,
    marginals: Vec<MarginalKernel>,
    train: Design,
}

impl Basis {
    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn train(&self) -> &Design {
        &self.train
    }

    pub fn marginal(&self, variable: usize) -> &MarginalKernel {
        &self.marginals[variable]
    }

    /// Unpenalized basis evaluated at `pts`, `|pts| × M₀`.
    pub fn null_matrix(&self, pts: &Design) -> Result<Mat> {
        pts.check_shape(self.marginals.len())?;
        let n = pts.len();
        let mut cols: Vec<Vector> = Vec::new();
        for term in &self.model.null_terms {
            let mut block = vec![Vector::from_element(n, 1.0)];
            for &v in &term.variables {
                let phi = self.marginals[v].parametric_matrix(&pts.columns[v])?;
                let mut next = Vec::new();
                for b in &block {
                    for k in 0..phi.ncols() {
                        next.push(b.component_mul(&phi.column(k)));
                    }
                }
                block = next;
            }
            cols.extend(block);
        }
        Ok(Mat::from_columns(&cols))
    }

    fn factor(&self, v: usize, flavor: Flavor, a: &Design, b: &Design) -> Result<Mat> {
        let m = &self.marginals[v];
        match flavor {
            Flavor::Parametric => m.parametric_gram(&a.columns[v], &b.columns[v]),
            Flavor::Smooth => m.smooth_gram(&a.columns[v], &b.columns[v]),
        }
    }

    /// `K_β(a_i, b_j)`: entrywise product of the term's factor kernels.
    pub fn term_gram(&self, beta: usize, a: &Design, b: &Design) -> Result<Mat> {
        a.check_shape(self.marginals.len())?;
        b.check_shape(self.marginals.len())?;
        let term = self
            .model
            .penalized
            .get(beta)
            .ok_or_else(|| Error::Query(format!("no penalized term {beta}")))?;
        let mut g = Mat::from_element(a.len(), b.len(), 1.0);
        for (&v, &f) in term.variables.iter().zip(&term.flavors) {
            g.component_mul_assign(&self.factor(v, f, a, b)?);
        }
        Ok(g)
    }

    /// `K_β(x, x)` for each point.
    pub fn term_diag(&self, beta: usize, pts: &Design) -> Result<Vec<f64>> {
        let term = self
            .model
            .penalized
            .get(beta)
            .ok_or_else(|| Error::Query(format!("no penalized term {beta}")))?;
        let mut out = vec![1.0; pts.len()];
        for (&v, &f) in term.variables.iter().zip(&term.flavors) {
            let m = &self.marginals[v];
            let d = match f {
                Flavor::Smooth => m.smooth_diag(&pts.columns[v])?,
                Flavor::Parametric => {
                    let phi = m.parametric_matrix(&pts.columns[v])?;
                    phi.row_iter().map(|r| r.norm_squared()).collect()
                }
            };
            for (o, x) in out.iter_mut().zip(d) {
                *o *= x;
            }
        }
        Ok(out)
    }

    /// Cross Grams `K_β(pts, train)` for every penalized term.
    pub fn cross_grams(&self, pts: &Design) -> Result<Vec<Mat>> {
        (0..self.model.penalized.len()).map(|b| self.term_gram(b, pts, &self.train)).collect()
    }

    /// Range of `T` columns belonging to null term `k`.
    fn null_columns(&self, k: usize) -> core::ops::Range<usize> {
        let start: usize = self.model.null_terms[..k].iter().map(|t| self.model.term_width(t)).sum();
        start..start + self.model.term_width(&self.model.null_terms[k])
    }

    /// Find a term by label.
    pub fn component_ref(&self, label: &str) -> Result<ComponentRef> {
        if let Some(k) = self.model.null_terms.iter().position(|t| self.model.label(t) == label) {
            return Ok(ComponentRef::Null(self.null_columns(k)));
        }
        if let Some(b) = self.model.penalized.iter().position(|t| self.model.label(t) == label) {
            return Ok(ComponentRef::Penalized(b));
        }
        Err(Error::Query(format!("term {label} is not in the model")))
    }

    /// Labels of every component in model order: `H⁰` terms then penalized terms.
    pub fn component_labels(&self) -> Vec<String> {
        self.model
            .null_terms
            .iter()
            .chain(&self.model.penalized)
            .map(|t| self.model.label(t))
            .collect()
    }

    /// Value of one fitted component at `pts`.
    pub fn evaluate_component(&self, coef: &Coefficients<'_>, which: &ComponentRef, pts: &Design) -> Result<Vec<f64>> {
        coef.check(self)?;
        match which {
            ComponentRef::Null(cols) => {
                let t = self.null_matrix(pts)?;
                Ok((0..pts.len())
                    .map(|i| cols.clone().map(|j| t[(i, j)] * coef.d[j]).sum())
                    .collect())
            }
            ComponentRef::Penalized(b) => {
                let g = self.term_gram(*b, pts, &self.train)?;
                let c = Vector::from_column_slice(coef.c);
                Ok((g * c * coef.theta[*b]).iter().copied().collect())
            }
        }
    }

    /// Sum of all components.
    pub fn predict(&self, coef: &Coefficients<'_>, pts: &Design) -> Result<Vec<f64>> {
        coef.check(self)?;
        let t = self.null_matrix(pts)?;
        let mut out = t * Vector::from_column_slice(coef.d);
        let c = Vector::from_column_slice(coef.c);
        for (b, g) in self.cross_grams(pts)?.into_iter().enumerate() {
            out += g * &c * coef.theta[b];
        }
        Ok(out.iter().copied().collect())
    }
}

/// A component of the fit: columns of `T`, or a penalized term index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ComponentRef {
    Null(core::ops::Range<usize>),
    Penalized(usize),
}

/// Representer coefficients `f = Σ_β θ_β Σ_i c_i K_β(t_i, ·) + Σ_ν d_ν φ_ν`.
#[derive(Debug, Clone, Copy)]
pub struct Coefficients<'a> {
    pub c: &'a [f64],
    pub d: &'a [f64],
    pub theta: &'a [f64],
}

impl Coefficients<'_> {
    fn check(&self, basis: &Basis) -> Result<()> {
        if self.c.len() != basis.train.len()
            || self.d.len() != basis.model.null_dim()
            || self.theta.len() != basis.model.n_penalized()
        {
            return Err(Error::Query("coefficients do not match the model".into()));
        }
        Ok(())
    }
}

/// Design structures for a fit at the training points.
#[derive(Debug, Clone)]
pub struct GramSet {
    /// `n × M₀` unpenalized basis.
    pub t: Mat,
    /// One symmetric `n × n` Gram per penalized term.
    pub sigma: Vec<Mat>,
    pub labels: Vec<String>,
    pub null_labels: Vec<String>,
    pub basis: Option<Basis>,
}

impl GramSet {
    /// Build directly from matrices (no evaluation basis attached).
    pub fn from_matrices(t: Mat, sigma: Vec<Mat>) -> Result<Self> {
        let n = t.nrows();
        if sigma.iter().any(|s| s.nrows() != n || s.ncols() != n) {
            return Err(Error::Data("Gram matrices must be n × n with n = rows of T".into()));
        }
        let labels = (0..sigma.len()).map(|b| format!("term{b}")).collect();
        let null_labels = (0..t.ncols()).map(|k| format!("null{k}")).collect();
        let g = GramSet { t, sigma, labels, null_labels, basis: None };
        g.check_rank()?;
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.t.nrows()
    }

    pub fn null_dim(&self) -> usize {
        self.t.ncols()
    }

    pub fn p(&self) -> usize {
        self.sigma.len()
    }

    /// `Σ_θ = Σ_β θ_β Σ_β`.
    pub fn weighted_sigma(&self, theta: &[f64]) -> Mat {
        let n = self.n();
        let mut s = Mat::zeros(n, n);
        for (g, &th) in self.sigma.iter().zip(theta) {
            s += g * th;
        }
        s
    }

    /// Rows/columns `idx` only (for cross-validation and leave-one-out).
    pub fn subset(&self, idx: &[usize]) -> GramSet {
        let t = self.t.select_rows(idx);
        let sigma = self.sigma.iter().map(|s| s.select_rows(idx).select_columns(idx)).collect();
        GramSet {
            t,
            sigma,
            labels: self.labels.clone(),
            null_labels: self.null_labels.clone(),
            basis: None,
        }
    }

    fn check_rank(&self) -> Result<()> {
        if self.t.ncols() == 0 {
            return Ok(());
        }
        let qr = PivotedQr::new(&self.t, RANK_TOL);
        if qr.rank() < self.t.ncols() {
            let dependent: Vec<&str> = qr.permutation()[qr.rank()..]
                .iter()
                .map(|&j| self.null_labels[j].as_str())
                .collect();
            return Err(Error::Data(format!(
                "unpenalized basis is rank deficient ({} of {} columns); collinear: {}",
                qr.rank(),
                self.t.ncols(),
                dependent.join(", ")
            )));
        }
        Ok(())
    }
}

/// Evaluate `T` and every `Σ_β` at the training design.
pub fn gram_matrices(model: &Model, design: &Design) -> Result<GramSet> {
    let basis = model.bind(design)?;
    let t = basis.null_matrix(design)?;
    let sigma = (0..model.n_penalized())
        .map(|b| basis.term_gram(b, design, design))
        .collect::<Result<Vec<_>>>()?;
    let g = GramSet {
        t,
        sigma,
        labels: model.penalized_labels(),
        null_labels: model.null_labels(),
        basis: Some(basis),
    };
    g.check_rank()?;
    Ok(g)
}

/// Components of a function tabulated on a full product grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AnovaGrid {
    pub dims: Vec<usize>,
    /// Keyed by the set of axes a component depends on (empty = constant).
    pub components: BTreeMap<Vec<usize>, Vec<f64>>,
}

impl AnovaGrid {
    pub fn component(&self, axes: &[usize]) -> Option<&[f64]> {
        self.components.get(axes).map(Vec::as_slice)
    }
}

/// Row-major strides for `dims`.
fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for a in (0..dims.len().saturating_sub(1)).rev() {
        s[a] = s[a + 1] * dims[a + 1];
    }
    s
}

/// `E_α f`, broadcast back over axis `α`.
fn average_axis(values: &[f64], dims: &[usize], axis: usize, w: &[f64]) -> Vec<f64> {
    let st = strides(dims);
    let mut out = vec![0.0; values.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let pos = (idx / st[axis]) % dims[axis];
        let base = idx - pos * st[axis];
        *o = (0..dims[axis]).map(|k| w[k] * values[base + k * st[axis]]).sum();
    }
    out
}

/// Apply the averaging-operator expansion of the identity to a gridded function.
///
/// `values` is row-major over `dims`; `weights[α]` is the probability vector of axis `α`.
pub fn empirical_anova(values: &[f64], dims: &[usize], weights: &[Vec<f64>]) -> Result<AnovaGrid> {
    let d = dims.len();
    if weights.len() != d {
        return Err(Error::Config(format!("{} weight vectors for {d} axes", weights.len())));
    }
    if values.len() != dims.iter().product::<usize>() {
        return Err(Error::Config("value count does not match the grid".into()));
    }
    for (a, w) in weights.iter().enumerate() {
        if w.len() != dims[a] {
            return Err(Error::Config(format!("axis {a}: {} weights for {} points", w.len(), dims[a])));
        }
        let s: f64 = w.iter().sum();
        if w.iter().any(|&x| x < 0.0) || math::abs(s - 1.0) > 1e-12 {
            return Err(Error::Config(format!("axis {a}: weights must be a probability vector (sum {s})")));
        }
    }
    let mut components = BTreeMap::new();
    for mask in 0..(1usize << d) {
        let mut g = values.to_vec();
        for a in 0..d {
            let avg = average_axis(&g, dims, a, &weights[a]);
            if mask & (1 << a) == 0 {
                g = avg;
            } else {
                for (x, m) in g.iter_mut().zip(avg) {
                    *x -= m;
                }
            }
        }
        let axes: Vec<usize> = (0..d).filter(|a| mask & (1 << a) != 0).collect();
        components.insert(axes, g);
    }
    Ok(AnovaGrid { dims: dims.to_vec(), components })
}

/// `E_α` applied to a gridded function (exposed for annihilation checks).
pub fn average_over_axis(values: &[f64], dims: &[usize], axis: usize, weights: &[f64]) -> Vec<f64> {
    average_axis(values, dims, axis, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::cubic_spline_kernel;
    use crate::kernels::Part;

    fn unit(name: &str) -> Variable {
        Variable::new(name, Domain::UnitInterval)
    }

    #[test]
    fn constant_only_model() {
        let m = build_model(&ModelSpec::new(vec![unit("x")], Family::Gaussian)).unwrap();
        assert_eq!(m.null_dim(), 1);
        assert_eq!(m.n_penalized(), 0);
    }

    #[test]
    fn risk_model_counts() {
        // μ + f₁(t₁) + a₂t₂ + f₃(t₃) + f₁₃(t₁,t₃)
        let vars = vec![unit("t1"), unit("t2"), unit("t3")];
        let base = ModelSpec::new(vars, Family::Bernoulli)
            .with_effect(&[0], &[])
            .with_term(TermSpec::main(1, Flavor::Parametric))
            .with_effect(&[2], &[]);
        let full = build_model(&base.clone().with_effect(&[0, 2], &[])).unwrap();
        assert_eq!(full.null_dim(), 5);
        assert_eq!(full.n_penalized(), 5);
        let pruned = build_model(&base.with_effect(&[0, 2], &[&[Flavor::Smooth, Flavor::Smooth]])).unwrap();
        assert_eq!(pruned.null_dim(), 5);
        assert_eq!(pruned.n_penalized(), 4);
        assert_eq!(
            pruned.penalized_labels(),
            vec!["s(t1)", "s(t3)", "s(t1):p(t3)", "p(t1):s(t3)"]
        );
    }

    #[test]
    fn time_space_model_counts() {
        let vars = vec![
            Variable::new("year", Domain::FiniteGrid { size: 30 }),
            Variable::new("P", Domain::sphere()),
        ];
        let spec = ModelSpec::new(vars, Family::Gaussian)
            .with_effect(&[0], &[])
            .with_effect(&[1], &[])
            .with_effect(&[0, 1], &[]);
        let m = build_model(&spec).unwrap();
        assert_eq!(m.null_dim(), 2);
        assert_eq!(m.n_penalized(), 4);
        assert_eq!(m.null_labels(), vec!["1", "p(year)"]);
    }

    #[test]
    fn spec_errors() {
        let bad = ModelSpec::new(vec![unit("x")], Family::Gaussian).with_term(TermSpec {
            variables: vec![0],
            flavors: vec![Flavor::Smooth],
            penalized: false,
        });
        assert!(matches!(build_model(&bad), Err(Error::Specification(_))));
        let unknown = ModelSpec::new(vec![unit("x")], Family::Gaussian).with_term(TermSpec::main(3, Flavor::Smooth));
        assert!(matches!(build_model(&unknown), Err(Error::Specification(_))));
        let dup = ModelSpec::new(vec![unit("x")], Family::Gaussian)
            .with_term(TermSpec::main(0, Flavor::Smooth))
            .with_term(TermSpec::main(0, Flavor::Smooth));
        assert!(matches!(build_model(&dup), Err(Error::Specification(_))));
        let sphere_lin = ModelSpec::new(vec![Variable::new("P", Domain::sphere())], Family::Gaussian)
            .with_term(TermSpec::main(0, Flavor::Parametric));
        assert!(matches!(build_model(&sphere_lin), Err(Error::Specification(_))));
    }

    #[test]
    fn single_smooth_gram_three_points() {
        let spec = ModelSpec::new(vec![unit("t")], Family::Gaussian).with_effect(&[0], &[]);
        let m = build_model(&spec).unwrap();
        let xs = [0.0, 0.5, 1.0];
        let g = gram_matrices(&m, &Design::from_scalars(&xs)).unwrap();
        assert!((g.sigma[0][(0, 0)] - 1.0 / 120.0).abs() < 1e-15);
        for i in 0..3 {
            for j in 0..3 {
                let k = cubic_spline_kernel(xs[i], xs[j], Part::Smooth).unwrap();
                assert_eq!(g.sigma[0][(i, j)], k);
            }
        }
    }

    #[test]
    fn collinear_null_space_is_named() {
        // Two copies of the same covariate make their linear terms collinear.
        let spec = ModelSpec::new(vec![unit("a"), unit("b")], Family::Gaussian)
            .with_term(TermSpec::main(0, Flavor::Parametric))
            .with_term(TermSpec::main(1, Flavor::Parametric));
        let m = build_model(&spec).unwrap();
        let xs: Vec<Value> = [0.1, 0.4, 0.8, 0.9].iter().map(|&x| Value::Scalar(x)).collect();
        let design = Design::new(vec![xs.clone(), xs]);
        match gram_matrices(&m, &design) {
            Err(Error::Data(msg)) => assert!(msg.contains("p(a)") || msg.contains("p(b)"), "{msg}"),
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn duplicated_point_gives_identical_rows() {
        let spec = ModelSpec::new(vec![unit("t")], Family::Gaussian).with_effect(&[0], &[]);
        let m = build_model(&spec).unwrap();
        let g = gram_matrices(&m, &Design::from_scalars(&[0.2, 0.2, 0.7, 0.9])).unwrap();
        assert_eq!(g.sigma[0].row(0), g.sigma[0].row(1));
    }

    #[test]
    fn additive_function_has_no_interaction() {
        let n = 11;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / 10.0).collect();
        let w = vec![1.0 / n as f64; n];
        let vals: Vec<f64> = (0..n * n).map(|k| xs[k / n] + xs[k % n]).collect();
        let g = empirical_anova(&vals, &[n, n], &[w.clone(), w]).unwrap();
        assert!(g.component(&[]).unwrap().iter().all(|&c| (c - 1.0).abs() < 1e-12));
        for k in 0..n * n {
            assert!((g.component(&[0]).unwrap()[k] - (xs[k / n] - 0.5)).abs() < 1e-12);
            assert!((g.component(&[1]).unwrap()[k] - (xs[k % n] - 0.5)).abs() < 1e-12);
            assert!(g.component(&[0, 1]).unwrap()[k].abs() < 1e-12);
        }
    }

    #[test]
    fn product_function_interaction() {
        let n = 11;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / 10.0).collect();
        let w = vec![1.0 / n as f64; n];
        let vals: Vec<f64> = (0..n * n).map(|k| xs[k / n] * xs[k % n]).collect();
        let g = empirical_anova(&vals, &[n, n], &[w.clone(), w]).unwrap();
        assert!((g.component(&[]).unwrap()[0] - 0.25).abs() < 1e-12);
        for k in 0..n * n {
            let expected = (xs[k / n] - 0.5) * (xs[k % n] - 0.5);
            assert!((g.component(&[0, 1]).unwrap()[k] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_function_has_only_constant() {
        let w = vec![0.2; 5];
        let vals = vec![3.5; 25];
        let g = empirical_anova(&vals, &[5, 5], &[w.clone(), w]).unwrap();
        for (axes, comp) in &g.components {
            if !axes.is_empty() {
                assert!(comp.iter().all(|c| c.abs() < 1e-12));
            }
        }
        assert!(empirical_anova(&vals, &[5, 5], &[vec![0.3; 5], vec![0.2; 5]]).is_err());
    }
}
