//! JSON model specification.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "variables": [{ "name": "x", "kind": "interval" }],
//!   "terms": [{ "variables": ["x"], "flavor": "all" }],
//!   "family": "gaussian",
//!   "tuning": { "lambda_grid": { "log10_lo": -8, "log10_hi": 2, "points": 40 }, "folds": 5 }
//! }
//! ```

use serde::{Deserialize, Serialize};
use ssanova_core::gaussian::{LambdaGrid, ThetaSearch};
use ssanova_core::kernels::{DEFAULT_SPHERE_ORDER, DEFAULT_SPHERE_TRUNCATION};
use ssanova_core::{Domain, Family, Flavor, Measure, ModelSpec, TermSpec, Variable};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub variables: Vec<VariableSpec>,
    #[serde(default)]
    pub terms: Vec<TermEntry>,
    pub family: FamilyName,
    /// Total number of categories, for `polychotomous` and `msvm`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<usize>,
    /// Response column; defaults to `y`. Ignored by `mvbernoulli`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default)]
    pub tuning: Tuning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Gaussian,
    Bernoulli,
    Polychotomous,
    Mvbernoulli,
    Msvm,
}

impl FamilyName {
    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
            .map_err(|_| CliError::Usage(format!("unknown family `{s}`")))
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FamilyName::Gaussian => "gaussian",
            FamilyName::Bernoulli => "bernoulli",
            FamilyName::Polychotomous => "polychotomous",
            FamilyName::Mvbernoulli => "mvbernoulli",
            FamilyName::Msvm => "msvm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Interval,
    Plane,
    Sphere,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureName {
    Lebesgue,
    Empirical,
    UniformSphere,
    UniformGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: String,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureName>,
    /// Data columns; defaults to `name`, or `name_1, name_2` for the plane and
    /// `name_lat, name_lon` for the sphere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    /// Number of levels of a `grid` variable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    /// Fixed `[min, max]` for the unit-interval rescale; the data range otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

impl VariableSpec {
    pub fn columns(&self) -> Vec<String> {
        if let Some(c) = &self.columns {
            return c.clone();
        }
        match self.kind {
            Kind::Interval | Kind::Grid => vec![self.name.clone()],
            Kind::Plane => vec![format!("{}_1", self.name), format!("{}_2", self.name)],
            Kind::Sphere => vec![format!("{}_lat", self.name), format!("{}_lon", self.name)],
        }
    }

    fn domain(&self, at: &str) -> Result<Domain> {
        Ok(match self.kind {
            Kind::Interval => Domain::UnitInterval,
            Kind::Plane => Domain::Plane2D,
            Kind::Sphere => Domain::Sphere {
                order: self.order.unwrap_or(DEFAULT_SPHERE_ORDER),
                truncation: self.truncation.unwrap_or(DEFAULT_SPHERE_TRUNCATION),
            },
            Kind::Grid => Domain::FiniteGrid {
                size: self.size.ok_or_else(|| CliError::Schema(format!("{at}.size is required for grid variables")))?,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermEntry {
    pub variables: Vec<String>,
    pub flavor: FlavorSpec,
    /// Must agree with the flavors when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalized: Option<bool>,
}

/// `"smooth"`, `"parametric"`, one flavor per variable, or `"all"` for every
/// flavor combination of the effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FlavorSpec {
    One(FlavorName),
    PerVariable(Vec<FlavorName>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlavorName {
    Smooth,
    Parametric,
    All,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tuning {
    /// Bounds of the log10 λ grid, relative to `tr(Σ_θ)/n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    /// Fixed absolute λ; skips the search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_search: Option<ThetaSearchName>,
    /// Block-cycle limit for the polychotomous and two-eye fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_cycles: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub log10_lo: f64,
    pub log10_hi: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSearchName {
    Fixed,
    CoordinateDescent,
}

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_MAX_CYCLES: usize = 5000;

impl Tuning {
    pub fn folds(&self) -> usize {
        self.folds.unwrap_or(DEFAULT_FOLDS)
    }

    pub fn max_cycles(&self) -> usize {
        self.max_cycles.unwrap_or(DEFAULT_MAX_CYCLES)
    }

    /// The λ grid, or `default` when none is given.
    pub fn grid_or(&self, default: LambdaGrid) -> LambdaGrid {
        self.lambda_grid
            .map(|g| LambdaGrid { log10_lo: g.log10_lo, log10_hi: g.log10_hi, points: g.points })
            .unwrap_or(default)
    }

    pub fn theta_search(&self) -> ThetaSearch {
        match self.theta_search {
            Some(ThetaSearchName::Fixed) => ThetaSearch::Fixed,
            _ => ThetaSearch::CoordinateDescent,
        }
    }
}

impl SpecFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SpecFile = serde_json::from_str(text).map_err(|e| CliError::Schema(format!("spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Schema(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        if self.variables.is_empty() && !self.terms.is_empty() {
            return Err(CliError::Schema("variables: terms given without variables".into()));
        }
        for (i, v) in self.variables.iter().enumerate() {
            if self.variables[..i].iter().any(|w| w.name == v.name) {
                return Err(CliError::Schema(format!("variables[{i}].name: duplicate `{}`", v.name)));
            }
            let want = if matches!(v.kind, Kind::Plane | Kind::Sphere) { 2 } else { 1 };
            if v.columns().len() != want {
                return Err(CliError::Schema(format!("variables[{i}].columns: expected {want} column names")));
            }
            if let Some([lo, hi]) = v.range {
                if v.kind != Kind::Interval {
                    return Err(CliError::Schema(format!("variables[{i}].range: only interval variables are rescaled")));
                }
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(CliError::Schema(format!("variables[{i}].range: need finite min < max")));
                }
            }
        }
        for (i, t) in self.terms.iter().enumerate() {
            if t.variables.is_empty() {
                return Err(CliError::Schema(format!("terms[{i}].variables: empty")));
            }
            if let FlavorSpec::PerVariable(f) = &t.flavor {
                if f.len() != t.variables.len() || f.contains(&FlavorName::All) {
                    return Err(CliError::Schema(format!(
                        "terms[{i}].flavor: need one of smooth/parametric per variable"
                    )));
                }
            }
        }
        if matches!(self.family, FamilyName::Polychotomous | FamilyName::Msvm) {
            match self.categories {
                Some(k) if k >= 2 => {}
                _ => return Err(CliError::Schema("categories: need at least 2 for this family".into())),
            }
        }
        if self.family == FamilyName::Mvbernoulli && self.response.is_some() {
            return Err(CliError::Schema("response: mvbernoulli reads y_1_1 and y_1_2".into()));
        }
        if let Some(l) = self.tuning.lambda {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(CliError::Schema("tuning.lambda: must be a finite nonnegative number".into()));
            }
        }
        if self.tuning.folds.is_some_and(|f| f < 2) {
            return Err(CliError::Schema("tuning.folds: need at least 2".into()));
        }
        if let Some(g) = self.tuning.lambda_grid {
            if g.points < 2 || !(g.log10_lo < g.log10_hi) {
                return Err(CliError::Schema("tuning.lambda_grid: need points >= 2 and log10_lo < log10_hi".into()));
            }
        }
        Ok(())
    }

    pub fn response(&self) -> &str {
        self.response.as_deref().unwrap_or("y")
    }

    pub fn core_family(&self) -> Family {
        let k = self.categories.unwrap_or(2);
        match self.family {
            FamilyName::Gaussian => Family::Gaussian,
            FamilyName::Bernoulli => Family::Bernoulli,
            FamilyName::Polychotomous => Family::Polychotomous(k - 1),
            FamilyName::Mvbernoulli => Family::MvBernoulli(2),
            FamilyName::Msvm => Family::Msvm(k),
        }
    }

    /// The model with measures resolved; empirical weights are bound to the
    /// training design later.
    pub fn model_spec(&self) -> Result<ModelSpec> {
        let mut vars = Vec::with_capacity(self.variables.len());
        for (i, v) in self.variables.iter().enumerate() {
            let domain = v.domain(&format!("variables[{i}]"))?;
            let mut var = Variable::new(v.name.clone(), domain);
            if let Some(m) = v.measure {
                var = var.with_measure(match m {
                    MeasureName::Lebesgue => Measure::LebesgueUniform,
                    MeasureName::Empirical => Measure::EmpiricalOnData { weights: None },
                    MeasureName::UniformSphere => Measure::UniformSphere,
                    MeasureName::UniformGrid => Measure::UniformGrid,
                });
            }
            vars.push(var);
        }
        let mut spec = ModelSpec::new(vars, self.core_family());
        for (i, t) in self.terms.iter().enumerate() {
            let idx = t
                .variables
                .iter()
                .map(|name| {
                    self.variables.iter().position(|v| &v.name == name).ok_or_else(|| {
                        CliError::Schema(format!("terms[{i}].variables: unknown variable `{name}`"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let flavors: Vec<Flavor> = match &t.flavor {
                FlavorSpec::One(FlavorName::All) => {
                    if t.penalized.is_some() {
                        return Err(CliError::Schema(format!(
                            "terms[{i}].penalized: not allowed with flavor \"all\""
                        )));
                    }
                    spec = spec.with_effect(&idx, &[]);
                    continue;
                }
                FlavorSpec::One(f) => vec![core_flavor(*f); idx.len()],
                FlavorSpec::PerVariable(f) => f.iter().map(|&f| core_flavor(f)).collect(),
            };
            let term = TermSpec::product(&idx, &flavors);
            if let Some(p) = t.penalized {
                if p != term.penalized {
                    return Err(CliError::Schema(format!(
                        "terms[{i}].penalized: {p} contradicts the flavors (penalized iff any factor is smooth)"
                    )));
                }
            }
            spec = spec.with_term(term);
        }
        Ok(spec)
    }
}

fn core_flavor(f: FlavorName) -> Flavor {
    match f {
        FlavorName::Parametric => Flavor::Parametric,
        _ => Flavor::Smooth,
    }
}
