//! On-disk artifacts: `fit.json`, component grids, diagnostics and predictions.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use ssanova_core::gaussian::{bayesian_intervals, FitResult};
use ssanova_core::{build_model, gram_matrices, Basis, Coefficients, Design, Family, GramSet, Value};

use crate::data::{fmt_num, write_csv, ColumnMap, Rescale, Table};
use crate::error::{CliError, Result};
use crate::fitting::{Criterion, FunctionFit, Fitted, SolverReport};
use crate::spec::{FamilyName, Kind, SpecFile, SCHEMA_VERSION};

/// Write through a temporary sibling and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// A design value: a number, or a pair for planar and spherical variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DesignValue {
    Scalar(f64),
    Pair([f64; 2]),
}

impl From<Value> for DesignValue {
    fn from(v: Value) -> Self {
        match v {
            Value::Scalar(t) => DesignValue::Scalar(t),
            Value::Pair(a, b) => DesignValue::Pair([a, b]),
        }
    }
}

impl From<DesignValue> for Value {
    fn from(v: DesignValue) -> Self {
        match v {
            DesignValue::Scalar(t) => Value::Scalar(t),
            DesignValue::Pair([a, b]) => Value::Pair(a, b),
        }
    }
}

/// Contents of `fit.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub schema_version: u32,
    pub spec: SpecFile,
    pub seed: u64,
    pub n: usize,
    pub dropped_rows: usize,
    pub rescale: Vec<Rescale>,
    /// Training design after rescaling, one array per variable.
    pub design: Vec<Vec<DesignValue>>,
    pub lambda: f64,
    pub theta: Vec<f64>,
    pub criterion: Criterion,
    pub functions: Vec<FunctionFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub trace_a: Option<f64>,
    pub sigma2_hat: Option<f64>,
    pub gcv: Option<f64>,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverReport>,
    pub warnings: Vec<String>,
}

impl FitFile {
    pub fn new(spec: &SpecFile, seed: u64, map: &ColumnMap, design: &Design, dropped: usize, n: usize, fit: Fitted) -> Self {
        FitFile {
            schema_version: SCHEMA_VERSION,
            spec: spec.clone(),
            seed,
            n,
            dropped_rows: dropped,
            rescale: map.rescales(),
            design: design.columns.iter().map(|c| c.iter().map(|&v| v.into()).collect()).collect(),
            lambda: fit.lambda,
            theta: fit.theta,
            criterion: fit.criterion,
            functions: fit.functions,
            alpha: fit.alpha,
            trace_a: fit.trace_a,
            sigma2_hat: fit.sigma2_hat,
            gcv: fit.gcv,
            iterations: fit.iterations,
            solver: fit.solver,
            warnings: fit.warnings,
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(self).map_err(|e| CliError::Schema(format!("fit: {e}")))?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let fit: FitFile = serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
        if fit.schema_version != SCHEMA_VERSION {
            return Err(CliError::Schema(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                fit.schema_version
            )));
        }
        Ok(fit)
    }

    pub fn column_map(&self) -> ColumnMap {
        ColumnMap::from_spec(&self.spec).with_rescales(&self.rescale)
    }

    pub fn training_design(&self) -> Design {
        Design::new(self.design.iter().map(|c| c.iter().map(|&v| v.into()).collect()).collect())
    }

    pub fn basis(&self) -> Result<Basis> {
        let model = build_model(&self.spec.model_spec()?)?;
        Ok(model.bind(&self.training_design())?)
    }

    fn grams(&self) -> Result<GramSet> {
        let model = build_model(&self.spec.model_spec()?)?;
        Ok(gram_matrices(&model, &self.training_design())?)
    }

    fn coefficients<'a>(&'a self, f: &'a FunctionFit) -> Coefficients<'a> {
        Coefficients { c: &f.c, d: &f.d, theta: &self.theta }
    }

    /// Each function evaluated at `pts`.
    pub fn evaluate(&self, basis: &Basis, pts: &Design) -> Result<Vec<Vec<f64>>> {
        self.functions.iter().map(|f| Ok(basis.predict(&self.coefficients(f), pts)?)).collect()
    }

    fn gaussian_result(&self) -> FitResult {
        let f = &self.functions[0];
        FitResult {
            c: f.c.clone(),
            d: f.d.clone(),
            lambda: self.lambda,
            theta: self.theta.clone(),
            fitted: f.fitted.clone(),
            trace_a: self.trace_a.unwrap_or(f64::NAN),
            sigma2_hat: self.sigma2_hat.unwrap_or(f64::NAN),
            gcv: self.gcv.unwrap_or(f64::NAN),
            family: Family::Gaussian,
            iterations: self.iterations,
            trace: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

/// `diagnostics.csv`: the tuning path.
pub fn write_diagnostics(path: &Path, criterion: Criterion, trace: &[(f64, f64)]) -> Result<()> {
    let headers = ["log10_lambda", "lambda", criterion.column()].map(String::from);
    let rows: Vec<Vec<String>> = trace
        .iter()
        .map(|&(l, s)| vec![fmt_num(l.log10()), fmt_num(l), fmt_num(s)])
        .collect();
    write_csv(path, &headers, &rows)
}

/// File stem for a component label: `s(x):p(z)` becomes `s_x__p_z`.
pub fn component_file_stem(label: &str) -> String {
    if label == "1" {
        return "constant".into();
    }
    label
        .replace(':', "__")
        .replace('(', "_")
        .replace(')', "")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

/// Grid points per continuous axis when a term spans at most two axes.
pub const GRID_POINTS: usize = 101;
/// Per-axis points when a term spans more than two axes.
pub const COARSE_GRID_POINTS: usize = 21;
pub const SPHERE_GRID: (usize, usize) = (73, 144);
pub const COARSE_SPHERE_GRID: (usize, usize) = (19, 36);

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Grid of one variable: model values and the data-column values they print as.
fn variable_grid(kind: Kind, rescale: Option<&Rescale>, train: &[Value], size: Option<usize>, coarse: bool) -> Vec<(Value, Vec<f64>)> {
    let pts = if coarse { COARSE_GRID_POINTS } else { GRID_POINTS };
    match kind {
        Kind::Interval => linspace(0.0, 1.0, pts)
            .into_iter()
            .map(|t| (Value::Scalar(t), vec![rescale.map_or(t, |r| r.inverse(t))]))
            .collect(),
        Kind::Grid => (1..=size.unwrap_or(1)).map(|i| (Value::Scalar(i as f64), vec![i as f64])).collect(),
        Kind::Plane => {
            let range = |k: usize| {
                train.iter().map(|v| if let Value::Pair(a, b) = v { [*a, *b][k] } else { 0.0 }).fold(
                    (f64::INFINITY, f64::NEG_INFINITY),
                    |(lo, hi), x| (lo.min(x), hi.max(x)),
                )
            };
            let ((x0, x1), (y0, y1)) = (range(0), range(1));
            let mut out = Vec::new();
            for x in linspace(x0, x1, pts) {
                for y in linspace(y0, y1, pts) {
                    out.push((Value::Pair(x, y), vec![x, y]));
                }
            }
            out
        }
        Kind::Sphere => {
            let (nlat, nlon) = if coarse { COARSE_SPHERE_GRID } else { SPHERE_GRID };
            let step = 360.0 / nlon as f64;
            let mut out = Vec::new();
            for lat in linspace(-90.0, 90.0, nlat) {
                for j in 0..nlon {
                    let lon = -180.0 + step * j as f64;
                    out.push((Value::Pair(lat, lon), vec![lat, lon]));
                }
            }
            out
        }
    }
}

/// Evaluate every ANOVA component of every function on its grid and write
/// `components/<term>.csv`. Returns the files written.
pub fn write_components(fit: &FitFile, out_dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let basis = fit.basis()?;
    let map = fit.column_map();
    let train = basis.train();
    let model = basis.model();
    let dir = out_dir.join("components");
    let mut written = Vec::new();
    for term in model.null_terms().iter().chain(model.penalized_terms()) {
        let label = model.label(term);
        let which = basis.component_ref(&label)?;
        let axes: usize = term
            .variables
            .iter()
            .map(|&v| if matches!(map.variables[v].kind, Kind::Plane | Kind::Sphere) { 2 } else { 1 })
            .sum();
        let coarse = axes > 2;
        // cartesian product over the term's variables
        let mut rows: Vec<(Vec<Value>, Vec<f64>)> = vec![(Vec::new(), Vec::new())];
        for &v in &term.variables {
            let vc = &map.variables[v];
            let size = fit.spec.variables[v].size;
            let grid = variable_grid(vc.kind, vc.rescale.as_ref(), &train.columns[v], size, coarse);
            rows = rows
                .into_iter()
                .flat_map(|(vals, cells)| {
                    grid.iter().map(move |(g, c)| {
                        let mut vals = vals.clone();
                        vals.push(*g);
                        let mut cells = cells.clone();
                        cells.extend(c);
                        (vals, cells)
                    })
                })
                .collect();
        }
        let columns: Vec<Vec<Value>> = (0..map.variables.len())
            .map(|v| match term.variables.iter().position(|&u| u == v) {
                Some(k) => rows.iter().map(|(vals, _)| vals[k]).collect(),
                None => vec![train.columns[v][0]; rows.len()],
            })
            .collect();
        let pts = Design::new(columns);
        let values = fit
            .functions
            .iter()
            .map(|f| Ok(basis.evaluate_component(&fit.coefficients(f), &which, &pts)?))
            .collect::<Result<Vec<_>>>()?;
        let mut headers: Vec<String> = term.variables.iter().flat_map(|&v| map.variables[v].columns.clone()).collect();
        headers.extend(fit.functions.iter().map(|f| f.name.clone()));
        let table: Vec<Vec<String>> = rows
            .iter()
            .enumerate()
            .map(|(i, (_, cells))| {
                cells.iter().map(|&x| fmt_num(x)).chain(values.iter().map(|v| fmt_num(v[i]))).collect()
            })
            .collect();
        let path = dir.join(format!("{}.csv", component_file_stem(&label)));
        write_csv(&path, &headers, &table)?;
        written.push(path);
    }
    Ok(written)
}

/// Predictions at the rows of `table`; the input columns are echoed first.
///
/// Bands (`level`) are available for Gaussian fits only.
pub fn predictions(fit: &FitFile, table: &Table, level: Option<f64>) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    if level.is_some() && fit.spec.family != FamilyName::Gaussian {
        return Err(CliError::Usage(format!(
            "confidence bands need a gaussian fit, this one is {}",
            fit.spec.family.as_str()
        )));
    }
    if let Some(l) = level {
        if !(l > 0.0 && l < 1.0) {
            return Err(CliError::Usage(format!("--level must be in (0, 1), got {l}")));
        }
    }
    let map = fit.column_map();
    let pts = crate::data::ingest_points(&map, table)?;
    let basis = fit.basis()?;
    let values = fit.evaluate(&basis, &pts)?;
    let mut headers = table.headers.clone();
    let m = table.rows.len();
    let mut extra: Vec<Vec<f64>> = vec![Vec::new(); m];
    match fit.spec.family {
        FamilyName::Gaussian => {
            headers.push("prediction".into());
            for (row, &v) in extra.iter_mut().zip(&values[0]) {
                row.push(v);
            }
            if let Some(l) = level {
                headers.extend(["lower", "upper"].map(String::from));
                let bands = bayesian_intervals(&fit.gaussian_result(), &fit.grams()?, &pts, l, None)?;
                for (row, b) in extra.iter_mut().zip(bands) {
                    row.extend([b.lower, b.upper]);
                }
            }
        }
        FamilyName::Bernoulli => {
            headers.extend(["prediction", "probability"].map(String::from));
            for (row, &v) in extra.iter_mut().zip(&values[0]) {
                row.extend([v, 1.0 / (1.0 + (-v).exp())]);
            }
        }
        FamilyName::Polychotomous => {
            let k = values.len();
            headers.extend(fit.functions.iter().map(|f| f.name.clone()));
            headers.extend((0..=k).map(|j| format!("p{j}")));
            let probs = ssanova_core::expfam::poly_probabilities(&values);
            for (i, row) in extra.iter_mut().enumerate() {
                row.extend(values.iter().map(|v| v[i]));
                row.extend(&probs[i]);
            }
        }
        FamilyName::Msvm => {
            headers.extend(fit.functions.iter().map(|f| f.name.clone()));
            headers.push("class".into());
            let f: Vec<Vec<f64>> = (0..m).map(|i| values.iter().map(|v| v[i]).collect()).collect();
            let classes = ssanova_core::msvm::classify(&f);
            for ((row, fi), c) in extra.iter_mut().zip(f).zip(classes) {
                row.extend(fi);
                row.push((c + 1) as f64);
            }
        }
        FamilyName::Mvbernoulli => {
            headers.extend(["f_1", "f_2", "alpha"].map(String::from));
            let alpha = fit.alpha.unwrap_or(0.0);
            for (i, row) in extra.iter_mut().enumerate() {
                row.extend([values[0][2 * i], values[0][2 * i + 1], alpha]);
            }
        }
    }
    let rows = table
        .rows
        .iter()
        .zip(extra)
        .map(|(input, out)| input.iter().cloned().chain(out.into_iter().map(fmt_num)).collect())
        .collect();
    Ok((headers, rows))
}
