//! CSV ingestion and the column map between files and model variables.

use std::path::Path;

use serde::{Deserialize, Serialize};
use ssanova_core::{Design, Value};

use crate::error::{CliError, Result};
use crate::spec::{FamilyName, Kind, SpecFile};

/// Response columns of the two-eye layout.
pub const EYE_RESPONSES: [&str; 2] = ["y_1_1", "y_1_2"];

/// A CSV file with a header, cells kept as text.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let headers: Vec<String> = rdr.headers().map_err(|e| csv_error(path, e))?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            rows.push(rec.iter().map(String::from).collect());
        }
        Ok(Table { headers, rows })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Cell `(row, col)` as a number; `None` for a missing value.
    pub fn number(&self, row: usize, col: usize) -> Result<Option<f64>> {
        let cell = self.rows[row][col].as_str();
        if is_missing(cell) {
            return Ok(None);
        }
        cell.parse::<f64>().map(Some).map_err(|_| {
            CliError::Schema(format!("column {}: row {} has non-numeric value `{cell}`", self.headers[col], row + 1))
        })
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Schema(format!("{}: {other:?}", path.display())),
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan")
}

/// Affine map of a unit-interval variable: `t = (x − min) / (max − min)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rescale {
    pub variable: String,
    pub min: f64,
    pub max: f64,
}

impl Rescale {
    pub fn forward(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn inverse(&self, t: f64) -> f64 {
        self.min + t * (self.max - self.min)
    }
}

/// Where one model variable lives in the data.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableColumns {
    pub name: String,
    pub kind: Kind,
    pub columns: Vec<String>,
    pub rescale: Option<Rescale>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMap {
    pub variables: Vec<VariableColumns>,
    pub responses: Vec<String>,
    /// Two-eye layout: covariates may be eye-specific.
    pub eyes: bool,
}

impl ColumnMap {
    /// Columns declared by `spec`; rescales are resolved against data later.
    pub fn from_spec(spec: &SpecFile) -> Self {
        let eyes = spec.family == FamilyName::Mvbernoulli;
        let responses = if eyes {
            EYE_RESPONSES.iter().map(|s| s.to_string()).collect()
        } else {
            vec![spec.response().to_string()]
        };
        let variables = spec
            .variables
            .iter()
            .map(|v| VariableColumns {
                name: v.name.clone(),
                kind: v.kind,
                columns: v.columns(),
                rescale: v.range.map(|[min, max]| Rescale { variable: v.name.clone(), min, max }),
            })
            .collect();
        ColumnMap { variables, responses, eyes }
    }

    /// Attach previously recorded rescales.
    pub fn with_rescales(mut self, records: &[Rescale]) -> Self {
        for v in &mut self.variables {
            if let Some(r) = records.iter().find(|r| r.variable == v.name) {
                v.rescale = Some(r.clone());
            }
        }
        self
    }

    /// Data column holding `column` for eye `eye` (1 or 2): the eye-specific
    /// `x_1_<eye>_<column>` when present, else the person-level `column`.
    fn resolve(&self, table: &Table, column: &str, eye: Option<usize>) -> Result<usize> {
        if let Some(k) = eye {
            if let Some(i) = table.column_index(&format!("x_1_{k}_{column}")) {
                return Ok(i);
            }
        }
        table
            .column_index(column)
            .ok_or_else(|| CliError::Schema(format!("data: missing column `{column}`")))
    }

    pub fn rescales(&self) -> Vec<Rescale> {
        self.variables.iter().filter_map(|v| v.rescale.clone()).collect()
    }
}

/// Covariates and responses after dropping incomplete rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// One row per observation; two per subject (interleaved) in the eye layout.
    pub design: Design,
    /// One vector per response column, indexed by row (subject for eyes).
    pub responses: Vec<Vec<f64>>,
    /// Indices into the table of the rows kept.
    pub kept: Vec<usize>,
    pub dropped: usize,
    pub map: ColumnMap,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.kept.len()
    }
}

/// Read the training data. Rows with any missing needed value are dropped;
/// unit-interval variables without a fixed range are rescaled by their data range.
pub fn ingest_training(spec: &SpecFile, table: &Table) -> Result<Dataset> {
    let mut map = ColumnMap::from_spec(spec);
    let response_cols = map
        .responses
        .iter()
        .map(|r| table.column_index(r).ok_or_else(|| CliError::Schema(format!("data: missing response column `{r}`"))))
        .collect::<Result<Vec<_>>>()?;
    let raw = read_covariates(&map, table)?;
    let mut kept = Vec::new();
    let mut responses = vec![Vec::new(); response_cols.len()];
    for row in 0..table.rows.len() {
        let ys = response_cols.iter().map(|&c| table.number(row, c)).collect::<Result<Vec<_>>>()?;
        if ys.iter().any(Option::is_none) || raw.iter().any(|v| v.iter().any(|col| col[row].is_none())) {
            continue;
        }
        for (out, y) in responses.iter_mut().zip(ys) {
            out.push(y.unwrap_or_default());
        }
        kept.push(row);
    }
    let dropped = table.rows.len() - kept.len();
    if dropped > 0 {
        log::warn!("dropped {dropped} of {} rows with missing values", table.rows.len());
    }
    if kept.is_empty() {
        return Err(CliError::Schema("data: no complete rows".into()));
    }
    for (v, cols) in map.variables.iter_mut().zip(&raw) {
        if v.kind == Kind::Interval && v.rescale.is_none() {
            let vals = kept.iter().flat_map(|&r| cols.iter().map(move |c| c[r].unwrap_or_default()));
            let (min, max) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            if !(max > min) {
                return Err(CliError::Schema(format!("variable {}: constant column cannot be rescaled", v.name)));
            }
            v.rescale = Some(Rescale { variable: v.name.clone(), min, max });
        }
    }
    let design = build_design(&map, &raw, &kept)?;
    Ok(Dataset { design, responses, kept, dropped, map })
}

/// Read new points under a recorded column map; missing covariates are an error.
pub fn ingest_points(map: &ColumnMap, table: &Table) -> Result<Design> {
    let raw = read_covariates(map, table)?;
    for (v, cols) in map.variables.iter().zip(&raw) {
        for col in cols {
            if let Some(row) = col.iter().position(Option::is_none) {
                return Err(CliError::Schema(format!("variable {}: row {} is missing", v.name, row + 1)));
            }
        }
    }
    let all: Vec<usize> = (0..table.rows.len()).collect();
    build_design(map, &raw, &all)
}

/// Per variable, per eye (one entry outside the eye layout), per data column.
type RawColumns = Vec<Vec<Vec<Option<f64>>>>;

fn read_covariates(map: &ColumnMap, table: &Table) -> Result<RawColumns> {
    let eyes: Vec<Option<usize>> = if map.eyes { vec![Some(1), Some(2)] } else { vec![None] };
    map.variables
        .iter()
        .map(|v| {
            let mut per_eye = Vec::new();
            for &eye in &eyes {
                for c in &v.columns {
                    let idx = map.resolve(table, c, eye)?;
                    per_eye.push((0..table.rows.len()).map(|r| table.number(r, idx)).collect::<Result<Vec<_>>>()?);
                }
            }
            Ok(per_eye)
        })
        .collect()
}

fn build_design(map: &ColumnMap, raw: &RawColumns, rows: &[usize]) -> Result<Design> {
    let copies = if map.eyes { 2 } else { 1 };
    let mut columns = Vec::with_capacity(map.variables.len());
    for (v, cols) in map.variables.iter().zip(raw) {
        let width = v.columns.len();
        let mut out = Vec::with_capacity(rows.len() * copies);
        for &r in rows {
            for eye in 0..copies {
                let cell = |j: usize| cols[eye * width + j][r].unwrap_or_default();
                let value = match v.kind {
                    Kind::Plane | Kind::Sphere => Value::Pair(cell(0), cell(1)),
                    Kind::Grid => Value::Scalar(cell(0)),
                    Kind::Interval => {
                        let x = cell(0);
                        let t = v.rescale.as_ref().map_or(x, |s| s.forward(x));
                        if !(0.0..=1.0).contains(&t) {
                            let (lo, hi) = v.rescale.as_ref().map_or((0.0, 1.0), |s| (s.min, s.max));
                            return Err(ssanova_core::Error::Domain(format!(
                                "variable {}: {x} is outside the recorded range [{lo}, {hi}]",
                                v.name
                            ))
                            .into());
                        }
                        Value::Scalar(t)
                    }
                };
                out.push(value);
            }
        }
        columns.push(out);
    }
    Ok(Design::new(columns))
}

/// Write rows atomically as CSV.
pub fn write_csv(path: &Path, headers: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::io(path, std::io::Error::other(e.to_string()));
    w.write_record(headers).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(path, std::io::Error::other(e.to_string())))?;
    crate::artifacts::write_atomic(path, &bytes)
}

/// Shortest round-trip formatting.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        "NaN".into()
    }
}
