//! The five subcommands, as library calls.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use ssanova_core::{build_model, gram_matrices};

use crate::artifacts::{predictions, write_atomic, write_components, write_diagnostics, FitFile};
use crate::data::{ingest_training, write_csv, Table};
use crate::error::{CliError, Result};
use crate::fitting::{fit, Criterion, Fitted};
use crate::simulate::{write_simulation, SimOptions};
use crate::spec::{FamilyName, SpecFile, SCHEMA_VERSION};

pub const DEFAULT_SEED: u64 = 42;

/// Inputs shared by `fit` and `tune`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub spec: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub family: Option<String>,
}

pub fn load_spec(path: &Path, family: Option<&str>) -> Result<SpecFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut spec = SpecFile::from_json(&text)?;
    if let Some(f) = family {
        spec.family = FamilyName::parse(f)?;
        // re-check family-specific fields
        spec = SpecFile::from_json(&serde_json::to_string(&spec).map_err(|e| CliError::Schema(e.to_string()))?)?;
    }
    Ok(spec)
}

struct Trained {
    spec: SpecFile,
    file: FitFile,
    path: Vec<(f64, f64)>,
}

fn train(cfg: &RunConfig) -> Result<Trained> {
    let spec = load_spec(&cfg.spec, cfg.family.as_deref())?;
    let table = Table::read(&cfg.data)?;
    let data = ingest_training(&spec, &table)?;
    let model = build_model(&spec.model_spec()?)?;
    let grams = gram_matrices(&model, &data.design)?;
    let fitted: Fitted = fit(&spec, &data, &grams, cfg.seed)?;
    for w in &fitted.warnings {
        log::warn!("{w}");
    }
    let path = fitted.path.clone();
    let file = FitFile::new(&spec, cfg.seed, &data.map, &data.design, data.dropped, data.n(), fitted);
    Ok(Trained { spec, file, path })
}

/// `fit`: tune, fit, and write `fit.json`, `components/` and `diagnostics.csv`.
pub fn run_fit(cfg: &RunConfig) -> Result<FitFile> {
    let t = train(cfg)?;
    write_atomic(&cfg.out.join("fit.json"), &t.file.to_json()?)?;
    write_diagnostics(&cfg.out.join("diagnostics.csv"), t.file.criterion, &t.path)?;
    write_components(&t.file, &cfg.out)?;
    Ok(t.file)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneReport {
    pub schema_version: u32,
    pub family: FamilyName,
    pub lambda: f64,
    pub theta: Vec<f64>,
    pub criterion: Criterion,
    pub score: Option<f64>,
}

/// `tune`: the smoothing-parameter search alone; writes `tune.json` and `diagnostics.csv`.
pub fn run_tune(cfg: &RunConfig) -> Result<TuneReport> {
    let t = train(cfg)?;
    let score = match t.file.criterion {
        Criterion::Gcv | Criterion::Fixed => t.file.gcv,
        _ => t.path.iter().map(|p| p.1).fold(None, |b: Option<f64>, s| Some(b.map_or(s, |b| b.min(s)))),
    };
    let report = TuneReport {
        schema_version: SCHEMA_VERSION,
        family: t.spec.family,
        lambda: t.file.lambda,
        theta: t.file.theta.clone(),
        criterion: t.file.criterion,
        score,
    };
    let mut bytes = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Schema(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(&cfg.out.join("tune.json"), &bytes)?;
    write_diagnostics(&cfg.out.join("diagnostics.csv"), t.file.criterion, &t.path)?;
    Ok(report)
}

/// `predict`: evaluate a saved fit at new points; writes `predictions.csv`.
pub fn run_predict(fit_path: &Path, data: &Path, out: &Path, level: Option<f64>) -> Result<PathBuf> {
    let fit = FitFile::load(fit_path)?;
    let table = Table::read(data)?;
    let (headers, rows) = predictions(&fit, &table, level)?;
    let path = out.join("predictions.csv");
    write_csv(&path, &headers, &rows)?;
    Ok(path)
}

/// `components`: re-emit the component grids of a saved fit.
pub fn run_components(fit_path: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    write_components(&FitFile::load(fit_path)?, out)
}

/// `simulate`: write `data.csv`, `spec.json` and `truth.json`.
pub fn run_simulate(opts: &SimOptions, out: &Path) -> Result<()> {
    write_simulation(opts, out)
}
