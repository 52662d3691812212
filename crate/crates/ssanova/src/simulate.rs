//! Synthetic datasets with known generating functions.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use serde_json::json;
use ssanova_core::mvb::{sample, MvbParams};

use crate::artifacts::write_atomic;
use crate::data::{fmt_num, write_csv};
use crate::error::{CliError, Result};

pub const GENERATORS: [&str; 5] = ["gaussian", "bernoulli", "polychotomous", "mvb", "msvm"];

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub generator: String,
    pub seed: u64,
    pub n: Option<usize>,
    pub sigma: Option<f64>,
    pub alpha: Option<f64>,
}

/// Generated rows plus the spec that fits them and the truth on a grid.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub spec: serde_json::Value,
    pub truth: serde_json::Value,
}

#[derive(Serialize)]
struct Truth<'a> {
    generator: &'a str,
    seed: u64,
    n: usize,
    #[serde(flatten)]
    details: serde_json::Value,
}

fn grid() -> Vec<f64> {
    (0..101).map(|i| i as f64 / 100.0).collect()
}

fn interval(name: &str) -> serde_json::Value {
    json!({ "name": name, "kind": "interval", "range": [0.0, 1.0] })
}

/// Additive truth: `sin(2πx₁) + 2(x₂ − ½)²`.
fn gaussian_mean(x1: f64, x2: f64) -> f64 {
    (2.0 * PI * x1).sin() + 2.0 * (x2 - 0.5).powi(2)
}

fn logit_curve(x: f64) -> f64 {
    (2.0 * PI * x).sin() + 4.0 * (x - 0.5)
}

/// Logits of categories 1..=3 against category 0.
fn poly_logits(x: f64) -> [f64; 3] {
    [2.0 * (2.0 * PI * x).sin(), 3.0 * (x - 0.5), 2.0 * x * x - 1.0]
}

fn eye_logit(x: f64) -> f64 {
    2.0 * (x - 0.5) + (6.0 * x).sin()
}

const BLOB_CENTERS: [[f64; 2]; 3] = [[0.25, 0.25], [0.75, 0.3], [0.5, 0.78]];
const BLOB_SD: f64 = 0.07;

pub fn simulate(opts: &SimOptions) -> Result<Simulated> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let g = opts.generator.as_str();
    match g {
        "gaussian" => {
            let n = opts.n.unwrap_or(100);
            let sigma = opts.sigma.unwrap_or(0.3);
            if !(sigma >= 0.0) {
                return Err(CliError::Usage("--sigma must be nonnegative".into()));
            }
            let mut rows = Vec::with_capacity(n);
            for _ in 0..n {
                let (x1, x2): (f64, f64) = (rng.random(), rng.random());
                let e = if sigma > 0.0 { Normal::new(0.0, sigma).unwrap().sample(&mut rng) } else { 0.0 };
                rows.push(vec![x1, x2, gaussian_mean(x1, x2) + e]);
            }
            let xs = grid();
            Ok(Simulated {
                headers: vec!["x1".into(), "x2".into(), "y".into()],
                rows,
                spec: json!({
                    "variables": [interval("x1"), interval("x2")],
                    "terms": [{ "variables": ["x1"], "flavor": "all" }, { "variables": ["x2"], "flavor": "all" }],
                    "family": "gaussian"
                }),
                truth: json!({
                    "sigma": sigma,
                    "grid": xs,
                    "constant": 1.0 / 6.0,
                    "main_effects": {
                        "x1": xs.iter().map(|&x| (2.0 * PI * x).sin()).collect::<Vec<_>>(),
                        "x2": xs.iter().map(|&x| 2.0 * (x - 0.5).powi(2) - 1.0 / 6.0).collect::<Vec<_>>()
                    }
                }),
            })
        }
        "bernoulli" => {
            let n = opts.n.unwrap_or(200);
            let rows = (0..n)
                .map(|_| {
                    let x: f64 = rng.random();
                    let p = 1.0 / (1.0 + (-logit_curve(x)).exp());
                    vec![x, f64::from(u8::from(rng.random::<f64>() < p))]
                })
                .collect();
            let xs = grid();
            Ok(Simulated {
                headers: vec!["x".into(), "y".into()],
                rows,
                spec: json!({
                    "variables": [interval("x")],
                    "terms": [{ "variables": ["x"], "flavor": "all" }],
                    "family": "bernoulli"
                }),
                truth: json!({
                    "grid": xs,
                    "logit": xs.iter().map(|&x| logit_curve(x)).collect::<Vec<_>>(),
                    "probability": xs.iter().map(|&x| 1.0 / (1.0 + (-logit_curve(x)).exp())).collect::<Vec<_>>()
                }),
            })
        }
        "polychotomous" => {
            let n = opts.n.unwrap_or(300);
            let probs = |x: f64| {
                let f = poly_logits(x);
                let z = 1.0 + f.iter().map(|v| v.exp()).sum::<f64>();
                let mut p = vec![1.0 / z];
                p.extend(f.iter().map(|v| v.exp() / z));
                p
            };
            let rows = (0..n)
                .map(|_| {
                    let x: f64 = rng.random();
                    let u: f64 = rng.random();
                    let p = probs(x);
                    let mut acc = 0.0;
                    let cat = p.iter().position(|&pj| {
                        acc += pj;
                        u < acc
                    });
                    vec![x, cat.unwrap_or(3) as f64]
                })
                .collect();
            let xs = grid();
            Ok(Simulated {
                headers: vec!["x".into(), "y".into()],
                rows,
                spec: json!({
                    "variables": [interval("x")],
                    "terms": [{ "variables": ["x"], "flavor": "all" }],
                    "family": "polychotomous",
                    "categories": 4
                }),
                truth: json!({
                    "grid": xs,
                    "probabilities": xs.iter().map(|&x| probs(x)).collect::<Vec<_>>()
                }),
            })
        }
        "mvb" => {
            let n = opts.n.unwrap_or(300);
            let alpha = opts.alpha.unwrap_or(3f64.ln());
            let mut rows = Vec::with_capacity(n);
            for _ in 0..n {
                let (x1, x2): (f64, f64) = (rng.random(), rng.random());
                let mut p = MvbParams::zeros(2)?;
                p.set(0b01, eye_logit(x1))?;
                p.set(0b10, eye_logit(x2))?;
                p.set(0b11, alpha)?;
                let y = sample(&p, &mut rng);
                rows.push(vec![f64::from(y[0]), f64::from(y[1]), x1, x2]);
            }
            let xs = grid();
            Ok(Simulated {
                headers: ["y_1_1", "y_1_2", "x_1_1_x", "x_1_2_x"].map(String::from).to_vec(),
                rows,
                spec: json!({
                    "variables": [interval("x")],
                    "terms": [{ "variables": ["x"], "flavor": "all" }],
                    "family": "mvbernoulli"
                }),
                truth: json!({
                    "alpha": alpha,
                    "grid": xs,
                    "f": xs.iter().map(|&x| eye_logit(x)).collect::<Vec<_>>()
                }),
            })
        }
        "msvm" => {
            let per = opts.n.unwrap_or(90).div_ceil(3);
            let noise = Normal::new(0.0, BLOB_SD).unwrap();
            let mut rows = Vec::with_capacity(3 * per);
            for (j, c) in BLOB_CENTERS.iter().enumerate() {
                for _ in 0..per {
                    // resample until the point lies in the unit square
                    let (x1, x2) = loop {
                        let p = (c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng));
                        if (0.0..=1.0).contains(&p.0) && (0.0..=1.0).contains(&p.1) {
                            break p;
                        }
                    };
                    rows.push(vec![x1, x2, (j + 1) as f64]);
                }
            }
            let xs = grid();
            // equal priors and spherical noise: the Bayes class is the nearest center
            let bayes: Vec<Vec<usize>> = xs
                .iter()
                .map(|&a| {
                    xs.iter()
                        .map(|&b| {
                            let d = |c: &[f64; 2]| (a - c[0]).powi(2) + (b - c[1]).powi(2);
                            (0..3).fold(0, |best, j| if d(&BLOB_CENTERS[j]) < d(&BLOB_CENTERS[best]) { j } else { best })
                                + 1
                        })
                        .collect()
                })
                .collect();
            Ok(Simulated {
                headers: vec!["x1".into(), "x2".into(), "y".into()],
                rows,
                spec: json!({
                    "variables": [interval("x1"), interval("x2")],
                    "terms": [{ "variables": ["x1"], "flavor": "all" }, { "variables": ["x2"], "flavor": "all" }],
                    "family": "msvm",
                    "categories": 3
                }),
                truth: json!({
                    "centers": BLOB_CENTERS,
                    "sd": BLOB_SD,
                    "grid": xs,
                    "bayes_class": bayes
                }),
            })
        }
        other => Err(CliError::Usage(format!(
            "unknown generator `{other}`; expected one of {}",
            GENERATORS.join(", ")
        ))),
    }
}

/// Write `data.csv`, `spec.json` and `truth.json` into `out`.
pub fn write_simulation(opts: &SimOptions, out: &Path) -> Result<()> {
    let sim = simulate(opts)?;
    let rows: Vec<Vec<String>> = sim.rows.iter().map(|r| r.iter().map(|&x| fmt_num(x)).collect()).collect();
    write_csv(&out.join("data.csv"), &sim.headers, &rows)?;
    let json = |v: &serde_json::Value| -> Result<Vec<u8>> {
        let mut b = serde_json::to_vec_pretty(v).map_err(|e| CliError::Schema(e.to_string()))?;
        b.push(b'\n');
        Ok(b)
    };
    write_atomic(&out.join("spec.json"), &json(&sim.spec)?)?;
    let truth = Truth { generator: &opts.generator, seed: opts.seed, n: sim.rows.len(), details: sim.truth };
    let truth = serde_json::to_value(truth).map_err(|e| CliError::Schema(e.to_string()))?;
    write_atomic(&out.join("truth.json"), &json(&truth)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::SpecFile;

    #[test]
    fn emitted_specs_parse() {
        for g in GENERATORS {
            let sim = simulate(&SimOptions { generator: g.into(), seed: 1, n: Some(30), sigma: None, alpha: None }).unwrap();
            SpecFile::from_json(&sim.spec.to_string()).unwrap().model_spec().unwrap();
        }
    }

    #[test]
    fn unknown_generator() {
        let err = simulate(&SimOptions { generator: "nope".into(), seed: 1, n: None, sigma: None, alpha: None }).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_USAGE);
    }
}
