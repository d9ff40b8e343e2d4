//! Multi-seed reproduction of the two experiments.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::{error, info};
use serde::Serialize;

use crate::error::{Result, WtaError};
use crate::evaluation::{csv_error, EvalReport};
use crate::runner::config::{Design, RunConfig, TopDown};
use crate::runner::protocol::{test, train, write_reports, Dataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    /// Integration network without feedback; reports I, H_a and H_b.
    Exp1,
    /// Top-down variants of the integration network plus an isolated
    /// hierarchy with feedback.
    Exp2,
}

impl FromStr for Suite {
    type Err = WtaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp1" => Ok(Suite::Exp1),
            "exp2" => Ok(Suite::Exp2),
            _ => Err(WtaError::config(format!("unknown suite '{s}' (expected exp1 or exp2)"))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Exp1 => "exp1",
            Suite::Exp2 => "exp2",
        })
    }
}

/// One configuration of a suite.
#[derive(Clone, Debug, PartialEq)]
pub struct Variant {
    pub name: &'static str,
    pub design: Design,
    pub top_down: TopDown,
}

impl Suite {
    pub fn variants(&self) -> Vec<Variant> {
        let td = |s: &str| s.parse::<TopDown>().expect("valid policy");
        let integ = |name, p: &str| Variant {
            name,
            design: Design::Integration,
            top_down: td(p),
        };
        match self {
            Suite::Exp1 => vec![integ("no-td", "none")],
            Suite::Exp2 => vec![
                integ("no-td", "none"),
                integ("td-x1", "x1"),
                integ("td-x2", "x2"),
                integ("td-x3", "x3"),
                integ("td-phi", "phi"),
                Variant {
                    name: "isolated-td-x2",
                    design: Design::Hierarchical,
                    top_down: td("x2"),
                },
            ],
        }
    }
}

/// One completed or failed run of a suite.
#[derive(Clone, Debug)]
pub struct SuiteRun {
    pub variant: &'static str,
    pub seed: u64,
    pub outcome: std::result::Result<Vec<EvalReport>, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub variant: String,
    pub network: String,
    pub metric: &'static str,
    pub runs: usize,
    pub mean: f64,
    pub stddev: f64,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn aggregate(runs: &[SuiteRun]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(String, String), [Vec<f64>; 3]> = BTreeMap::new();
    for run in runs {
        let Ok(reports) = &run.outcome else { continue };
        for r in reports {
            let g = groups.entry((run.variant.to_string(), r.meta.network.clone())).or_default();
            g[0].push(r.accuracy);
            g[1].push(r.confidence);
            g[2].push(r.confidence_error);
        }
    }
    let mut out = Vec::new();
    for ((variant, network), metrics) in groups {
        for (metric, values) in ["accuracy", "confidence", "confidence_error"].into_iter().zip(metrics) {
            let (mean, stddev) = mean_std(&values);
            out.push(Aggregate {
                variant: variant.clone(),
                network: network.clone(),
                metric,
                runs: values.len(),
                mean,
                stddev,
            });
        }
    }
    out
}

#[derive(Serialize)]
struct RunRow<'a> {
    variant: &'a str,
    seed: u64,
    network: &'a str,
    accuracy: Option<f64>,
    confidence: Option<f64>,
    confidence_error: Option<f64>,
    error: &'a str,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| WtaError::io(format!("creating {}", path.display()), e))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| WtaError::io(format!("writing {}", path.display()), e))
}

/// Trains and tests every variant of `suite` for every seed under
/// `<base.output_dir>/<suite>/<variant>/seed<seed>`, then writes `runs.csv`
/// and `summary.csv` (mean and standard deviation per metric). A failing run
/// is recorded and the suite continues.
pub fn run_experiment_suite(base: &RunConfig, suite: Suite, seeds: &[u64], data: &Dataset) -> Result<Vec<SuiteRun>> {
    if seeds.is_empty() {
        return Err(WtaError::config("a suite needs at least one seed"));
    }
    let root = base.output_dir.join(suite.to_string());
    std::fs::create_dir_all(&root).map_err(|e| WtaError::io(format!("creating {}", root.display()), e))?;
    let mut runs = Vec::new();
    for variant in suite.variants() {
        for &seed in seeds {
            let config = RunConfig {
                seed,
                design: variant.design,
                top_down: variant.top_down,
                output_dir: root.join(variant.name).join(format!("seed{seed}")),
                ..base.clone()
            };
            info!("{suite} {} seed {seed}", variant.name);
            let outcome = train(&config, &data.train)
                .and_then(|cp| test(&config, &cp, data))
                .and_then(|reports| write_reports(&reports, &config.output_dir).map(|_| reports));
            if let Err(e) = &outcome {
                error!("{suite} {} seed {seed} failed: {e}", variant.name);
            }
            runs.push(SuiteRun {
                variant: variant.name,
                seed,
                outcome: outcome.map_err(|e| e.to_string()),
            });
        }
    }
    let mut rows = Vec::new();
    for run in &runs {
        match &run.outcome {
            Ok(reports) => rows.extend(reports.iter().map(|r| RunRow {
                variant: run.variant,
                seed: run.seed,
                network: &r.meta.network,
                accuracy: Some(r.accuracy),
                confidence: Some(r.confidence),
                confidence_error: Some(r.confidence_error),
                error: "",
            })),
            Err(e) => rows.push(RunRow {
                variant: run.variant,
                seed: run.seed,
                network: "",
                accuracy: None,
                confidence: None,
                confidence_error: None,
                error: e,
            }),
        }
    }
    write_csv(&root.join("runs.csv"), rows)?;
    write_csv(&root.join("summary.csv"), aggregate(&runs))?;
    Ok(runs)
}
