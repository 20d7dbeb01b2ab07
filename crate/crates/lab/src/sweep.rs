//! Cartesian parameter sweeps over a base configuration.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{self, ScenarioConfig};
use crate::error::{LabError, Result};
use crate::exec::RayonMap;
use crate::io;
use crate::scenario;

/// One swept parameter and its values, in the order given.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub path: String,
    pub values: Vec<toml::Value>,
}

fn axis_path(name: &str) -> &str {
    match name {
        "lambda" => "damping.lambda",
        "mu" => "damping.mu",
        "eps" => "data.eps",
        "N" | "points" => "grid.points",
        "delta" => "delta",
        "gamma" => "gas.gamma",
        other => other,
    }
}

impl Axis {
    /// Parse `name=v1,v2,...`. Short names map to their config paths; any
    /// other name is taken as a dotted path.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, values) =
            spec.split_once('=').ok_or_else(|| LabError::config(spec, "axis must look like name=v1,v2,..."))?;
        let name = name.trim();
        let values: Vec<toml::Value> =
            values.split(',').map(str::trim).filter(|v| !v.is_empty()).map(config::parse_value).collect();
        if values.is_empty() {
            return Err(LabError::config(name, "axis has no values"));
        }
        Ok(Axis { name: name.to_string(), path: axis_path(name).to_string(), values })
    }
}

/// Every combination of axis values, the last axis varying fastest.
pub fn combinations(axes: &[Axis]) -> Vec<Vec<(String, toml::Value)>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<(String, toml::Value)>| {
                axis.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((axis.path.clone(), v.clone()));
                    p
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Passed,
    Failed,
    Error(String),
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub settings: Vec<(String, toml::Value)>,
    pub dir: Option<PathBuf>,
    pub status: RunStatus,
    pub passed: usize,
    pub failed: usize,
    pub observed: Vec<(String, f64)>,
}

fn run_one(source: &str, base: &[(String, toml::Value)], settings: &[(String, toml::Value)], root: &Path) -> SweepRun {
    let attempt = || -> Result<(PathBuf, crate::report::Report)> {
        let mut all = base.to_vec();
        all.extend_from_slice(settings);
        let cfg = ScenarioConfig::load(source, &all)?;
        let mut outcome = scenario::run_scenario(&cfg, &RayonMap)?;
        let dir = io::persist(root, &mut outcome)?;
        Ok((dir, outcome.report))
    };
    match attempt() {
        Ok((dir, report)) => {
            let passed = report.verdicts.iter().filter(|v| v.passed).count();
            SweepRun {
                settings: settings.to_vec(),
                dir: Some(dir),
                status: if report.passed() { RunStatus::Passed } else { RunStatus::Failed },
                passed,
                failed: report.verdicts.len() - passed,
                observed: report.verdicts.iter().map(|v| (v.quantity.clone(), v.observed)).collect(),
            }
        }
        Err(e) => SweepRun {
            settings: settings.to_vec(),
            dir: None,
            status: RunStatus::Error(e.to_string()),
            passed: 0,
            failed: 0,
            observed: Vec::new(),
        },
    }
}

/// Run every combination on a pool of `jobs` threads. A failing run is
/// recorded and the sweep continues. Results keep combination order.
pub fn sweep(
    source: &str,
    overrides: &[(String, toml::Value)],
    axes: &[Axis],
    root: &Path,
    jobs: usize,
) -> Result<Vec<SweepRun>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| LabError::config("jobs", e.to_string()))?;
    let combos = combinations(axes);
    Ok(pool.install(|| combos.par_iter().map(|c| run_one(source, overrides, c, root)).collect()))
}

fn value_text(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// `sweep.csv`: axis values, run directory, status, verdict counts, then one
/// observed-value column per quantity seen in any run.
pub fn write_summary(path: &Path, axes: &[Axis], runs: &[SweepRun]) -> Result<()> {
    let mut quantities: Vec<String> = Vec::new();
    for run in runs {
        for (q, _) in &run.observed {
            if !quantities.contains(q) {
                quantities.push(q.clone());
            }
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = axes.iter().map(|a| a.name.clone()).collect();
    header.extend(["run", "status", "passed", "failed"].map(String::from));
    header.extend(quantities.iter().cloned());
    w.write_record(&header)?;
    for run in runs {
        let mut rec: Vec<String> = run.settings.iter().map(|(_, v)| value_text(v)).collect();
        rec.push(run.dir.as_ref().map(|d| d.display().to_string()).unwrap_or_default());
        rec.push(match &run.status {
            RunStatus::Passed => "pass".into(),
            RunStatus::Failed => "fail".into(),
            RunStatus::Error(e) => format!("error: {e}"),
        });
        rec.push(run.passed.to_string());
        rec.push(run.failed.to_string());
        for q in &quantities {
            rec.push(run.observed.iter().find(|(k, _)| k == q).map(|(_, v)| v.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing_and_product_order() {
        let a = Axis::parse("lambda=0.2,0.5").unwrap();
        assert_eq!(a.path, "damping.lambda");
        let b = Axis::parse("N=256, 512 ,1024").unwrap();
        assert_eq!(b.path, "grid.points");
        assert_eq!(b.values[2], toml::Value::Integer(1024));
        let combos = combinations(&[a, b]);
        assert_eq!(combos.len(), 6);
        assert_eq!(combos[1][0].1, toml::Value::Float(0.2));
        assert_eq!(combos[1][1].1, toml::Value::Integer(512));
        assert_eq!(combos[3][0].1, toml::Value::Float(0.5));
        assert!(Axis::parse("lambda=").is_err());
        assert!(Axis::parse("lambda").is_err());
    }
}
