//! Cartesian parameter sweeps. Each point is a full experiment config with
//! some fields replaced, run into its own directory.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{Map, Value};

use super::config::{validate_value, ConfigError, ExperimentConfig, Violation};
use super::run::{run_experiment_in, RunStatus};
use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepAxis {
    /// Dotted path into the base config, e.g. `panels.weak.params.coupling`.
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub base: Value,
    pub axes: Vec<SweepAxis>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub assignments: Vec<(String, Value)>,
    pub config: ExperimentConfig,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointReport {
    pub index: usize,
    pub assignments: Map<String, Value>,
    pub output_dir: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub points: Vec<PointReport>,
}

impl SweepReport {
    pub fn exit_code(&self) -> u8 {
        if self.points.iter().any(|p| p.status == "failed") {
            1
        } else if self.points.iter().any(|p| p.status == "tainted") {
            2
        } else {
            0
        }
    }
}

fn fail(path: impl Into<String>, message: impl Into<String>) -> Violation {
    Violation { path: path.into(), message: message.into() }
}

pub fn parse_sweep(raw: &str) -> Result<SweepConfig, ConfigError> {
    let value: Value = serde_json::from_str(raw).map_err(|e| ConfigError {
        violations: vec![fail("", format!("invalid JSON at line {}, column {}: {e}", e.line(), e.column()))],
    })?;
    let mut errors = Vec::new();
    let Some(root) = value.as_object() else {
        return Err(ConfigError { violations: vec![fail("", "expected an object")] });
    };
    for key in root.keys() {
        if !["base", "axes", "output_dir"].contains(&key.as_str()) {
            errors.push(fail(key.clone(), "unknown field (expected one of: base, axes, output_dir)"));
        }
    }
    let base = match root.get("base") {
        Some(b @ Value::Object(m)) => {
            if !m.contains_key("experiment") {
                errors.push(fail("base.experiment", "a sweep base must name its experiment"));
            }
            b.clone()
        }
        _ => {
            errors.push(fail("base", "expected an experiment config object"));
            Value::Null
        }
    };
    let mut axes = Vec::new();
    match root.get("axes") {
        Some(Value::Array(list)) => {
            for (i, a) in list.iter().enumerate() {
                let p = format!("axes[{i}]");
                let path = a.get("path").and_then(Value::as_str);
                let values = a.get("values").and_then(Value::as_array);
                match (path, values) {
                    (Some(path), Some(values)) if !path.is_empty() && !values.is_empty() => {
                        axes.push(SweepAxis { path: path.to_string(), values: values.clone() })
                    }
                    _ => errors.push(fail(p, "expected {\"path\": <dotted path>, \"values\": [non-empty]}")),
                }
            }
        }
        _ => errors.push(fail("axes", "expected an array of axes")),
    }
    let output_dir = match root.get("output_dir") {
        None => PathBuf::from("out/sweep"),
        Some(Value::String(s)) if !s.is_empty() => PathBuf::from(s),
        Some(_) => {
            errors.push(fail("output_dir", "expected a non-empty path string"));
            PathBuf::new()
        }
    };
    if errors.is_empty() {
        Ok(SweepConfig { base, axes, output_dir })
    } else {
        Err(ConfigError { violations: errors })
    }
}

/// Sets `path` (dot-separated object keys) inside `target`, creating
/// intermediate objects.
pub fn set_path(target: &mut Value, path: &str, value: Value) -> Result<(), String> {
    let mut cur = target;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let Value::Object(map) = cur else {
            return Err(format!("{} is not an object", keys[..i].join(".")));
        };
        if i + 1 == keys.len() {
            map.insert(key.to_string(), value);
            return Ok(());
        }
        cur = map.entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

/// Expands and validates every point before anything runs; violations are
/// reported per point.
pub fn expand(sweep: &SweepConfig) -> Result<Vec<SweepPoint>, ConfigError> {
    let total: usize = sweep.axes.iter().map(|a| a.values.len()).product();
    let mut points = Vec::with_capacity(total);
    let mut errors = Vec::new();
    for index in 0..total {
        let mut rem = index;
        let mut assignments = Vec::new();
        // Last axis varies fastest.
        for axis in sweep.axes.iter().rev() {
            let v = axis.values[rem % axis.values.len()].clone();
            rem /= axis.values.len();
            assignments.push((axis.path.clone(), v));
        }
        assignments.reverse();
        let mut raw = sweep.base.clone();
        let mut ok = true;
        for (path, v) in &assignments {
            if let Err(e) = set_path(&mut raw, path, v.clone()) {
                errors.push(fail(format!("points[{index}].{path}"), e));
                ok = false;
            }
        }
        if !ok {
            continue;
        }
        match validate_value(&raw, None) {
            Ok(config) => points.push(SweepPoint {
                index,
                assignments,
                config,
                output_dir: sweep.output_dir.join(format!("point_{index:04}")),
            }),
            Err(e) => errors.extend(
                e.violations.into_iter().map(|v| fail(format!("points[{index}].{}", v.path), v.message)),
            ),
        }
    }
    if errors.is_empty() {
        Ok(points)
    } else {
        Err(ConfigError { violations: errors })
    }
}

/// Runs all points in parallel and writes `sweep.json` at the sweep root.
pub fn run_sweep(sweep: &SweepConfig) -> Result<SweepReport, HarnessError> {
    let points = expand(sweep)?;
    let mut reports: Vec<PointReport> = points
        .par_iter()
        .map(|p| {
            let (status, error) = match run_experiment_in(&p.config, &p.output_dir) {
                Ok((_, RunStatus::Clean)) => ("clean", None),
                Ok((_, RunStatus::Tainted)) => ("tainted", None),
                Err(e) => ("failed", Some(e.to_string())),
            };
            PointReport {
                index: p.index,
                assignments: p.assignments.iter().cloned().collect(),
                output_dir: relative(&p.output_dir, &sweep.output_dir),
                status: status.to_string(),
                error,
            }
        })
        .collect();
    reports.sort_by_key(|r| r.index);
    let report = SweepReport { points: reports };
    std::fs::create_dir_all(&sweep.output_dir).map_err(|e| HarnessError::io(&sweep.output_dir, e))?;
    let path = sweep.output_dir.join("sweep.json");
    let mut data = serde_json::to_vec_pretty(&report).expect("report serializes");
    data.push(b'\n');
    std::fs::write(&path, data).map_err(|e| HarnessError::io(&path, e))?;
    Ok(report)
}

fn relative(path: &Path, root: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/")
}
