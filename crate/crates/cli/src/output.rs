//! CSV trajectories and JSON reports. Every file carries the resolved
//! configuration and the library version.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use twoscale::linalg::vecops;
use twoscale::Bundle;

use crate::config::RunConfig;
use crate::error::CliError;

/// Header and rows of a trajectory table: `t`, the reference, then per
/// order the partial sum and its Euclidean distance to the reference.
pub fn trajectory_csv(bundle: &Bundle) -> String {
    let d = bundle.reference.first().map_or(0, Vec::len);
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=d).map(|i| format!("ref_{i}")));
    for k in bundle.reconstruction.keys() {
        cols.extend((1..=d).map(|i| format!("rec{k}_{i}")));
        cols.push(format!("err{k}"));
    }
    let mut out = cols.join(",");
    out.push('\n');
    for (i, reference) in bundle.reference.iter().enumerate() {
        let mut row = vec![bundle.grid.time(i)];
        row.extend_from_slice(reference);
        for rec in bundle.reconstruction.values() {
            row.extend_from_slice(&rec[i]);
            row.push(vecops::norm(&vecops::sub(reference, &rec[i])));
        }
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            // 17 significant digits round-trip every f64.
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    out
}

/// `traj.csv` → `traj.meta.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

#[derive(Serialize)]
struct Envelope<'a, R: Serialize> {
    version: &'a str,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<&'a R>,
}

/// Pretty JSON with the version, the resolved config and the report, in
/// struct declaration order.
pub fn report_json<R: Serialize>(config: &RunConfig, report: Option<&R>) -> Result<String, CliError> {
    let env = Envelope {
        version: twoscale::VERSION,
        config,
        report,
    };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| CliError::Numerical(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Writes the CSV and its metadata sidecar.
pub fn emit_trajectory_csv(bundle: &Bundle, config: &RunConfig, path: &Path) -> Result<(), CliError> {
    write_file(path, &trajectory_csv(bundle))?;
    write_file(&meta_path(path), &report_json::<()>(config, None)?)
}

pub fn emit_report_json<R: Serialize>(report: &R, config: &RunConfig, path: &Path) -> Result<(), CliError> {
    write_file(path, &report_json(config, Some(report))?)
}
