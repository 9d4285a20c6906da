//! Files written by the CLI. Every write goes to a temporary file in the
//! target directory and is renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use fracfold::continuation::{Branch, MultiplicityRow, Segment};
use fracfold::{Grid, Nonlinearity, SolutionField};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| HarnessError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| HarnessError::io(path, e))?;
    tmp.flush().map_err(|e| HarnessError::io(path, e))?;
    tmp.persist(path).map_err(|e| HarnessError::io(path, e.error))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridJson {
    #[serde(rename = "L")]
    pub half_width: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsJson {
    pub s: f64,
    pub delta: f64,
    pub beta: f64,
    pub lambda: f64,
    /// `null` without a nonlinearity.
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionJson {
    pub grid: GridJson,
    pub params: ParamsJson,
    pub values: Vec<f64>,
    pub residual: f64,
    pub tolerance: f64,
    pub cone_norm: Option<f64>,
    pub fitted_exponent: Option<f64>,
    pub report: Option<fracfold::weights::NormReport>,
}

impl SolutionJson {
    pub fn new(field: &SolutionField, grid: &Grid) -> Self {
        let spec = &field.spec;
        let p = match spec.nonlinearity {
            Nonlinearity::Power { p, .. } => Some(p),
            _ => None,
        };
        SolutionJson {
            grid: GridJson {
                half_width: grid.half_width(),
                n: grid.len(),
            },
            params: ParamsJson {
                s: spec.s,
                delta: spec.delta,
                beta: spec.beta,
                lambda: spec.lambda,
                p,
            },
            values: field.values.clone(),
            residual: field.residual,
            tolerance: field.tolerance,
            cone_norm: field.report.as_ref().map(|r| r.cone_norm),
            fitted_exponent: field.report.as_ref().and_then(|r| r.fitted_exponent),
            report: field.report.clone(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn segment_name(s: Segment) -> &'static str {
    match s {
        Segment::Minimal => "minimal",
        Segment::Fold => "fold",
        Segment::Upper => "upper",
    }
}

/// One row per branch point in continuation order; the `segment` column
/// flags the fold row.
pub fn branch_csv(branch: &Branch) -> String {
    let mut out = String::from("lambda,sup_norm,lambda1,monitor,arclength,residual,segment\n");
    for p in &branch.points {
        let _ = writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
            p.lambda,
            p.sup_norm,
            p.lambda1,
            p.monitor,
            p.arclength,
            p.residual,
            segment_name(p.segment)
        );
    }
    out
}

pub fn multiplicity_csv(rows: &[MultiplicityRow]) -> String {
    let mut out = String::from("lambda,minimal_sup,second_sup,gap,tolerance,distinct\n");
    for r in rows {
        let second = r.second.as_ref();
        let tol = second.map_or(r.minimal.tolerance, |s| s.tolerance.max(r.minimal.tolerance));
        let _ = writeln!(
            out,
            "{:.17e},{:.17e},{},{},{:.17e},{}",
            r.lambda,
            r.minimal.sup_norm(),
            second.map_or("NaN".to_string(), |s| format!("{:.17e}", s.sup_norm())),
            r.gap.map_or("NaN".to_string(), |g| format!("{g:.17e}")),
            tol,
            r.distinct
        );
    }
    out
}

/// Two-column `λ ‖u‖∞` bifurcation diagram.
pub fn diagram_data(branch: &Branch) -> Result<String> {
    if branch.points.is_empty() {
        return Err(HarnessError::Refused("branch has no points to plot".into()));
    }
    let mut out = String::from("# lambda sup_norm\n");
    for p in &branch.points {
        let _ = writeln!(out, "{:.17e} {:.17e}", p.lambda, p.sup_norm);
    }
    Ok(out)
}

/// Two-column `d u` boundary profile over the left half of the grid, for
/// log-log plotting.
pub fn profile_data(field: &SolutionField, grid: &Grid) -> Result<String> {
    if field.values.is_empty() {
        return Err(HarnessError::Refused("solution has no values to plot".into()));
    }
    let mut out = String::from("# d u\n");
    for (i, (x, u)) in grid.nodes().iter().zip(&field.values).enumerate() {
        if *x < 0.0 {
            let _ = writeln!(out, "{:.17e} {:.17e}", grid.distance(i), u);
        }
    }
    Ok(out)
}

/// Writes the bifurcation diagram of `branch` into `dir`.
pub fn export_plot_data(branch: &Branch, dir: &Path) -> Result<PathBuf> {
    let text = diagram_data(branch)?;
    let path = dir.join("diagram.dat");
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

/// Writes the boundary profile of `field` into `dir` under `name`.
pub fn export_profile(field: &SolutionField, grid: &Grid, dir: &Path, name: &str) -> Result<PathBuf> {
    let text = profile_data(field, grid)?;
    let path = dir.join(name);
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}
