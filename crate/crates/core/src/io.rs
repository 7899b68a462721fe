//! File formats: CSV input tables, JSON reports and CSV curves.
//!
//! All numbers are written in Rust's shortest round-trip form, so every
//! value read back parses to the same `f64`. Files are written to a
//! temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::density::CoefficientSet;
use crate::error::{Error, Result};
use crate::mdc::DeviancePath;
use crate::pipeline::{CdfrFit, DiscoveryReport, FitConfig, NullSpec};
use crate::prewhiten::BetaFit;
use crate::sim::SimReport;

/// Which kind of value the input column holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Stat,
    Pvalue,
}

impl ColumnKind {
    pub fn header(self) -> &'static str {
        match self {
            ColumnKind::Stat => "stat",
            ColumnKind::Pvalue => "pvalue",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputTable {
    pub kind: ColumnKind,
    pub ids: Option<Vec<String>>,
    pub values: Vec<f64>,
}

/// Parses CSV text with a header row.
///
/// The value column is the one named `stat` or `pvalue` (matching `kind`),
/// or the only column besides `id`. An `id` column is optional. Missing,
/// non-numeric or non-finite values and p-values outside [0, 1] are
/// rejected with the line number.
pub fn parse_input(text: &str, kind: ColumnKind) -> Result<InputTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Input(format!("cannot read header row: {e}")))?
        .clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::Input("missing header row".into()));
    }
    let names: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    let id_col = names.iter().position(|h| h == "id");
    let value_col = match names.iter().position(|h| h == kind.header()) {
        Some(c) => c,
        None => {
            let others: Vec<usize> = (0..names.len()).filter(|&c| Some(c) != id_col).collect();
            match others.as_slice() {
                [only] => *only,
                _ => {
                    return Err(Error::Input(format!(
                        "no '{}' column in header [{}]",
                        kind.header(),
                        headers.iter().collect::<Vec<_>>().join(", ")
                    )))
                }
            }
        }
    };

    let mut ids = id_col.map(|_| Vec::new());
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Input(format!("line {line}: malformed row: {e}"))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let raw = record.get(value_col).unwrap_or("");
        if raw.is_empty() {
            return Err(Error::Input(format!("line {line}: missing value in column '{}'", headers[value_col].trim())));
        }
        let value: f64 = raw
            .parse()
            .map_err(|_| Error::Input(format!("line {line}: '{raw}' is not a number")))?;
        if !value.is_finite() {
            return Err(Error::Input(format!("line {line}: value {raw} is not finite")));
        }
        if kind == ColumnKind::Pvalue && !(0.0..=1.0).contains(&value) {
            return Err(Error::Input(format!("line {line}: p-value {raw} outside [0, 1]")));
        }
        if let (Some(ids), Some(c)) = (ids.as_mut(), id_col) {
            ids.push(record.get(c).unwrap_or("").to_string());
        }
        values.push(value);
    }
    if values.is_empty() {
        return Err(Error::Input("no data rows".into()));
    }
    Ok(InputTable { kind, ids, values })
}

pub fn read_input(path: &Path, kind: ColumnKind) -> Result<InputTable> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_input(&text, kind)
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so a failed run leaves no partial output.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("output path '{}' has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp: PathBuf = path.with_file_name(tmp_name);
    fs::write(&tmp, contents).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(e)
    })
}

/// Shortest round-trip decimal form, switching to exponent notation for
/// very small or very large magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Harness(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn csv_text(header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt_f64).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Settings of a `fdr` or `pi0` run, echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: String,
    pub column: ColumnKind,
    pub null: NullSpec,
    /// Degrees of freedom of the t→z preprocessing, if applied.
    pub t_to_z_df: Option<f64>,
    pub fit: FitConfig,
    pub fdr_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pi0Summary {
    pub lambda_star: f64,
    pub pi0_hat: f64,
    pub flat: bool,
    pub n_grid_used: usize,
    pub n_grid_skipped: usize,
}

impl From<&DeviancePath> for Pi0Summary {
    fn from(path: &DeviancePath) -> Self {
        Self {
            lambda_star: path.lambda_star,
            pi0_hat: path.pi0_hat,
            flat: path.flat,
            n_grid_used: path.lambdas.len(),
            n_grid_skipped: path.skipped.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub id: Option<String>,
    /// The value as read from the input.
    pub input: f64,
    /// The statistic the null was applied to (after any t→z step).
    pub stat: f64,
    pub pvalue: f64,
    pub smooth_pvalue: f64,
    pub d_hat: f64,
    pub fdr: f64,
    pub fdr_raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Measure of {u : d̂(u) < floor}.
    pub clipped_measure: f64,
    /// ∫ d̂ over (0, 1).
    pub density_mass: f64,
    /// ∫ f̂₁; absent when π̂₀ = 1.
    pub nonnull_mass: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub n: usize,
    pub beta_fit: BetaFit,
    pub coefficients: CoefficientSet,
    pub pi0: Pi0Summary,
    pub floor: f64,
    pub discoveries: DiscoveryReport,
    pub cases: Vec<CaseRow>,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
}

/// Assembles the report of a fitted run. `stats` are the values the
/// model was fitted on; `inputs` are the raw input values.
pub fn build_run_report(config: RunConfig, ids: Option<&[String]>, inputs: &[f64], stats: &[f64], fit: &CdfrFit) -> RunReport {
    let model = &fit.model;
    let cases = stats
        .iter()
        .enumerate()
        .map(|(i, &stat)| {
            let u = fit.pvalues[i];
            CaseRow {
                id: ids.map(|ids| ids[i].clone()),
                input: inputs[i],
                stat,
                pvalue: u,
                smooth_pvalue: fit.smooth_pvalues[i],
                d_hat: model.density_at_pvalue(u),
                fdr: model.local_fdr_at_pvalue(u),
                fdr_raw: model.local_fdr_raw_at_pvalue(u),
            }
        })
        .collect();
    let discoveries = model.discoveries(stats, config.fdr_threshold);
    RunReport {
        n: model.n,
        beta_fit: model.cd_model.fit,
        coefficients: model.cd_model.coeffs.clone(),
        pi0: Pi0Summary::from(&model.deviance_path),
        floor: model.cd_model.floor,
        discoveries,
        cases,
        diagnostics: Diagnostics {
            clipped_measure: model.cd_model.clipped_measure(),
            density_mass: model.cd_model.total_mass(),
            nonnull_mass: model.nonnull_mass().ok(),
        },
        warnings: model.warnings.clone(),
        config,
    }
}

const CURVE_POINTS: usize = 201;

/// `t,u,v,d_hat,fdr` on an even grid spanning the data plus one row per
/// case, sorted by t.
pub fn fdr_curves_csv(stats: &[f64], fit: &CdfrFit) -> String {
    let model = &fit.model;
    let (lo, hi) = if model.null_spec.is_pvalue() {
        (0.0, 1.0)
    } else {
        stats
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| (lo.min(t), hi.max(t)))
    };
    let step = (hi - lo) / (CURVE_POINTS - 1) as f64;
    let mut ts: Vec<f64> = (0..CURVE_POINTS).map(|i| lo + step * i as f64).collect();
    ts.extend_from_slice(stats);
    ts.sort_by(f64::total_cmp);
    let rows = ts.into_iter().map(|t| {
        let u = model.pvalue(t);
        let d = model.density_at_pvalue(u);
        vec![t, u, model.cd_model.smooth_pvalue(u), d, model.local_fdr_at_pvalue(u)]
    });
    csv_text(&["t", "u", "v", "d_hat", "fdr"], rows)
}

/// `lambda,D_lambda,n_lambda`, one row per non-skipped grid level.
pub fn deviance_path_csv(path: &DeviancePath) -> String {
    let mut out = String::from("lambda,D_lambda,n_lambda\n");
    for k in 0..path.lambdas.len() {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_f64(path.lambdas[k]),
            fmt_f64(path.deviances[k]),
            path.n_lambda[k]
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pi0Report {
    pub config: RunConfig,
    pub n: usize,
    pub lambda_star: f64,
    pub pi0_hat: f64,
    pub flat: bool,
    pub skipped: Vec<f64>,
}

/// `grid,true_fdr,mean_fdr,sd_fdr`.
pub fn sim_curves_csv(report: &SimReport) -> String {
    let rows = (0..report.grid.len()).map(|k| {
        vec![report.grid[k], report.true_fdr[k], report.mean_fdr[k], report.sd_fdr[k]]
    });
    csv_text(&["grid", "true_fdr", "mean_fdr", "sd_fdr"], rows)
}
