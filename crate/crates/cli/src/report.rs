//! Result tables in human, CSV and JSON form.

use clustervol::{FittedModel, LrTest, Panel, ReportRecord, VolatilityTestResult};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Human,
    Csv,
    Json,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFitRow {
    pub cluster: String,
    pub size: usize,
    pub alpha0: f64,
    pub alpha1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFitRow {
    pub series: String,
    pub cluster: String,
    pub lambda: f64,
    pub phi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub phi_hat: f64,
    pub iterations: usize,
    pub converged: bool,
    pub last_change: f64,
    pub clusters: Vec<ClusterFitRow>,
    pub series: Vec<SeriesFitRow>,
}

impl FitReport {
    pub fn new(panel: &Panel, fit: &FittedModel) -> Self {
        let names = panel.cluster_names();
        Self {
            phi_hat: fit.phi_hat,
            iterations: fit.iterations,
            converged: fit.converged,
            last_change: fit.last_change,
            clusters: panel
                .clusters()
                .iter()
                .map(|c| ClusterFitRow {
                    cluster: c.name.clone(),
                    size: c.size(),
                    alpha0: fit.arch_hat[c.index].alpha0,
                    alpha1: fit.arch_hat[c.index].alpha1,
                })
                .collect(),
            series: (0..panel.n_series())
                .map(|i| SeriesFitRow {
                    series: panel.series_ids()[i].clone(),
                    cluster: names[panel.cluster_of()[i]].clone(),
                    lambda: fit.lambda_hat[i],
                    phi: fit.phi_per_series[i],
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub cluster: String,
    pub size: usize,
    pub alpha0: f64,
    pub alpha1: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub reject: bool,
}

/// Common `φ̂` plus one row per cluster with its Bonferroni interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTable {
    pub phi_hat: f64,
    pub alpha: f64,
    pub corrected_level: f64,
    pub replicates: usize,
    pub failed_replicates: usize,
    pub clusters: Vec<ClusterRow>,
}

impl From<&VolatilityTestResult> for ClusterTable {
    fn from(r: &VolatilityTestResult) -> Self {
        Self {
            phi_hat: r.fit.phi_hat,
            alpha: r.alpha,
            corrected_level: r.corrected_level,
            replicates: r.replicates_requested,
            failed_replicates: r.failed_replicates,
            clusters: r
                .clusters
                .iter()
                .map(|c| ClusterRow {
                    cluster: c.name.clone(),
                    size: c.size,
                    alpha0: c.alpha0_hat,
                    alpha1: c.alpha1_hat,
                    ci_lower: c.ci_lower,
                    ci_upper: c.ci_upper,
                    reject: c.reject,
                })
                .collect(),
        }
    }
}

/// One univariate likelihood-ratio test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub series: String,
    pub cluster: String,
    pub ar_phi: Option<f64>,
    pub nonstationary: bool,
    pub alpha0: Option<f64>,
    pub alpha1: Option<f64>,
    pub lr_statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub reject: bool,
    /// Set when the test could not be computed for this series.
    pub error: Option<String>,
}

impl SeriesRow {
    pub fn new(series: &str, cluster: &str, outcome: &clustervol::Result<LrTest>) -> Self {
        match outcome {
            Ok(t) => Self {
                series: series.into(),
                cluster: cluster.into(),
                ar_phi: Some(t.ar_phi),
                nonstationary: t.nonstationary,
                alpha0: Some(t.arch.alpha0),
                alpha1: Some(t.arch.alpha1),
                lr_statistic: Some(t.statistic),
                p_value: Some(t.p_value),
                reject: t.reject,
                error: None,
            },
            Err(e) => Self {
                series: series.into(),
                cluster: cluster.into(),
                ar_phi: None,
                nonstationary: false,
                alpha0: None,
                alpha1: None,
                lr_statistic: None,
                p_value: None,
                reject: false,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Report {
    Fit(FitReport),
    Test(ClusterTable),
    Baseline(Vec<SeriesRow>),
    SizePower(Vec<ReportRecord>),
}

pub fn render_report(report: &Report, format: Format) -> Result<String, ReportError> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => csv_text(report),
        Format::Human => Ok(human(report)),
    }
}

fn fixed(v: f64, digits: usize) -> String {
    format!("{v:.digits$}")
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |v| fixed(v, digits))
}

fn opt_raw(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// `α̂ (lower, upper)` as printed in the cluster table.
pub fn estimate_with_interval(alpha1: f64, lower: f64, upper: f64) -> String {
    format!("{} ({}, {})", fixed(alpha1, 3), fixed(lower, 4), fixed(upper, 4))
}

/// The AR(1) column of the univariate table.
pub fn ar_cell(row: &SeriesRow) -> String {
    match row.ar_phi {
        None => "-".into(),
        Some(phi) if row.nonstationary => format!("{} nonstationary", fixed(phi, 3)),
        Some(phi) => fixed(phi, 3),
    }
}

fn layout(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ");
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = line(headers.to_vec());
    out.push_str(&line(
        widths
            .iter()
            .map(|&w| "-".repeat(w))
            .collect::<Vec<_>>()
            .iter()
            .map(String::as_str)
            .collect(),
    ));
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

fn human(report: &Report) -> String {
    match report {
        Report::Fit(f) => {
            let mut out = format!(
                "phi_hat = {}  (iterations {}, {}, last change {:.2e})\n\n",
                fixed(f.phi_hat, 4),
                f.iterations,
                if f.converged { "converged" } else { "not converged" },
                f.last_change
            );
            let rows: Vec<_> = f
                .clusters
                .iter()
                .map(|c| {
                    vec![
                        c.cluster.clone(),
                        c.size.to_string(),
                        fixed(c.alpha0, 4),
                        fixed(c.alpha1, 4),
                    ]
                })
                .collect();
            out.push_str(&layout(&["cluster", "size", "alpha0", "alpha1"], &rows));
            out.push('\n');
            let rows: Vec<_> = f
                .series
                .iter()
                .map(|s| vec![s.series.clone(), s.cluster.clone(), fixed(s.lambda, 4), opt(s.phi, 4)])
                .collect();
            out.push_str(&layout(&["series", "cluster", "lambda", "phi_i"], &rows));
            out
        }
        Report::Test(t) => {
            let mut out = format!(
                "phi_hat = {}\nalpha = {}, {} clusters, corrected level {}\n{} bootstrap replicates ({} failed)\n\n",
                fixed(t.phi_hat, 4),
                t.alpha,
                t.clusters.len(),
                t.corrected_level,
                t.replicates,
                t.failed_replicates
            );
            let rows: Vec<_> = t
                .clusters
                .iter()
                .map(|c| {
                    vec![
                        c.cluster.clone(),
                        c.size.to_string(),
                        fixed(c.alpha0, 3),
                        estimate_with_interval(c.alpha1, c.ci_lower, c.ci_upper),
                        if c.reject { "reject".into() } else { String::new() },
                    ]
                })
                .collect();
            out.push_str(&layout(&["cluster", "size", "alpha0", "alpha1 (CI)", "H0"], &rows));
            out
        }
        Report::Baseline(rows) => {
            let cells: Vec<_> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.series.clone(),
                        r.cluster.clone(),
                        ar_cell(r),
                        opt(r.alpha1, 3),
                        opt(r.lr_statistic, 3),
                        opt(r.p_value, 4),
                        if r.reject {
                            "reject".into()
                        } else {
                            r.error.clone().unwrap_or_default()
                        },
                    ]
                })
                .collect();
            layout(&["series", "cluster", "AR(1)", "alpha1", "LR", "p-value", "H0"], &cells)
        }
        Report::SizePower(records) => {
            let pm = |p: Option<f64>, se: Option<f64>| match (p, se) {
                (Some(p), Some(se)) => format!("{} ({})", fixed(p, 3), fixed(se, 3)),
                _ => "-".into(),
            };
            let rows: Vec<_> = records
                .iter()
                .map(|r| {
                    vec![
                        r.scenario.clone(),
                        r.replications.to_string(),
                        pm(r.np_power, r.np_power_se),
                        pm(r.param_power, r.param_power_se),
                        pm(r.np_size, r.np_size_se),
                        pm(r.param_size, r.param_size_se),
                        r.errors.to_string(),
                        if r.valid { String::new() } else { "invalid".into() },
                    ]
                })
                .collect();
            layout(
                &[
                    "scenario", "reps", "np power", "LR power", "np size", "LR size", "errors", "",
                ],
                &rows,
            )
        }
    }
}

fn csv_text(report: &Report) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match report {
        Report::Fit(f) => {
            w.write_record(["series", "cluster", "lambda", "phi_i", "alpha0", "alpha1", "phi_hat"])?;
            for s in &f.series {
                let c = f.clusters.iter().find(|c| c.cluster == s.cluster);
                w.write_record([
                    s.series.clone(),
                    s.cluster.clone(),
                    s.lambda.to_string(),
                    opt_raw(s.phi),
                    opt_raw(c.map(|c| c.alpha0)),
                    opt_raw(c.map(|c| c.alpha1)),
                    f.phi_hat.to_string(),
                ])?;
            }
        }
        Report::Test(t) => {
            w.write_record([
                "cluster",
                "size",
                "alpha0",
                "alpha1",
                "ci_lower",
                "ci_upper",
                "reject",
                "phi_hat",
                "corrected_level",
            ])?;
            for c in &t.clusters {
                w.write_record([
                    c.cluster.clone(),
                    c.size.to_string(),
                    c.alpha0.to_string(),
                    c.alpha1.to_string(),
                    c.ci_lower.to_string(),
                    c.ci_upper.to_string(),
                    c.reject.to_string(),
                    t.phi_hat.to_string(),
                    t.corrected_level.to_string(),
                ])?;
            }
        }
        Report::Baseline(rows) => {
            w.write_record([
                "series",
                "cluster",
                "ar_phi",
                "nonstationary",
                "alpha0",
                "alpha1",
                "lr_statistic",
                "p_value",
                "reject",
                "error",
            ])?;
            for r in rows {
                w.write_record([
                    r.series.clone(),
                    r.cluster.clone(),
                    opt_raw(r.ar_phi),
                    r.nonstationary.to_string(),
                    opt_raw(r.alpha0),
                    opt_raw(r.alpha1),
                    opt_raw(r.lr_statistic),
                    opt_raw(r.p_value),
                    r.reject.to_string(),
                    r.error.clone().unwrap_or_default(),
                ])?;
            }
        }
        Report::SizePower(records) => {
            w.write_record([
                "scenario",
                "replications",
                "np_power",
                "np_power_se",
                "np_size",
                "np_size_se",
                "param_power",
                "param_power_se",
                "param_size",
                "param_size_se",
                "np_reject_rate_per_cluster",
                "errors",
                "valid",
            ])?;
            for r in records {
                let per_cluster = r
                    .np_reject_rate_per_cluster
                    .iter()
                    .map(f64::to_string)
                    .collect::<Vec<_>>()
                    .join(";");
                w.write_record([
                    r.scenario.clone(),
                    r.replications.to_string(),
                    opt_raw(r.np_power),
                    opt_raw(r.np_power_se),
                    opt_raw(r.np_size),
                    opt_raw(r.np_size_se),
                    opt_raw(r.param_power),
                    opt_raw(r.param_power_se),
                    opt_raw(r.param_size),
                    opt_raw(r.param_size_se),
                    per_cluster,
                    r.errors.to_string(),
                    r.valid.to_string(),
                ])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}
