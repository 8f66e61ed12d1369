//! Report artifacts: `report.json`, `table.csv` and `timing.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use timetk_core::metrics::Metrics;
use timetk_core::train::{CheckReport, TrainReport};
use timetk_core::{Error, Result, Variant};

use crate::config::ExperimentConfig;

pub const TOOL_NAME: &str = "timetk";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricScale {
    Standardized,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSummary {
    pub source: String,
    pub columns: Vec<String>,
    pub n_vars: usize,
    pub rows: usize,
    pub train_rows: usize,
    pub val_rows: usize,
    pub test_rows: usize,
}

/// Reference forecasts evaluated on the same test windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Baselines {
    pub repeat_last: Metrics,
    pub window_mean: Metrics,
}

/// One trained (or evaluated) model at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub horizon: usize,
    pub variant: Variant,
    pub seed: u64,
    pub parameter_count: usize,
    pub test: Metrics,
    pub baselines: Baselines,
    /// Absent for `eval`.
    pub train: Option<TrainReport>,
    /// Path relative to the report directory.
    pub checkpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastReport {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    /// MOTE offset count `O`.
    pub offsets: usize,
    pub split_semantics: String,
    pub metric_scale: MetricScale,
    pub dataset: DatasetSummary,
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
}

impl ForecastReport {
    /// Structural checks beyond what deserialization enforces.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Data(format!("invalid report: {m}")));
        if self.tool != TOOL_NAME || self.tool_version.is_empty() {
            return bad("tool identity missing".into());
        }
        if self.runs.is_empty() {
            return bad("no runs".into());
        }
        if self.split_semantics.is_empty() || self.offsets == 0 {
            return bad("offset description missing".into());
        }
        for r in &self.runs {
            let m = &r.test;
            if ![m.mse, m.mae, m.rmse].iter().all(|v| v.is_finite() && *v >= 0.0) || m.count == 0 {
                return bad(format!("non-finite metrics for horizon {}", r.horizon));
            }
            if r.parameter_count == 0 {
                return bad("zero parameter count".into());
            }
        }
        Ok(())
    }
}

/// Per-variant summary for `ablate`, averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationRow {
    pub variant: Variant,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub mean_mse: f64,
    pub mean_mae: f64,
    pub parameter_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationReport {
    pub report: ForecastReport,
    pub summary: Vec<AblationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckRecord {
    pub variant: Variant,
    pub seed: u64,
    pub check: CheckReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckReport {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub tolerance: f64,
    pub passed: bool,
    pub max_rel_err: f64,
    pub results: Vec<GradcheckRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEntry {
    pub variant: Variant,
    pub horizon: usize,
    pub seed: u64,
    pub wall_time_secs: f64,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub const TABLE_COLUMNS: [&str; 14] = [
    "command",
    "variant",
    "horizon",
    "seeds",
    "mse",
    "mae",
    "rmse",
    "rse",
    "mape",
    "mape_excluded",
    "parameter_count",
    "best_epoch",
    "stopped_epoch",
    "metric_scale",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn scale_str(s: MetricScale) -> &'static str {
    match s {
        MetricScale::Standardized => "standardized",
        MetricScale::Raw => "raw",
    }
}

fn run_row(command: &str, scale: MetricScale, r: &RunRecord) -> Vec<String> {
    let m = &r.test;
    vec![
        command.into(),
        r.variant.to_string(),
        r.horizon.to_string(),
        r.seed.to_string(),
        m.mse.to_string(),
        m.mae.to_string(),
        m.rmse.to_string(),
        opt(m.rse),
        opt(m.mape),
        m.mape_excluded.to_string(),
        r.parameter_count.to_string(),
        r.train.as_ref().map(|t| t.best_epoch.to_string()).unwrap_or_default(),
        r.train.as_ref().map(|t| t.stopped_epoch.to_string()).unwrap_or_default(),
        scale_str(scale).into(),
    ]
}

fn write_rows(path: &Path, rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(e.to_string()))?;
    w.write_record(TABLE_COLUMNS).map_err(|e| Error::Data(e.to_string()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// One row per run.
pub fn write_table(path: &Path, report: &ForecastReport) -> Result<()> {
    write_rows(
        path,
        report
            .runs
            .iter()
            .map(|r| run_row(&report.command, report.metric_scale, r)),
    )
}

/// One row per (variant, horizon), metrics averaged over seeds. Same
/// columns as [`write_table`].
pub fn write_ablation_table(path: &Path, report: &AblationReport) -> Result<()> {
    let scale = report.report.metric_scale;
    let rows = report.summary.iter().map(|row| {
        let runs: Vec<&RunRecord> = report
            .report
            .runs
            .iter()
            .filter(|r| r.variant == row.variant && r.horizon == row.horizon)
            .collect();
        let mean = |f: &dyn Fn(&Metrics) -> Option<f64>| -> Option<f64> {
            let vals: Option<Vec<f64>> = runs.iter().map(|r| f(&r.test)).collect();
            vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
        };
        let seeds: Vec<String> = row.seeds.iter().map(u64::to_string).collect();
        let mean_usize = |f: &dyn Fn(&RunRecord) -> Option<usize>| -> String {
            let vals: Option<Vec<usize>> = runs.iter().map(|r| f(r)).collect();
            vals.map(|v| format!("{}", v.iter().sum::<usize>() as f64 / v.len() as f64))
                .unwrap_or_default()
        };
        vec![
            "ablate".to_string(),
            row.variant.to_string(),
            row.horizon.to_string(),
            seeds.join(";"),
            row.mean_mse.to_string(),
            row.mean_mae.to_string(),
            opt(mean(&|m| Some(m.rmse))),
            opt(mean(&|m| m.rse)),
            opt(mean(&|m| m.mape)),
            mean_usize(&|r| Some(r.test.mape_excluded)),
            row.parameter_count.to_string(),
            mean_usize(&|r| r.train.as_ref().map(|t| t.best_epoch)),
            mean_usize(&|r| r.train.as_ref().map(|t| t.stopped_epoch)),
            scale_str(scale).into(),
        ]
    });
    write_rows(path, rows)
}
