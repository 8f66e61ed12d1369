//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use timetk_core::checkpoint::{load_model, save_model};
use timetk_core::data::{synth, PreparedData, Scaler, Split, WindowSet};
use timetk_core::metrics::{metrics, Metrics};
use timetk_core::mote::SPLIT_SEMANTICS;
use timetk_core::train::{grad_check, predict_windows, train, TrainSchedule};
use timetk_core::{Error, ModelConfig, Result, Tensor, TimeTk, Variant};

use crate::config::{DataSource, ExperimentConfig, ReportFormat};
use crate::report::{
    write_ablation_table, write_json, write_table, AblationReport, AblationRow, Baselines, DatasetSummary,
    ForecastReport, GradcheckRecord, GradcheckReport, MetricScale, RunRecord, TimingEntry, TOOL_NAME,
    TOOL_VERSION,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;
pub const EXIT_CHECK_FAILED: i32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Train,
    Eval,
    Ablate,
    Gradcheck,
    Synth,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Ablate => "ablate",
            Command::Gradcheck => "gradcheck",
            Command::Synth => "synth",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    /// Main artifact written (report or output directory).
    pub artifact: PathBuf,
    /// False only when a gradient check failed.
    pub passed: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::ShapeMismatch { .. } | Error::InvalidShape { .. } | Error::OutOfRange { .. } => {
            EXIT_CONFIG
        }
        Error::Data(_) | Error::Parse { .. } | Error::Checkpoint(_) | Error::Io(_) => EXIT_DATA,
        Error::Divergence { .. } | Error::NonFinite { .. } => EXIT_DIVERGENCE,
        Error::Json(_) => EXIT_OTHER,
    }
}

pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    if command != Command::Synth {
        cfg.validate()?;
    }
    match command {
        Command::Train => run_train(cfg),
        Command::Eval => run_eval(cfg),
        Command::Ablate => run_ablate(cfg),
        Command::Gradcheck => run_gradcheck(cfg),
        Command::Synth => run_synth(cfg),
    }
}

fn command_dir(cfg: &ExperimentConfig, command: Command) -> Result<PathBuf> {
    let dir = cfg.output_dir.join(command.as_str());
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

pub struct Prepared {
    pub data: PreparedData,
    pub summary: DatasetSummary,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let dataset = cfg.data.load(&cfg.base_dir)?;
    let data = PreparedData::new(dataset, cfg.data.split)?;
    let b = &data.bounds;
    let summary = DatasetSummary {
        source: cfg.data.describe(),
        columns: data.dataset.columns.clone(),
        n_vars: data.n_vars(),
        rows: data.dataset.len(),
        train_rows: b.train.len(),
        val_rows: b.val.len(),
        test_rows: b.test.len(),
    };
    Ok(Prepared { data, summary })
}

fn split_windows(p: &PreparedData, split: Split, lookback: usize, horizon: usize) -> Result<WindowSet> {
    p.windows(split, lookback, horizon).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{split:?} split: {m}")),
        other => other,
    })
}

fn scale(cfg: &ExperimentConfig) -> MetricScale {
    if cfg.raw_scale_metrics {
        MetricScale::Raw
    } else {
        MetricScale::Standardized
    }
}

fn score(pred: &Tensor, target: &Tensor, scaler: &Scaler, scale: MetricScale) -> Result<Metrics> {
    match scale {
        MetricScale::Standardized => metrics(pred, target),
        MetricScale::Raw => metrics(&scaler.inverse_tensor(pred)?, &scaler.inverse_tensor(target)?),
    }
}

/// Repeat-last-value and window-mean forecasts on `windows`.
pub fn baseline_forecasts(windows: &WindowSet) -> Result<(Tensor, Tensor, Tensor)> {
    let idx: Vec<usize> = (0..windows.len()).collect();
    let (x, y) = windows.batch(&idx)?;
    let (l, f) = (windows.lookback, windows.horizon);
    let mut last = Vec::with_capacity(y.len());
    let mut mean = Vec::with_capacity(y.len());
    for row in x.data().chunks(l) {
        last.extend(std::iter::repeat_n(row[l - 1], f));
        mean.extend(std::iter::repeat_n(row.iter().sum::<f64>() / l as f64, f));
    }
    Ok((
        Tensor::new(y.shape(), last)?,
        Tensor::new(y.shape(), mean)?,
        y,
    ))
}

fn baselines(windows: &WindowSet, scaler: &Scaler, scale: MetricScale) -> Result<Baselines> {
    let (last, mean, target) = baseline_forecasts(windows)?;
    Ok(Baselines {
        repeat_last: score(&last, &target, scaler, scale)?,
        window_mean: score(&mean, &target, scaler, scale)?,
    })
}

fn evaluate(model: &TimeTk, test: &WindowSet, scaler: &Scaler, scale: MetricScale, batch: usize) -> Result<Metrics> {
    let (pred, target) = predict_windows(model, test, batch)?;
    score(&pred, &target, scaler, scale)
}

/// Trains one model on one horizon and scores it on the test split.
pub fn train_single(
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    model_cfg: ModelConfig,
    schedule: &TrainSchedule,
) -> Result<(TimeTk, RunRecord, f64)> {
    let p = &prepared.data;
    let (l, f) = (model_cfg.lookback, model_cfg.horizon);
    let tr = split_windows(p, Split::Train, l, f)?;
    let va = split_windows(p, Split::Val, l, f)?;
    let te = split_windows(p, Split::Test, l, f)?;
    let mut model = TimeTk::new(model_cfg.clone())?;
    info!(
        "training {} h={} seed={} ({} params, {} train windows)",
        model_cfg.variant,
        f,
        model_cfg.seed,
        model.parameter_count(),
        tr.len()
    );
    let report = train(&mut model, &tr, &va, schedule)?;
    let wall = report.wall_time_secs;
    let scale = scale(cfg);
    let record = RunRecord {
        horizon: f,
        variant: model_cfg.variant,
        seed: model_cfg.seed,
        parameter_count: model.parameter_count(),
        test: evaluate(&model, &te, &p.scaler, scale, schedule.batch_size)?,
        baselines: baselines(&te, &p.scaler, scale)?,
        train: Some(report),
        checkpoint: None,
    };
    Ok((model, record, wall))
}

fn forecast_report(cfg: &ExperimentConfig, command: Command, prepared: &Prepared, runs: Vec<RunRecord>) -> ForecastReport {
    ForecastReport {
        tool: TOOL_NAME.into(),
        tool_version: TOOL_VERSION.into(),
        command: command.as_str().into(),
        offsets: cfg.model.offsets,
        split_semantics: SPLIT_SEMANTICS.into(),
        metric_scale: scale(cfg),
        dataset: prepared.summary.clone(),
        config: cfg.clone(),
        runs,
    }
}

#[derive(Serialize)]
struct Timing<'a> {
    command: &'a str,
    total_wall_time_secs: f64,
    runs: Vec<TimingEntry>,
}

fn write_timing(dir: &Path, command: Command, start: Instant, runs: Vec<TimingEntry>) -> Result<()> {
    write_json(
        &dir.join("timing.json"),
        &Timing {
            command: command.as_str(),
            total_wall_time_secs: start.elapsed().as_secs_f64(),
            runs,
        },
    )
}

pub fn checkpoint_name(variant: Variant, horizon: usize) -> String {
    format!("checkpoints/{variant}-h{horizon}.json")
}

fn run_train(cfg: &ExperimentConfig) -> Result<Outcome> {
    let start = Instant::now();
    let prepared = prepare(cfg)?;
    let dir = command_dir(cfg, Command::Train)?;
    fs::create_dir_all(dir.join("checkpoints"))?;
    let variant = cfg.effective_variant();
    let mut runs = Vec::new();
    let mut timing = Vec::new();
    for &h in &cfg.horizons {
        let model_cfg = cfg.model_for(h, variant, cfg.model.seed, prepared.data.n_vars());
        let (model, mut record, wall) = train_single(cfg, &prepared, model_cfg, &cfg.train)?;
        let name = checkpoint_name(variant, h);
        save_model(&model, &dir.join(&name))?;
        record.checkpoint = Some(name);
        info!("h={h}: test mse {:.6} mae {:.6}", record.test.mse, record.test.mae);
        timing.push(TimingEntry {
            variant,
            horizon: h,
            seed: cfg.model.seed,
            wall_time_secs: wall,
        });
        runs.push(record);
    }
    let report = forecast_report(cfg, Command::Train, &prepared, runs);
    finish(cfg, &dir, &report)?;
    write_timing(&dir, Command::Train, start, timing)?;
    Ok(Outcome {
        artifact: dir.join("report.json"),
        passed: true,
    })
}

fn finish(cfg: &ExperimentConfig, dir: &Path, report: &ForecastReport) -> Result<()> {
    write_json(&dir.join("report.json"), report)?;
    if cfg.report_format == ReportFormat::CsvTable {
        write_table(&dir.join("table.csv"), report)?;
    }
    Ok(())
}

fn run_eval(cfg: &ExperimentConfig) -> Result<Outcome> {
    let prepared = prepare(cfg)?;
    let dir = command_dir(cfg, Command::Eval)?;
    let train_dir = cfg.output_dir.join(Command::Train.as_str());
    let variant = cfg.effective_variant();
    let scale = scale(cfg);
    let mut runs = Vec::new();
    for &h in &cfg.horizons {
        let name = checkpoint_name(variant, h);
        let path = train_dir.join(&name);
        if !path.exists() {
            return Err(Error::Checkpoint(format!(
                "no checkpoint at {} (run `train` first)",
                path.display()
            )));
        }
        let model = load_model(&path)?;
        let mc = model.config();
        if mc.n_vars != prepared.data.n_vars() || mc.horizon != h {
            return Err(Error::Checkpoint(format!(
                "{}: checkpoint has N={} F={}, data/config want N={} F={h}",
                path.display(),
                mc.n_vars,
                mc.horizon,
                prepared.data.n_vars()
            )));
        }
        let te = split_windows(&prepared.data, Split::Test, mc.lookback, h)?;
        runs.push(RunRecord {
            horizon: h,
            variant: mc.variant,
            seed: mc.seed,
            parameter_count: model.parameter_count(),
            test: evaluate(&model, &te, &prepared.data.scaler, scale, cfg.train.batch_size)?,
            baselines: baselines(&te, &prepared.data.scaler, scale)?,
            train: None,
            checkpoint: Some(format!("../train/{name}")),
        });
    }
    let report = forecast_report(cfg, Command::Eval, &prepared, runs);
    finish(cfg, &dir, &report)?;
    Ok(Outcome {
        artifact: dir.join("report.json"),
        passed: true,
    })
}

/// Trains every configured variant for every seed and horizon.
pub fn ablate(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<(AblationReport, Vec<TimingEntry>)> {
    let variants: Vec<Variant> = match cfg.variant {
        // A single requested variant is compared against the full model.
        Some(v) if v != Variant::Full => vec![Variant::Full, v],
        Some(v) => vec![v],
        None => cfg.ablation.variants.clone(),
    };
    let mut runs = Vec::new();
    let mut timing = Vec::new();
    let mut summary = Vec::new();
    for &h in &cfg.horizons {
        for &variant in &variants {
            let mut group = Vec::new();
            for &seed in &cfg.ablation.seeds {
                let model_cfg = cfg.model_for(h, variant, seed, prepared.data.n_vars());
                let schedule = TrainSchedule {
                    seed,
                    ..cfg.train.clone()
                };
                let (_, record, wall) = train_single(cfg, prepared, model_cfg, &schedule)?;
                timing.push(TimingEntry {
                    variant,
                    horizon: h,
                    seed,
                    wall_time_secs: wall,
                });
                group.push(record);
            }
            let k = group.len() as f64;
            summary.push(AblationRow {
                variant,
                horizon: h,
                seeds: cfg.ablation.seeds.clone(),
                mean_mse: group.iter().map(|r| r.test.mse).sum::<f64>() / k,
                mean_mae: group.iter().map(|r| r.test.mae).sum::<f64>() / k,
                parameter_count: group[0].parameter_count,
            });
            runs.extend(group);
        }
    }
    let report = AblationReport {
        report: forecast_report(cfg, Command::Ablate, prepared, runs),
        summary,
    };
    Ok((report, timing))
}

fn run_ablate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let start = Instant::now();
    let prepared = prepare(cfg)?;
    let dir = command_dir(cfg, Command::Ablate)?;
    let (report, timing) = ablate(cfg, &prepared)?;
    write_json(&dir.join("report.json"), &report)?;
    write_ablation_table(&dir.join("table.csv"), &report)?;
    write_timing(&dir, Command::Ablate, start, timing)?;
    for row in &report.summary {
        info!("{} h={}: mean test mse {:.6}", row.variant, row.horizon, row.mean_mse);
    }
    Ok(Outcome {
        artifact: dir.join("report.json"),
        passed: true,
    })
}

/// Finite-difference check of every requested variant on small random
/// models.
pub fn gradcheck(cfg: &ExperimentConfig) -> Result<GradcheckReport> {
    let g = &cfg.gradcheck;
    let variants = match cfg.variant {
        Some(v) => vec![v],
        None => Variant::ALL.to_vec(),
    };
    let mut results = Vec::new();
    for &variant in &variants {
        for seed in 0..g.seeds {
            let model_cfg = ModelConfig {
                n_vars: g.n_vars,
                lookback: g.lookback,
                horizon: g.horizon,
                offsets: g.offsets,
                heads: g.heads,
                rbf_k: g.rbf_k,
                variant,
                seed,
                dropout: 0.0,
                ..cfg.model.clone()
            };
            let model = TimeTk::new(model_cfg)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut random = |shape: &[usize]| -> Result<Tensor> {
                let n: usize = shape.iter().product();
                Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.5..1.5)).collect())
            };
            let x = random(&[g.batch, g.n_vars, g.lookback])?;
            let y = random(&[g.batch, g.n_vars, g.horizon])?;
            let check = grad_check(&model, &x, &y, g.tolerance)?;
            info!(
                "{variant} seed {seed}: max rel err {:.3e} over {} coordinates",
                check.max_rel_err, check.coordinates
            );
            results.push(GradcheckRecord { variant, seed, check });
        }
    }
    Ok(GradcheckReport {
        tool: TOOL_NAME.into(),
        tool_version: TOOL_VERSION.into(),
        command: Command::Gradcheck.as_str().into(),
        tolerance: g.tolerance,
        passed: results.iter().all(|r| r.check.passed),
        max_rel_err: results.iter().map(|r| r.check.max_rel_err).fold(0.0, f64::max),
        results,
    })
}

fn run_gradcheck(cfg: &ExperimentConfig) -> Result<Outcome> {
    let dir = command_dir(cfg, Command::Gradcheck)?;
    let report = gradcheck(cfg)?;
    write_json(&dir.join("report.json"), &report)?;
    Ok(Outcome {
        artifact: dir.join("report.json"),
        passed: report.passed,
    })
}

/// Writes the synthetic datasets into the output directory.
fn run_synth(cfg: &ExperimentConfig) -> Result<Outcome> {
    let d = &cfg.data;
    if d.length == 0 || d.n_vars == 0 {
        return Err(Error::Config("synth needs data.length and data.n_vars > 0".into()));
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let sets = [
        (DataSource::SineMixture, synth::sine_mixture(d.length, d.n_vars, d.periods, d.noise, d.seed)?),
        (DataSource::LinearTrend, synth::linear_trend(d.length, d.n_vars, d.noise, d.seed)?),
        (DataSource::EttLike, synth::ett_like(d.length, d.seed)?),
    ];
    for (kind, set) in &sets {
        let path = cfg.output_dir.join(format!("{}.csv", kind.as_str()));
        set.write_csv(&path)?;
        info!("wrote {} ({} rows x {} variates)", path.display(), set.len(), set.n_vars());
    }
    Ok(Outcome {
        artifact: cfg.output_dir.clone(),
        passed: true,
    })
}
