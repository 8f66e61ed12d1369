//! Experiment configuration, read from TOML. Unknown keys anywhere are
//! rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use timetk_core::data::{synth, Dataset, DatasetSpec, SplitRatio};
use timetk_core::train::TrainSchedule;
use timetk_core::{Error, ModelConfig, Result, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    /// `report.json` only.
    #[default]
    Json,
    /// `report.json` plus a flat `table.csv`.
    CsvTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    Csv,
    #[default]
    SineMixture,
    LinearTrend,
    EttLike,
}

impl DataSource {
    pub fn as_str(self) -> &'static str {
        match self {
            DataSource::Csv => "csv",
            DataSource::SineMixture => "sine-mixture",
            DataSource::LinearTrend => "linear-trend",
            DataSource::EttLike => "ett-like",
        }
    }
}

/// Where the series comes from. CSV keys and synthetic keys share one table;
/// keys for the other kind of source are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// CSV path, relative to the config file's directory.
    pub path: Option<PathBuf>,
    pub columns: Option<Vec<String>>,
    pub split: SplitRatio,
    pub fill_missing: bool,
    pub sort_timestamps: bool,
    pub max_rows: Option<usize>,
    pub length: usize,
    pub n_vars: usize,
    pub noise: f64,
    pub periods: [f64; 2],
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: DataSource::SineMixture,
            path: None,
            columns: None,
            split: SplitRatio::SixTwoTwo,
            fill_missing: false,
            sort_timestamps: false,
            max_rows: None,
            length: 2000,
            n_vars: 2,
            noise: 0.1,
            periods: [24.0, 96.0],
            seed: 7,
        }
    }
}

impl DataConfig {
    /// Loads or generates the dataset. Relative CSV paths are resolved
    /// against `base_dir`.
    pub fn load(&self, base_dir: &Path) -> Result<Dataset> {
        match self.source {
            DataSource::Csv => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Config("data.source = \"csv\" needs data.path".into()))?;
                let path = if path.is_relative() { base_dir.join(path) } else { path.clone() };
                timetk_core::data::load_csv(&DatasetSpec {
                    path,
                    columns: self.columns.clone(),
                    split: self.split,
                    fill_missing: self.fill_missing,
                    sort_timestamps: self.sort_timestamps,
                    max_rows: self.max_rows,
                })
            }
            DataSource::SineMixture => synth::sine_mixture(self.length, self.n_vars, self.periods, self.noise, self.seed),
            DataSource::LinearTrend => synth::linear_trend(self.length, self.n_vars, self.noise, self.seed),
            DataSource::EttLike => synth::ett_like(self.length, self.seed),
        }
    }

    pub fn describe(&self) -> String {
        match (&self.source, &self.path) {
            (DataSource::Csv, Some(p)) => p.display().to_string(),
            (s, _) => format!("{}(seed={})", s.as_str(), self.seed),
        }
    }
}

/// Variant sweep for `ablate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            variants: Variant::ALL.to_vec(),
            seeds: vec![2024, 2025, 2026],
        }
    }
}

/// Small model dimensions for `gradcheck`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub n_vars: usize,
    pub lookback: usize,
    pub horizon: usize,
    pub offsets: usize,
    pub heads: usize,
    pub rbf_k: usize,
    pub batch: usize,
    pub seeds: u64,
    pub tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            n_vars: 3,
            lookback: 8,
            horizon: 4,
            offsets: 2,
            heads: 2,
            rbf_k: 4,
            batch: 2,
            seeds: 3,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    /// One run per horizon; each overrides `model.horizon`.
    pub horizons: Vec<usize>,
    /// Overrides `model.variant` when set.
    pub variant: Option<Variant>,
    pub report_format: ReportFormat,
    /// Compute metrics on the original data scale instead of the
    /// standardized one.
    pub raw_scale_metrics: bool,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainSchedule,
    pub ablation: AblationConfig,
    pub gradcheck: GradcheckConfig,
    /// Directory relative data paths are resolved against. Not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            output_dir: PathBuf::from("runs"),
            horizons: vec![96],
            variant: None,
            report_format: ReportFormat::Json,
            raw_scale_metrics: false,
            data: DataConfig::default(),
            model: ModelConfig {
                n_vars: 2,
                ..ModelConfig::default()
            },
            train: TrainSchedule::default(),
            ablation: AblationConfig::default(),
            gradcheck: GradcheckConfig::default(),
            base_dir: PathBuf::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn effective_variant(&self) -> Variant {
        self.variant.unwrap_or(self.model.variant)
    }

    /// Model config for one run.
    pub fn model_for(&self, horizon: usize, variant: Variant, seed: u64, n_vars: usize) -> ModelConfig {
        ModelConfig {
            horizon,
            variant,
            seed,
            n_vars,
            ..self.model.clone()
        }
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() {
            return Err(Error::Config("horizons must not be empty".into()));
        }
        if let Some(&h) = self.horizons.iter().find(|&&h| h == 0) {
            return Err(Error::Config(format!("horizon {h} must be positive")));
        }
        for &h in &self.horizons {
            self.model_for(h, self.effective_variant(), self.model.seed, self.model.n_vars)
                .validate()?;
        }
        self.train.validate()?;
        if self.ablation.variants.is_empty() || self.ablation.seeds.is_empty() {
            return Err(Error::Config("ablation needs at least one variant and one seed".into()));
        }
        let d = &self.data;
        if d.source != DataSource::Csv && (d.length == 0 || d.n_vars == 0) {
            return Err(Error::Config("synthetic data needs positive length and n_vars".into()));
        }
        if !(d.noise >= 0.0 && d.noise.is_finite()) || d.periods.iter().any(|p| *p <= 0.0) {
            return Err(Error::Config("synthetic noise must be >= 0 and periods > 0".into()));
        }
        if self.gradcheck.tolerance.is_nan() || self.gradcheck.tolerance <= 0.0 || self.gradcheck.seeds == 0 || self.gradcheck.batch == 0 {
            return Err(Error::Config("gradcheck needs tolerance > 0, seeds >= 1, batch >= 1".into()));
        }
        Ok(())
    }

    /// Command-line overrides. `seed` replaces every model/training seed and
    /// the ablation seed list.
    pub fn apply_overrides(
        &mut self,
        out: Option<PathBuf>,
        seed: Option<u64>,
        horizon: Option<usize>,
        variant: Option<Variant>,
    ) {
        if let Some(out) = out {
            self.output_dir = out;
        }
        if let Some(s) = seed {
            self.model.seed = s;
            self.train.seed = s;
            self.data.seed = s;
            self.ablation.seeds = vec![s];
        }
        if let Some(h) = horizon {
            self.horizons = vec![h];
        }
        if let Some(v) = variant {
            self.variant = Some(v);
        }
    }
}
