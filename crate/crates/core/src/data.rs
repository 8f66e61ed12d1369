//! CSV ingestion, chronological splits, train-fitted standardization and
//! sliding windows.

use std::cmp::Ordering;
use std::fs::File;
use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};
use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A multivariate series: one timestamp column plus `N` numeric variates.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub timestamps: Vec<String>,
    /// Row-major `[len, N]`.
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(columns: Vec<String>, timestamps: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Data("dataset has no variate columns".into()));
        }
        if values.len() != timestamps.len() * columns.len() {
            return Err(Error::Data(format!(
                "{} values for {} rows x {} columns",
                values.len(),
                timestamps.len(),
                columns.len()
            )));
        }
        Ok(Dataset {
            columns,
            timestamps,
            values,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn value(&self, t: usize, var: usize) -> f64 {
        self.values[t * self.n_vars() + var]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let n = self.n_vars();
        &self.values[t * n..(t + 1) * n]
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(File::create(path)?);
        writeln!(f, "date,{}", self.columns.join(","))?;
        for t in 0..self.len() {
            write!(f, "{}", self.timestamps[t])?;
            for v in self.row(t) {
                write!(f, ",{v}")?;
            }
            writeln!(f)?;
        }
        f.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SplitRatio {
    #[default]
    #[serde(rename = "6:2:2")]
    SixTwoTwo,
    #[serde(rename = "7:1:2")]
    SevenOneTwo,
}

impl SplitRatio {
    fn fractions(self) -> (f64, f64) {
        match self {
            SplitRatio::SixTwoTwo => (0.6, 0.2),
            SplitRatio::SevenOneTwo => (0.7, 0.1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Chronologically contiguous, disjoint split ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitBounds {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl SplitBounds {
    pub fn new(len: usize, ratio: SplitRatio) -> Self {
        let (ft, fv) = ratio.fractions();
        let n_train = (len as f64 * ft).floor() as usize;
        let n_val = (len as f64 * fv).floor() as usize;
        SplitBounds {
            train: 0..n_train,
            val: n_train..n_train + n_val,
            test: n_train + n_val..len,
        }
    }

    pub fn range(&self, split: Split) -> Range<usize> {
        match split {
            Split::Train => self.train.clone(),
            Split::Val => self.val.clone(),
            Split::Test => self.test.clone(),
        }
    }
}

/// Ingestion settings for a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub path: PathBuf,
    /// Variate columns to keep; all numeric columns when `None`.
    pub columns: Option<Vec<String>>,
    pub split: SplitRatio,
    /// Forward-fill missing cells instead of rejecting them.
    pub fill_missing: bool,
    /// Stable-sort rows by timestamp when they are out of order.
    pub sort_timestamps: bool,
    /// Keep only the first `max_rows` rows.
    pub max_rows: Option<usize>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            path: PathBuf::new(),
            columns: None,
            split: SplitRatio::SixTwoTwo,
            fill_missing: false,
            sort_timestamps: false,
            max_rows: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, PartialOrd)]
enum TimeKey {
    Instant(NaiveDateTime),
    Number(f64),
    Text(String),
}

fn parse_time_key(s: &str) -> TimeKey {
    const FORMATS: [&str; 5] = [
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
        "%Y-%m-%dT%H:%M:%S",
        "%Y/%m/%d %H:%M:%S",
        "%Y/%m/%d %H:%M",
    ];
    let s = s.trim();
    for f in FORMATS {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, f) {
            return TimeKey::Instant(t);
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return TimeKey::Instant(d.and_hms_opt(0, 0, 0).expect("midnight"));
    }
    if let Ok(v) = s.parse::<f64>() {
        return TimeKey::Number(v);
    }
    TimeKey::Text(s.to_string())
}

fn compare_keys(a: &TimeKey, b: &TimeKey) -> Ordering {
    match (a, b) {
        (TimeKey::Instant(x), TimeKey::Instant(y)) => x.cmp(y),
        (TimeKey::Number(x), TimeKey::Number(y)) => x.total_cmp(y),
        _ => format!("{a:?}").cmp(&format!("{b:?}")),
    }
}

fn is_missing(field: &str) -> bool {
    matches!(
        field.trim().to_ascii_lowercase().as_str(),
        "" | "nan" | "na" | "null" | "none"
    )
}

/// Reads a CSV with a header row, a leading timestamp column and numeric
/// variate columns.
pub fn load_csv(spec: &DatasetSpec) -> Result<Dataset> {
    let path = &spec.path;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 2 {
        return Err(Error::Data(format!(
            "{}: need a timestamp column and at least one variate",
            path.display()
        )));
    }
    let selected: Vec<usize> = match &spec.columns {
        None => (1..header.len()).collect(),
        Some(names) => names
            .iter()
            .map(|name| {
                header
                    .iter()
                    .skip(1)
                    .position(|h| h == name)
                    .map(|p| p + 1)
                    .ok_or_else(|| Error::Data(format!("{}: no column named `{name}`", path.display())))
            })
            .collect::<Result<_>>()?,
    };
    if selected.is_empty() {
        return Err(Error::Data(format!("{}: no variate columns selected", path.display())));
    }

    let n = selected.len();
    let mut timestamps = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        if spec.max_rows.is_some_and(|m| timestamps.len() >= m) {
            break;
        }
        // Header is line 1.
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            path: path.clone(),
            row,
            column: "*".into(),
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                path: path.clone(),
                row,
                column: "*".into(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        timestamps.push(record[0].to_string());
        for &c in &selected {
            let field = &record[c];
            let value = if is_missing(field) {
                if !spec.fill_missing {
                    return Err(Error::Parse {
                        path: path.clone(),
                        row,
                        column: header[c].clone(),
                        message: "missing value (enable fill_missing to forward-fill)".into(),
                    });
                }
                match values.len().checked_sub(n) {
                    Some(prev) => values[prev],
                    None => {
                        return Err(Error::Parse {
                            path: path.clone(),
                            row,
                            column: header[c].clone(),
                            message: "missing value in first row cannot be forward-filled".into(),
                        })
                    }
                }
            } else {
                field.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.clone(),
                    row,
                    column: header[c].clone(),
                    message: format!("`{field}`: {e}"),
                })?
            };
            values.push(value);
        }
    }
    if timestamps.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }

    let keys: Vec<TimeKey> = timestamps.iter().map(|t| parse_time_key(t)).collect();
    let ordered = keys
        .windows(2)
        .all(|w| compare_keys(&w[0], &w[1]) != Ordering::Greater);
    let columns: Vec<String> = selected.iter().map(|&c| header[c].clone()).collect();
    if ordered {
        return Dataset::new(columns, timestamps, values);
    }
    if !spec.sort_timestamps {
        warn!(
            "{}: timestamps are not monotonic; rows kept in file order (set sort_timestamps to reorder)",
            path.display()
        );
        return Dataset::new(columns, timestamps, values);
    }
    warn!("{}: timestamps are not monotonic; stable-sorting rows", path.display());
    let mut order: Vec<usize> = (0..timestamps.len()).collect();
    order.sort_by(|&a, &b| compare_keys(&keys[a], &keys[b]));
    let sorted_ts = order.iter().map(|&i| timestamps[i].clone()).collect();
    let sorted_vals = order
        .iter()
        .flat_map(|&i| values[i * n..(i + 1) * n].iter().copied())
        .collect();
    Dataset::new(columns, sorted_ts, sorted_vals)
}

/// Per-variate standardization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Fits on `rows` of `data` only. Population std; constant variates get
    /// std 1.
    pub fn fit(data: &Dataset, rows: Range<usize>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Data("cannot fit scaler on an empty split".into()));
        }
        let n = data.n_vars();
        let count = rows.len() as f64;
        let mut mean = vec![0.0; n];
        for t in rows.clone() {
            for (m, v) in mean.iter_mut().zip(data.row(t)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        let mut var = vec![0.0; n];
        for t in rows {
            for ((s, v), m) in var.iter_mut().zip(data.row(t)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / count).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Scaler { mean, std })
    }

    pub fn transform(&self, var: usize, v: f64) -> f64 {
        (v - self.mean[var]) / self.std[var]
    }

    pub fn inverse(&self, var: usize, v: f64) -> f64 {
        v * self.std[var] + self.mean[var]
    }

    /// Inverse-transforms a `[.., N, F]` tensor.
    pub fn inverse_tensor(&self, t: &Tensor) -> Result<Tensor> {
        let shape = t.shape();
        if shape.len() < 2 || shape[shape.len() - 2] != self.mean.len() {
            return Err(Error::shape("scaler.inverse", shape, &[self.mean.len(), 0]));
        }
        let f = shape[shape.len() - 1];
        let n = self.mean.len();
        let mut out = t.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            let var = (i / f) % n;
            *v = self.inverse(var, *v);
        }
        Ok(out)
    }
}

/// One `(input, target)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    /// `[N, L]`.
    pub input: Tensor,
    /// `[N, F]`.
    pub target: Tensor,
    /// Absolute row index of the first input step.
    pub origin: usize,
}

/// Stride-1 windows over one standardized split.
#[derive(Debug, Clone)]
pub struct WindowSet {
    /// Variate-major `[N, seg_len]`.
    segment: Vec<f64>,
    n_vars: usize,
    seg_len: usize,
    origin: usize,
    pub lookback: usize,
    pub horizon: usize,
}

/// Number of stride-1 windows of `lookback + horizon` steps in `split_len`.
pub fn window_count(split_len: usize, lookback: usize, horizon: usize) -> Result<usize> {
    let need = lookback + horizon;
    if split_len < need {
        return Err(Error::Data(format!(
            "split of length {split_len} is shorter than the required L + F = {need}"
        )));
    }
    Ok(split_len - need + 1)
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.seg_len - self.lookback - self.horizon + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn sample(&self, i: usize) -> Result<WindowSample> {
        let (x, y) = self.batch(&[i])?;
        Ok(WindowSample {
            input: x.reshape(&[self.n_vars, self.lookback])?,
            target: y.reshape(&[self.n_vars, self.horizon])?,
            origin: self.origin + i,
        })
    }

    /// `([B, N, L], [B, N, F])` for the given window indices.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Tensor)> {
        let (n, l, f) = (self.n_vars, self.lookback, self.horizon);
        let mut xs = Vec::with_capacity(indices.len() * n * l);
        let mut ys = Vec::with_capacity(indices.len() * n * f);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::OutOfRange {
                    op: "window",
                    detail: format!("window {i} of {}", self.len()),
                });
            }
            for v in 0..n {
                let row = &self.segment[v * self.seg_len..(v + 1) * self.seg_len];
                xs.extend_from_slice(&row[i..i + l]);
                ys.extend_from_slice(&row[i + l..i + l + f]);
            }
        }
        Ok((
            Tensor::new(&[indices.len(), n, l], xs)?,
            Tensor::new(&[indices.len(), n, f], ys)?,
        ))
    }
}

/// A dataset with split bounds and train-fitted scaler applied.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub dataset: Dataset,
    pub bounds: SplitBounds,
    pub scaler: Scaler,
}

impl PreparedData {
    pub fn new(dataset: Dataset, ratio: SplitRatio) -> Result<Self> {
        let bounds = SplitBounds::new(dataset.len(), ratio);
        if bounds.train.is_empty() || bounds.val.is_empty() || bounds.test.is_empty() {
            return Err(Error::Data(format!(
                "{} rows give an empty split under {ratio:?}",
                dataset.len()
            )));
        }
        let scaler = Scaler::fit(&dataset, bounds.train.clone())?;
        Ok(PreparedData {
            dataset,
            bounds,
            scaler,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.dataset.n_vars()
    }

    pub fn windows(&self, split: Split, lookback: usize, horizon: usize) -> Result<WindowSet> {
        let range = self.bounds.range(split);
        window_count(range.len(), lookback, horizon)?;
        let n = self.n_vars();
        let seg_len = range.len();
        let mut segment = vec![0.0; n * seg_len];
        for (j, t) in range.clone().enumerate() {
            for v in 0..n {
                segment[v * seg_len + j] = self.scaler.transform(v, self.dataset.value(t, v));
            }
        }
        Ok(WindowSet {
            segment,
            n_vars: n,
            seg_len,
            origin: range.start,
            lookback,
            horizon,
        })
    }
}

/// All windows of one split as owned samples.
pub fn make_windows(data: &PreparedData, split: Split, lookback: usize, horizon: usize) -> Result<Vec<WindowSample>> {
    let set = data.windows(split, lookback, horizon)?;
    (0..set.len()).map(|i| set.sample(i)).collect()
}

/// Deterministic synthetic series.
pub mod synth {
    use super::*;

    /// Hourly timestamps starting 2016-07-01 00:00:00.
    pub fn hourly_timestamps(len: usize) -> Vec<String> {
        let start = NaiveDate::from_ymd_opt(2016, 7, 1)
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .expect("valid start");
        (0..len)
            .map(|h| (start + chrono::Duration::hours(h as i64)).format("%Y-%m-%d %H:%M:%S").to_string())
            .collect()
    }

    /// Each variate is `a sin(2 pi t / p1 + phase) + b sin(2 pi t / p2 + phase')`
    /// plus Gaussian noise, with amplitudes and phases drawn from `seed`.
    pub fn sine_mixture(len: usize, n_vars: usize, periods: [f64; 2], noise: f64, seed: u64) -> Result<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise).map_err(|e| Error::Config(e.to_string()))?;
        let params: Vec<[f64; 4]> = (0..n_vars)
            .map(|_| {
                use rand::Rng;
                [
                    rng.random_range(0.5..1.5),
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(0.5..1.5),
                    rng.random_range(0.0..std::f64::consts::TAU),
                ]
            })
            .collect();
        let mut values = Vec::with_capacity(len * n_vars);
        for t in 0..len {
            let tf = t as f64;
            for p in &params {
                let clean = p[0] * (std::f64::consts::TAU * tf / periods[0] + p[1]).sin()
                    + p[2] * (std::f64::consts::TAU * tf / periods[1] + p[3]).sin();
                values.push(clean + normal.sample(&mut rng));
            }
        }
        let columns = (0..n_vars).map(|i| format!("var{i}")).collect();
        Dataset::new(columns, hourly_timestamps(len), values)
    }

    /// Linear trends with per-variate slope and intercept plus noise.
    pub fn linear_trend(len: usize, n_vars: usize, noise: f64, seed: u64) -> Result<Dataset> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise).map_err(|e| Error::Config(e.to_string()))?;
        let coefs: Vec<(f64, f64)> = (0..n_vars)
            .map(|_| (rng.random_range(-0.01..0.01), rng.random_range(-1.0..1.0)))
            .collect();
        let mut values = Vec::with_capacity(len * n_vars);
        for t in 0..len {
            for (slope, icpt) in &coefs {
                values.push(icpt + slope * t as f64 + normal.sample(&mut rng));
            }
        }
        let columns = (0..n_vars).map(|i| format!("var{i}")).collect();
        Dataset::new(columns, hourly_timestamps(len), values)
    }

    /// Seven-variate hourly series with the ETT column layout.
    pub fn ett_like(len: usize, seed: u64) -> Result<Dataset> {
        let mut d = sine_mixture(len, 7, [24.0, 168.0], 0.2, seed)?;
        d.columns = ["HUFL", "HULL", "MUFL", "MULL", "LUFL", "LULL", "OT"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for (i, v) in d.values_mut().iter_mut().enumerate() {
            *v = *v * 3.0 + 10.0 + (i % 7) as f64;
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    fn spec(path: PathBuf) -> DatasetSpec {
        DatasetSpec {
            path,
            ..DatasetSpec::default()
        }
    }

    #[test]
    fn toy_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "date,a,b\n2020-01-01,1,2\n2020-01-02,3,4\n2020-01-03,5,6\n");
        let d = load_csv(&spec(p)).unwrap();
        assert_eq!((d.n_vars(), d.len()), (2, 3));
        assert_eq!(d.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn parse_error_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "date,a,b\n1,1,2\n2,x,4\n");
        let err = load_csv(&spec(p)).unwrap_err().to_string();
        assert!(err.contains("row 3") && err.contains("column a"), "{err}");
    }

    #[test]
    fn missing_values_rejected_or_filled() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "date,a,b\n1,1,2\n2,,4\n3,5,NaN\n");
        assert!(load_csv(&spec(p.clone())).is_err());
        let mut s = spec(p);
        s.fill_missing = true;
        let d = load_csv(&s).unwrap();
        assert_eq!(d.row(1), &[1.0, 4.0]);
        assert_eq!(d.row(2), &[5.0, 4.0]);
    }

    #[test]
    fn column_selection_and_row_limit() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "date,a,b,c\n1,1,2,3\n2,4,5,6\n3,7,8,9\n");
        let mut s = spec(p);
        s.columns = Some(vec!["c".into(), "a".into()]);
        s.max_rows = Some(2);
        let d = load_csv(&s).unwrap();
        assert_eq!(d.columns, vec!["c", "a"]);
        assert_eq!(d.len(), 2);
        assert_eq!(d.row(1), &[6.0, 4.0]);
        s.columns = Some(vec!["zzz".into()]);
        assert!(load_csv(&s).is_err());
    }

    #[test]
    fn window_counts() {
        assert_eq!(window_count(10, 4, 2).unwrap(), 5);
        assert_eq!(window_count(6, 4, 2).unwrap(), 1);
        let err = window_count(5, 4, 2).unwrap_err().to_string();
        assert!(err.contains('6'), "{err}");
    }

    #[test]
    fn split_bounds_are_contiguous() {
        let b = SplitBounds::new(100, SplitRatio::SixTwoTwo);
        assert_eq!((b.train, b.val, b.test), (0..60, 60..80, 80..100));
        let b = SplitBounds::new(100, SplitRatio::SevenOneTwo);
        assert_eq!((b.train, b.val, b.test), (0..70, 70..80, 80..100));
    }

    #[test]
    fn windows_follow_each_other() {
        let d = synth::linear_trend(50, 2, 0.0, 1).unwrap();
        let p = PreparedData::new(d, SplitRatio::SixTwoTwo).unwrap();
        let w = make_windows(&p, Split::Train, 8, 4).unwrap();
        assert_eq!(w.len(), 30 - 12 + 1);
        let s = &w[3];
        assert_eq!(s.origin, 3);
        assert_eq!(s.input.shape(), &[2, 8]);
        assert_eq!(s.target.shape(), &[2, 4]);
        for v in 0..2 {
            let expect = p.scaler.transform(v, p.dataset.value(11, v));
            assert_eq!(s.input.get(&[v, 7]).unwrap(), p.scaler.transform(v, p.dataset.value(10, v)));
            assert_eq!(s.target.get(&[v, 0]).unwrap(), expect);
        }
        let test = make_windows(&p, Split::Test, 4, 2).unwrap();
        assert_eq!(test[0].origin, 40);
    }

    #[test]
    fn synthetic_generators_are_deterministic() {
        let a = synth::sine_mixture(100, 2, [24.0, 96.0], 0.1, 5).unwrap();
        let b = synth::sine_mixture(100, 2, [24.0, 96.0], 0.1, 5).unwrap();
        let c = synth::sine_mixture(100, 2, [24.0, 96.0], 0.1, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(synth::ett_like(10, 1).unwrap().n_vars(), 7);
    }
}
