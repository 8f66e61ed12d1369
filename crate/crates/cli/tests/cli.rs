use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use timetk_cli::report::{AblationReport, ForecastReport, GradcheckReport, TABLE_COLUMNS};
use timetk_core::Variant;

const SMALL: &str = r#"
horizons = [8]
report_format = "csv-table"

[data]
length = 400

[model]
lookback = 16
heads = 2
rbf_k = 4

[train]
max_epochs = 2
batch_size = 16

[ablation]
seeds = [1]
"#;

fn timetk(args: &[&str], dir: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_timetk"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("spawn timetk");
    assert!(
        out.status.code().is_some(),
        "killed by signal: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    fs::write(&path, SMALL).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn gradcheck_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = timetk(&["gradcheck", "--variant", "full"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("gradcheck/report.json")).unwrap();
    let report: GradcheckReport = serde_json::from_str(&text).unwrap();
    assert!(report.passed);
    assert!(report.max_rel_err < 1e-4);
    assert!(report.results.iter().all(|r| r.variant == Variant::Full));
}

#[test]
fn train_is_byte_reproducible_and_eval_reads_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let first = timetk(&["train", "--config", &cfg], dir.path());
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let report_a = fs::read(dir.path().join("train/report.json")).unwrap();
    let table_a = fs::read(dir.path().join("train/table.csv")).unwrap();
    let ckpt_a = fs::read(dir.path().join("train/checkpoints/full-h8.json")).unwrap();

    assert_eq!(timetk(&["train", "--config", &cfg], dir.path()).status.code(), Some(0));
    assert_eq!(report_a, fs::read(dir.path().join("train/report.json")).unwrap());
    assert_eq!(table_a, fs::read(dir.path().join("train/table.csv")).unwrap());
    assert_eq!(ckpt_a, fs::read(dir.path().join("train/checkpoints/full-h8.json")).unwrap());

    let report: ForecastReport = serde_json::from_slice(&report_a).unwrap();
    report.check().unwrap();
    assert_eq!(report.runs.len(), 1);
    assert_eq!(report.dataset.n_vars, 2);

    let eval = timetk(&["eval", "--config", &cfg], dir.path());
    assert_eq!(eval.status.code(), Some(0), "{}", String::from_utf8_lossy(&eval.stderr));
    let text = fs::read_to_string(dir.path().join("eval/report.json")).unwrap();
    let evaluated: ForecastReport = serde_json::from_str(&text).unwrap();
    // Same weights, same test windows.
    assert_eq!(evaluated.runs[0].test, report.runs[0].test);
    assert!(evaluated.runs[0].train.is_none());
}

#[test]
fn ablate_has_one_row_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = timetk(&["ablate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let mut rdr = csv::Reader::from_path(dir.path().join("ablate/table.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), TABLE_COLUMNS);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), Variant::ALL.len());
    for (row, v) in rows.iter().zip(Variant::ALL) {
        assert_eq!(&row[1], v.as_str());
        assert!(row[4].parse::<f64>().unwrap().is_finite());
    }

    let text = fs::read_to_string(dir.path().join("ablate/report.json")).unwrap();
    let report: AblationReport = serde_json::from_str(&text).unwrap();
    report.report.check().unwrap();
    assert_eq!(report.summary.len(), Variant::ALL.len());
    assert!(dir.path().join("ablate/timing.json").exists());
}

#[test]
fn synth_is_deterministic_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        assert_eq!(timetk(&["synth", "--seed", "5"], dir).status.code(), Some(0));
    }
    for name in ["sine-mixture.csv", "linear-trend.csv", "ett-like.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let c = tempfile::tempdir().unwrap();
    timetk(&["synth", "--seed", "6"], c.path());
    assert_ne!(
        fs::read(a.path().join("sine-mixture.csv")).unwrap(),
        fs::read(c.path().join("sine-mixture.csv")).unwrap()
    );
}

#[test]
fn csv_source_trains_on_written_file() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(timetk(&["synth", "--seed", "1"], dir.path()).status.code(), Some(0));
    let cfg = dir.path().join("csv.toml");
    fs::write(
        &cfg,
        r#"
horizons = [8]
[data]
source = "csv"
path = "ett-like.csv"
[model]
lookback = 16
heads = 2
[train]
max_epochs = 1
"#,
    )
    .unwrap();
    let out = timetk(&["train", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("train/report.json")).unwrap();
    let report: ForecastReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.dataset.n_vars, 7);
    assert_eq!(report.dataset.columns[6], "OT");
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "horizons = [8]\nunknown_key = 1\n").unwrap();
    assert_eq!(timetk(&["train", "--config", bad.to_str().unwrap()], dir.path()).status.code(), Some(2));

    let missing = dir.path().join("missing.toml");
    fs::write(&missing, "[data]\nsource = \"csv\"\npath = \"nope.csv\"\n").unwrap();
    assert_eq!(
        timetk(&["train", "--config", missing.to_str().unwrap()], dir.path()).status.code(),
        Some(3)
    );

    // No checkpoint to evaluate.
    let cfg = small_config(dir.path());
    assert_eq!(timetk(&["eval", "--config", &cfg], dir.path()).status.code(), Some(3));
}
