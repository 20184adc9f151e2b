//! Trial records, aggregates, and report files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::consistency::TrainingMode;
use crate::error::{Error, Result};

/// Rounds to 6 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

/// Shortest decimal form of `round_sig(x)`.
pub fn fmt_sig(x: f64) -> String {
    round_sig(x).to_string()
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = match dir {
        Some(d) => d.join(&tmp_name),
        None => PathBuf::from(&tmp_name),
    };
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Which sweep axis a trial belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "sweep", content = "value")]
pub enum Setting {
    None,
    UnlabeledFraction(f64),
    LabeledSize(usize),
}

impl Setting {
    fn columns(&self) -> (&'static str, String) {
        match self {
            Setting::None => ("", String::new()),
            Setting::UnlabeledFraction(f) => ("unlabeled_fraction", fmt_sig(*f)),
            Setting::LabeledSize(n) => ("labeled_size", n.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub setting: Setting,
    pub subset_seed: u64,
    pub mode: TrainingMode,
    pub metric: String,
    /// Rounded to 6 significant digits, as reported.
    pub value: f64,
    /// Additional metrics, in a fixed order per task.
    pub secondary: Vec<(String, f64)>,
    /// Not written to report files.
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub setting: Setting,
    pub mode: TrainingMode,
    pub metric: String,
    pub trials: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Mean, min and max of `values`; the mean is rounded like trial values.
pub fn summarize(values: &[f64]) -> (f64, f64, f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (round_sig(mean), min, max)
}

/// Groups trials by (setting, mode) in first-seen order.
pub fn aggregate(trials: &[TrialResult]) -> Vec<Aggregate> {
    let mut keys: Vec<(Setting, TrainingMode)> = Vec::new();
    for t in trials {
        if !keys.contains(&(t.setting, t.mode)) {
            keys.push((t.setting, t.mode));
        }
    }
    keys.into_iter()
        .map(|(setting, mode)| {
            let group: Vec<&TrialResult> = trials
                .iter()
                .filter(|t| t.setting == setting && t.mode == mode)
                .collect();
            let values: Vec<f64> = group.iter().map(|t| t.value).collect();
            let (mean, min, max) = summarize(&values);
            Aggregate {
                setting,
                mode,
                metric: group[0].metric.clone(),
                trials: group.len(),
                mean,
                min,
                max,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub trials: Vec<TrialResult>,
    pub aggregates: Vec<Aggregate>,
    /// Config echo.
    pub config: serde_json::Value,
    /// True when the trials come from a sweep.
    pub sweep: bool,
}

impl RunReport {
    pub fn new(trials: Vec<TrialResult>, config: serde_json::Value, sweep: bool) -> Self {
        let aggregates = aggregate(&trials);
        RunReport {
            trials,
            aggregates,
            config,
            sweep,
        }
    }

    pub fn aggregate_for(&self, mode: TrainingMode) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.mode == mode)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::data(format!("csv: {e}"))
}

pub fn trials_csv(report: &RunReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "sweep".to_owned(),
        "setting".into(),
        "subset_seed".into(),
        "mode".into(),
        "metric".into(),
        "value".into(),
    ];
    if let Some(first) = report.trials.first() {
        header.extend(first.secondary.iter().map(|(k, _)| k.clone()));
    }
    w.write_record(&header).map_err(csv_err)?;
    for t in &report.trials {
        let (sweep, setting) = t.setting.columns();
        let mut row = vec![
            sweep.to_owned(),
            setting,
            t.subset_seed.to_string(),
            t.mode.name().to_owned(),
            t.metric.clone(),
            fmt_sig(t.value),
        ];
        row.extend(t.secondary.iter().map(|(_, v)| fmt_sig(*v)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::data(format!("csv: {e}")))
}

pub fn curves_csv(report: &RunReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "sweep", "setting", "mode", "metric", "trials", "mean", "min", "max",
    ])
    .map_err(csv_err)?;
    for a in &report.aggregates {
        let (sweep, setting) = a.setting.columns();
        w.write_record([
            sweep.to_owned(),
            setting,
            a.mode.name().to_owned(),
            a.metric.clone(),
            a.trials.to_string(),
            fmt_sig(a.mean),
            fmt_sig(a.min),
            fmt_sig(a.max),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::data(format!("csv: {e}")))
}

pub fn summary_json(report: &RunReport) -> Result<Vec<u8>> {
    let value = serde_json::json!({
        "aggregates": report.aggregates,
        "config": report.config,
    });
    let mut bytes = serde_json::to_vec_pretty(&value).map_err(|e| Error::data(format!("json: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `trials.csv`, `summary.json` and, for sweeps, `curves.csv`.
/// Returns the paths written.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
        Ok(())
    };
    put("trials.csv", trials_csv(report)?)?;
    put("summary.json", summary_json(report)?)?;
    if report.sweep && !report.trials.is_empty() {
        put("curves.csv", curves_csv(report)?)?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(seed: u64, mode: TrainingMode, value: f64) -> TrialResult {
        TrialResult {
            setting: Setting::None,
            subset_seed: seed,
            mode,
            metric: "accuracy".into(),
            value,
            secondary: vec![("macro_f1".into(), value / 2.0)],
            wall_seconds: 1.0,
        }
    }

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(2.0 / 3.0), "0.666667");
        assert_eq!(fmt_sig(1.75), "1.75");
        assert_eq!(fmt_sig(123456789.0), "123457000");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(-1.0e-7 / 3.0), "-0.0000000333333");
    }

    #[test]
    fn two_trials_two_rows() {
        let r = RunReport::new(
            vec![
                trial(1, TrainingMode::Baseline, 0.5),
                trial(2, TrainingMode::Baseline, 0.75),
            ],
            serde_json::json!({}),
            false,
        );
        let csv = String::from_utf8(trials_csv(&r).unwrap()).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("sweep,setting,subset_seed,mode,metric,value,macro_f1\n"));
        let a = r.aggregate_for(TrainingMode::Baseline).unwrap();
        assert_eq!((a.mean, a.min, a.max, a.trials), (0.625, 0.5, 0.75, 2));
    }

    #[test]
    fn emit_overwrites_and_skips_curves() {
        let dir = tempfile::tempdir().unwrap();
        let r = RunReport::new(
            vec![trial(1, TrainingMode::Baseline, 0.5)],
            serde_json::json!({"a": 1}),
            false,
        );
        emit_report(&r, dir.path()).unwrap();
        let first = fs::read(dir.path().join("trials.csv")).unwrap();
        emit_report(&r, dir.path()).unwrap();
        assert_eq!(first, fs::read(dir.path().join("trials.csv")).unwrap());
        assert!(!dir.path().join("curves.csv").exists());
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());

        let empty = RunReport::new(vec![], serde_json::json!({}), true);
        let d2 = tempfile::tempdir().unwrap();
        emit_report(&empty, d2.path()).unwrap();
        assert!(!d2.path().join("curves.csv").exists());
    }
}
