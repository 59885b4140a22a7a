//! Evaluation reports (JSON + CSV) and per-epoch learning curves.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use ngcf_core::eval::EvalReport;
use ngcf_core::training::EpochRecord;
use ngcf_core::{Error, Result};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const CURVE_FILE: &str = "curve.csv";
pub const CURVE_HEADER: &str =
    "epoch,train_loss,val_recall,val_ndcg,test_recall,test_ndcg,elapsed_s";

fn write_err(path: &Path, e: std::io::Error) -> Error {
    Error::Data(format!("cannot write {}: {e}", path.display()))
}

pub fn report_to_json(report: &EvalReport) -> serde_json::Value {
    let metrics = |recall: &[f64], ndcg: &[f64]| -> serde_json::Value {
        let per_k: Vec<serde_json::Value> = report
            .k_values
            .iter()
            .zip(recall.iter().zip(ndcg))
            .map(|(&k, (&r, &n))| {
                serde_json::json!({ "k": k, "recall": r, "ndcg": n })
            })
            .collect();
        serde_json::Value::Array(per_k)
    };
    serde_json::json!({
        "k_values": report.k_values,
        "n_users_evaluated": report.n_users_evaluated,
        "overall": metrics(&report.recall, &report.ndcg),
        "groups": report
            .groups
            .iter()
            .enumerate()
            .map(|(g, grp)| {
                serde_json::json!({
                    "group": g,
                    "max_train_count": grp.boundary,
                    "n_users": grp.n_users,
                    "n_evaluated": grp.n_evaluated,
                    "metrics": metrics(&grp.recall, &grp.ndcg),
                })
            })
            .collect::<Vec<_>>(),
        "warnings": report.warnings,
    })
}

/// One CSV row per cutoff for the overall block and for each group.
pub fn report_to_csv(report: &EvalReport) -> String {
    let mut out = String::from("scope,max_train_count,k,recall,ndcg,n_evaluated\n");
    for (ki, &k) in report.k_values.iter().enumerate() {
        let _ = writeln!(
            out,
            "overall,,{k},{},{},{}",
            report.recall[ki], report.ndcg[ki], report.n_users_evaluated
        );
    }
    for (g, grp) in report.groups.iter().enumerate() {
        for (ki, &k) in report.k_values.iter().enumerate() {
            let _ = writeln!(
                out,
                "group{g},{},{k},{},{},{}",
                grp.boundary, grp.recall[ki], grp.ndcg[ki], grp.n_evaluated
            );
        }
    }
    out
}

/// Writes report.json and report.csv into `dir`.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| write_err(dir, e))?;
    let json_path = dir.join(REPORT_JSON);
    let mut text = serde_json::to_string_pretty(&report_to_json(report))
        .map_err(|e| Error::Data(format!("cannot encode report: {e}")))?;
    text.push('\n');
    std::fs::write(&json_path, text).map_err(|e| write_err(&json_path, e))?;
    let csv_path = dir.join(REPORT_CSV);
    std::fs::write(&csv_path, report_to_csv(report)).map_err(|e| write_err(&csv_path, e))
}

fn optional(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Streams learning-curve rows to `curve.csv`. With `deterministic` the
/// wall-clock column is written as 0 so reruns produce identical bytes.
pub struct CurveWriter {
    path: PathBuf,
    out: BufWriter<File>,
    deterministic: bool,
    started: std::time::Instant,
}

impl CurveWriter {
    pub fn create(dir: &Path, deterministic: bool) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| write_err(dir, e))?;
        let path = dir.join(CURVE_FILE);
        let file = File::create(&path).map_err(|e| write_err(&path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{CURVE_HEADER}").map_err(|e| write_err(&path, e))?;
        Ok(CurveWriter { path, out, deterministic, started: std::time::Instant::now() })
    }

    pub fn append(&mut self, r: &EpochRecord) -> Result<()> {
        let elapsed = if self.deterministic {
            0.0
        } else {
            self.started.elapsed().as_secs_f64()
        };
        writeln!(
            self.out,
            "{},{},{},{},{},{},{elapsed}",
            r.epoch,
            r.train_loss,
            r.val_recall,
            r.val_ndcg,
            optional(r.test_recall),
            optional(r.test_ndcg),
        )
        .map_err(|e| write_err(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| write_err(&self.path, e))
    }
}

/// Concatenates the curve files of several run directories, prefixing each
/// row with the run's directory name.
pub fn merge_curves(run_dirs: &[PathBuf], out_path: &Path) -> Result<()> {
    let mut merged = format!("run,{CURVE_HEADER}\n");
    for dir in run_dirs {
        let curve_path = dir.join(CURVE_FILE);
        let text = std::fs::read_to_string(&curve_path)
            .map_err(|e| Error::Data(format!("cannot read {}: {e}", curve_path.display())))?;
        let run = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        let mut lines = text.lines();
        match lines.next() {
            Some(header) if header == CURVE_HEADER => {}
            _ => {
                return Err(Error::Data(format!(
                    "{}: unrecognized curve header",
                    curve_path.display()
                )))
            }
        }
        for line in lines {
            let _ = writeln!(merged, "{run},{line}");
        }
    }
    std::fs::write(out_path, merged).map_err(|e| write_err(out_path, e))
}
