//! Metric files: a tab-separated per-epoch table and a JSON summary.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GdmError, Result};
use crate::harness::{EpochRecord, MetricsReport};

pub const METRICS_FORMAT_VERSION: u32 = 1;

const TABLE_MAGIC: &str = "# gdm-metrics";
const COLUMNS: [&str; 17] = [
    "trial",
    "batch",
    "epoch",
    "em_neurons",
    "sm_neurons",
    "em_update_rate",
    "sm_update_rate",
    "em_insertions",
    "sm_insertions",
    "train_frames",
    "replay_trajectories",
    "replay_frame_reads",
    "eval_frames",
    "instance_accuracy",
    "category_accuracy",
    "first_category_accuracy",
    "first_instances_accuracy",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsFormat {
    /// One line per trial epoch.
    Tsv,
    /// Trials, aggregates and final scores.
    Json,
}

#[derive(Serialize, Deserialize)]
struct SummaryDoc {
    format_version: u32,
    #[serde(flatten)]
    report: MetricsReport,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn table(report: &MetricsReport) -> String {
    let mut out = format!(
        "{TABLE_MAGIC} {METRICS_FORMAT_VERSION}\n{}\n",
        COLUMNS.join("\t")
    );
    for log in &report.trials {
        for r in &log.records {
            let row = [
                log.trial.to_string(),
                r.batch.to_string(),
                r.epoch.to_string(),
                r.em_neurons.to_string(),
                r.sm_neurons.to_string(),
                r.em_update_rate.to_string(),
                r.sm_update_rate.to_string(),
                r.em_insertions.to_string(),
                r.sm_insertions.to_string(),
                r.train_frames.to_string(),
                r.replay_trajectories.to_string(),
                r.replay_frame_reads.to_string(),
                r.eval_frames.to_string(),
                r.instance_accuracy.to_string(),
                r.category_accuracy.to_string(),
                opt(r.first_category_accuracy),
                opt(r.first_instances_accuracy),
            ];
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
    }
    out
}

/// Renders `report` in `format`. Output bytes depend only on the report.
pub fn render_metrics(report: &MetricsReport, format: MetricsFormat) -> Result<String> {
    Ok(match format {
        MetricsFormat::Tsv => table(report),
        MetricsFormat::Json => {
            let doc = SummaryDoc {
                format_version: METRICS_FORMAT_VERSION,
                report: report.clone(),
            };
            let mut s = serde_json::to_string_pretty(&doc)?;
            s.push('\n');
            s
        }
    })
}

pub fn export_metrics(
    report: &MetricsReport,
    path: impl AsRef<Path>,
    format: MetricsFormat,
) -> Result<()> {
    fs::write(path, render_metrics(report, format)?)?;
    Ok(())
}

/// Parses a metrics table back into `(trial, record)` rows.
pub fn parse_metrics_table(text: &str) -> Result<Vec<(usize, EpochRecord)>> {
    let bad = |line: usize, m: String| GdmError::Dataset(format!("metrics table line {line}: {m}"));
    let mut lines = text.lines();
    let version = lines
        .next()
        .and_then(|l| l.strip_prefix(TABLE_MAGIC))
        .ok_or_else(|| bad(1, "missing version line".into()))?;
    if version.trim() != METRICS_FORMAT_VERSION.to_string() {
        return Err(bad(1, format!("unsupported version {:?}", version.trim())));
    }
    if lines.next() != Some(COLUMNS.join("\t").as_str()) {
        return Err(bad(2, "unexpected column header".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 3;
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != COLUMNS.len() {
            return Err(bad(
                n,
                format!("{} fields, expected {}", f.len(), COLUMNS.len()),
            ));
        }
        let num = |k: usize| -> Result<f64> {
            f[k].parse()
                .map_err(|_| bad(n, format!("{} {:?} is not a number", COLUMNS[k], f[k])))
        };
        let int = |k: usize| -> Result<u64> {
            f[k].parse()
                .map_err(|_| bad(n, format!("{} {:?} is not an integer", COLUMNS[k], f[k])))
        };
        let opt = |k: usize| -> Result<Option<f64>> {
            if f[k] == "NA" {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        rows.push((
            int(0)? as usize,
            EpochRecord {
                batch: int(1)? as usize,
                epoch: int(2)? as usize,
                em_neurons: int(3)? as usize,
                sm_neurons: int(4)? as usize,
                em_update_rate: num(5)?,
                sm_update_rate: num(6)?,
                em_insertions: int(7)? as usize,
                sm_insertions: int(8)? as usize,
                train_frames: int(9)? as usize,
                replay_trajectories: int(10)? as usize,
                replay_frame_reads: int(11)?,
                eval_frames: int(12)?,
                instance_accuracy: num(13)?,
                category_accuracy: num(14)?,
                first_category_accuracy: opt(15)?,
                first_instances_accuracy: opt(16)?,
            },
        ));
    }
    Ok(rows)
}

pub fn parse_summary(text: &str) -> Result<MetricsReport> {
    let doc: SummaryDoc = serde_json::from_str(text)?;
    if doc.format_version != METRICS_FORMAT_VERSION {
        return Err(GdmError::Dataset(format!(
            "unsupported metrics summary version {}",
            doc.format_version
        )));
    }
    Ok(doc.report)
}
