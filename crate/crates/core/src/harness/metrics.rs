//! Per-epoch metric records and their cross-trial aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ScenarioKind, TcMode};
use crate::error::{GdmError, Result};

/// State and scores at the end of one training epoch (after replay, if any).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub batch: usize,
    /// Epoch within the batch.
    pub epoch: usize,
    pub em_neurons: usize,
    pub sm_neurons: usize,
    /// Mean `eps_i * h_i` over adaptation events this epoch.
    pub em_update_rate: f64,
    pub sm_update_rate: f64,
    pub em_insertions: usize,
    pub sm_insertions: usize,
    pub train_frames: usize,
    pub replay_trajectories: usize,
    /// Dataset frames read while replay ran.
    pub replay_frame_reads: u64,
    pub eval_frames: u64,
    pub instance_accuracy: f64,
    pub category_accuracy: f64,
    /// Category accuracy on the first trained category.
    pub first_category_accuracy: Option<f64>,
    /// Instance accuracy on the first five trained instances.
    pub first_instances_accuracy: Option<f64>,
}

impl EpochRecord {
    pub const METRICS: [&'static str; 10] = [
        "em_neurons",
        "sm_neurons",
        "em_update_rate",
        "sm_update_rate",
        "em_insertions",
        "sm_insertions",
        "instance_accuracy",
        "category_accuracy",
        "first_category_accuracy",
        "first_instances_accuracy",
    ];

    /// Values in [`EpochRecord::METRICS`] order.
    pub fn metric_values(&self) -> [Option<f64>; 10] {
        [
            Some(self.em_neurons as f64),
            Some(self.sm_neurons as f64),
            Some(self.em_update_rate),
            Some(self.sm_update_rate),
            Some(self.em_insertions as f64),
            Some(self.sm_insertions as f64),
            Some(self.instance_accuracy),
            Some(self.category_accuracy),
            self.first_category_accuracy,
            self.first_instances_accuracy,
        ]
    }
}

/// Accuracy on the whole test split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub frames: u64,
    pub instance_accuracy: f64,
    pub category_accuracy: f64,
}

/// Everything one trial reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub trial: usize,
    pub seed: u64,
    pub kind: ScenarioKind,
    pub tc: TcMode,
    pub replay: bool,
    pub records: Vec<EpochRecord>,
    /// Scored on the full test split after the last batch.
    pub final_scores: Scores,
}

impl MetricsLog {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub batch: usize,
    pub epoch: usize,
    pub metrics: BTreeMap<String, Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateLog {
    pub n_trials: usize,
    pub records: Vec<AggregateRecord>,
    pub final_instance_accuracy: Stat,
    pub final_category_accuracy: Stat,
}

impl AggregateLog {
    /// Aligns trials record by record; they must share one schedule shape.
    pub fn from_logs(logs: &[MetricsLog]) -> Result<Self> {
        let first = logs.first().ok_or(GdmError::Empty("trial list"))?;
        let shape: Vec<(usize, usize)> = first.records.iter().map(|r| (r.batch, r.epoch)).collect();
        for log in logs {
            let other: Vec<(usize, usize)> =
                log.records.iter().map(|r| (r.batch, r.epoch)).collect();
            if other != shape {
                return Err(GdmError::Schedule(format!(
                    "trial {} has a different batch/epoch layout from trial {}",
                    log.trial, first.trial
                )));
            }
        }
        let records = shape
            .iter()
            .enumerate()
            .map(|(i, &(batch, epoch))| {
                let metrics = EpochRecord::METRICS
                    .iter()
                    .enumerate()
                    .filter_map(|(m, name)| {
                        let vals: Vec<f64> = logs
                            .iter()
                            .filter_map(|l| l.records[i].metric_values()[m])
                            .collect();
                        Stat::of(&vals).map(|s| (name.to_string(), s))
                    })
                    .collect();
                AggregateRecord {
                    batch,
                    epoch,
                    metrics,
                }
            })
            .collect();
        let finals = |f: fn(&Scores) -> f64| {
            let v: Vec<f64> = logs.iter().map(|l| f(&l.final_scores)).collect();
            Stat::of(&v).expect("at least one trial")
        };
        Ok(Self {
            n_trials: logs.len(),
            records,
            final_instance_accuracy: finals(|s| s.instance_accuracy),
            final_category_accuracy: finals(|s| s.category_accuracy),
        })
    }
}

/// Per-trial logs plus their aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub trials: Vec<MetricsLog>,
    pub aggregate: AggregateLog,
}

impl MetricsReport {
    pub fn new(trials: Vec<MetricsLog>) -> Result<Self> {
        let aggregate = AggregateLog::from_logs(&trials)?;
        Ok(Self { trials, aggregate })
    }
}
