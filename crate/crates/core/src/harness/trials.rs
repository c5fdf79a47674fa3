//! Repeated trials over seeds, optionally in parallel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run, MetricsReport, RunResult, ScenarioKind, ScenarioSchedule, TcMode};
use crate::data_io::{DatasetSplit, SequenceDataset};
use crate::dual_memory::{GdmConfig, GdmModel};
use crate::error::{GdmError, Result};

/// Settings shared by every trial of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub model: GdmConfig,
    pub kind: ScenarioKind,
    pub tc: TcMode,
    /// Overrides the scenario's epochs per batch.
    pub epochs: Option<usize>,
    /// Overrides the scenario's replay default.
    pub replay: Option<bool>,
}

impl Experiment {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            model: GdmConfig::default(),
            kind,
            tc: TcMode::Full,
            epochs: None,
            replay: None,
        }
    }

    pub fn schedule(
        &self,
        dataset: &SequenceDataset,
        split: &DatasetSplit,
        seed: u64,
    ) -> Result<ScenarioSchedule> {
        let mut s = ScenarioSchedule::build(self.kind, dataset, split, seed)?;
        if let Some(e) = self.epochs {
            s = s.with_epochs(e);
        }
        if let Some(r) = self.replay {
            s = s.with_replay(r);
        }
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub models: Vec<GdmModel>,
    pub report: MetricsReport,
}

/// One trial per seed, `jobs` at a time. Results keep seed order.
pub fn run_trials(
    dataset: &SequenceDataset,
    split: &DatasetSplit,
    experiment: &Experiment,
    seeds: &[u64],
    jobs: usize,
) -> Result<TrialOutcome> {
    if seeds.is_empty() {
        return Err(GdmError::Empty("seed list"));
    }
    experiment.model.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| GdmError::Invariant(format!("thread pool: {e}")))?;
    let results: Vec<RunResult> = pool.install(|| {
        seeds
            .par_iter()
            .enumerate()
            .map(|(trial, &seed)| {
                let schedule = experiment.schedule(dataset, split, seed)?;
                let mut r = run(dataset, split, &schedule, &experiment.model, experiment.tc)?;
                r.log.trial = trial;
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let (models, logs): (Vec<_>, Vec<_>) = results.into_iter().map(|r| (r.model, r.log)).unzip();
    Ok(TrialOutcome {
        models,
        report: MetricsReport::new(logs)?,
    })
}

/// Paired runs with and without replay on identical seeds and schedules.
#[derive(Debug, Clone)]
pub struct Ablation {
    pub with_replay: TrialOutcome,
    pub without_replay: TrialOutcome,
}

pub fn replay_ablation(
    dataset: &SequenceDataset,
    split: &DatasetSplit,
    experiment: &Experiment,
    seeds: &[u64],
    jobs: usize,
) -> Result<Ablation> {
    let arm = |replay| Experiment {
        replay: Some(replay),
        ..experiment.clone()
    };
    Ok(Ablation {
        with_replay: run_trials(dataset, split, &arm(true), seeds, jobs)?,
        without_replay: run_trials(dataset, split, &arm(false), seeds, jobs)?,
    })
}
