//! Scenario scheduling, training runs, evaluation and multi-trial orchestration.

mod metrics;
mod schedule;
mod trials;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{
    AggregateLog, AggregateRecord, EpochRecord, MetricsLog, MetricsReport, Scores, Stat,
};
pub use schedule::{
    ScenarioKind, ScenarioSchedule, BATCH_EPOCHS, NC_FIRST_CATEGORIES, OBJECTS_PER_BATCH,
};
pub use trials::{replay_ablation, run_trials, Ablation, Experiment, TrialOutcome};

use crate::data_io::{DatasetSplit, SequenceDataset};
use crate::dual_memory::{GdmConfig, GdmModel, TestContext};
use crate::error::{GdmError, Result};
use crate::gamma_gwr::Label;

/// Instances tracked by [`EpochRecord::first_instances_accuracy`].
pub const FIRST_INSTANCES: usize = 5;

/// Temporal-context configuration of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TcMode {
    /// Context in training and at test.
    #[default]
    Full,
    /// `K = 0` for both memories, in training and at test.
    None,
    /// Context in training only.
    TestNone,
}

impl TcMode {
    pub fn model_config(self, config: &GdmConfig) -> GdmConfig {
        match self {
            TcMode::None => config.without_context(),
            _ => config.clone(),
        }
    }

    pub fn test_context(self) -> TestContext {
        match self {
            TcMode::Full => TestContext::Full,
            TcMode::None | TcMode::TestNone => TestContext::None,
        }
    }
}

/// Frames and correct predictions at both levels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub frames: u64,
    pub instance_correct: u64,
    pub category_correct: u64,
}

impl Counts {
    fn add(&mut self, o: &Counts) {
        self.frames += o.frames;
        self.instance_correct += o.instance_correct;
        self.category_correct += o.category_correct;
    }
}

fn percent(correct: u64, total: u64) -> Option<f64> {
    (total > 0).then(|| 100.0 * correct as f64 / total as f64)
}

/// Frame-level classification results.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub overall: Counts,
    pub per_category: BTreeMap<Label, Counts>,
    pub per_instance: BTreeMap<Label, Counts>,
}

impl Evaluation {
    pub fn instance_accuracy(&self) -> f64 {
        percent(self.overall.instance_correct, self.overall.frames).unwrap_or(0.0)
    }

    pub fn category_accuracy(&self) -> f64 {
        percent(self.overall.category_correct, self.overall.frames).unwrap_or(0.0)
    }

    /// Category accuracy over test frames of `category`.
    pub fn category_accuracy_of(&self, category: Label) -> Option<f64> {
        let c = self.per_category.get(&category)?;
        percent(c.category_correct, c.frames)
    }

    /// Instance accuracy pooled over test frames of `instances`.
    pub fn instance_accuracy_of(&self, instances: &[Label]) -> Option<f64> {
        let mut total = Counts::default();
        for i in instances {
            if let Some(c) = self.per_instance.get(i) {
                total.add(c);
            }
        }
        percent(total.instance_correct, total.frames)
    }

    pub fn scores(&self) -> Scores {
        Scores {
            frames: self.overall.frames,
            instance_accuracy: self.instance_accuracy(),
            category_accuracy: self.category_accuracy(),
        }
    }
}

/// Classifies each sequence with its own fresh context. A missing
/// prediction counts as wrong.
pub fn evaluate(
    model: &GdmModel,
    dataset: &SequenceDataset,
    sequences: &[usize],
    mode: TestContext,
) -> Result<Evaluation> {
    if sequences.iter().all(|&s| dataset.sequences()[s].len == 0) {
        return Err(GdmError::Empty("test set"));
    }
    let parts = sequences
        .par_iter()
        .map(|&s| {
            let info = &dataset.sequences()[s];
            let frames: Vec<&[f64]> = dataset
                .sequence_frames(s)
                .map(|f| f.features.as_slice())
                .collect();
            let preds = model.classify_sequence(frames, mode)?;
            let mut c = Counts {
                frames: preds.len() as u64,
                ..Counts::default()
            };
            for p in &preds {
                c.instance_correct += (p.instance == Some(info.instance)) as u64;
                c.category_correct += (p.category == Some(info.category)) as u64;
            }
            Ok((info.instance, info.category, c))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut eval = Evaluation::default();
    for (instance, category, c) in parts {
        eval.overall.add(&c);
        eval.per_category.entry(category).or_default().add(&c);
        eval.per_instance.entry(instance).or_default().add(&c);
    }
    Ok(eval)
}

/// A finished run: the trained model and its log.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub model: GdmModel,
    pub log: MetricsLog,
}

/// Trains `schedule` batch by batch, replaying after every epoch when the
/// schedule asks for it, and evaluates after each epoch. Incremental
/// scenarios are evaluated on the categories trained so far; the final
/// scores always use the full test split.
pub fn run(
    dataset: &SequenceDataset,
    split: &DatasetSplit,
    schedule: &ScenarioSchedule,
    config: &GdmConfig,
    tc: TcMode,
) -> Result<RunResult> {
    schedule.validate(dataset, split)?;
    let test_set: BTreeSet<usize> = split.test.iter().copied().collect();
    if schedule.train_sequences().any(|s| test_set.contains(&s)) {
        return Err(GdmError::Invariant(
            "test sequence scheduled for training".into(),
        ));
    }
    let mut model = GdmModel::new(dataset.dim(), &tc.model_config(config))?;
    let mode = tc.test_context();
    let reader = dataset.reader();
    let seqs = dataset.sequences();
    let first_category = schedule.category_order(dataset)[0];
    let first_instances: Vec<Label> = schedule
        .instance_order(dataset)
        .into_iter()
        .take(FIRST_INSTANCES)
        .collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    shuffle_rng.set_stream(1);

    let mut seen_categories = BTreeSet::new();
    let mut records = Vec::new();
    for (b, batch) in schedule.batches.iter().enumerate() {
        seen_categories.extend(batch.iter().map(|&s| seqs[s].category));
        let eval_set: Vec<usize> = if schedule.kind.is_incremental() {
            split
                .test
                .iter()
                .copied()
                .filter(|&s| seen_categories.contains(&seqs[s].category))
                .collect()
        } else {
            split.test.clone()
        };
        let mut order = batch.clone();
        for epoch in 0..schedule.epochs_per_batch {
            order.shuffle(&mut shuffle_rng);
            let mut acc = EpochAccumulator::default();
            for &s in &order {
                model.reset_context();
                for f in reader.sequence_frames(s) {
                    let step = model.train_step(&f.features, f.instance, f.category)?;
                    acc.observe(&step, f.category)?;
                }
            }
            model.reset_context();

            let mut replay_trajectories = 0;
            let mut replay_frame_reads = 0;
            if schedule.replay {
                let before = reader.frame_reads();
                let report = model.replay_epoch()?;
                replay_frame_reads = reader.frame_reads() - before;
                if replay_frame_reads != 0 {
                    return Err(GdmError::Invariant(format!(
                        "replay read {replay_frame_reads} stored frames"
                    )));
                }
                replay_trajectories = report.trajectories;
            }

            let eval = evaluate(&model, dataset, &eval_set, mode)?;
            if model.semantic().len() > model.episodic().len() {
                log::warn!(
                    "batch {b} epoch {epoch}: semantic memory ({}) larger than episodic ({})",
                    model.semantic().len(),
                    model.episodic().len()
                );
            }
            records.push(EpochRecord {
                batch: b,
                epoch,
                em_neurons: model.episodic().len(),
                sm_neurons: model.semantic().len(),
                em_update_rate: acc.em_rate.mean(),
                sm_update_rate: acc.sm_rate.mean(),
                em_insertions: acc.em_insertions,
                sm_insertions: acc.sm_insertions,
                train_frames: acc.frames,
                replay_trajectories,
                replay_frame_reads,
                eval_frames: eval.overall.frames,
                instance_accuracy: eval.instance_accuracy(),
                category_accuracy: eval.category_accuracy(),
                first_category_accuracy: eval.category_accuracy_of(first_category),
                first_instances_accuracy: eval.instance_accuracy_of(&first_instances),
            });
            log::debug!(
                "{} batch {b} epoch {epoch}: EM {} SM {} inst {:.2} cat {:.2}",
                schedule.kind,
                model.episodic().len(),
                model.semantic().len(),
                eval.instance_accuracy(),
                eval.category_accuracy()
            );
        }
    }
    let final_scores = evaluate(&model, dataset, &split.test, mode)?.scores();
    Ok(RunResult {
        model,
        log: MetricsLog {
            trial: 0,
            seed: schedule.seed,
            kind: schedule.kind,
            tc,
            replay: schedule.replay,
            records,
            final_scores,
        },
    })
}

/// All training data at once for `epochs` epochs (default 35), no replay.
pub fn run_batch(
    dataset: &SequenceDataset,
    split: &DatasetSplit,
    config: &GdmConfig,
    tc: TcMode,
    epochs: Option<usize>,
    seed: u64,
) -> Result<RunResult> {
    let schedule = ScenarioSchedule::build(ScenarioKind::Batch, dataset, split, seed)?
        .with_epochs(epochs.unwrap_or(BATCH_EPOCHS))
        .with_replay(false);
    run(dataset, split, &schedule, config, tc)
}

/// One category per batch, one epoch each.
pub fn run_incremental(
    dataset: &SequenceDataset,
    split: &DatasetSplit,
    config: &GdmConfig,
    replay: bool,
    seed: u64,
) -> Result<RunResult> {
    let schedule =
        ScenarioSchedule::build(ScenarioKind::IncrementalCategory, dataset, split, seed)?
            .with_replay(replay);
    run(dataset, split, &schedule, config, TcMode::Full)
}

#[derive(Debug, Default)]
struct RateMean {
    sum: f64,
    count: usize,
}

impl RateMean {
    fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }
}

#[derive(Debug, Default)]
struct EpochAccumulator {
    frames: usize,
    em_rate: RateMean,
    sm_rate: RateMean,
    em_insertions: usize,
    sm_insertions: usize,
}

impl EpochAccumulator {
    fn observe(&mut self, step: &crate::dual_memory::GdmStepReport, category: Label) -> Result<()> {
        self.frames += 1;
        self.em_rate.sum += step.episodic.update_rate_sum;
        self.em_rate.count += step.episodic.updates;
        self.sm_rate.sum += step.semantic.update_rate_sum;
        self.sm_rate.count += step.semantic.updates;
        self.em_insertions += step.episodic.inserted.is_some() as usize;
        self.sm_insertions += step.semantic.inserted.is_some() as usize;
        let matched = step.semantic_prediction == Some(category);
        if step.semantic.inserted.is_some() && matched {
            return Err(GdmError::Invariant(
                "semantic insertion despite a label match".into(),
            ));
        }
        if step.semantic.adapted && !matched {
            return Err(GdmError::Invariant(
                "semantic update without a label match".into(),
            ));
        }
        Ok(())
    }
}
