//! Mini-batch schedules for the learning scenarios.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_io::{DatasetSplit, SequenceDataset};
use crate::error::{GdmError, Result};
use crate::gamma_gwr::Label;

pub const BATCH_EPOCHS: usize = 35;
/// Objects per mini-batch after the first in the NC and NIC scenarios.
pub const OBJECTS_PER_BATCH: usize = 5;
/// Categories in the first NC batch.
pub const NC_FIRST_CATEGORIES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// All training data in one batch, many epochs.
    Batch,
    /// One batch per category, each shown once.
    IncrementalCategory,
    /// New instances: the first training session, then one batch per session.
    Ni,
    /// New classes: two categories, then five objects per batch.
    Nc,
    /// New instances and classes: one sequence per category, then five
    /// single-sequence objects per batch.
    Nic,
}

impl ScenarioKind {
    pub fn default_epochs(self) -> usize {
        match self {
            ScenarioKind::Batch => BATCH_EPOCHS,
            _ => 1,
        }
    }

    /// Whether per-batch evaluation is restricted to categories seen so far.
    pub fn is_incremental(self) -> bool {
        self != ScenarioKind::Batch
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Batch => "batch",
            ScenarioKind::IncrementalCategory => "incremental-category",
            ScenarioKind::Ni => "ni",
            ScenarioKind::Nc => "nc",
            ScenarioKind::Nic => "nic",
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered mini-batches of training sequences (indices into the dataset's
/// sequence table). Each sequence stands for its frames in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSchedule {
    pub kind: ScenarioKind,
    pub batches: Vec<Vec<usize>>,
    pub epochs_per_batch: usize,
    pub replay: bool,
    pub seed: u64,
}

impl ScenarioSchedule {
    /// Builds the schedule for `kind`, shuffling orders with `seed`.
    pub fn build(
        kind: ScenarioKind,
        dataset: &SequenceDataset,
        split: &DatasetSplit,
        seed: u64,
    ) -> Result<Self> {
        if split.train.is_empty() {
            return Err(GdmError::Empty("training split"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seqs = dataset.sequences();
        let train = &split.train;
        let batches = match kind {
            ScenarioKind::Batch => vec![train.clone()],
            ScenarioKind::IncrementalCategory => {
                let by_cat = group(train, |i| seqs[i].category);
                let mut cats: Vec<Label> = by_cat.keys().copied().collect();
                cats.shuffle(&mut rng);
                cats.iter().map(|c| by_cat[c].clone()).collect()
            }
            ScenarioKind::Ni => {
                let by_session = group(train, |i| seqs[i].session);
                let mut sessions: Vec<u32> = by_session.keys().copied().collect();
                sessions[1..].shuffle(&mut rng);
                sessions.iter().map(|s| by_session[s].clone()).collect()
            }
            ScenarioKind::Nc => {
                let by_cat = group(train, |i| seqs[i].category);
                let mut cats: Vec<Label> = by_cat.keys().copied().collect();
                cats.shuffle(&mut rng);
                let split_at = NC_FIRST_CATEGORIES.min(cats.len());
                let first: Vec<usize> = cats[..split_at]
                    .iter()
                    .flat_map(|c| by_cat[c].iter().copied())
                    .collect();
                let objects: Vec<Vec<usize>> = cats[split_at..]
                    .iter()
                    .flat_map(|c| {
                        let by_obj = group(&by_cat[c], |i| seqs[i].instance);
                        by_obj.into_values().collect::<Vec<_>>()
                    })
                    .collect();
                let mut batches = vec![first];
                for chunk in objects.chunks(OBJECTS_PER_BATCH) {
                    batches.push(chunk.concat());
                }
                batches
            }
            ScenarioKind::Nic => nic_batches(dataset, train, &mut rng),
        };
        let schedule = Self {
            kind,
            batches,
            epochs_per_batch: kind.default_epochs(),
            replay: kind != ScenarioKind::Batch,
            seed,
        };
        schedule.validate(dataset, split)?;
        Ok(schedule)
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs_per_batch = epochs;
        self
    }

    pub fn with_replay(mut self, replay: bool) -> Self {
        self.replay = replay;
        self
    }

    /// Every training sequence appears exactly once; no test sequence appears.
    pub fn validate(&self, dataset: &SequenceDataset, split: &DatasetSplit) -> Result<()> {
        let bad = |m: String| Err(GdmError::Schedule(m));
        if self.epochs_per_batch == 0 {
            return bad("epochs per batch must be positive".into());
        }
        if self.batches.is_empty() || self.batches.iter().any(Vec::is_empty) {
            return bad("schedule contains no batches or an empty batch".into());
        }
        let n = dataset.sequences().len();
        let test: BTreeSet<usize> = split.test.iter().copied().collect();
        let mut seen = BTreeSet::new();
        for (b, batch) in self.batches.iter().enumerate() {
            for &s in batch {
                if s >= n {
                    return bad(format!("batch {b} refers to sequence {s}, dataset has {n}"));
                }
                if test.contains(&s) {
                    return bad(format!("batch {b} contains test sequence {s}"));
                }
                if !seen.insert(s) {
                    return bad(format!("sequence {s} is scheduled twice"));
                }
            }
        }
        let train: BTreeSet<usize> = split.train.iter().copied().collect();
        if seen != train {
            return bad(format!(
                "schedule covers {} sequences, training split has {}",
                seen.len(),
                train.len()
            ));
        }
        Ok(())
    }

    pub fn train_sequences(&self) -> impl Iterator<Item = usize> + '_ {
        self.batches.iter().flatten().copied()
    }

    /// Categories in the order they are first trained.
    pub fn category_order(&self, dataset: &SequenceDataset) -> Vec<Label> {
        first_seen(
            self.train_sequences()
                .map(|s| dataset.sequences()[s].category),
        )
    }

    /// Instances in the order they are first trained.
    pub fn instance_order(&self, dataset: &SequenceDataset) -> Vec<Label> {
        first_seen(
            self.train_sequences()
                .map(|s| dataset.sequences()[s].instance),
        )
    }
}

fn first_seen(labels: impl Iterator<Item = Label>) -> Vec<Label> {
    let mut seen = BTreeSet::new();
    labels.filter(|l| seen.insert(*l)).collect()
}

fn group<K: Ord>(seqs: &[usize], key: impl Fn(usize) -> K) -> BTreeMap<K, Vec<usize>> {
    let mut out: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for &s in seqs {
        out.entry(key(s)).or_default().push(s);
    }
    out
}

/// First batch: one sequence of the first object of every category. The
/// remaining sequences are dealt into batches of distinct objects, always
/// drawing from the objects with the most sequences left, and the batches
/// are shuffled.
fn nic_batches(
    dataset: &SequenceDataset,
    train: &[usize],
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let seqs = dataset.sequences();
    let by_cat = group(train, |i| seqs[i].category);
    let first: Vec<usize> = by_cat
        .values()
        .map(|v| {
            let obj = v
                .iter()
                .map(|&i| seqs[i].instance)
                .min()
                .expect("non-empty group");
            *v.iter()
                .find(|&&i| seqs[i].instance == obj)
                .expect("object present")
        })
        .collect();
    let rest: Vec<usize> = train
        .iter()
        .copied()
        .filter(|s| !first.contains(s))
        .collect();
    let mut objects: Vec<Vec<usize>> = group(&rest, |i| seqs[i].instance).into_values().collect();
    objects.shuffle(rng);
    for o in &mut objects {
        o.shuffle(rng);
    }

    let mut later = Vec::new();
    loop {
        objects.sort_by_key(|o| std::cmp::Reverse(o.len()));
        let batch: Vec<usize> = objects
            .iter_mut()
            .take(OBJECTS_PER_BATCH)
            .filter_map(Vec::pop)
            .collect();
        if batch.is_empty() {
            break;
        }
        later.push(batch);
    }
    later.shuffle(rng);
    let mut batches = vec![first];
    batches.extend(later);
    batches
}
