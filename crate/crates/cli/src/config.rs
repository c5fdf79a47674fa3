//! Run configuration: a TOML document with command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gdm_core::data_io::{
    generate_synthetic, load_dataset, DatasetSplit, SequenceDataset, SyntheticSpec,
};
use gdm_core::dual_memory::GdmConfig;
use gdm_core::harness::{Experiment, ScenarioKind, TcMode};
use serde::{Deserialize, Serialize};

pub const DEFAULT_TEST_SESSIONS: [u32; 3] = [3, 7, 10];

/// Everything a run needs. Unset fields are filled by [`RunConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Feature file; a synthetic dataset is generated when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay: Option<bool>,
    pub tc: TcMode,
    pub test_sessions: Vec<u32>,
    pub jobs: usize,
    pub synthetic: SyntheticSpec,
    pub model: GdmConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            output: None,
            scenario: None,
            epochs: None,
            trials: None,
            seeds: Vec::new(),
            replay: None,
            tc: TcMode::Full,
            test_sessions: DEFAULT_TEST_SESSIONS.to_vec(),
            jobs: 1,
            synthetic: SyntheticSpec::default(),
            model: GdmConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fills every optional field so the document fully describes the run.
    pub fn resolve(mut self, default_scenario: ScenarioKind) -> Result<Self> {
        let scenario = *self.scenario.get_or_insert(default_scenario);
        let epochs = *self.epochs.get_or_insert(scenario.default_epochs());
        if self.seeds.is_empty() {
            let n = self.trials.unwrap_or(1) as u64;
            self.seeds = (1..=n).collect();
        }
        match self.trials {
            Some(t) if t != self.seeds.len() => {
                bail!("trials = {t} but {} seeds were given", self.seeds.len())
            }
            _ => self.trials = Some(self.seeds.len()),
        }
        self.replay.get_or_insert(scenario != ScenarioKind::Batch);
        if epochs == 0 {
            bail!("epochs must be positive");
        }
        if self.seeds.is_empty() {
            bail!("at least one trial is required");
        }
        if self.jobs == 0 {
            bail!("jobs must be positive");
        }
        if let Some(s) = self.seeds.iter().find(|&&s| s > i64::MAX as u64) {
            bail!("seed {s} exceeds the representable range");
        }
        self.model
            .validate()
            .context("invalid model hyperparameters")?;
        if self.dataset.is_none() {
            self.synthetic.validate()?;
        }
        Ok(self)
    }

    pub fn experiment(&self) -> Experiment {
        Experiment {
            model: self.model.clone(),
            kind: self.scenario.unwrap_or(ScenarioKind::Batch),
            tc: self.tc,
            epochs: self.epochs,
            replay: self.replay,
        }
    }

    pub fn dataset(&self) -> Result<SequenceDataset> {
        match &self.dataset {
            Some(p) => load_dataset(p).with_context(|| format!("loading {}", p.display())),
            None => Ok(generate_synthetic(&self.synthetic)?),
        }
    }

    pub fn split(&self, dataset: &SequenceDataset) -> Result<DatasetSplit> {
        Ok(DatasetSplit::by_sessions(dataset, &self.test_sessions)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}
