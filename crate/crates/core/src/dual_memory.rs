//! The growing dual-memory model: an unsupervised episodic network feeding a
//! label-gated semantic network, plus trajectory replay.
//!
//! The episodic memory (G-EM) sees raw feature frames and stores an instance
//! and a category histogram per neuron. The semantic memory (G-SM) sees the
//! weight of the episodic BMU; it only grows when its BMU predicts the wrong
//! category (or none) and only adapts when the prediction is right.
//!
//! Replay walks the temporal synapses of G-EM from every neuron to build
//! short pseudo-sequences of prototype weights and feeds them back through
//! both memories as ordinary training steps.

use serde::{Deserialize, Serialize};

use crate::codec::{ByteReader, ByteWriter};
use crate::error::{GdmError, Result};
use crate::gamma_gwr::{Hyperparams, Label, Network, NeuronId, StepGates, StepReport};

pub const MODEL_MAGIC: &[u8; 4] = b"GDMM";
pub const MODEL_FORMAT_VERSION: u32 = 1;

pub const INSTANCE_TABLE: usize = 0;
pub const CATEGORY_TABLE: usize = 1;

/// Direction in which trajectories follow the temporal synapses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RnatDirection {
    /// `s(i) = argmax_j P(s(i-1), j)`: strongest successor.
    #[default]
    Forward,
    /// `s(i) = argmax_n P(n, s(i-1))`: strongest predecessor.
    Backward,
}

/// Which G-EM weight the semantic memory receives within a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SemanticInput {
    /// Weight of the credited G-EM neuron after this step's adaptation or insertion.
    #[default]
    PostUpdate,
    /// Weight of the matched G-EM BMU before this step touched it.
    PreUpdate,
}

/// How much temporal context classification uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestContext {
    #[default]
    Full,
    /// Single-frame matching on weights only (`K = 0` at test time).
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdmConfig {
    #[serde(default = "Hyperparams::episodic")]
    pub episodic: Hyperparams,
    #[serde(default = "Hyperparams::semantic")]
    pub semantic: Hyperparams,
    #[serde(default)]
    pub rnat_direction: RnatDirection,
    #[serde(default)]
    pub semantic_input: SemanticInput,
}

impl Default for GdmConfig {
    fn default() -> Self {
        Self {
            episodic: Hyperparams::episodic(),
            semantic: Hyperparams::semantic(),
            rnat_direction: RnatDirection::Forward,
            semantic_input: SemanticInput::PostUpdate,
        }
    }
}

impl GdmConfig {
    /// Both memories without temporal context.
    pub fn without_context(&self) -> Self {
        Self {
            episodic: self.episodic.without_context(),
            semantic: self.semantic.without_context(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.episodic.validate()?;
        self.semantic.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdmStepReport {
    pub episodic: StepReport,
    pub semantic: StepReport,
    /// Category predicted by the G-SM BMU before the step, if any.
    pub semantic_prediction: Option<Label>,
    /// Gates applied to G-SM; `None` while G-SM was still being seeded.
    pub semantic_gates: Option<StepGates>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FramePrediction {
    pub instance: Option<Label>,
    pub category: Option<Label>,
}

/// A recursively generated neural activation trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Rnat {
    pub source: NeuronId,
    pub neurons: Vec<NeuronId>,
    pub elements: Vec<Vec<f64>>,
    pub instance_labels: Vec<Label>,
    pub category_labels: Vec<Label>,
}

impl Rnat {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReplayReport {
    pub trajectories: usize,
    pub discarded: usize,
    pub episodic_steps: usize,
    pub semantic_steps: usize,
    pub episodic_insertions: usize,
    pub semantic_insertions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdmModel {
    episodic: Network,
    semantic: Network,
    rnat_direction: RnatDirection,
    semantic_input: SemanticInput,
}

impl GdmModel {
    pub fn new(dim: usize, config: &GdmConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            episodic: Network::new(dim, 2, config.episodic.clone())?,
            semantic: Network::new(dim, 1, config.semantic.clone())?,
            rnat_direction: config.rnat_direction,
            semantic_input: config.semantic_input,
        })
    }

    pub fn from_networks(
        episodic: Network,
        semantic: Network,
        rnat_direction: RnatDirection,
        semantic_input: SemanticInput,
    ) -> Result<Self> {
        if episodic.n_tables() != 2 || semantic.n_tables() != 1 {
            return Err(GdmError::Invariant(
                "episodic memory needs instance and category tables, semantic memory one".into(),
            ));
        }
        if episodic.dim() != semantic.dim() {
            return Err(GdmError::DimensionMismatch {
                expected: episodic.dim(),
                got: semantic.dim(),
            });
        }
        Ok(Self {
            episodic,
            semantic,
            rnat_direction,
            semantic_input,
        })
    }

    pub fn episodic(&self) -> &Network {
        &self.episodic
    }

    pub fn semantic(&self) -> &Network {
        &self.semantic
    }

    pub fn episodic_mut(&mut self) -> &mut Network {
        &mut self.episodic
    }

    pub fn semantic_mut(&mut self) -> &mut Network {
        &mut self.semantic
    }

    pub fn dim(&self) -> usize {
        self.episodic.dim()
    }

    /// Trajectory length `K_em + K_sm + 1`.
    pub fn lambda(&self) -> usize {
        self.episodic.depth() + self.semantic.depth() + 1
    }

    pub fn rnat_direction(&self) -> RnatDirection {
        self.rnat_direction
    }

    pub fn semantic_input(&self) -> SemanticInput {
        self.semantic_input
    }

    pub fn reset_context(&mut self) {
        self.episodic.reset_context();
        self.semantic.reset_context();
    }

    pub fn train_step(
        &mut self,
        feature: &[f64],
        instance: Label,
        category: Label,
    ) -> Result<GdmStepReport> {
        let mut pre_update: Option<Vec<f64>> = None;
        let want_pre = self.semantic_input == SemanticInput::PreUpdate;
        let episodic =
            self.episodic
                .train_step_gated(feature, &[instance, category], |net, m| {
                    if want_pre {
                        pre_update = net.neuron(m.bmu).ok().map(|n| n.weight().to_vec());
                    }
                    StepGates::OPEN
                })?;
        let sm_input = match pre_update {
            Some(w) => w,
            None => self.episodic.neuron(episodic.bmu)?.weight().to_vec(),
        };

        let mut prediction = None;
        let mut gates = None;
        let semantic = self
            .semantic
            .train_step_gated(&sm_input, &[category], |net, m| {
                let predicted = net.predict_label(m.bmu, 0).ok().flatten();
                let matched = predicted == Some(category);
                let g = StepGates {
                    insert: !matched,
                    update: matched,
                };
                prediction = predicted;
                gates = Some(g);
                g
            })?;
        Ok(GdmStepReport {
            episodic,
            semantic,
            semantic_prediction: prediction,
            semantic_gates: gates,
        })
    }

    /// Labels every frame of one sequence without touching the model.
    pub fn classify_sequence<'a, I>(
        &self,
        frames: I,
        mode: TestContext,
    ) -> Result<Vec<FramePrediction>>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let (em_depth, sm_depth) = match mode {
            TestContext::Full => (self.episodic.depth(), self.semantic.depth()),
            TestContext::None => (0, 0),
        };
        let mut em_ctx = self.episodic.fresh_context();
        let mut sm_ctx = self.semantic.fresh_context();
        let mut out = Vec::new();
        for x in frames {
            self.episodic.advance_context(&mut em_ctx);
            let Some((em_bmu, _)) = self.episodic.nearest_with(x, &em_ctx, em_depth)? else {
                out.push(FramePrediction {
                    instance: None,
                    category: None,
                });
                continue;
            };
            em_ctx.set_prev_bmu(Some(em_bmu));
            let instance = self.episodic.predict_label(em_bmu, INSTANCE_TABLE)?;
            let w = self.episodic.neuron(em_bmu)?.weight();

            self.semantic.advance_context(&mut sm_ctx);
            let category = match self.semantic.nearest_with(w, &sm_ctx, sm_depth)? {
                Some((sm_bmu, _)) => {
                    sm_ctx.set_prev_bmu(Some(sm_bmu));
                    self.semantic.predict_label(sm_bmu, 0)?
                }
                None => None,
            };
            out.push(FramePrediction { instance, category });
        }
        Ok(out)
    }

    /// Trajectory seeded at G-EM neuron `source`, following the strongest
    /// temporal synapses for at most `lambda` elements. Stops early at a
    /// neuron with no usable link or without labels.
    pub fn generate_rnat(&self, source: NeuronId) -> Result<Rnat> {
        self.episodic.neuron(source)?;
        let lambda = self.lambda();
        let mut rnat = Rnat {
            source,
            neurons: Vec::with_capacity(lambda),
            elements: Vec::with_capacity(lambda),
            instance_labels: Vec::with_capacity(lambda),
            category_labels: Vec::with_capacity(lambda),
        };
        let mut current = Some(source);
        while let Some(id) = current {
            if rnat.len() == lambda {
                break;
            }
            let (Some(instance), Some(category)) = (
                self.episodic.predict_label(id, INSTANCE_TABLE)?,
                self.episodic.predict_label(id, CATEGORY_TABLE)?,
            ) else {
                break;
            };
            rnat.neurons.push(id);
            rnat.elements
                .push(self.episodic.neuron(id)?.weight().to_vec());
            rnat.instance_labels.push(instance);
            rnat.category_labels.push(category);
            current = match self.rnat_direction {
                RnatDirection::Forward => self.episodic.next_neuron(id)?,
                RnatDirection::Backward => self.episodic.previous_neuron(id)?,
            };
        }
        Ok(rnat)
    }

    /// One trajectory per live G-EM neuron; trajectories shorter than 2 are dropped.
    pub fn generate_rnats(&self) -> Result<(Vec<Rnat>, usize)> {
        let mut kept = Vec::new();
        let mut discarded = 0;
        for id in self.episodic.ids() {
            let rnat = self.generate_rnat(id)?;
            if rnat.len() >= 2 {
                kept.push(rnat);
            } else {
                discarded += 1;
            }
        }
        Ok((kept, discarded))
    }

    /// Replays every trajectory through both memories, each as its own
    /// sequence with the context reset before and after.
    pub fn replay_epoch(&mut self) -> Result<ReplayReport> {
        let (rnats, discarded) = self.generate_rnats()?;
        let mut report = ReplayReport {
            trajectories: rnats.len(),
            discarded,
            ..ReplayReport::default()
        };
        for rnat in &rnats {
            self.reset_context();
            for ((x, &instance), &category) in rnat
                .elements
                .iter()
                .zip(&rnat.instance_labels)
                .zip(&rnat.category_labels)
            {
                let step = self.train_step(x, instance, category)?;
                report.episodic_steps += 1;
                report.semantic_steps += 1;
                report.episodic_insertions += step.episodic.inserted.is_some() as usize;
                report.semantic_insertions += step.semantic.inserted.is_some() as usize;
            }
            self.reset_context();
        }
        Ok(report)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(MODEL_MAGIC);
        w.u32(MODEL_FORMAT_VERSION);
        w.u32(self.lambda() as u32);
        w.u8(match self.rnat_direction {
            RnatDirection::Forward => 0,
            RnatDirection::Backward => 1,
        });
        w.u8(match self.semantic_input {
            SemanticInput::PostUpdate => 0,
            SemanticInput::PreUpdate => 1,
        });
        for net in [&self.episodic, &self.semantic] {
            let bytes = net.to_bytes();
            w.u64(bytes.len() as u64);
            w.bytes(&bytes);
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new("model snapshot", bytes);
        r.magic(MODEL_MAGIC)?;
        let at = r.offset();
        let version = r.u32("format version")?;
        if version != MODEL_FORMAT_VERSION {
            return Err(r.error_at(at, format!("unsupported model format version {version}")));
        }
        let lambda_at = r.offset();
        let lambda = r.u32("lambda")? as usize;
        let at = r.offset();
        let rnat_direction = match r.u8("trajectory direction")? {
            0 => RnatDirection::Forward,
            1 => RnatDirection::Backward,
            other => return Err(r.error_at(at, format!("unknown trajectory direction {other}"))),
        };
        let at = r.offset();
        let semantic_input = match r.u8("semantic input")? {
            0 => SemanticInput::PostUpdate,
            1 => SemanticInput::PreUpdate,
            other => return Err(r.error_at(at, format!("unknown semantic input mode {other}"))),
        };
        let mut nets = Vec::with_capacity(2);
        for name in ["episodic snapshot", "semantic snapshot"] {
            let len = r.len(name, 1)?;
            let base = r.offset();
            let chunk = r.take(len, name)?;
            let net = Network::from_bytes(chunk).map_err(|e| match e {
                GdmError::Format {
                    offset, message, ..
                } => GdmError::Format {
                    what: "model snapshot",
                    offset: base + offset,
                    message: format!("{name}: {message}"),
                },
                other => other,
            })?;
            nets.push(net);
        }
        r.finish()?;
        let semantic = nets.pop().expect("two networks");
        let episodic = nets.pop().expect("two networks");
        let model = Self::from_networks(episodic, semantic, rnat_direction, semantic_input)?;
        if model.lambda() != lambda {
            return Err(r.error_at(
                lambda_at,
                format!(
                    "stored lambda {lambda} disagrees with depths ({})",
                    model.lambda()
                ),
            ));
        }
        Ok(model)
    }
}
