//! Clustered random-walk sequences standing in for smooth object videos.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{FrameRecord, SequenceDataset};
use crate::error::{GdmError, Result};
use crate::gamma_gwr::Label;

/// Generator parameters.
///
/// Category centres are drawn from `N(0, category_spread^2)` per dimension,
/// instance centres scatter around them with `instance_spread`. Each
/// sequence is an AR(1) walk around its instance centre with step size
/// `drift` and memory `persistence`, plus i.i.d. `noise` per frame.
/// Sequence `s` of every instance is recorded in session `s + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub n_categories: usize,
    pub instances_per_category: usize,
    pub sequences_per_instance: usize,
    pub frames_per_sequence: usize,
    pub dim: usize,
    pub instance_spread: f64,
    pub category_spread: f64,
    pub drift: f64,
    pub persistence: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// 10 categories of 5 instances over 11 sessions.
    fn default() -> Self {
        Self {
            n_categories: 10,
            instances_per_category: 5,
            sequences_per_instance: 11,
            frames_per_sequence: 12,
            dim: 16,
            instance_spread: 0.35,
            category_spread: 0.6,
            drift: 0.12,
            persistence: 0.9,
            noise: 0.25,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GdmError::InvalidHyperparams(format!("synthetic spec: {m}")));
        let counts = [
            self.n_categories,
            self.instances_per_category,
            self.sequences_per_instance,
            self.frames_per_sequence,
            self.dim,
        ];
        if counts.contains(&0) {
            return bad("all counts must be at least 1");
        }
        if u32::try_from(self.n_categories * self.instances_per_category).is_err()
            || u32::try_from(self.frames_per_sequence).is_err()
        {
            return bad("counts exceed the 32-bit label range");
        }
        let spreads = [
            self.instance_spread,
            self.category_spread,
            self.drift,
            self.noise,
        ];
        if spreads.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad("spreads, drift and noise must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.persistence) {
            return bad("persistence must lie in [0, 1)");
        }
        Ok(())
    }
}

fn gaussian(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("validated spread")
}

/// Features are rounded to `f32` so binary files round-trip exactly.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SequenceDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dim;
    let cat = gaussian(spec.category_spread);
    let inst = gaussian(spec.instance_spread);
    let step = gaussian(spec.drift);
    let noise = gaussian(spec.noise);
    let rho = spec.persistence;
    let stationary = gaussian(spec.drift / (1.0 - rho * rho).sqrt());

    let mut instances: Vec<(Label, Vec<f64>)> = Vec::new();
    for c in 0..spec.n_categories {
        let centre: Vec<f64> = (0..d).map(|_| cat.sample(&mut rng)).collect();
        for _ in 0..spec.instances_per_category {
            let v = centre.iter().map(|m| m + inst.sample(&mut rng)).collect();
            instances.push((c as Label, v));
        }
    }

    let mut frames = Vec::with_capacity(
        instances.len() * spec.sequences_per_instance * spec.frames_per_sequence,
    );
    let mut sequence = 0u32;
    for s in 0..spec.sequences_per_instance {
        for (i, (category, centre)) in instances.iter().enumerate() {
            let mut offset: Vec<f64> = (0..d).map(|_| stationary.sample(&mut rng)).collect();
            for t in 0..spec.frames_per_sequence {
                if t > 0 {
                    for o in &mut offset {
                        *o = rho * *o + step.sample(&mut rng);
                    }
                }
                let features = centre
                    .iter()
                    .zip(&offset)
                    .map(|(m, o)| (m + o + noise.sample(&mut rng)) as f32 as f64)
                    .collect();
                frames.push(FrameRecord {
                    session: s as u32 + 1,
                    sequence,
                    frame: t as u32,
                    instance: i as Label,
                    category: *category,
                    features,
                });
            }
            sequence += 1;
        }
    }
    SequenceDataset::new(d, frames)
}
