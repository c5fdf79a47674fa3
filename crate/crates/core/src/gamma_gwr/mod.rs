//! Gamma-GWR: a Grow-When-Required network whose neurons carry temporal
//! context descriptors.
//!
//! Each neuron keeps a weight `w_j` and `K` context vectors `c_{j,k}`. The
//! BMU minimises `alpha_0 |x - w_j|^2 + sum_k alpha_k |C_k - c_{j,k}|^2`,
//! where the global context `C_k` is a leaky merge of the previous BMU's
//! weight and contexts. New neurons are grown only when the activity
//! `exp(-d_b)` is low and the BMU is already habituated. On top of the GWR
//! core the network keeps per-neuron label histograms and directed temporal
//! synapses between consecutive BMUs.

mod hyperparams;
mod network;
mod snapshot;

pub use hyperparams::{EdgeAging, Hyperparams};
pub use network::{
    activity, habituate, BmuMatch, Label, LabelHistogram, Network, Neuron, NeuronId, StepGates,
    StepReport, TemporalContext,
};
pub use snapshot::{NETWORK_FORMAT_VERSION, NETWORK_MAGIC};
