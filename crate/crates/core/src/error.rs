use std::io;

use thiserror::Error;

use crate::gamma_gwr::NeuronId;

#[derive(Debug, Error)]
pub enum GdmError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("neuron {0} does not exist")]
    UnknownNeuron(NeuronId),

    #[error("best-match search needs at least 2 neurons, network has {0}")]
    TooFewNeurons(usize),

    #[error("activity is undefined for negative distance {0}")]
    NegativeDistance(f64),

    #[error("expected {expected} label(s) per sample, got {got}")]
    LabelArity { expected: usize, got: usize },

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("malformed {what} at byte offset {offset}: {message}")]
    Format {
        what: &'static str,
        offset: u64,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GdmError>;
