//! Growing dual-memory continual learning.

mod codec;
pub mod error;
pub mod gamma_gwr;

pub use error::{GdmError, Result};
pub mod data_io;
pub mod dual_memory;
pub mod harness;
