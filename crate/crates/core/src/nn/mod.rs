//! Small coordinate network: positional encoding, MLP forward/backward,
//! AdamW and a cosine warm-restart schedule.

mod adamw;
pub mod checkpoint;
mod encoding;
mod mlp;
mod real;
mod schedule;

pub use adamw::AdamW;
pub use checkpoint::{read_weights, write_weights};
pub use encoding::PosEncConfig;
pub use mlp::{architecture, backward, forward, MlpParams, Workspace};
pub use real::Real;
pub use schedule::{cosine_warm_restart_lr, LrSchedule};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite gradient at parameter {0}")]
    NonFiniteGradient(usize),
    #[error("bad weight file: {0}")]
    Checkpoint(String),
}

pub const HIDDEN_WIDTH: usize = 64;
pub const HIDDEN_LAYERS: usize = 6;
/// (α_v, β_v, α_m, β_m)
pub const OUTPUT_DIM: usize = 4;
