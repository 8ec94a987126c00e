//! Denoising-diffusion generative model over EFD time series: cosine noise
//! schedule, x0-predicting denoiser with trend/seasonality decomposition,
//! hybrid time+frequency training loss, and ancestral sampling.

mod checkpoint;
mod model;
mod sample;
mod schedule;
mod tape;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use model::{fourier_basis, poly_basis, step_embedding, Denoiser, DenoiserModel, ModelConfig, Prediction};
pub use sample::{sample, sample_many};
pub use schedule::{cosine_schedule, forward_noise, DiffusionSchedule, BETA_MAX, COSINE_OFFSET};
pub use tape::{Tape, Tensor, Var};
pub use train::{
    hybrid_loss, hybrid_loss_var, loss_and_grads, train, write_training_log, DftBasis, LogRow,
    TrainConfig, TrainOutput, TrainSample,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss {loss} at step {step} (time {time_term}, freq {freq_term})")]
    NonFiniteLoss { step: usize, loss: f64, time_term: f64, freq_term: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
}
