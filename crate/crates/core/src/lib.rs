//! Neural waveforms with a Fourier-coefficient readout.
//!
//! A small MLP maps an input `x` and a periodic time embedding
//! `(sin t, cos t)` to a scalar. Sampling it over `[-π, π)` gives a waveform
//! `s_x`; the outputs of the model are the Fourier coefficients of `s_x`,
//! which can be requested at any integer frequency below the grid's Nyquist
//! limit, independently of the network architecture.
//!
//! Everything is differentiable through a small reverse-mode tape
//! ([`autodiff`]), which is what [`train`] uses to fit the identity toy task.

pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod csv;
pub mod error;
pub mod fourier;
pub mod gradcheck;
mod kernels;
pub mod model;
pub mod sampler;
pub mod tensor;
pub mod train;

pub use autodiff::{Gradients, Op, OpKind, Tape, Var};
pub use checkpoint::{load_params, save_params, Checkpoint};
pub use config::TrainConfig;
pub use error::{Error, Result, Shape};
pub use fourier::{
    coefficient_matrix, cosine_coefficient, sine_coefficient, CoefficientSet, CoefficientVars, FrequencySet,
};
pub use model::{forward_batch, forward_model, InputEncoding, Layer, ModelParams, ParamVars, TimeEmbedding};
pub use sampler::{evaluate_waveforms, sample_waveform, GridConvention, SampleGrid, Waveform, WaveformVar};
pub use tensor::Tensor;
pub use train::{adam_step, toy_loss, train, train_with_progress, AdamConfig, AdamState, ToyProblem, TrainReport};
