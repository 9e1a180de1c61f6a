//! Recurrent convolutional network for frame-level regression over video
//! frame-vector sequences.
//!
//! Frames are flattened into per-channel vectors, stacked into causal
//! sliding windows of `H` rows, and fed through a convolution followed by
//! recurrent convolutional layers (RCLs) and max pooling. A linear head
//! predicts one value per window row; the last row is the estimate for the
//! newest frame.
//!
//! Module map:
//! - [`tensor`]: tensors and the convolution, pooling and dense kernels
//! - [`layers`]: RCL, batch normalization, dropout, activations
//! - [`network`]: the full stack, losses, checkpoints
//! - [`training`]: momentum SGD, plateau annealing, the training loop
//! - [`datapipe`]: sequences, windows, weighted sampling, synthetic data
//! - [`evaluation`]: MSE/PCC, per-frame prediction, LOSO, baselines, throughput
//! - [`gradcheck`]: finite-difference verification of every backward pass
//! - [`cli`]: the command-line driver behind the `rcnn` binary

pub mod cli;
pub mod datapipe;
pub mod error;
pub mod evaluation;
pub mod gradcheck;
pub mod layers;
pub mod network;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor};
