//! Layer building blocks with hand-paired forward and backward passes.
//!
//! Layers cache whatever their backward pass needs when run in
//! [`Mode::Train`]; [`Mode::Infer`] leaves them untouched so a network can be
//! shared read-only across threads.

mod activation;
mod batchnorm;
mod conv;
mod dense;
mod dropout;
mod param;
pub mod rcl;

pub use activation::Activation;
pub use batchnorm::BatchNorm;
pub use conv::ConvLayer;
pub use dense::DenseLayer;
pub use dropout::Dropout;
pub use param::{he_normal, Param};
pub use rcl::{Rcl, RclParams};

/// Whether a forward pass is part of training.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}
