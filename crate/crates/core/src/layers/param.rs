use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::tensor::{Scalar, Tensor};

/// A learnable tensor and its gradient.
#[derive(Clone, Debug)]
pub struct Param<F> {
    pub value: Tensor<F>,
    pub grad: Tensor<F>,
    /// Whether weight decay applies (false for biases and BN scale/shift).
    pub decay: bool,
}

impl<F: Scalar> Param<F> {
    pub fn new(value: Tensor<F>, decay: bool) -> Self {
        let grad = Tensor::zeros(value.shape().to_vec());
        Param { value, grad, decay }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(F::zero());
    }
}

/// Zero-mean normal samples with variance `2 / fan_in`.
pub fn he_normal<F: Scalar>(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Tensor<F> {
    let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
    Tensor::from_fn(shape.to_vec(), |_| F::lit(dist.sample(rng)))
}
