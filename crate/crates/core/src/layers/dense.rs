use rand::Rng;

use super::{he_normal, Mode, Param};
use crate::error::{Error, Result};
use crate::tensor::{dense, dense_backward, Scalar, Tensor};

/// Fully connected layer with a linear activation.
#[derive(Clone, Debug)]
pub struct DenseLayer<F> {
    pub weights: Param<F>,
    pub bias: Param<F>,
    input: Option<Tensor<F>>,
}

impl<F: Scalar> DenseLayer<F> {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        DenseLayer {
            weights: Param::new(he_normal(&[out_dim, in_dim], in_dim, rng), true),
            bias: Param::new(Tensor::zeros([out_dim]), false),
            input: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let y = self.infer(x)?;
        if mode == Mode::Train {
            self.input = Some(x.clone());
        }
        Ok(y)
    }

    pub fn infer(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        dense(x, &self.weights.value, &self.bias.value)
    }

    pub fn backward(&mut self, grad: &Tensor<F>) -> Result<Tensor<F>> {
        let x = self
            .input
            .as_ref()
            .ok_or_else(|| Error::State("dense backward without a training forward".into()))?;
        let g = dense_backward(x, &self.weights.value, grad)?;
        self.weights.grad.add_assign(&g.weights)?;
        self.bias.grad.add_assign(&g.bias)?;
        Ok(g.input)
    }
}
