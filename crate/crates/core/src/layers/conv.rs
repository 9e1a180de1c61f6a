use rand::Rng;

use super::{he_normal, Mode, Param};
use crate::error::{Error, Result};
use crate::tensor::{conv2d, conv2d_backward, ConvSpec, Scalar, Tensor};

/// Feed-forward convolution with bias.
#[derive(Clone, Debug)]
pub struct ConvLayer<F> {
    pub kernels: Param<F>,
    pub bias: Param<F>,
    pub spec: ConvSpec,
    input: Option<Tensor<F>>,
}

impl<F: Scalar> ConvLayer<F> {
    pub fn new(in_maps: usize, out_maps: usize, spec: ConvSpec, rng: &mut impl Rng) -> Self {
        let shape = [out_maps, in_maps, spec.kernel_h, spec.kernel_w];
        let fan_in = in_maps * spec.kernel_h * spec.kernel_w;
        ConvLayer {
            kernels: Param::new(he_normal(&shape, fan_in, rng), true),
            bias: Param::new(Tensor::zeros([out_maps]), false),
            spec,
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
        conv2d(x, &self.kernels.value, Some(&self.bias.value), &self.spec)
    }

    pub fn backward(&mut self, grad: &Tensor<F>) -> Result<Tensor<F>> {
        let x = self
            .input
            .as_ref()
            .ok_or_else(|| Error::State("conv backward without a training forward".into()))?;
        let g = conv2d_backward(x, &self.kernels.value, grad, &self.spec)?;
        self.kernels.grad.add_assign(&g.kernels)?;
        self.bias.grad.add_assign(&g.bias)?;
        Ok(g.input)
    }
}
