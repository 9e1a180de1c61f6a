use super::{Mode, Param};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.99;

/// Per-map batch normalization over batch × spatial positions.
///
/// Running statistics follow `running = momentum * running + (1 - momentum) * batch`;
/// the running variance uses the unbiased batch estimate.
#[derive(Clone, Debug)]
pub struct BatchNorm<F> {
    pub gamma: Param<F>,
    pub beta: Param<F>,
    pub running_mean: Tensor<F>,
    pub running_var: Tensor<F>,
    pub epsilon: F,
    pub momentum: F,
    cache: Option<Cache<F>>,
}

#[derive(Clone, Debug)]
struct Cache<F> {
    xhat: Tensor<F>,
    inv_std: Vec<F>,
}

impl<F: Scalar> BatchNorm<F> {
    pub fn new(maps: usize) -> Self {
        BatchNorm {
            gamma: Param::new(Tensor::full([maps], F::one()), false),
            beta: Param::new(Tensor::zeros([maps]), false),
            running_mean: Tensor::zeros([maps]),
            running_var: Tensor::full([maps], F::one()),
            epsilon: F::lit(DEFAULT_EPSILON),
            momentum: F::lit(DEFAULT_MOMENTUM),
            cache: None,
        }
    }

    pub fn maps(&self) -> usize {
        self.gamma.value.len()
    }

    fn dims(&self, x: &Tensor<F>) -> Result<(usize, usize, usize)> {
        let (b, c, h, w) = x.as_batch("batchnorm")?;
        if x.rank() != 4 {
            return Err(Error::dim("batchnorm", "B×K×H×W", format!("{:?}", x.shape())));
        }
        if c != self.maps() {
            return Err(Error::dim("batchnorm", format!("{} maps", self.maps()), c));
        }
        Ok((b, c, h * w))
    }

    pub fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        if mode == Mode::Infer {
            return self.infer(x);
        }
        let (b, c, plane) = self.dims(x)?;
        if b < 2 {
            return Err(Error::config(
                "batch normalization in training mode needs a batch of at least 2",
            ));
        }
        let n = F::from_usize(b * plane).unwrap();
        let mut xhat = Tensor::zeros(x.shape().to_vec());
        let mut out = Tensor::zeros(x.shape().to_vec());
        let mut inv_std = vec![F::zero(); c];
        let keep = self.momentum;
        let blend = F::one() - keep;
        for k in 0..c {
            let values = || (0..b).flat_map(move |s| (0..plane).map(move |p| (s * c + k) * plane + p));
            let mean = values().map(|i| x.data()[i]).sum::<F>() / n;
            let var = values().map(|i| (x.data()[i] - mean).powi(2)).sum::<F>() / n;
            let istd = F::one() / (var + self.epsilon).sqrt();
            inv_std[k] = istd;
            let (g, bt) = (self.gamma.value.data()[k], self.beta.value.data()[k]);
            for i in values() {
                let xh = (x.data()[i] - mean) * istd;
                xhat.data_mut()[i] = xh;
                out.data_mut()[i] = g * xh + bt;
            }
            let unbiased = var * n / (n - F::one());
            let rm = &mut self.running_mean.data_mut()[k];
            *rm = keep * *rm + blend * mean;
            let rv = &mut self.running_var.data_mut()[k];
            *rv = keep * *rv + blend * unbiased;
        }
        self.cache = Some(Cache { xhat, inv_std });
        Ok(out)
    }

    pub fn infer(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let (_, c, plane) = self.dims(x)?;
        let mut out = x.clone();
        for (chunk_idx, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
            let k = chunk_idx % c;
            let scale = self.gamma.value.data()[k] / (self.running_var.data()[k] + self.epsilon).sqrt();
            let shift = self.beta.value.data()[k] - scale * self.running_mean.data()[k];
            chunk.iter_mut().for_each(|v| *v = scale * *v + shift);
        }
        Ok(out)
    }

    /// Input gradient; gamma/beta gradients are accumulated.
    pub fn backward(&mut self, grad: &Tensor<F>) -> Result<Tensor<F>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("batchnorm backward without a training forward".into()))?;
        grad.same_shape(&cache.xhat, "batchnorm backward")?;
        let (b, c, plane) = self.dims(grad)?;
        let n = F::from_usize(b * plane).unwrap();
        let mut dx = Tensor::zeros(grad.shape().to_vec());
        for k in 0..c {
            let idx = || (0..b).flat_map(move |s| (0..plane).map(move |p| (s * c + k) * plane + p));
            let mut sum_g = F::zero();
            let mut sum_gx = F::zero();
            for i in idx() {
                sum_g += grad.data()[i];
                sum_gx += grad.data()[i] * cache.xhat.data()[i];
            }
            self.gamma.grad.data_mut()[k] += sum_gx;
            self.beta.grad.data_mut()[k] += sum_g;
            let g = self.gamma.value.data()[k];
            let scale = g * cache.inv_std[k] / n;
            for i in idx() {
                dx.data_mut()[i] = scale * (n * grad.data()[i] - sum_g - cache.xhat.data()[i] * sum_gx);
            }
        }
        Ok(dx)
    }
}
