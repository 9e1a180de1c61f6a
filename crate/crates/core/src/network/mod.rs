//! The full model: C1 → pool → (RCL → pool)×m → dropout → dense head.

pub mod checkpoint;
mod config;
pub mod loss;

pub use config::{Head, LayerShape, NetworkConfig, PSPI_LEVELS};
pub use loss::{cross_entropy_loss, mse_loss, softmax};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::{Activation, BatchNorm, ConvLayer, DenseLayer, Dropout, Mode, Param, Rcl};
use crate::tensor::{maxpool2d, maxpool2d_backward, Scalar, Tensor};

#[derive(Clone, Debug)]
pub struct Network<F> {
    config: NetworkConfig,
    pub c1: ConvLayer<F>,
    pub bn1: Option<BatchNorm<F>>,
    pub rcls: Vec<Rcl<F>>,
    pub dropout: Dropout,
    pub dense: DenseLayer<F>,
    cache: Option<Cache<F>>,
}

#[derive(Clone, Debug)]
struct Cache<F> {
    c1_pre: Tensor<F>,
    /// Argmax and input shape of every pool, in forward order.
    pools: Vec<(Vec<usize>, Vec<usize>)>,
    pooled_shape: Vec<usize>,
}

impl<F: Scalar> Network<F> {
    /// Builds the stack with He-normal weights and zero biases; the same
    /// config and seed always give the same network.
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c1 = ConvLayer::new(config.channels, config.maps, NetworkConfig::first_conv(), &mut rng);
        let bn1 = config.batch_norm.then(|| BatchNorm::new(config.maps));
        let rcls = (0..config.rcl_count)
            .map(|_| Rcl::new(config.maps, config.maps, config.iterations, config.batch_norm, &mut rng))
            .collect();
        let dense = DenseLayer::new(config.feature_count()?, config.output_len(), &mut rng);
        let dropout = Dropout::new(config.dropout_rate, seed ^ 0x5eed_d50f)?;
        Ok(Network {
            config,
            c1,
            bn1,
            rcls,
            dropout,
            dense,
            cache: None,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    fn check_input(&self, x: &Tensor<F>) -> Result<usize> {
        let c = &self.config;
        match *x.shape() {
            [b, ch, h, w] if ch == c.channels && h == c.input_h && w == c.input_w => Ok(b),
            _ => Err(Error::dim(
                "network input",
                format!("B×{}×{}×{}", c.channels, c.input_h, c.input_w),
                format!("{:?}", x.shape()),
            )),
        }
    }

    /// Batched forward pass over B×C×H×W windows, returning B×O outputs
    /// (raw predictions for regression, probabilities for classification).
    /// Training mode caches what [`Network::backward`] needs.
    pub fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        if mode == Mode::Infer {
            return self.predict(x);
        }
        let batch = self.check_input(x)?;
        let mut h = self.c1.forward(x, mode)?;
        if let Some(bn) = &mut self.bn1 {
            h = bn.forward(&h, mode)?;
        }
        let c1_pre = h;
        let mut pools = Vec::with_capacity(self.rcls.len() + 1);
        let mut pooled = {
            let act = Activation::Relu.apply(&c1_pre);
            let p = maxpool2d(&act, &self.config.pool_specs[0])?;
            pools.push((p.argmax, act.shape().to_vec()));
            p.output
        };
        for (rcl, spec) in self.rcls.iter_mut().zip(&self.config.pool_specs[1..]) {
            let h = rcl.forward(&pooled, mode)?;
            let p = maxpool2d(&h, spec)?;
            pools.push((p.argmax, h.shape().to_vec()));
            pooled = p.output;
        }
        let pooled_shape = pooled.shape().to_vec();
        let flat = pooled.reshape([batch, self.dense.weights.value.shape()[1]])?;
        let dropped = self.dropout.forward(&flat, mode);
        let out = self.dense.forward(&dropped, mode)?;
        self.cache = Some(Cache {
            c1_pre,
            pools,
            pooled_shape,
        });
        Ok(self.head(out))
    }

    /// Inference-mode forward pass; takes `&self` so one network can serve
    /// many threads.
    pub fn predict(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let batch = self.check_input(x)?;
        let mut h = self.c1.infer(x)?;
        if let Some(bn) = &self.bn1 {
            h = bn.infer(&h)?;
        }
        let mut pooled = maxpool2d(&Activation::Relu.apply(&h), &self.config.pool_specs[0])?.output;
        for (rcl, spec) in self.rcls.iter().zip(&self.config.pool_specs[1..]) {
            pooled = maxpool2d(&rcl.infer(&pooled)?, spec)?.output;
        }
        let flat = pooled.reshape([batch, self.dense.weights.value.shape()[1]])?;
        Ok(self.head(self.dense.infer(&flat)?))
    }

    /// Predictions for a single 3×H×W window.
    pub fn predict_window(&self, window: &Tensor<F>) -> Result<Vec<F>> {
        let mut shape = vec![1];
        shape.extend_from_slice(window.shape());
        Ok(self.predict(&window.clone().reshape(shape)?)?.into_data())
    }

    fn head(&self, logits: Tensor<F>) -> Tensor<F> {
        match self.config.head {
            Head::Regression => logits,
            Head::Classification => {
                let o = self.config.output_len();
                let shape = logits.shape().to_vec();
                let probs = logits.data().chunks(o).flat_map(softmax).collect();
                Tensor::new(shape, probs).expect("same extents")
            }
        }
    }

    /// Reverse pass from the gradient of the loss with respect to the head
    /// output (B×O). For the classification head the gradient is taken with
    /// respect to the pre-softmax logits, i.e. `probs - onehot` for
    /// cross-entropy. Parameter gradients are overwritten.
    pub fn backward(&mut self, grad: &Tensor<F>) -> Result<()> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("network backward without a training forward".into()))?;
        let result = self.backward_with(&cache, grad);
        self.cache = Some(cache);
        result
    }

    fn backward_with(&mut self, cache: &Cache<F>, grad: &Tensor<F>) -> Result<()> {
        self.zero_grad();
        let g = self.dense.backward(grad)?;
        let g = self.dropout.backward(&g)?;
        let mut g = g.reshape(cache.pooled_shape.clone())?;
        for (i, rcl) in self.rcls.iter_mut().enumerate().rev() {
            let (argmax, shape) = &cache.pools[i + 1];
            g = maxpool2d_backward(&g, argmax, shape)?;
            g = rcl.backward(&g)?;
        }
        let (argmax, shape) = &cache.pools[0];
        g = maxpool2d_backward(&g, argmax, shape)?;
        Activation::Relu.backprop(&cache.c1_pre, &mut g);
        if let Some(bn) = &mut self.bn1 {
            g = bn.backward(&g)?;
        }
        self.c1.backward(&g)?;
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(|(_, p)| p.zero_grad());
    }

    /// Every learnable tensor, in declaration order.
    pub fn params(&self) -> Vec<(String, &Param<F>)> {
        let mut out = vec![
            ("c1.kernels".to_string(), &self.c1.kernels),
            ("c1.bias".to_string(), &self.c1.bias),
        ];
        if let Some(bn) = &self.bn1 {
            out.push(("c1.bn.gamma".into(), &bn.gamma));
            out.push(("c1.bn.beta".into(), &bn.beta));
        }
        for (i, rcl) in self.rcls.iter().enumerate() {
            let n = format!("rcl{}", i + 2);
            out.push((format!("{n}.ff"), &rcl.ff));
            out.push((format!("{n}.rec"), &rcl.rec));
            out.push((format!("{n}.bias"), &rcl.bias));
            if let Some(bn) = &rcl.bn {
                out.push((format!("{n}.bn.gamma"), &bn.gamma));
                out.push((format!("{n}.bn.beta"), &bn.beta));
            }
        }
        out.push(("dense.weights".into(), &self.dense.weights));
        out.push(("dense.bias".into(), &self.dense.bias));
        out
    }

    /// Mutable counterpart of [`Network::params`], same order.
    pub fn params_mut(&mut self) -> Vec<(String, &mut Param<F>)> {
        let mut out = vec![
            ("c1.kernels".to_string(), &mut self.c1.kernels),
            ("c1.bias".to_string(), &mut self.c1.bias),
        ];
        if let Some(bn) = &mut self.bn1 {
            out.push(("c1.bn.gamma".into(), &mut bn.gamma));
            out.push(("c1.bn.beta".into(), &mut bn.beta));
        }
        for (i, rcl) in self.rcls.iter_mut().enumerate() {
            let n = format!("rcl{}", i + 2);
            out.push((format!("{n}.ff"), &mut rcl.ff));
            out.push((format!("{n}.rec"), &mut rcl.rec));
            out.push((format!("{n}.bias"), &mut rcl.bias));
            if let Some(bn) = &mut rcl.bn {
                out.push((format!("{n}.bn.gamma"), &mut bn.gamma));
                out.push((format!("{n}.bn.beta"), &mut bn.beta));
            }
        }
        out.push(("dense.weights".into(), &mut self.dense.weights));
        out.push(("dense.bias".into(), &mut self.dense.bias));
        out
    }

    /// Parameters followed by batch-norm running statistics: everything a
    /// checkpoint stores.
    pub fn state_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>)> {
        let mut params: Vec<(String, &mut Tensor<F>)> = Vec::new();
        let mut stats: Vec<(String, &mut Tensor<F>)> = Vec::new();
        fn split<'a, F>(
            name: &str,
            bn: &'a mut BatchNorm<F>,
            params: &mut Vec<(String, &'a mut Tensor<F>)>,
            stats: &mut Vec<(String, &'a mut Tensor<F>)>,
        ) {
            let BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
                ..
            } = bn;
            params.push((format!("{name}.bn.gamma"), &mut gamma.value));
            params.push((format!("{name}.bn.beta"), &mut beta.value));
            stats.push((format!("{name}.bn.running_mean"), running_mean));
            stats.push((format!("{name}.bn.running_var"), running_var));
        }
        params.push(("c1.kernels".into(), &mut self.c1.kernels.value));
        params.push(("c1.bias".into(), &mut self.c1.bias.value));
        if let Some(bn) = &mut self.bn1 {
            split("c1", bn, &mut params, &mut stats);
        }
        for (i, rcl) in self.rcls.iter_mut().enumerate() {
            let n = format!("rcl{}", i + 2);
            params.push((format!("{n}.ff"), &mut rcl.ff.value));
            params.push((format!("{n}.rec"), &mut rcl.rec.value));
            params.push((format!("{n}.bias"), &mut rcl.bias.value));
            if let Some(bn) = &mut rcl.bn {
                split(&n, bn, &mut params, &mut stats);
            }
        }
        params.push(("dense.weights".into(), &mut self.dense.weights.value));
        params.push(("dense.bias".into(), &mut self.dense.bias.value));
        params.extend(stats);
        params
    }

    pub fn state_tensors(&self) -> Vec<(String, Tensor<F>)> {
        let mut out: Vec<(String, Tensor<F>)> =
            self.params().into_iter().map(|(n, p)| (n, p.value.clone())).collect();
        let bns = self.bn1.iter().map(|bn| ("c1".to_string(), bn)).chain(
            self.rcls
                .iter()
                .enumerate()
                .filter_map(|(i, r)| r.bn.as_ref().map(|bn| (format!("rcl{}", i + 2), bn))),
        );
        for (n, bn) in bns {
            out.push((format!("{n}.bn.running_mean"), bn.running_mean.clone()));
            out.push((format!("{n}.bn.running_var"), bn.running_var.clone()));
        }
        out
    }

    /// Restores tensors captured by [`Network::state_tensors`].
    pub fn set_state(&mut self, state: &[(String, Tensor<F>)]) -> Result<()> {
        let mut slots = self.state_tensors_mut();
        if slots.len() != state.len() {
            return Err(Error::dim("Network::set_state", slots.len(), state.len()));
        }
        for ((name, dst), (src_name, src)) in slots.iter_mut().zip(state) {
            if name != src_name || dst.shape() != src.shape() {
                return Err(Error::dim(
                    "Network::set_state",
                    format!("{name} {:?}", dst.shape()),
                    format!("{src_name} {:?}", src.shape()),
                ));
            }
            **dst = src.clone();
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.value.len()).sum()
    }

    /// Same weights in another precision.
    pub fn cast<G: Scalar>(&self, seed: u64) -> Result<Network<G>> {
        let mut out = Network::<G>::new(self.config.clone(), seed)?;
        let src = self.state_tensors();
        for ((_, dst), (_, s)) in out.state_tensors_mut().into_iter().zip(src) {
            *dst = s.cast();
        }
        Ok(out)
    }
}
