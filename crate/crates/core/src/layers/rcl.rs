//! Recurrent convolutional layer.
//!
//! A 1×1 feed-forward convolution of the layer input is computed once,
//! batch-normalized, and then re-enters every iteration of a shared 3×3
//! recurrent convolution:
//!
//! ```text
//! z    = BN(conv1x1(u))
//! x(0) = σ(z)
//! x(t) = σ(z + conv3x3(x(t-1)) + b)      t = 1..T
//! ```
//!
//! Unrolled over its `T + 1` steps the layer is a feed-forward stack whose
//! 3×3 weights are tied, so backpropagation through time sums the per-step
//! gradients of every shared tensor.

use std::collections::BTreeSet;

use rand::Rng;

use super::{he_normal, Activation, BatchNorm, Mode, Param};
use crate::error::{Error, Result};
use crate::tensor::{conv2d, conv2d_backward, ConvSpec, Scalar, Tensor};

/// Raw parameter tensors of an RCL.
#[derive(Clone, Debug)]
pub struct RclParams<F> {
    /// K×C×1×1
    pub ff_kernels: Tensor<F>,
    /// K×K×3×3, shared across all iterations.
    pub rec_kernels: Tensor<F>,
    /// K
    pub bias: Tensor<F>,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct Rcl<F> {
    pub ff: Param<F>,
    pub rec: Param<F>,
    pub bias: Param<F>,
    pub iterations: usize,
    pub bn: Option<BatchNorm<F>>,
    pub activation: Activation,
    cache: Option<Cache<F>>,
}

#[derive(Clone, Debug)]
struct Cache<F> {
    input: Tensor<F>,
    /// Pre-activations a(0..=T); a(0) is the normalized feed-forward term.
    pre: Vec<Tensor<F>>,
    /// States x(0..=T).
    states: Vec<Tensor<F>>,
}

pub(crate) fn pointwise() -> ConvSpec {
    ConvSpec::same(1)
}

pub(crate) fn recurrent() -> ConvSpec {
    ConvSpec::same(3)
}

impl<F: Scalar> Rcl<F> {
    /// He-initialized layer with zero bias.
    pub fn new(in_maps: usize, maps: usize, iterations: usize, batch_norm: bool, rng: &mut impl Rng) -> Self {
        let params = RclParams {
            ff_kernels: he_normal(&[maps, in_maps, 1, 1], in_maps, rng),
            rec_kernels: he_normal(&[maps, maps, 3, 3], maps * 9, rng),
            bias: Tensor::zeros([maps]),
            iterations,
        };
        let bn = batch_norm.then(|| BatchNorm::new(maps));
        Self::from_params(params, bn, Activation::Relu).expect("consistent shapes")
    }

    pub fn from_params(params: RclParams<F>, bn: Option<BatchNorm<F>>, activation: Activation) -> Result<Self> {
        let &[k, _, 1, 1] = params.ff_kernels.shape() else {
            return Err(Error::dim(
                "rcl feed-forward kernels",
                "K×C×1×1",
                format!("{:?}", params.ff_kernels.shape()),
            ));
        };
        if params.rec_kernels.shape() != [k, k, 3, 3] {
            return Err(Error::dim(
                "rcl recurrent kernels",
                format!("[{k}, {k}, 3, 3]"),
                format!("{:?}", params.rec_kernels.shape()),
            ));
        }
        if params.bias.shape() != [k] {
            return Err(Error::dim("rcl bias", k, params.bias.len()));
        }
        if let Some(bn) = &bn {
            if bn.maps() != k {
                return Err(Error::dim("rcl batchnorm", k, bn.maps()));
            }
        }
        Ok(Rcl {
            ff: Param::new(params.ff_kernels, true),
            rec: Param::new(params.rec_kernels, true),
            bias: Param::new(params.bias, false),
            iterations: params.iterations,
            bn,
            activation,
            cache: None,
        })
    }

    pub fn params(&self) -> RclParams<F> {
        RclParams {
            ff_kernels: self.ff.value.clone(),
            rec_kernels: self.rec.value.clone(),
            bias: self.bias.value.clone(),
            iterations: self.iterations,
        }
    }

    pub fn maps(&self) -> usize {
        self.bias.value.len()
    }

    pub fn forward(&mut self, u: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let ff = conv2d(u, &self.ff.value, None, &pointwise())?;
        let z = match &mut self.bn {
            Some(bn) => bn.forward(&ff, mode)?,
            None => ff,
        };
        let (pre, states) = self.iterate(z)?;
        let out = states.last().expect("at least x(0)").clone();
        if mode == Mode::Train {
            self.cache = Some(Cache {
                input: u.clone(),
                pre,
                states,
            });
        }
        Ok(out)
    }

    pub fn infer(&self, u: &Tensor<F>) -> Result<Tensor<F>> {
        let ff = conv2d(u, &self.ff.value, None, &pointwise())?;
        let z = match &self.bn {
            Some(bn) => bn.infer(&ff)?,
            None => ff,
        };
        let (_, mut states) = self.iterate(z)?;
        Ok(states.pop().expect("at least x(0)"))
    }

    fn iterate(&self, z: Tensor<F>) -> Result<(Vec<Tensor<F>>, Vec<Tensor<F>>)> {
        let mut states = vec![self.activation.apply(&z)];
        let mut pre = Vec::with_capacity(self.iterations + 1);
        for _ in 0..self.iterations {
            let prev = states.last().expect("x(t-1)");
            let mut a = conv2d(prev, &self.rec.value, Some(&self.bias.value), &recurrent())?;
            a.add_assign(&z)?;
            states.push(self.activation.apply(&a));
            pre.push(a);
        }
        pre.insert(0, z);
        Ok((pre, states))
    }

    /// States x(0..=T) from the last training forward.
    pub fn cached_states(&self) -> Option<&[Tensor<F>]> {
        self.cache.as_ref().map(|c| c.states.as_slice())
    }

    /// Backpropagation through time. Accumulates the summed per-step
    /// gradients of the shared tensors and returns the input gradient.
    pub fn backward(&mut self, grad: &Tensor<F>) -> Result<Tensor<F>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("rcl backward without a training forward".into()))?;
        let mut g = grad.clone();
        let mut dz = Tensor::zeros(cache.pre[0].shape().to_vec());
        for t in (1..=self.iterations).rev() {
            self.activation.backprop(&cache.pre[t], &mut g);
            dz.add_assign(&g)?;
            let step = conv2d_backward(&cache.states[t - 1], &self.rec.value, &g, &recurrent())?;
            self.rec.grad.add_assign(&step.kernels)?;
            self.bias.grad.add_assign(&step.bias)?;
            g = step.input;
        }
        self.activation.backprop(&cache.pre[0], &mut g);
        dz.add_assign(&g)?;
        let dff = match &mut self.bn {
            Some(bn) => bn.backward(&dz)?,
            None => dz,
        };
        let ff = conv2d_backward(&cache.input, &self.ff.value, &dff, &pointwise())?;
        self.ff.grad.add_assign(&ff.kernels)?;
        Ok(ff.input)
    }
}

/// Node of an RCL's unrolled computation graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Node {
    Input,
    /// Feature map FM(t), the state x(t).
    FeatureMap(usize),
}

/// Edges of the unrolled graph of an RCL with `iterations` steps, as built by
/// [`Rcl::forward`]: the feed-forward path into every feature map and one
/// recurrent edge between consecutive maps.
pub fn unrolled_edges(iterations: usize) -> Vec<(Node, Node)> {
    let mut edges = vec![(Node::Input, Node::FeatureMap(0))];
    for t in 1..=iterations {
        edges.push((Node::Input, Node::FeatureMap(t)));
        edges.push((Node::FeatureMap(t - 1), Node::FeatureMap(t)));
    }
    edges
}

/// Distinct lengths of all paths from `from` to `to` in a DAG.
pub fn path_lengths(edges: &[(Node, Node)], from: Node, to: Node) -> BTreeSet<usize> {
    fn walk(edges: &[(Node, Node)], at: Node, to: Node, depth: usize, out: &mut BTreeSet<usize>) {
        if at == to {
            out.insert(depth);
            return;
        }
        for &(a, b) in edges {
            if a == at {
                walk(edges, b, to, depth + 1, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(edges, from, to, 0, &mut out);
    out
}
