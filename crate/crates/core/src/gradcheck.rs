//! Central-difference verification of the analytic backward pass.
//!
//! The network is rebuilt in 64-bit precision, run in training mode on a
//! random batch against random regression targets, and every parameter entry
//! is perturbed by `±step`. The error reported for a tensor is
//!
//! ```text
//! max|analytic - numeric| / max(tensor scale, FLOOR_FRACTION * network scale)
//! ```
//!
//! where a scale is the largest gradient magnitude (analytic or numeric).
//! Normalizing per tensor keeps tiny individual entries from blowing up the
//! ratio; the network-wide floor covers tensors whose exact gradient is zero
//! (the C1 bias ahead of batch norm), where both sides are pure round-off.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::network::{cross_entropy_loss, mse_loss, Head, Network, NetworkConfig};
use crate::tensor::Tensor;

pub const DEFAULT_THRESHOLD: f64 = 1e-4;
pub const FLOOR_FRACTION: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub batch: usize,
    pub step: f64,
    pub seed: u64,
    pub threshold: f64,
    /// Test hook: scale the analytic gradient of the named tensor by 1.5
    /// before comparing, which must make the check fail.
    pub corrupt: Option<String>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            batch: 2,
            step: 1e-6,
            seed: 7,
            threshold: DEFAULT_THRESHOLD,
            corrupt: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub entries: usize,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub threshold: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.max_rel_error < self.threshold)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `max|analytic - numeric| / max(scale, floor)`, where `scale` is the
/// largest magnitude in either slice.
pub fn relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    let scale = max_abs(analytic).max(max_abs(numeric)).max(floor);
    let diff = analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

struct Problem {
    input: Tensor<f64>,
    targets: Vec<f64>,
    mask: Vec<bool>,
    classes: Vec<usize>,
}

fn loss(net: &mut Network<f64>, p: &Problem) -> Result<(f64, Tensor<f64>)> {
    let out = net.forward(&p.input, Mode::Train)?;
    let shape = out.shape().to_vec();
    match net.config().head {
        Head::Regression => {
            let (l, g) = mse_loss(out.data(), &p.targets, Some(&p.mask))?;
            Ok((l, Tensor::new(shape, g)?))
        }
        Head::Classification => {
            let o = shape[1];
            let b = shape[0] as f64;
            let mut total = 0.0;
            let mut grad = Vec::with_capacity(out.len());
            for (row, &c) in out.data().chunks(o).zip(&p.classes) {
                let (l, g) = cross_entropy_loss(row, c)?;
                total += l / b;
                grad.extend(g.into_iter().map(|v| v / b));
            }
            Ok((total, Tensor::new(shape, grad)?))
        }
    }
}

/// Checks every parameter tensor of a network built from `config`. Dropout is
/// disabled so repeated forward passes see the same function.
pub fn check_network(config: &NetworkConfig, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let config = NetworkConfig {
        dropout_rate: 0.0,
        ..config.clone()
    };
    let mut net = Network::<f64>::new(config.clone(), opts.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    // Non-zero biases so no ReLU sits exactly at its kink.
    for (_, p) in net.params_mut() {
        if !p.decay {
            p.value.data_mut().iter_mut().for_each(|v| *v += rng.gen_range(-0.1..0.1));
        }
    }
    let out_len = config.output_len();
    let problem = Problem {
        input: Tensor::from_fn([opts.batch, config.channels, config.input_h, config.input_w], |_| {
            rng.gen_range(-1.0..1.0)
        }),
        targets: (0..opts.batch * out_len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        mask: (0..opts.batch * out_len).map(|i| i % 5 != 0).collect(),
        classes: (0..opts.batch).map(|_| rng.gen_range(0..config.class_count.max(1))).collect(),
    };
    let (_, grad) = loss(&mut net, &problem)?;
    net.backward(&grad)?;
    let analytic: Vec<(String, Vec<f64>)> = net
        .params()
        .into_iter()
        .map(|(n, p)| {
            let mut g = p.grad.data().to_vec();
            if opts.corrupt.as_deref() == Some(n.as_str()) {
                g.iter_mut().for_each(|v| *v *= 1.5);
            }
            (n, g)
        })
        .collect();
    if let Some(name) = &opts.corrupt {
        if !analytic.iter().any(|(n, _)| n == name) {
            return Err(Error::config(format!("no parameter tensor named {name}")));
        }
    }

    let mut numeric_all = Vec::with_capacity(analytic.len());
    for (k, (_, analytic)) in analytic.iter().enumerate() {
        let mut numeric = Vec::with_capacity(analytic.len());
        for i in 0..analytic.len() {
            let original = net.params_mut()[k].1.value.data()[i];
            net.params_mut()[k].1.value.data_mut()[i] = original + opts.step;
            let (plus, _) = loss(&mut net, &problem)?;
            net.params_mut()[k].1.value.data_mut()[i] = original - opts.step;
            let (minus, _) = loss(&mut net, &problem)?;
            net.params_mut()[k].1.value.data_mut()[i] = original;
            numeric.push((plus - minus) / (2.0 * opts.step));
        }
        numeric_all.push(numeric);
    }
    let network_scale = analytic
        .iter()
        .map(|(_, a)| max_abs(a))
        .chain(numeric_all.iter().map(|n| max_abs(n)))
        .fold(0.0, f64::max);
    let tensors = analytic
        .into_iter()
        .zip(numeric_all)
        .map(|((name, analytic), numeric)| TensorCheck {
            name,
            entries: numeric.len(),
            max_rel_error: relative_error(&analytic, &numeric, FLOOR_FRACTION * network_scale),
        })
        .collect();
    Ok(GradCheckReport {
        tensors,
        threshold: opts.threshold,
    })
}
