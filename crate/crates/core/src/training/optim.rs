use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::Param;
use crate::tensor::{Scalar, Tensor};

/// Largest number of ÷10 learning-rate anneals.
pub const MAX_ANNEALS: u32 = 3;

/// Momentum SGD state plus the plateau-annealing bookkeeping.
///
/// The learning rate is always `initial_rate / 10^anneal_count`, computed
/// from the initial rate rather than by repeated division, so after three
/// anneals it equals `initial_rate / 1000` exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimState<F> {
    pub learning_rate: f64,
    pub initial_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    #[serde(skip)]
    pub velocity: Vec<Tensor<F>>,
    pub anneal_count: u32,
    pub patience: usize,
    pub min_rel_improve: f64,
    /// Index into the validation history where the current plateau window
    /// starts; moved to the newest epoch after every anneal.
    pub window_start: usize,
}

/// What [`maybe_anneal`] decided.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnnealOutcome {
    Continue,
    Annealed,
    /// Plateau with the anneal cap already reached: time to stop.
    Exhausted,
}

impl<F: Scalar> OptimState<F> {
    pub fn new(initial_rate: f64, momentum: f64, weight_decay: f64) -> Result<Self> {
        if !(initial_rate >= 0.0 && initial_rate.is_finite()) {
            return Err(Error::config("learning rate must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::config("momentum must be in [0, 1)"));
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(Error::config("weight decay must be finite and >= 0"));
        }
        Ok(OptimState {
            learning_rate: initial_rate,
            initial_rate,
            momentum,
            weight_decay,
            velocity: Vec::new(),
            anneal_count: 0,
            patience: 5,
            min_rel_improve: 0.01,
            window_start: 0,
        })
    }

    pub fn with_plateau(mut self, patience: usize, min_rel_improve: f64) -> Result<Self> {
        if patience == 0 || !(0.0..1.0).contains(&min_rel_improve) {
            return Err(Error::config("need patience >= 1 and min_rel_improve in [0, 1)"));
        }
        self.patience = patience;
        self.min_rel_improve = min_rel_improve;
        Ok(self)
    }

    fn anneal(&mut self, epochs_seen: usize) {
        self.anneal_count += 1;
        self.learning_rate = self.initial_rate / 10f64.powi(self.anneal_count as i32);
        self.window_start = epochs_seen.saturating_sub(1);
    }
}

/// One momentum step over every parameter:
/// `v ← μ·v − lr·(g + λ·w)`, `w ← w + v`, with `λ = 0` for parameters that
/// opt out of decay. Gradients are checked before anything is touched, so a
/// non-finite gradient leaves parameters and velocities unchanged.
pub fn sgd_step<F: Scalar>(params: &mut [(String, &mut Param<F>)], state: &mut OptimState<F>) -> Result<()> {
    if state.velocity.is_empty() {
        state.velocity = params.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
    }
    if state.velocity.len() != params.len() {
        return Err(Error::dim("sgd_step", state.velocity.len(), params.len()));
    }
    for ((name, p), v) in params.iter().zip(&state.velocity) {
        if p.grad.shape() != p.value.shape() || v.shape() != p.value.shape() {
            return Err(Error::dim(
                "sgd_step",
                format!("{name} {:?}", p.value.shape()),
                format!("grad {:?}, velocity {:?}", p.grad.shape(), v.shape()),
            ));
        }
        if let Some(i) = p.grad.data().iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient of {name} entry {i} is {}",
                p.grad.data()[i].as_f64()
            )));
        }
    }
    let mu = F::lit(state.momentum);
    let lr = F::lit(state.learning_rate);
    for ((_, p), v) in params.iter_mut().zip(state.velocity.iter_mut()) {
        let decay = F::lit(if p.decay { state.weight_decay } else { 0.0 });
        let Param { value, grad, .. } = &mut **p;
        for ((w, &g), v) in value.data_mut().iter_mut().zip(grad.data()).zip(v.data_mut()) {
            *v = mu * *v - lr * (g + decay * *w);
            *w = *w + *v;
        }
    }
    Ok(())
}

/// Plateau check over the validation losses since the last anneal. With
/// `h` the history since `window_start`, a plateau means the best of the last
/// `patience` epochs is not `min_rel_improve` (relative) below the best
/// before them. Fewer than `patience + 1` epochs in the window never plateau.
pub fn maybe_anneal<F: Scalar>(state: &mut OptimState<F>, val_history: &[f64]) -> AnnealOutcome {
    let start = state.window_start.min(val_history.len());
    let h = &val_history[start..];
    if h.len() <= state.patience {
        return AnnealOutcome::Continue;
    }
    let split = h.len() - state.patience;
    let best = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
    let before = best(&h[..split]);
    let recent = best(&h[split..]);
    if recent < before * (1.0 - state.min_rel_improve) {
        return AnnealOutcome::Continue;
    }
    if state.anneal_count >= MAX_ANNEALS {
        return AnnealOutcome::Exhausted;
    }
    state.anneal(val_history.len());
    AnnealOutcome::Annealed
}
