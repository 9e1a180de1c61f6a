//! Momentum SGD, plateau annealing and the training loop over weighted
//! random window batches.

mod optim;

pub use optim::{maybe_anneal, sgd_step, AnnealOutcome, OptimState, MAX_ANNEALS};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datapipe::{assemble_batch, FrameSequence, LevelWeights, WeightedSampler, WindowPool};
use crate::error::{Error, Result};
use crate::evaluation::predict_sequence;
use crate::layers::Mode;
use crate::network::{checkpoint, mse_loss, Network};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    /// Iterations per epoch; `None` means one pass worth of windows
    /// (pool size / batch size, rounded up).
    pub batches_per_epoch: Option<usize>,
    pub patience: usize,
    pub min_rel_improve: f64,
    pub level_weights: LevelWeights,
    pub seed: u64,
    /// Clamp validation predictions to 0..=15.
    pub clamp: bool,
    /// Stop as soon as the validation MSE drops below this value.
    pub target_mse: Option<f64>,
    /// Where the best checkpoint and history CSV go; nothing is written when
    /// unset.
    pub output_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 5e-4,
            max_epochs: 50,
            batches_per_epoch: None,
            patience: 5,
            min_rel_improve: 0.01,
            level_weights: LevelWeights::uniform(),
            seed: 1,
            clamp: false,
            target_mse: None,
            output_dir: None,
        }
    }
}

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const LAST_GOOD_FILE: &str = "last_good.ckpt";
pub const HISTORY_FILE: &str = "history.csv";

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub lr: f64,
    pub anneal_count: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainRun {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub seed: u64,
    pub batch_size: usize,
    /// Stopped because the plateau persisted after the last anneal.
    pub stopped_early: bool,
}

impl TrainRun {
    pub fn history_csv(&self) -> String {
        let mut s = String::from("epoch,train_mse,val_mse,lr,anneal_count\n");
        for r in &self.history {
            let _ = writeln!(s, "{},{},{},{},{}", r.epoch, r.train_mse, r.val_mse, r.lr, r.anneal_count);
        }
        s
    }

    pub fn write_history(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.history_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Pooled per-frame MSE of causal last-row predictions.
pub fn sequence_mse(net: &Network<f32>, seqs: &[FrameSequence], clamp: bool) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in seqs {
        for r in predict_sequence(net, s, clamp)?.rows {
            let d = r.prediction as f64 - r.truth as f64;
            sum += d * d;
            n += 1;
        }
    }
    Ok(sum / n.max(1) as f64)
}

fn check_data(net: &Network<f32>, name: &str, seqs: &[FrameSequence]) -> Result<()> {
    if seqs.is_empty() {
        return Err(Error::config(format!("{name} set is empty")));
    }
    let w = net.config().input_w;
    if let Some(s) = seqs.iter().find(|s| s.width() != w) {
        return Err(Error::dim("train", format!("{name} frame width {w}"), s.width()));
    }
    Ok(())
}

/// Trains `net` in place and leaves it holding the best-validation weights.
///
/// Each iteration draws a batch of windows through the level-weighted
/// sampler, minimizes the masked window MSE (padded rows excluded) and takes
/// one momentum step. After each epoch the validation MSE is measured on
/// per-frame predictions and fed to the annealing schedule. A non-finite loss
/// or gradient restores the last good weights, writes them to
/// `last_good.ckpt` when an output directory is set, and returns
/// [`Error::Diverged`].
pub fn train(net: &mut Network<f32>, train: &[FrameSequence], val: &[FrameSequence], cfg: &TrainConfig) -> Result<TrainRun> {
    check_data(net, "training", train)?;
    check_data(net, "validation", val)?;
    if cfg.batch_size == 0 {
        return Err(Error::config("batch size must be >= 1"));
    }
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let h = net.config().input_h;
    let pool = WindowPool::new(train);
    let sampler = WeightedSampler::new(&pool.levels, &cfg.level_weights)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = OptimState::<f32>::new(cfg.learning_rate, cfg.momentum, cfg.weight_decay)?
        .with_plateau(cfg.patience, cfg.min_rel_improve)?;
    let per_epoch = cfg
        .batches_per_epoch
        .unwrap_or_else(|| pool.len().div_ceil(cfg.batch_size))
        .max(1);

    let mut last_good = net.state_tensors();
    let mut best_state = last_good.clone();
    let mut run = TrainRun {
        history: Vec::new(),
        best_epoch: 0,
        best_val_mse: f64::INFINITY,
        seed: cfg.seed,
        batch_size: cfg.batch_size,
        stopped_early: false,
    };
    let mut val_history = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        let mut sum = 0.0;
        let step = |net: &mut Network<f32>, state: &mut OptimState<f32>, rng: &mut ChaCha8Rng| -> Result<f64> {
            let picks: Vec<(usize, usize)> = sampler
                .batch(cfg.batch_size, rng)
                .into_iter()
                .map(|i| pool.entries[i])
                .collect();
            let batch = assemble_batch(train, &picks, h)?;
            let out = net.forward(&batch.data, Mode::Train)?;
            let (loss, grad) = mse_loss(out.data(), &batch.targets, Some(&batch.mask))?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss is {loss}")));
            }
            net.backward(&Tensor::new(out.shape(), grad)?)?;
            sgd_step(&mut net.params_mut(), state)?;
            Ok(loss as f64)
        };
        for _ in 0..per_epoch {
            match step(net, &mut state, &mut rng) {
                Ok(l) => sum += l,
                Err(Error::NonFinite(msg)) => return Err(diverge(net, &last_good, epoch, msg, cfg)),
                Err(e) => return Err(e),
            }
        }
        let train_mse = sum / per_epoch as f64;
        let val_mse = sequence_mse(net, val, cfg.clamp)?;
        if !val_mse.is_finite() || net.state_tensors().iter().any(|(_, t)| !t.all_finite()) {
            return Err(diverge(net, &last_good, epoch, format!("validation MSE is {val_mse}"), cfg));
        }
        run.history.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
            lr: state.learning_rate,
            anneal_count: state.anneal_count,
        });
        log::info!("epoch {epoch}: train {train_mse:.4} val {val_mse:.4} lr {}", state.learning_rate);
        last_good = net.state_tensors();
        if val_mse < run.best_val_mse {
            run.best_val_mse = val_mse;
            run.best_epoch = epoch;
            best_state = last_good.clone();
            if let Some(dir) = &cfg.output_dir {
                checkpoint::save(net, dir.join(CHECKPOINT_FILE))?;
            }
        }
        val_history.push(val_mse);
        if cfg.target_mse.is_some_and(|t| val_mse < t) {
            break;
        }
        match maybe_anneal(&mut state, &val_history) {
            AnnealOutcome::Annealed => log::info!("learning rate annealed to {}", state.learning_rate),
            AnnealOutcome::Exhausted => {
                run.stopped_early = true;
                break;
            }
            AnnealOutcome::Continue => {}
        }
    }
    net.set_state(&best_state)?;
    if let Some(dir) = &cfg.output_dir {
        run.write_history(dir.join(HISTORY_FILE))?;
    }
    Ok(run)
}

fn diverge(
    net: &mut Network<f32>,
    last_good: &[(String, Tensor<f32>)],
    epoch: usize,
    message: String,
    cfg: &TrainConfig,
) -> Error {
    if let Err(e) = net.set_state(last_good) {
        return e;
    }
    let checkpoint = match &cfg.output_dir {
        Some(dir) => {
            let path = dir.join(LAST_GOOD_FILE);
            if let Err(e) = checkpoint::save(net, &path) {
                return e;
            }
            Some(path)
        }
        None => None,
    };
    Error::Diverged {
        epoch,
        message,
        checkpoint,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::{synth_generate, SynthSpec};
    use crate::network::NetworkConfig;

    fn tiny_data() -> Vec<FrameSequence> {
        synth_generate(&SynthSpec {
            width: 16,
            n_subjects: 2,
            sequences_per_subject: 1,
            frames_per_sequence: 40,
            blink_max: 2,
            closure_min: 6,
            ..SynthSpec::default()
        })
        .unwrap()
    }

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            batch_size: 8,
            max_epochs: 3,
            batches_per_epoch: Some(4),
            ..TrainConfig::default()
        }
    }

    #[test]
    fn deterministic_history() {
        let data = tiny_data();
        let cfg = NetworkConfig::reduced(16, 4, 4, 1, 1);
        let mut a = Network::new(cfg.clone(), 3).unwrap();
        let mut b = Network::new(cfg, 3).unwrap();
        let ra = train(&mut a, &data, &data, &tiny_config()).unwrap();
        let rb = train(&mut b, &data, &data, &tiny_config()).unwrap();
        assert_eq!(ra.history_csv(), rb.history_csv());
        assert_eq!(ra.history.len(), 3);
        assert!(ra.history.windows(2).all(|w| w[0].epoch < w[1].epoch));
    }

    #[test]
    fn zero_rate_batch_of_one_keeps_loss_constant() {
        let data = tiny_data();
        let cfg = NetworkConfig {
            batch_norm: false,
            dropout_rate: 0.0,
            ..NetworkConfig::reduced(16, 4, 4, 1, 1)
        };
        let mut net = Network::new(cfg, 3).unwrap();
        let tc = TrainConfig {
            batch_size: 1,
            learning_rate: 0.0,
            ..tiny_config()
        };
        let run = train(&mut net, &data, &data, &tc).unwrap();
        let v0 = run.history[0].val_mse;
        assert!(run.history.iter().all(|r| r.val_mse == v0));
    }

    #[test]
    fn divergence_reports_last_good_checkpoint() {
        let data = tiny_data();
        let dir = tempfile::tempdir().unwrap();
        let mut net = Network::new(NetworkConfig::reduced(16, 4, 4, 1, 1), 3).unwrap();
        let tc = TrainConfig {
            learning_rate: 1e30,
            output_dir: Some(dir.path().to_path_buf()),
            ..tiny_config()
        };
        match train(&mut net, &data, &data, &tc) {
            Err(Error::Diverged { checkpoint, .. }) => assert!(checkpoint.unwrap().exists()),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn writes_artifacts() {
        let data = tiny_data();
        let dir = tempfile::tempdir().unwrap();
        let mut net = Network::new(NetworkConfig::reduced(16, 4, 4, 1, 1), 3).unwrap();
        let tc = TrainConfig {
            output_dir: Some(dir.path().to_path_buf()),
            ..tiny_config()
        };
        train(&mut net, &data, &data, &tc).unwrap();
        assert!(dir.path().join(CHECKPOINT_FILE).exists());
        let csv = std::fs::read_to_string(dir.path().join(HISTORY_FILE)).unwrap();
        assert!(csv.starts_with("epoch,train_mse,val_mse,lr,anneal_count\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
