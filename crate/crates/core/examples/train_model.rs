//! Trains a reduced network on synthetic subjects, validating on a held-out
//! subject, and writes the checkpoint and per-epoch history.
//!
//! `cargo run --release --example train_model [out_dir]`

use std::path::PathBuf;

use rcnn::datapipe::{synth_generate, SynthSpec};
use rcnn::network::{Network, NetworkConfig};
use rcnn::training::{train, TrainConfig};

fn main() -> rcnn::Result<()> {
    env_logger::init();
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "train_out".into()));
    let data = synth_generate(&SynthSpec {
        n_subjects: 6,
        ..SynthSpec::default()
    })?;
    let (train_set, val_set): (Vec<_>, Vec<_>) = data.into_iter().partition(|s| s.subject_id != 6);

    let mut net = Network::<f32>::new(NetworkConfig::reduced(64, 16, 8, 2, 2), 1)?;
    let tc = TrainConfig {
        batch_size: 32,
        max_epochs: 15,
        batches_per_epoch: Some(20),
        clamp: true,
        output_dir: Some(out.clone()),
        ..TrainConfig::default()
    };
    let run = train(&mut net, &train_set, &val_set, &tc)?;
    print!("{}", run.history_csv());
    println!(
        "best epoch {} (validation MSE {:.3}); checkpoint and history in {}",
        run.best_epoch,
        run.best_val_mse,
        out.display()
    );
    Ok(())
}
