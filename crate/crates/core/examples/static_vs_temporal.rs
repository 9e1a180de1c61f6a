//! Temporal (30-frame windows) vs static (single-frame) model on the
//! blink/closure synthetic set and on the per-frame control set.
//!
//! `cargo run --release --example static_vs_temporal [epochs]`

use rcnn::datapipe::{synth_generate, LabelModel, SynthSpec};
use rcnn::evaluation::compare_static_baseline;
use rcnn::network::NetworkConfig;
use rcnn::training::TrainConfig;

fn main() -> rcnn::Result<()> {
    env_logger::init();
    let epochs = std::env::args().nth(1).map_or(Ok(50), |a| a.parse()).expect("epochs must be an integer");
    let net = NetworkConfig {
        dropout_rate: 0.2,
        ..NetworkConfig::reduced(64, 30, 16, 2, 2)
    };
    let tc = TrainConfig {
        batch_size: 32,
        max_epochs: epochs,
        batches_per_epoch: Some(40),
        clamp: true,
        ..TrainConfig::default()
    };
    let spec = SynthSpec::default();
    // The last five subjects are never seen in training.
    let held: Vec<u32> = (spec.n_subjects as u32 - 4..=spec.n_subjects as u32).collect();
    for model in [LabelModel::Temporal, LabelModel::PerFrame] {
        let data = synth_generate(&SynthSpec {
            label_model: model,
            ..spec.clone()
        })?;
        let report = compare_static_baseline(&data, &net, &tc, &held, 11)?;
        println!(
            "{model:?}: temporal MSE {:.3} ({:.0}s), static MSE {:.3} ({:.0}s), gain {:.1}%, difference {:.1}%",
            report.temporal.mse,
            report.temporal.train_seconds,
            report.static_baseline.mse,
            report.static_baseline.train_seconds,
            100.0 * report.relative_gain(),
            100.0 * report.relative_difference()
        );
    }
    Ok(())
}
