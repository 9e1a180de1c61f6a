//! Leave-one-subject-out cross-validation with folds trained on parallel
//! threads, printing per-fold and aggregate MSE and PCC.
//!
//! `cargo run --release --example loso_eval [threads]`

use rcnn::datapipe::{synth_generate, FrameSequence, SynthSpec};
use rcnn::evaluation::{loso_crossval, Fold, LosoOptions};
use rcnn::network::{Network, NetworkConfig};
use rcnn::training::{train, TrainConfig};

fn main() -> rcnn::Result<()> {
    env_logger::init();
    let threads = std::env::args().nth(1).map_or(Ok(2), |a| a.parse()).expect("threads must be an integer");
    let data = synth_generate(&SynthSpec {
        n_subjects: 4,
        frames_per_sequence: 120,
        ..SynthSpec::default()
    })?;
    let cfg = NetworkConfig::reduced(64, 16, 8, 2, 2);
    let tc = TrainConfig {
        batch_size: 32,
        max_epochs: 12,
        batches_per_epoch: Some(20),
        clamp: true,
        ..TrainConfig::default()
    };
    let fit = |train_set: &[FrameSequence], fold: &Fold| {
        let mut net = Network::new(cfg.clone(), u64::from(fold.subject))?;
        train(&mut net, train_set, train_set, &tc)?;
        Ok(net)
    };
    let (report, timelines) = loso_crossval(&data, &LosoOptions { threads, clamp: true }, fit)?;
    for f in &report.folds {
        let pcc = f.pcc.map_or("undefined".to_string(), |p| format!("{p:.3}"));
        println!("subject {}: {} frames, MSE {:.3}, PCC {pcc}", f.subject, f.frames, f.mse);
    }
    println!("{}", report.to_json()?);
    println!("{} timelines, first rows of subject {}:", timelines.len(), timelines[0].subject_id);
    for row in timelines[0].rows.iter().take(5) {
        println!("  frame {} truth {:.1} prediction {:.2}", row.frame, row.truth, row.prediction);
    }
    Ok(())
}
