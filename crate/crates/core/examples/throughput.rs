//! Frames per second of causal per-frame prediction, for a reduced network
//! and (with `--full`) the full-size configuration.
//!
//! `cargo run --release --example throughput [--full]`

use rcnn::datapipe::{synth_generate, SynthSpec};
use rcnn::evaluation::measure_throughput;
use rcnn::network::{Network, NetworkConfig};

fn report(name: &str, cfg: NetworkConfig, frames: usize, reps: usize) -> rcnn::Result<()> {
    let seq = synth_generate(&SynthSpec {
        width: cfg.input_w,
        n_subjects: 1,
        sequences_per_subject: 1,
        frames_per_sequence: frames,
        ..SynthSpec::default()
    })?
    .remove(0);
    let params = cfg.parameter_count()?;
    let net = Network::<f32>::new(cfg, 1)?;
    let t = measure_throughput(&net, &seq, reps)?;
    println!("{name}: {params} parameters, median {:.1} frames/s over {reps} runs", t.median_fps);
    Ok(())
}

fn main() -> rcnn::Result<()> {
    report("reduced (W=64, H=8, 32 maps)", NetworkConfig::reduced(64, 8, 32, 2, 2), 200, 5)?;
    if std::env::args().any(|a| a == "--full") {
        report("full (W=713, H=30, 256 maps)", NetworkConfig::full(), 12, 1)?;
    }
    Ok(())
}
