//! Saves a network, loads it back, confirms predictions are bit-identical and
//! shows that a damaged file is rejected.
//!
//! `cargo run --release --example checkpoint_roundtrip`

use rcnn::datapipe::{synth_generate, SynthSpec};
use rcnn::evaluation::predict_sequence;
use rcnn::network::{checkpoint, Network, NetworkConfig};

fn main() -> rcnn::Result<()> {
    let net = Network::<f32>::new(NetworkConfig::reduced(64, 16, 8, 2, 2), 3)?;
    let bytes = checkpoint::encode(&net)?;
    println!("checkpoint: {} bytes, {} parameters", bytes.len(), net.parameter_count());

    let back = checkpoint::decode(&bytes)?;
    let seq = synth_generate(&SynthSpec {
        n_subjects: 1,
        sequences_per_subject: 1,
        ..SynthSpec::default()
    })?
    .remove(0);
    let a = predict_sequence(&net, &seq, false)?.predictions();
    let b = predict_sequence(&back, &seq, false)?.predictions();
    let identical = a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
    println!("predictions over {} frames identical after reload: {identical}", a.len());

    let mut damaged = bytes.clone();
    damaged[bytes.len() / 2] ^= 0x10;
    match checkpoint::decode(&damaged) {
        Err(e) => println!("damaged copy rejected: {e}"),
        Ok(_) => println!("damaged copy accepted (unexpected)"),
    }
    Ok(())
}
