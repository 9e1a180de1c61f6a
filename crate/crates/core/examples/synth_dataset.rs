//! Generates the blink/closure benchmark, writes it as sequence files plus a
//! manifest, reads it back and prints the label histogram.
//!
//! `cargo run --release --example synth_dataset [out_dir]`

use std::path::PathBuf;

use rcnn::datapipe::{label_histogram, load_dataset, synth_generate_annotated, write_manifest, write_sequence, SynthSpec};

fn main() -> rcnn::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synth_data".into()));
    std::fs::create_dir_all(&out).expect("cannot create the output directory");
    let spec = SynthSpec {
        n_subjects: 3,
        ..SynthSpec::default()
    };
    let annotated = synth_generate_annotated(&spec)?;
    let mut paths = Vec::new();
    for (i, a) in annotated.iter().enumerate() {
        let name = PathBuf::from(format!("seq{i:02}.rclseq"));
        write_sequence(&a.sequence, out.join(&name))?;
        // Manifest entries resolve against the manifest's directory.
        paths.push(name);
    }
    let manifest = out.join("manifest.txt");
    write_manifest(&manifest, &paths)?;

    let first = &annotated[0];
    println!("subject {} has {} events:", first.sequence.subject_id, first.events.len());
    for e in &first.events {
        println!("  {:?} at frame {} for {} frames", e.kind, e.start + 1, e.len);
    }
    let back = load_dataset(&manifest)?;
    println!("level frames");
    for (level, count) in label_histogram(&back).iter().enumerate().filter(|(_, c)| **c > 0) {
        println!("{level:5} {count}");
    }
    Ok(())
}
