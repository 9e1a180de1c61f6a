//! Finite-difference check of every parameter tensor of a small network in
//! 64-bit precision.
//!
//! `cargo run --release --example gradient_check`

use rcnn::gradcheck::{check_network, GradCheckOptions};
use rcnn::network::NetworkConfig;

fn main() -> rcnn::Result<()> {
    let report = check_network(&NetworkConfig::reduced(32, 8, 8, 2, 2), &GradCheckOptions::default())?;
    for t in &report.tensors {
        println!("{:<24} {:>6} entries  max rel error {:.2e}", t.name, t.entries, t.max_rel_error);
    }
    println!("{}", if report.passed() { "PASS" } else { "FAIL" });
    Ok(())
}
