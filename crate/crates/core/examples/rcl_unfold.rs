//! Runs one recurrent convolutional layer, prints the state after each
//! iteration and the path lengths of its unrolled graph: with T iterations
//! the input reaches the output along paths of every length from 1 to T+1.
//!
//! `cargo run --release --example rcl_unfold [iterations]`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rcnn::layers::rcl::{path_lengths, unrolled_edges, Node};
use rcnn::layers::{Mode, Rcl};
use rcnn::tensor::Tensor;

fn main() -> rcnn::Result<()> {
    let t: usize = std::env::args().nth(1).map_or(Ok(3), |a| a.parse()).expect("iterations must be an integer");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut rcl = Rcl::<f64>::new(2, 4, t, false, &mut rng);
    let input = Tensor::new([1, 2, 5, 6], (0..60).map(|i| ((i * 7) % 11) as f64 / 11.0 - 0.5).collect())?;
    // Training mode keeps every state x(t) for backpropagation.
    let out = rcl.forward(&input, Mode::Train)?;
    if let Some(states) = rcl.cached_states() {
        for (i, s) in states.iter().enumerate() {
            println!("x({i}): mean activation {:.4}", s.sum() / s.len() as f64);
        }
    }
    println!("output shape {:?}", out.shape());
    let lengths = path_lengths(&unrolled_edges(t), Node::Input, Node::FeatureMap(t));
    println!("path lengths input -> x({t}): {lengths:?}");
    Ok(())
}
