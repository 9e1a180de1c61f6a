//! Sequence ingestion and storage, causal windows, weighted sampling and the
//! synthetic data generator.

mod sampler;
mod sequence;
pub mod synth;
mod window;

pub use sampler::{level_of, LevelWeights, WeightedSampler, WindowPool};
pub use sequence::{
    flatten_frame, frame_vector, load_dataset, read_manifest, read_sequence, write_manifest, write_sequence,
    FrameSequence, CHANNELS,
};
pub use synth::{label_histogram, synth_generate, synth_generate_annotated, LabelModel, SynthSpec};
pub use window::{assemble_batch, build_window, fill_window, WindowBatch, WindowSample};
