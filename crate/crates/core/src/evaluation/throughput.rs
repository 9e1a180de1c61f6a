use std::time::Instant;

use serde::Serialize;

use super::predict::predict_sequence;
use crate::datapipe::FrameSequence;
use crate::error::{Error, Result};
use crate::network::Network;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Throughput {
    pub frames: usize,
    /// Frames per second of each timed repetition.
    pub samples: Vec<f64>,
    pub median_fps: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Wall-clock frames per second of [`predict_sequence`] on the calling
/// thread, median over `repetitions` after one untimed warm-up pass.
pub fn measure_throughput(net: &Network<f32>, seq: &FrameSequence, repetitions: usize) -> Result<Throughput> {
    if repetitions == 0 {
        return Err(Error::config("need at least one repetition"));
    }
    predict_sequence(net, seq, false)?;
    let samples: Vec<f64> = (0..repetitions)
        .map(|_| {
            let start = Instant::now();
            predict_sequence(net, seq, false)?;
            Ok(seq.len() as f64 / start.elapsed().as_secs_f64().max(1e-9))
        })
        .collect::<Result<_>>()?;
    Ok(Throughput {
        frames: seq.len(),
        median_fps: median(&samples),
        samples,
    })
}
