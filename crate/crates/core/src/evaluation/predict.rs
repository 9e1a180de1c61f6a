use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::datapipe::{assemble_batch, FrameSequence};
use crate::error::{Error, Result};
use crate::network::{Head, Network, PSPI_LEVELS};

/// Windows evaluated per forward pass.
pub const PREDICT_BATCH: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimelineRow {
    pub frame: usize,
    pub truth: f32,
    pub prediction: f32,
}

/// Per-frame truth and prediction for one sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timeline {
    pub subject_id: u32,
    pub rows: Vec<TimelineRow>,
}

impl Timeline {
    pub fn predictions(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.prediction as f64).collect()
    }

    pub fn truths(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.truth as f64).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("frame,truth,prediction\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", r.frame, r.truth, r.prediction);
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Predicts every frame of `seq` from the causal window ending at it; the
/// window's last row is that frame's estimate. With `clamp` the estimates
/// are limited to the label range 0..=15.
pub fn predict_sequence(net: &Network<f32>, seq: &FrameSequence, clamp: bool) -> Result<Timeline> {
    let cfg = net.config();
    if cfg.head != Head::Regression {
        return Err(Error::config("per-frame prediction needs the regression head"));
    }
    if seq.width() != cfg.input_w {
        return Err(Error::dim("predict_sequence", cfg.input_w, seq.width()));
    }
    let h = cfg.input_h;
    let seqs = std::slice::from_ref(seq);
    let mut rows = Vec::with_capacity(seq.len());
    let frames: Vec<usize> = (1..=seq.len()).collect();
    for chunk in frames.chunks(PREDICT_BATCH) {
        let picks: Vec<(usize, usize)> = chunk.iter().map(|&n| (0, n)).collect();
        let batch = assemble_batch(seqs, &picks, h)?;
        let out = net.predict(&batch.data)?;
        for (b, &n) in chunk.iter().enumerate() {
            let mut p = out.data()[b * h + h - 1];
            if clamp {
                p = p.clamp(0.0, (PSPI_LEVELS - 1) as f32);
            }
            rows.push(TimelineRow {
                frame: n,
                truth: seq.labels()[n - 1],
                prediction: p,
            });
        }
    }
    Ok(Timeline {
        subject_id: seq.subject_id,
        rows,
    })
}
