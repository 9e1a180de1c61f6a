use super::sequence::{FrameSequence, CHANNELS};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A causal window of `H` frames ending at `end_frame`, laid out 3×H×W.
///
/// Row `i` (0-based) holds frame `end_frame - H + 1 + i`; rows before the
/// first frame are zeros with target 0 and `mask[i] == false`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample {
    pub data: Tensor<f32>,
    pub targets: Vec<f32>,
    pub mask: Vec<bool>,
    pub end_frame: usize,
    pub pad_rows: usize,
}

fn check(seq: &FrameSequence, n: usize, h: usize) -> Result<()> {
    if h == 0 {
        return Err(Error::config("window height must be >= 1"));
    }
    if n == 0 || n > seq.len() {
        return Err(Error::config(format!(
            "frame index {n} outside 1..={}",
            seq.len()
        )));
    }
    Ok(())
}

/// Writes the window's 3×H×W values into `out` and its targets and mask into
/// the given slices; returns the number of padded rows.
pub fn fill_window(
    seq: &FrameSequence,
    n: usize,
    h: usize,
    out: &mut [f32],
    targets: &mut [f32],
    mask: &mut [bool],
) -> Result<usize> {
    check(seq, n, h)?;
    let w = seq.width();
    if out.len() != CHANNELS * h * w || targets.len() != h || mask.len() != h {
        return Err(Error::dim("fill_window", CHANNELS * h * w, out.len()));
    }
    let pad_rows = h.saturating_sub(n);
    for row in 0..h {
        let frame = (n + row + 1) as isize - h as isize;
        for c in 0..CHANNELS {
            let dst = &mut out[(c * h + row) * w..(c * h + row + 1) * w];
            if frame < 1 {
                dst.fill(0.0);
            } else {
                dst.copy_from_slice(&seq.frame(frame as usize)[c * w..(c + 1) * w]);
            }
        }
        if frame < 1 {
            targets[row] = 0.0;
            mask[row] = false;
        } else {
            targets[row] = seq.labels()[frame as usize - 1];
            mask[row] = true;
        }
    }
    Ok(pad_rows)
}

/// Causal window ending at frame `n` (1-based).
pub fn build_window(seq: &FrameSequence, n: usize, h: usize) -> Result<WindowSample> {
    check(seq, n, h)?;
    let mut data = vec![0.0; CHANNELS * h * seq.width()];
    let mut targets = vec![0.0; h];
    let mut mask = vec![false; h];
    let pad_rows = fill_window(seq, n, h, &mut data, &mut targets, &mut mask)?;
    Ok(WindowSample {
        data: Tensor::new([CHANNELS, h, seq.width()], data)?,
        targets,
        mask,
        end_frame: n,
        pad_rows,
    })
}

/// A batch of windows stacked as B×3×H×W with flattened B×H targets and mask.
#[derive(Clone, Debug)]
pub struct WindowBatch {
    pub data: Tensor<f32>,
    pub targets: Vec<f32>,
    pub mask: Vec<bool>,
}

/// Stacks the windows `(sequence index, end frame)` into one batch.
pub fn assemble_batch(seqs: &[FrameSequence], picks: &[(usize, usize)], h: usize) -> Result<WindowBatch> {
    let Some(&(first, _)) = picks.first() else {
        return Err(Error::config("empty batch"));
    };
    let w = seqs[first].width();
    let per = CHANNELS * h * w;
    let mut data = vec![0.0; picks.len() * per];
    let mut targets = vec![0.0; picks.len() * h];
    let mut mask = vec![false; picks.len() * h];
    for (b, &(s, n)) in picks.iter().enumerate() {
        let seq = &seqs[s];
        if seq.width() != w {
            return Err(Error::dim("assemble_batch", w, seq.width()));
        }
        fill_window(
            seq,
            n,
            h,
            &mut data[b * per..(b + 1) * per],
            &mut targets[b * h..(b + 1) * h],
            &mut mask[b * h..(b + 1) * h],
        )?;
    }
    Ok(WindowBatch {
        data: Tensor::new([picks.len(), CHANNELS, h, w], data)?,
        targets,
        mask,
    })
}
