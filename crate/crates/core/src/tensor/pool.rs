use serde::{Deserialize, Serialize};

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Max-pooling window. `pool_w`/`stride_w` act on the width axis (the frame
/// vector), `pool_h`/`stride_h` on the height axis (time).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub pool_w: usize,
    pub pool_h: usize,
    pub stride_w: usize,
    pub stride_h: usize,
}

impl PoolSpec {
    /// Non-overlapping window of `w × h` (stride equal to the window).
    pub const fn tiled(w: usize, h: usize) -> Self {
        PoolSpec {
            pool_w: w,
            pool_h: h,
            stride_w: w,
            stride_h: h,
        }
    }

    /// Output `(height, width)`; partial windows are dropped.
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if self.pool_w == 0 || self.pool_h == 0 || self.stride_w == 0 || self.stride_h == 0 {
            return Err(Error::config(format!("pool extents must be >= 1: {self:?}")));
        }
        if self.pool_h > h || self.pool_w > w {
            return Err(Error::config(format!(
                "pool {}×{} (w×h) larger than input {w}×{h}",
                self.pool_w, self.pool_h
            )));
        }
        Ok((
            (h - self.pool_h) / self.stride_h + 1,
            (w - self.pool_w) / self.stride_w + 1,
        ))
    }
}

/// Output of [`maxpool2d`]: the pooled tensor and, for each output cell, the
/// linear index of the winning input element.
#[derive(Clone, Debug)]
pub struct Pooled<F> {
    pub output: Tensor<F>,
    pub argmax: Vec<usize>,
}

/// Max pooling over each map of a C×H×W or B×C×H×W tensor. Ties go to the
/// lowest linear index.
pub fn maxpool2d<F: Scalar>(input: &Tensor<F>, spec: &PoolSpec) -> Result<Pooled<F>> {
    let (b, c, h, w) = input.as_batch("maxpool2d")?;
    let (oh, ow) = spec.output_hw(h, w)?;
    let planes = b * c;
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut argmax = Vec::with_capacity(planes * oh * ow);
    let x = input.data();
    for p in 0..planes {
        let base = p * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let y0 = oy * spec.stride_h;
                let x0 = ox * spec.stride_w;
                let mut best_idx = base + y0 * w + x0;
                let mut best = x[best_idx];
                for dy in 0..spec.pool_h {
                    let row = base + (y0 + dy) * w + x0;
                    for dx in 0..spec.pool_w {
                        let v = x[row + dx];
                        if v > best {
                            best = v;
                            best_idx = row + dx;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    let shape = if input.rank() == 3 {
        vec![c, oh, ow]
    } else {
        vec![b, c, oh, ow]
    };
    Ok(Pooled {
        output: Tensor::new(shape, out)?,
        argmax,
    })
}

/// Routes each output gradient to its argmax position.
pub fn maxpool2d_backward<F: Scalar>(
    grad_out: &Tensor<F>,
    argmax: &[usize],
    input_shape: &[usize],
) -> Result<Tensor<F>> {
    if grad_out.len() != argmax.len() {
        return Err(Error::dim("maxpool2d_backward", argmax.len(), grad_out.len()));
    }
    let mut dx = Tensor::zeros(input_shape.to_vec());
    let n = dx.len();
    let d = dx.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        if idx >= n {
            return Err(Error::State(format!("argmax index {idx} outside input of {n}")));
        }
        d[idx] += g;
    }
    Ok(dx)
}
