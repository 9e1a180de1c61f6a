use serde::{Deserialize, Serialize};

use super::{matmul, Mat, Scalar, Tensor};
use crate::error::{Error, Result};

/// Geometry of a 2-D convolution. Padding is zeros.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    pub pad_h: usize,
    pub pad_w: usize,
}

impl ConvSpec {
    /// Square kernel, stride 1, padding that preserves the spatial extent
    /// for odd kernels.
    pub fn same(k: usize) -> Self {
        ConvSpec {
            kernel_h: k,
            kernel_w: k,
            stride_h: 1,
            stride_w: 1,
            pad_h: k / 2,
            pad_w: k / 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_h == 0 || self.kernel_w == 0 || self.stride_h == 0 || self.stride_w == 0 {
            return Err(Error::config(format!(
                "kernel and stride extents must be >= 1: {self:?}"
            )));
        }
        Ok(())
    }

    /// Output `(height, width)` for an input of `(h, w)`.
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        self.validate()?;
        let ph = h + 2 * self.pad_h;
        let pw = w + 2 * self.pad_w;
        if ph < self.kernel_h || pw < self.kernel_w {
            return Err(Error::config(format!(
                "convolution output extent is non-positive: padded input {ph}×{pw}, kernel {}×{}",
                self.kernel_h, self.kernel_w
            )));
        }
        Ok((
            (ph - self.kernel_h) / self.stride_h + 1,
            (pw - self.kernel_w) / self.stride_w + 1,
        ))
    }

    fn is_pointwise(&self) -> bool {
        self.kernel_h == 1
            && self.kernel_w == 1
            && self.stride_h == 1
            && self.stride_w == 1
            && self.pad_h == 0
            && self.pad_w == 0
    }
}

/// Gradients returned by [`conv2d_backward`].
#[derive(Clone, Debug)]
pub struct ConvGrads<F> {
    pub input: Tensor<F>,
    pub kernels: Tensor<F>,
    pub bias: Tensor<F>,
}

struct Geometry {
    batch: usize,
    channels: usize,
    h: usize,
    w: usize,
    maps: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn patch(&self, spec: &ConvSpec) -> usize {
        self.channels * spec.kernel_h * spec.kernel_w
    }
}

fn geometry<F: Scalar>(input: &Tensor<F>, kernels: &Tensor<F>, spec: &ConvSpec) -> Result<Geometry> {
    let (batch, channels, h, w) = input.as_batch("conv2d")?;
    let &[maps, kc, kh, kw] = kernels.shape() else {
        return Err(Error::dim("conv2d", "K×C×kh×kw kernels", format!("{:?}", kernels.shape())));
    };
    if kc != channels {
        return Err(Error::dim("conv2d", format!("{kc} input channels"), channels));
    }
    if kh != spec.kernel_h || kw != spec.kernel_w {
        return Err(Error::dim(
            "conv2d",
            format!("{}×{} kernel per spec", spec.kernel_h, spec.kernel_w),
            format!("{kh}×{kw}"),
        ));
    }
    let (oh, ow) = spec.output_hw(h, w)?;
    Ok(Geometry {
        batch,
        channels,
        h,
        w,
        maps,
        oh,
        ow,
    })
}

fn out_shape<F: Scalar>(input: &Tensor<F>, maps: usize, oh: usize, ow: usize) -> Vec<usize> {
    if input.rank() == 3 {
        vec![maps, oh, ow]
    } else {
        vec![input.shape()[0], maps, oh, ow]
    }
}

fn im2col<F: Scalar>(x: &[F], g: &Geometry, spec: &ConvSpec, cols: &mut [F]) {
    let plane = g.oh * g.ow;
    for c in 0..g.channels {
        let xc = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..spec.kernel_h {
            for j in 0..spec.kernel_w {
                let row = (c * spec.kernel_h + i) * spec.kernel_w + j;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oy in 0..g.oh {
                    let y = (oy * spec.stride_h + i) as isize - spec.pad_h as isize;
                    let line = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    if y < 0 || y as usize >= g.h {
                        line.fill(F::zero());
                        continue;
                    }
                    let src = &xc[y as usize * g.w..(y as usize + 1) * g.w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let x = (ox * spec.stride_w + j) as isize - spec.pad_w as isize;
                        *v = if x < 0 || x as usize >= g.w {
                            F::zero()
                        } else {
                            src[x as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im<F: Scalar>(cols: &[F], g: &Geometry, spec: &ConvSpec, dx: &mut [F]) {
    let plane = g.oh * g.ow;
    for c in 0..g.channels {
        let dxc = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..spec.kernel_h {
            for j in 0..spec.kernel_w {
                let row = (c * spec.kernel_h + i) * spec.kernel_w + j;
                let src = &cols[row * plane..(row + 1) * plane];
                for oy in 0..g.oh {
                    let y = (oy * spec.stride_h + i) as isize - spec.pad_h as isize;
                    if y < 0 || y as usize >= g.h {
                        continue;
                    }
                    let dst = &mut dxc[y as usize * g.w..(y as usize + 1) * g.w];
                    for ox in 0..g.ow {
                        let x = (ox * spec.stride_w + j) as isize - spec.pad_w as isize;
                        if x >= 0 && (x as usize) < g.w {
                            dst[x as usize] += src[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation of `input` (C×H×W or B×C×H×W) with `kernels`
/// (K×C×kh×kw), plus an optional per-map bias.
pub fn conv2d<F: Scalar>(
    input: &Tensor<F>,
    kernels: &Tensor<F>,
    bias: Option<&Tensor<F>>,
    spec: &ConvSpec,
) -> Result<Tensor<F>> {
    let g = geometry(input, kernels, spec)?;
    if let Some(b) = bias {
        if b.len() != g.maps {
            return Err(Error::dim("conv2d bias", g.maps, b.len()));
        }
    }
    let plane = g.oh * g.ow;
    let patch = g.patch(spec);
    let in_len = g.channels * g.h * g.w;
    let mut out = vec![F::zero(); g.batch * g.maps * plane];
    let mut cols = if spec.is_pointwise() {
        Vec::new()
    } else {
        vec![F::zero(); patch * plane]
    };
    let wmat = Mat::new(kernels.data(), g.maps, patch);
    for b in 0..g.batch {
        let x = &input.data()[b * in_len..(b + 1) * in_len];
        let dst = &mut out[b * g.maps * plane..(b + 1) * g.maps * plane];
        let cols_ref: &[F] = if spec.is_pointwise() {
            x
        } else {
            im2col(x, &g, spec, &mut cols);
            &cols
        };
        if let Some(bias) = bias {
            for (k, row) in dst.chunks_mut(plane).enumerate() {
                row.fill(bias.data()[k]);
            }
        }
        matmul(wmat, Mat::new(cols_ref, patch, plane), dst, bias.is_some());
    }
    Tensor::new(out_shape(input, g.maps, g.oh, g.ow), out)
}

/// Gradients of [`conv2d`] with respect to its input, kernels and bias.
pub fn conv2d_backward<F: Scalar>(
    input: &Tensor<F>,
    kernels: &Tensor<F>,
    grad_out: &Tensor<F>,
    spec: &ConvSpec,
) -> Result<ConvGrads<F>> {
    let g = geometry(input, kernels, spec)?;
    let expected = out_shape(input, g.maps, g.oh, g.ow);
    if grad_out.shape() != expected.as_slice() {
        return Err(Error::dim(
            "conv2d_backward",
            format!("{expected:?}"),
            format!("{:?}", grad_out.shape()),
        ));
    }
    let plane = g.oh * g.ow;
    let patch = g.patch(spec);
    let in_len = g.channels * g.h * g.w;
    let mut dx = vec![F::zero(); input.len()];
    let mut dk = vec![F::zero(); kernels.len()];
    let mut db = vec![F::zero(); g.maps];
    let mut cols = vec![F::zero(); if spec.is_pointwise() { 0 } else { patch * plane }];
    let mut dcols = vec![F::zero(); if spec.is_pointwise() { 0 } else { patch * plane }];
    let wmat = Mat::new(kernels.data(), g.maps, patch);
    for b in 0..g.batch {
        let x = &input.data()[b * in_len..(b + 1) * in_len];
        let go = &grad_out.data()[b * g.maps * plane..(b + 1) * g.maps * plane];
        for (k, row) in go.chunks(plane).enumerate() {
            db[k] += row.iter().copied().sum();
        }
        let gmat = Mat::new(go, g.maps, plane);
        let dxb = &mut dx[b * in_len..(b + 1) * in_len];
        if spec.is_pointwise() {
            matmul(gmat, Mat::new(x, patch, plane).t(), &mut dk, true);
            matmul(wmat.t(), gmat, dxb, false);
        } else {
            im2col(x, &g, spec, &mut cols);
            matmul(gmat, Mat::new(&cols, patch, plane).t(), &mut dk, true);
            matmul(wmat.t(), gmat, &mut dcols, false);
            col2im(&dcols, &g, spec, dxb);
        }
    }
    Ok(ConvGrads {
        input: Tensor::new(input.shape().to_vec(), dx)?,
        kernels: Tensor::new(kernels.shape().to_vec(), dk)?,
        bias: Tensor::new([g.maps], db)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct nested-loop cross-correlation for a single C×H×W sample.
    fn naive(input: &Tensor<f64>, kernels: &Tensor<f64>, bias: &[f64], s: &ConvSpec) -> Vec<f64> {
        let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let k = kernels.shape()[0];
        let (oh, ow) = s.output_hw(h, w).unwrap();
        let mut out = vec![0.0; k * oh * ow];
        for m in 0..k {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias[m];
                    for ci in 0..c {
                        for i in 0..s.kernel_h {
                            for j in 0..s.kernel_w {
                                let y = (oy * s.stride_h + i) as isize - s.pad_h as isize;
                                let x = (ox * s.stride_w + j) as isize - s.pad_w as isize;
                                if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
                                    acc += input.data()[(ci * h + y as usize) * w + x as usize]
                                        * kernels.data()[((m * c + ci) * s.kernel_h + i) * s.kernel_w + j];
                                }
                            }
                        }
                    }
                    out[(m * oh + oy) * ow + ox] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel() {
        let x = Tensor::<f32>::from_fn([1, 3, 4], |i| i as f32 - 5.0);
        let k = Tensor::full([1, 1, 1, 1], 1.0);
        let b = Tensor::zeros([1]);
        let y = conv2d(&x, &k, Some(&b), &ConvSpec::same(1)).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_kernels_give_bias() {
        let x = Tensor::<f32>::from_fn([2, 5, 5], |i| i as f32);
        let k = Tensor::zeros([3, 2, 3, 3]);
        let b = Tensor::new([3], vec![0.5, -1.0, 2.0]).unwrap();
        let y = conv2d(&x, &k, Some(&b), &ConvSpec::same(3)).unwrap();
        assert_eq!(y.shape(), &[3, 5, 5]);
        for (m, plane) in y.data().chunks(25).enumerate() {
            assert!(plane.iter().all(|&v| v == b.data()[m]));
        }
    }

    #[test]
    fn ones_with_padding_counts_neighbours() {
        let x = Tensor::<f64>::full([1, 3, 3], 1.0);
        let k = Tensor::full([1, 1, 3, 3], 1.0);
        let y = conv2d(&x, &k, Some(&Tensor::zeros([1])), &ConvSpec::same(3)).unwrap();
        let expected = naive(&x, &k, &[0.0], &ConvSpec::same(3));
        assert_eq!(expected, vec![4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
        assert_eq!(y.data(), expected.as_slice());
    }

    #[test]
    fn matches_naive_with_stride_and_padding() {
        let spec = ConvSpec {
            kernel_h: 2,
            kernel_w: 3,
            stride_h: 2,
            stride_w: 1,
            pad_h: 1,
            pad_w: 2,
        };
        let x = Tensor::<f64>::from_fn([3, 5, 6], |i| ((i * 37 % 11) as f64) - 5.0);
        let k = Tensor::<f64>::from_fn([4, 3, 2, 3], |i| ((i * 13 % 7) as f64) * 0.25 - 0.7);
        let bias = [0.1, -0.2, 0.3, 0.0];
        let y = conv2d(&x, &k, Some(&Tensor::new([4], bias.to_vec()).unwrap()), &spec).unwrap();
        let expected = naive(&x, &k, &bias, &spec);
        for (a, b) in y.data().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let x = Tensor::<f32>::zeros([2, 4, 4]);
        let k = Tensor::zeros([1, 3, 3, 3]);
        assert!(matches!(
            conv2d(&x, &k, None, &ConvSpec::same(3)),
            Err(Error::Dimension { .. })
        ));
        let k = Tensor::zeros([1, 2, 5, 5]);
        let spec = ConvSpec {
            pad_h: 0,
            pad_w: 0,
            ..ConvSpec::same(5)
        };
        assert!(matches!(conv2d(&x, &k, None, &spec), Err(Error::Config(_))));
    }
}
