//! Independent reference implementations used as test oracles. Apart from the
//! `unfold` harness, nothing here calls into the library.
#![allow(dead_code)]

pub mod unfold;

use rand::Rng;

/// Dimensions of a B×C×H×W buffer.
#[derive(Clone, Copy, Debug)]
pub struct Dims {
    pub b: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Dims {
    pub fn len(&self) -> usize {
        self.b * self.c * self.h * self.w
    }

    pub fn at(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        ((b * self.c + c) * self.h + y) * self.w + x
    }
}

pub fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Stride-1 "same" cross-correlation with an odd k×k kernel (K×C×k×k).
pub fn conv_same(x: &[f64], d: Dims, kern: &[f64], maps: usize, k: usize, bias: Option<&[f64]>) -> Vec<f64> {
    let od = Dims { c: maps, ..d };
    let r = (k / 2) as isize;
    let mut out = vec![0.0; od.len()];
    for b in 0..d.b {
        for m in 0..maps {
            for y in 0..d.h {
                for xx in 0..d.w {
                    let mut acc = bias.map_or(0.0, |bb| bb[m]);
                    for c in 0..d.c {
                        for i in 0..k {
                            for j in 0..k {
                                let sy = y as isize + i as isize - r;
                                let sx = xx as isize + j as isize - r;
                                if sy < 0 || sx < 0 || sy >= d.h as isize || sx >= d.w as isize {
                                    continue;
                                }
                                acc += kern[((m * d.c + c) * k + i) * k + j]
                                    * x[d.at(b, c, sy as usize, sx as usize)];
                            }
                        }
                    }
                    out[od.at(b, m, y, xx)] = acc;
                }
            }
        }
    }
    out
}

/// Gradients of [`conv_same`]: (input, kernels, bias).
pub fn conv_same_backward(
    x: &[f64],
    d: Dims,
    kern: &[f64],
    maps: usize,
    k: usize,
    gout: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let od = Dims { c: maps, ..d };
    let r = (k / 2) as isize;
    let mut dx = vec![0.0; d.len()];
    let mut dk = vec![0.0; kern.len()];
    let mut db = vec![0.0; maps];
    for b in 0..d.b {
        for m in 0..maps {
            for y in 0..d.h {
                for xx in 0..d.w {
                    let g = gout[od.at(b, m, y, xx)];
                    db[m] += g;
                    for c in 0..d.c {
                        for i in 0..k {
                            for j in 0..k {
                                let sy = y as isize + i as isize - r;
                                let sx = xx as isize + j as isize - r;
                                if sy < 0 || sx < 0 || sy >= d.h as isize || sx >= d.w as isize {
                                    continue;
                                }
                                let xi = d.at(b, c, sy as usize, sx as usize);
                                let ki = ((m * d.c + c) * k + i) * k + j;
                                dk[ki] += g * x[xi];
                                dx[xi] += g * kern[ki];
                            }
                        }
                    }
                }
            }
        }
    }
    (dx, dk, db)
}

fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&a| a.max(0.0)).collect()
}

/// An RCL written out as T+1 explicit layers, each recurrent step owning its
/// own copy of the 3×3 kernels and bias (no batch norm).
pub struct Unrolled {
    pub d: Dims,
    pub maps: usize,
    pub ff: Vec<f64>,
    pub rec_copies: Vec<Vec<f64>>,
    pub bias_copies: Vec<Vec<f64>>,
}

pub struct UnrolledGrads {
    pub input: Vec<f64>,
    pub ff: Vec<f64>,
    pub rec_copies: Vec<Vec<f64>>,
    pub bias_copies: Vec<Vec<f64>>,
}

impl Unrolled {
    /// Pre-activations and states of every layer of the stack.
    pub fn forward(&self, u: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let z = conv_same(u, self.d, &self.ff, self.maps, 1, None);
        let hd = Dims { c: self.maps, ..self.d };
        let mut pre = vec![z.clone()];
        let mut states = vec![relu(&z)];
        for (rec, bias) in self.rec_copies.iter().zip(&self.bias_copies) {
            let mut a = conv_same(states.last().unwrap(), hd, rec, self.maps, 3, Some(bias));
            a.iter_mut().zip(&z).for_each(|(a, z)| *a += z);
            states.push(relu(&a));
            pre.push(a);
        }
        (pre, states)
    }

    /// Backpropagation through the explicit stack for loss `Σ r ⊙ x(T)`.
    pub fn backward(&self, u: &[f64], r: &[f64]) -> UnrolledGrads {
        let (pre, states) = self.forward(u);
        let hd = Dims { c: self.maps, ..self.d };
        let t_max = self.rec_copies.len();
        let mut rec_copies = vec![Vec::new(); t_max];
        let mut bias_copies = vec![Vec::new(); t_max];
        let mut dz = vec![0.0; hd.len()];
        let mut g = r.to_vec();
        for t in (1..=t_max).rev() {
            let ga: Vec<f64> = g.iter().zip(&pre[t]).map(|(g, p)| if *p > 0.0 { *g } else { 0.0 }).collect();
            dz.iter_mut().zip(&ga).for_each(|(d, g)| *d += g);
            let (dx, dk, db) = conv_same_backward(&states[t - 1], hd, &self.rec_copies[t - 1], self.maps, 3, &ga);
            rec_copies[t - 1] = dk;
            bias_copies[t - 1] = db;
            g = dx;
        }
        let g0: Vec<f64> = g.iter().zip(&pre[0]).map(|(g, p)| if *p > 0.0 { *g } else { 0.0 }).collect();
        dz.iter_mut().zip(&g0).for_each(|(d, g)| *d += g);
        let (input, ff, _) = conv_same_backward(u, self.d, &self.ff, self.maps, 1, &dz);
        UnrolledGrads {
            input,
            ff,
            rec_copies,
            bias_copies,
        }
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Extents after the first convolution and each pool of the full-size stack,
/// computed by plain floor division: (h, w).
pub fn full_shape_trace() -> Vec<(usize, usize)> {
    // (pool_w, pool_h) after C1 and after RCL2..RCL5
    let pools = [(4, 1), (4, 1), (4, 4), (2, 2), (1, 1)];
    let (mut h, mut w) = (30, 713);
    let mut trace = vec![(h, w)];
    for (pw, ph) in pools {
        h /= ph;
        w /= pw;
        trace.push((h, w));
    }
    trace
}
