//! Runs the library RCL and the explicit unrolled oracle side by side.

use rand::Rng;
use rcnn::layers::{Activation, Mode, Rcl, RclParams};
use rcnn::tensor::Tensor;

use super::{max_abs_diff, random_vec, Dims, Unrolled};

/// One random parameterization: (forward error, shared-weight gradient
/// error against the per-copy sum, input and feed-forward gradient error).
pub fn unfold_case(rng: &mut impl Rng) -> (f64, f64, f64) {
    let d = Dims {
        b: rng.gen_range(1..=2),
        c: rng.gen_range(1..=3),
        h: rng.gen_range(1..=4),
        w: rng.gen_range(1..=5),
    };
    let maps = rng.gen_range(1..=3);
    let t = rng.gen_range(0..=4);
    let ff = random_vec(rng, maps * d.c);
    let rec = random_vec(rng, maps * maps * 9);
    let bias = random_vec(rng, maps);
    let u = random_vec(rng, d.len());
    let oracle = Unrolled {
        d,
        maps,
        ff: ff.clone(),
        rec_copies: vec![rec.clone(); t],
        bias_copies: vec![bias.clone(); t],
    };
    let mut rcl = Rcl::from_params(
        RclParams {
            ff_kernels: Tensor::new([maps, d.c, 1, 1], ff).unwrap(),
            rec_kernels: Tensor::new([maps, maps, 3, 3], rec).unwrap(),
            bias: Tensor::new([maps], bias).unwrap(),
            iterations: t,
        },
        None,
        Activation::Relu,
    )
    .unwrap();
    let ut = Tensor::new([d.b, d.c, d.h, d.w], u.clone()).unwrap();
    let out = rcl.forward(&ut, Mode::Train).unwrap();
    let (_, states) = oracle.forward(&u);
    let forward_err = max_abs_diff(out.data(), states.last().unwrap());

    let r = random_vec(rng, out.len());
    let du = rcl.backward(&Tensor::new(out.shape(), r.clone()).unwrap()).unwrap();
    let g = oracle.backward(&u, &r);
    let mut rec_sum = vec![0.0; maps * maps * 9];
    let mut bias_sum = vec![0.0; maps];
    for (k, b) in g.rec_copies.iter().zip(&g.bias_copies) {
        rec_sum.iter_mut().zip(k).for_each(|(s, v)| *s += v);
        bias_sum.iter_mut().zip(b).for_each(|(s, v)| *s += v);
    }
    let grad_err = [
        max_abs_diff(rcl.rec.grad.data(), &rec_sum),
        max_abs_diff(rcl.bias.grad.data(), &bias_sum),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let other_err = max_abs_diff(rcl.ff.grad.data(), &g.ff).max(max_abs_diff(du.data(), &g.input));
    (forward_err, grad_err, other_err)
}
