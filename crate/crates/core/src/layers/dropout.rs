use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Mode;
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)` during
/// training, and inference is the identity.
#[derive(Clone, Debug)]
pub struct Dropout {
    rate: f64,
    rng: ChaCha8Rng,
    mask: Option<Vec<bool>>,
}

impl Dropout {
    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::config(format!("dropout rate must be in [0, 1), got {rate}")));
        }
        Ok(Dropout {
            rate,
            rng: ChaCha8Rng::seed_from_u64(seed),
            mask: None,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn forward<F: Scalar>(&mut self, x: &Tensor<F>, mode: Mode) -> Tensor<F> {
        if mode == Mode::Infer || self.rate == 0.0 {
            self.mask = None;
            return x.clone();
        }
        let keep = 1.0 - self.rate;
        let mask: Vec<bool> = (0..x.len()).map(|_| self.rng.gen::<f64>() < keep).collect();
        let scale = F::lit(1.0 / keep);
        let mut out = x.clone();
        out.data_mut()
            .iter_mut()
            .zip(&mask)
            .for_each(|(v, &m)| *v = if m { *v * scale } else { F::zero() });
        self.mask = Some(mask);
        out
    }

    pub fn backward<F: Scalar>(&self, grad: &Tensor<F>) -> Result<Tensor<F>> {
        let Some(mask) = &self.mask else {
            // rate 0: identity
            return Ok(grad.clone());
        };
        if mask.len() != grad.len() {
            return Err(Error::dim("dropout backward", mask.len(), grad.len()));
        }
        let scale = F::lit(1.0 / (1.0 - self.rate));
        let mut out = grad.clone();
        out.data_mut()
            .iter_mut()
            .zip(mask)
            .for_each(|(v, &m)| *v = if m { *v * scale } else { F::zero() });
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_and_inference_are_identity() {
        let x = Tensor::<f32>::from_fn([10, 10], |i| i as f32);
        let mut d = Dropout::new(0.0, 1).unwrap();
        assert_eq!(d.forward(&x, Mode::Train), x);
        let mut d = Dropout::new(0.7, 1).unwrap();
        assert_eq!(d.forward(&x, Mode::Infer), x);
    }

    #[test]
    fn invalid_rate() {
        assert!(Dropout::new(1.0, 0).is_err());
        assert!(Dropout::new(-0.1, 0).is_err());
    }

    #[test]
    fn half_rate_statistics() {
        let n = 1_000_000;
        let x = Tensor::<f64>::full([n], 1.0);
        let mut d = Dropout::new(0.5, 7).unwrap();
        let y = d.forward(&x, Mode::Train);
        let survivors = y.data().iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
        assert!((survivors - 0.5).abs() < 0.01, "{survivors}");
        let mean = y.sum() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn backward_uses_forward_mask() {
        let x = Tensor::<f64>::full([64], 2.0);
        let mut d = Dropout::new(0.25, 3).unwrap();
        let y = d.forward(&x, Mode::Train);
        let g = d.backward(&Tensor::full([64], 1.0)).unwrap();
        for (a, b) in y.data().iter().zip(g.data()) {
            assert_eq!(*a == 0.0, *b == 0.0);
        }
    }
}
