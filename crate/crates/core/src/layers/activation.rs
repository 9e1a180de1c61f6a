use serde::{Deserialize, Serialize};

use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    pub fn apply<F: Scalar>(self, x: &Tensor<F>) -> Tensor<F> {
        match self {
            Activation::Relu => x.map(|v| v.max(F::zero())),
            Activation::Identity => x.clone(),
        }
    }

    /// Multiplies `grad` in place by the derivative evaluated at `pre`.
    pub fn backprop<F: Scalar>(self, pre: &Tensor<F>, grad: &mut Tensor<F>) {
        if self == Activation::Relu {
            grad.data_mut()
                .iter_mut()
                .zip(pre.data())
                .for_each(|(g, &p)| {
                    if p <= F::zero() {
                        *g = F::zero();
                    }
                });
        }
    }
}
