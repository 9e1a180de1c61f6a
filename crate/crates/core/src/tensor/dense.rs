use super::{matmul, Mat, Scalar, Tensor};
use crate::error::{Error, Result};

/// Gradients returned by [`dense_backward`].
#[derive(Clone, Debug)]
pub struct DenseGrads<F> {
    pub input: Tensor<F>,
    pub weights: Tensor<F>,
    pub bias: Tensor<F>,
}

fn extents<F: Scalar>(input: &Tensor<F>, weights: &Tensor<F>) -> Result<(usize, usize, usize)> {
    let &[out_dim, in_dim] = weights.shape() else {
        return Err(Error::dim("dense", "O×D weights", format!("{:?}", weights.shape())));
    };
    let (batch, d) = match *input.shape() {
        [d] => (1, d),
        [b, d] => (b, d),
        _ => return Err(Error::dim("dense", "D or B×D input", format!("{:?}", input.shape()))),
    };
    if d != in_dim {
        return Err(Error::dim("dense", format!("{in_dim} input features"), d));
    }
    Ok((batch, in_dim, out_dim))
}

/// `y = W x + b` for a D-vector or each row of a B×D batch.
pub fn dense<F: Scalar>(input: &Tensor<F>, weights: &Tensor<F>, bias: &Tensor<F>) -> Result<Tensor<F>> {
    let (batch, in_dim, out_dim) = extents(input, weights)?;
    if bias.len() != out_dim {
        return Err(Error::dim("dense bias", out_dim, bias.len()));
    }
    let mut out = Vec::with_capacity(batch * out_dim);
    for _ in 0..batch {
        out.extend_from_slice(bias.data());
    }
    matmul(
        Mat::new(input.data(), batch, in_dim),
        Mat::new(weights.data(), out_dim, in_dim).t(),
        &mut out,
        true,
    );
    let shape = if input.rank() == 1 {
        vec![out_dim]
    } else {
        vec![batch, out_dim]
    };
    Tensor::new(shape, out)
}

pub fn dense_backward<F: Scalar>(
    input: &Tensor<F>,
    weights: &Tensor<F>,
    grad_out: &Tensor<F>,
) -> Result<DenseGrads<F>> {
    let (batch, in_dim, out_dim) = extents(input, weights)?;
    if grad_out.len() != batch * out_dim {
        return Err(Error::dim("dense_backward", batch * out_dim, grad_out.len()));
    }
    let g = Mat::new(grad_out.data(), batch, out_dim);
    let mut dx = vec![F::zero(); batch * in_dim];
    matmul(g, Mat::new(weights.data(), out_dim, in_dim), &mut dx, false);
    let mut dw = vec![F::zero(); out_dim * in_dim];
    matmul(g.t(), Mat::new(input.data(), batch, in_dim), &mut dw, false);
    let mut db = vec![F::zero(); out_dim];
    for row in grad_out.data().chunks(out_dim) {
        db.iter_mut().zip(row).for_each(|(a, &b)| *a += b);
    }
    Ok(DenseGrads {
        input: Tensor::new(input.shape().to_vec(), dx)?,
        weights: Tensor::new([out_dim, in_dim], dw)?,
        bias: Tensor::new([out_dim], db)?,
    })
}
