//! ReLU activation and the row-wise softmax head.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Forward input saved for the backward pass.
#[derive(Debug, Clone)]
pub struct ReluCache<T = f32> {
    pub x: Tensor<T>,
}

/// y = max(x, 0).
pub fn relu<T: Element>(x: &Tensor<T>) -> (Tensor<T>, ReluCache<T>) {
    let y = x.map(|v| if v > T::zero() { v } else { T::zero() });
    (y, ReluCache { x: x.clone() })
}

/// dx = dy where x > 0, else 0. The subgradient at exactly 0 is 0.
pub fn relu_backward<T: Element>(cache: &ReluCache<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
    if cache.x.shape() != dy.shape() {
        return Err(Error::Shape(format!(
            "relu backward: dy shape {:?} does not match cache {:?}",
            dy.shape(),
            cache.x.shape()
        )));
    }
    let data = cache
        .x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&x, &d)| if x > T::zero() { d } else { T::zero() })
        .collect();
    Tensor::from_vec(dy.shape(), data)
}

/// Numerically stabilized row-wise softmax of a rank-2 tensor: the row
/// maximum is subtracted before exponentiation so large logits cannot
/// overflow.
pub fn softmax_rows<T: Element>(z: &Tensor<T>) -> Result<Tensor<T>> {
    let (rows, cols) = match z.shape() {
        &[r, c] => (r, c),
        s => return Err(Error::Shape(format!("softmax input must be rank 2, got {s:?}"))),
    };
    if z.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("softmax: non-finite input".into()));
    }
    let mut out = vec![T::zero(); rows * cols];
    for r in 0..rows {
        let row = &z.data()[r * cols..(r + 1) * cols];
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        let dst = &mut out[r * cols..(r + 1) * cols];
        let mut sum = T::zero();
        for (d, &v) in dst.iter_mut().zip(row) {
            *d = (v - max).exp();
            sum = sum + *d;
        }
        for d in dst.iter_mut() {
            *d = *d / sum;
        }
    }
    Tensor::from_vec(&[rows, cols], out)
}
