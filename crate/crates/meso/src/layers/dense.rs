//! Fully connected layer.

use crate::error::{Error, Result};
use crate::tensor::{matmul_at_into, matmul_bt_into, Element, Tensor};

/// Dense layer: y = x·W + b with W `[In, Out]`, b `[Out]`.
#[derive(Debug, Clone)]
pub struct Dense<T = f32> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct DenseCache<T = f32> {
    pub x: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T = f32> {
    pub dx: Tensor<T>,
    pub dw: Tensor<T>,
    pub db: Tensor<T>,
}

impl<T: Element> Dense<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let out = match weights.shape() {
            &[_, o] => o,
            s => {
                return Err(Error::Shape(format!(
                    "dense weights must be rank 2 [In,Out], got {s:?}"
                )))
            }
        };
        if bias.shape() != [out] {
            return Err(Error::Shape(format!(
                "dense bias shape {:?} does not match {out} outputs",
                bias.shape()
            )));
        }
        Ok(Self { weights, bias })
    }

    pub fn in_features(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn out_features(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, DenseCache<T>)> {
        let (n, d) = match x.shape() {
            &[n, d] => (n, d),
            s => return Err(Error::Shape(format!("dense input must be rank 2, got {s:?}"))),
        };
        if d != self.in_features() {
            return Err(Error::Shape(format!(
                "dense: input width {d} does not match layer input {}",
                self.in_features()
            )));
        }
        let mut y = x.matmul(&self.weights)?;
        let out = self.out_features();
        for r in 0..n {
            for (j, v) in y.data_mut()[r * out..(r + 1) * out].iter_mut().enumerate() {
                *v = *v + self.bias.data()[j];
            }
        }
        Ok((y, DenseCache { x: x.clone() }))
    }

    /// dw = xᵀ·dy, dx = dy·Wᵀ, db = column sums of dy.
    pub fn backward(&self, cache: &DenseCache<T>, dy: &Tensor<T>) -> Result<DenseGrads<T>> {
        let n = cache.x.shape()[0];
        let (din, dout) = (self.in_features(), self.out_features());
        if dy.shape() != [n, dout] {
            return Err(Error::Shape(format!(
                "dense backward: dy shape {:?} does not match [{n}, {dout}]",
                dy.shape()
            )));
        }
        if cache.x.shape()[1] != din {
            return Err(Error::Shape("dense backward: cache from a different layer".into()));
        }

        let mut dw = vec![T::zero(); din * dout];
        matmul_at_into(cache.x.data(), dy.data(), &mut dw, n, din, dout);

        let mut dx = vec![T::zero(); n * din];
        matmul_bt_into(dy.data(), self.weights.data(), &mut dx, n, dout, din);

        let mut db = vec![T::zero(); dout];
        for r in 0..n {
            for j in 0..dout {
                db[j] = db[j] + dy.data()[r * dout + j];
            }
        }

        Ok(DenseGrads {
            dx: Tensor::from_vec(&[n, din], dx)?,
            dw: Tensor::from_vec(&[din, dout], dw)?,
            db: Tensor::from_vec(&[dout], db)?,
        })
    }
}
