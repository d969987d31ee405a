//! Non-overlapping max pooling.

use crate::error::{Error, Result};
use crate::layers::conv::dims4;
use crate::tensor::{Element, Tensor};

/// Max pooling with window == stride (2 or 4). Input extents must divide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool {
    pub pool: usize,
}

/// Flat source index of each window maximum, in output order.
#[derive(Debug, Clone)]
pub struct MaxPoolCache {
    pub argmax: Vec<usize>,
    pub in_shape: Vec<usize>,
}

impl MaxPool {
    pub fn new(pool: usize) -> Result<Self> {
        if !matches!(pool, 2 | 4) {
            return Err(Error::Config(format!("pool extent must be 2 or 4, got {pool}")));
        }
        Ok(Self { pool })
    }

    /// Window maximum per pool×pool window; ties record the first maximal
    /// position in row-major scan order.
    pub fn forward<T: Element>(&self, x: &Tensor<T>) -> Result<(Tensor<T>, MaxPoolCache)> {
        let (n, c, h, w) = dims4(x, "maxpool input")?;
        let p = self.pool;
        if h % p != 0 || w % p != 0 {
            return Err(Error::Shape(format!(
                "maxpool: extents {h}x{w} not divisible by pool {p}"
            )));
        }
        let (oh, ow) = (h / p, w / p);
        let mut y = vec![T::zero(); n * c * oh * ow];
        let mut argmax = vec![0usize; n * c * oh * ow];
        for s in 0..n {
            for ch in 0..c {
                let in_base = (s * c + ch) * h * w;
                let out_base = (s * c + ch) * oh * ow;
                for oi in 0..oh {
                    for oj in 0..ow {
                        let mut best_idx = in_base + (oi * p) * w + oj * p;
                        let mut best = x.data()[best_idx];
                        for u in 0..p {
                            for v in 0..p {
                                let idx = in_base + (oi * p + u) * w + (oj * p + v);
                                let val = x.data()[idx];
                                if val > best {
                                    best = val;
                                    best_idx = idx;
                                }
                            }
                        }
                        y[out_base + oi * ow + oj] = best;
                        argmax[out_base + oi * ow + oj] = best_idx;
                    }
                }
            }
        }
        Ok((
            Tensor::from_vec(&[n, c, oh, ow], y)?,
            MaxPoolCache {
                argmax,
                in_shape: vec![n, c, h, w],
            },
        ))
    }

    /// Routes dy to the recorded argmax positions; zeros elsewhere.
    pub fn backward<T: Element>(&self, cache: &MaxPoolCache, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let p = self.pool;
        let expected: Vec<usize> = vec![
            cache.in_shape[0],
            cache.in_shape[1],
            cache.in_shape[2] / p,
            cache.in_shape[3] / p,
        ];
        if dy.shape() != expected {
            return Err(Error::Shape(format!(
                "maxpool backward: dy shape {:?} does not match pooled shape {expected:?}",
                dy.shape()
            )));
        }
        let mut dx = vec![T::zero(); cache.in_shape.iter().product()];
        for (i, &src) in cache.argmax.iter().enumerate() {
            dx[src] = dx[src] + dy.data()[i];
        }
        Ok(Tensor::from_vec(&cache.in_shape, dx)?)
    }
}
