//! Batch normalization over the channel axis of NCHW tensors.

use crate::error::{Error, Result};
use crate::layers::conv::dims4;
use crate::tensor::{Element, Tensor};

/// Per-channel batch normalization with exponentially averaged running
/// statistics for inference. Defaults: ε = 1e-3, momentum = 0.99.
#[derive(Debug, Clone)]
pub struct BatchNorm<T = f32> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub epsilon: T,
    pub momentum: T,
}

/// Batch statistics and normalized activations saved by the train-mode
/// forward pass. Infer-mode caches exist only to be rejected by `backward`.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T = f32> {
    pub x_hat: Tensor<T>,
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub inv_std: Vec<T>,
    pub train: bool,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads<T = f32> {
    pub dx: Tensor<T>,
    pub dgamma: Tensor<T>,
    pub dbeta: Tensor<T>,
}

impl<T: Element> BatchNorm<T> {
    /// Identity-initialized layer: γ=1, β=0, running mean 0, running var 1.
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::ones(&[channels]).expect("channels ≥ 1"),
            beta: Tensor::zeros(&[channels]).expect("channels ≥ 1"),
            running_mean: Tensor::zeros(&[channels]).expect("channels ≥ 1"),
            running_var: Tensor::ones(&[channels]).expect("channels ≥ 1"),
            epsilon: T::from(1e-3).unwrap(),
            momentum: T::from(0.99).unwrap(),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.shape()[0]
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
        let (n, c, h, w) = dims4(x, "batchnorm input")?;
        if c != self.channels() {
            return Err(Error::Shape(format!(
                "batchnorm: input has {c} channels, layer has {}",
                self.channels()
            )));
        }
        Ok((n, c, h, w))
    }

    /// Normalize with batch statistics (population variance) and update the
    /// running statistics: r ← momentum·r + (1−momentum)·batch.
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, BatchNormCache<T>)> {
        let (n, c, h, w) = self.check_input(x)?;
        let count = n * h * w;
        if count < 2 {
            return Err(Error::DegenerateBatch(format!(
                "batch statistics need N·H·W ≥ 2 per channel, got {count}"
            )));
        }
        let countt = T::from(count).unwrap();
        let hw = h * w;

        let mut mean = vec![T::zero(); c];
        let mut var = vec![T::zero(); c];
        for ch in 0..c {
            let mut acc = T::zero();
            for s in 0..n {
                let base = (s * c + ch) * hw;
                for &v in &x.data()[base..base + hw] {
                    acc = acc + v;
                }
            }
            let m = acc / countt;
            let mut vacc = T::zero();
            for s in 0..n {
                let base = (s * c + ch) * hw;
                for &v in &x.data()[base..base + hw] {
                    let d = v - m;
                    vacc = vacc + d * d;
                }
            }
            mean[ch] = m;
            var[ch] = vacc / countt;
        }

        let inv_std: Vec<T> = var
            .iter()
            .map(|&v| T::one() / (v + self.epsilon).sqrt())
            .collect();

        let mut x_hat = vec![T::zero(); x.len()];
        let mut y = vec![T::zero(); x.len()];
        for s in 0..n {
            for ch in 0..c {
                let base = (s * c + ch) * hw;
                let (m, r) = (mean[ch], inv_std[ch]);
                let (g, b) = (self.gamma.data()[ch], self.beta.data()[ch]);
                for t in 0..hw {
                    let xh = (x.data()[base + t] - m) * r;
                    x_hat[base + t] = xh;
                    y[base + t] = g * xh + b;
                }
            }
        }

        let mom = self.momentum;
        let rem = T::one() - mom;
        for ch in 0..c {
            let rm = self.running_mean.data_mut();
            rm[ch] = mom * rm[ch] + rem * mean[ch];
            let rv = self.running_var.data_mut();
            rv[ch] = mom * rv[ch] + rem * var[ch];
        }

        Ok((
            Tensor::from_vec(x.shape(), y)?,
            BatchNormCache {
                x_hat: Tensor::from_vec(x.shape(), x_hat)?,
                mean,
                var,
                inv_std,
                train: true,
            },
        ))
    }

    /// Normalize with the running statistics; no state change.
    pub fn forward_infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, h, w) = self.check_input(x)?;
        let hw = h * w;
        let mut y = vec![T::zero(); x.len()];
        for s in 0..n {
            for ch in 0..c {
                let base = (s * c + ch) * hw;
                let m = self.running_mean.data()[ch];
                let r = T::one() / (self.running_var.data()[ch] + self.epsilon).sqrt();
                let (g, b) = (self.gamma.data()[ch], self.beta.data()[ch]);
                for t in 0..hw {
                    y[base + t] = g * (x.data()[base + t] - m) * r + b;
                }
            }
        }
        Ok(Tensor::from_vec(&[n, c, h, w], y)?)
    }

    /// Exact gradients through the batch-statistics dependency.
    pub fn backward(&self, cache: &BatchNormCache<T>, dy: &Tensor<T>) -> Result<BatchNormGrads<T>> {
        if !cache.train {
            return Err(Error::Usage(
                "batchnorm backward requires a train-mode cache".into(),
            ));
        }
        let (n, c, h, w) = self.check_input(&cache.x_hat)?;
        if dy.shape() != cache.x_hat.shape() {
            return Err(Error::Shape(format!(
                "batchnorm backward: dy shape {:?} does not match cache {:?}",
                dy.shape(),
                cache.x_hat.shape()
            )));
        }
        let hw = h * w;
        let count = T::from(n * hw).unwrap();

        let mut dgamma = vec![T::zero(); c];
        let mut dbeta = vec![T::zero(); c];
        for ch in 0..c {
            let mut dg = T::zero();
            let mut db = T::zero();
            for s in 0..n {
                let base = (s * c + ch) * hw;
                for t in 0..hw {
                    let d = dy.data()[base + t];
                    dg = dg + d * cache.x_hat.data()[base + t];
                    db = db + d;
                }
            }
            dgamma[ch] = dg;
            dbeta[ch] = db;
        }

        // dx = r·(dx̂ − mean(dx̂) − x̂·mean(dx̂∘x̂)) with dx̂ = γ·dy, means
        // taken per channel over N,H,W. Note Σdx̂ = γ·dbeta, Σdx̂∘x̂ = γ·dgamma.
        let mut dx = vec![T::zero(); dy.len()];
        for s in 0..n {
            for ch in 0..c {
                let base = (s * c + ch) * hw;
                let g = self.gamma.data()[ch];
                let r = cache.inv_std[ch];
                let mean_dxh = g * dbeta[ch] / count;
                let mean_dxh_xh = g * dgamma[ch] / count;
                for t in 0..hw {
                    let dxh = g * dy.data()[base + t];
                    dx[base + t] =
                        r * (dxh - mean_dxh - cache.x_hat.data()[base + t] * mean_dxh_xh);
                }
            }
        }

        Ok(BatchNormGrads {
            dx: Tensor::from_vec(dy.shape(), dx)?,
            dgamma: Tensor::from_vec(&[c], dgamma)?,
            dbeta: Tensor::from_vec(&[c], dbeta)?,
        })
    }
}
