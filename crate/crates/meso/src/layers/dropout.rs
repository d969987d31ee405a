//! Inverted dropout.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::tensor::{Element, Tensor};

/// Inverted dropout: kept activations are scaled by 1/(1−rate) at train
/// time, so inference is the identity.
#[derive(Debug, Clone, Copy)]
pub struct Dropout {
    pub rate: f64,
}

/// The scaled keep mask (entries 0 or 1/(1−rate)).
#[derive(Debug, Clone)]
pub struct DropoutCache<T = f32> {
    pub mask: Tensor<T>,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        Ok(Self { rate })
    }

    /// Train-mode mask draw from the given stream; one stream per
    /// (seed, epoch, batch) keeps workers decoupled and runs reproducible.
    pub fn forward_train<T: Element>(
        &self,
        x: &Tensor<T>,
        rng: &mut Stream,
    ) -> Result<(Tensor<T>, DropoutCache<T>)> {
        if self.rate == 0.0 {
            let mask = Tensor::ones(x.shape())?;
            return Ok((x.clone(), DropoutCache { mask }));
        }
        let keep_scale = T::from(1.0 / (1.0 - self.rate)).unwrap();
        let mut mask = vec![T::zero(); x.len()];
        let mut y = vec![T::zero(); x.len()];
        for i in 0..x.len() {
            if rng.gen::<f64>() >= self.rate {
                mask[i] = keep_scale;
                y[i] = x.data()[i] * keep_scale;
            }
        }
        Ok((
            Tensor::from_vec(x.shape(), y)?,
            DropoutCache {
                mask: Tensor::from_vec(x.shape(), mask)?,
            },
        ))
    }

    /// Inference is the identity.
    pub fn forward_infer<T: Element>(&self, x: &Tensor<T>) -> Tensor<T> {
        x.clone()
    }

    pub fn backward<T: Element>(
        &self,
        cache: &DropoutCache<T>,
        dy: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        dy.mul(&cache.mask)
    }
}
