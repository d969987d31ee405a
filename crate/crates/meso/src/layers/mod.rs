//! Forward and backward passes for every layer the Meso architectures use:
//! convolution, batch normalization, max pooling, ReLU, dense, dropout and
//! the softmax head.
//!
//! Each layer's `forward` returns the output together with a cache holding
//! exactly what its `backward` needs; a backward call must receive the cache
//! of its own forward call. Parameters are plain tensors so the optimizer
//! can treat every layer uniformly.

mod activation;
mod batchnorm;
mod conv;
mod dense;
mod dropout;
mod pool;

pub use activation::{relu, relu_backward, softmax_rows, ReluCache};
pub use batchnorm::{BatchNorm, BatchNormCache, BatchNormGrads};
pub use conv::{Conv2d, ConvCache, ConvGrads};
pub use dense::{Dense, DenseCache, DenseGrads};
pub use dropout::{Dropout, DropoutCache};
pub use pool::{MaxPool, MaxPoolCache};

/// Whether stochastic layers are active and batch statistics are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}
