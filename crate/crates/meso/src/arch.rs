//! The four Meso architectures: declarative block specs, parameter
//! instantiation, and the full forward/backward chain.
//!
//! All four share one layout: a stack of conv blocks (conv → ReLU → batch
//! norm → max pool), then flatten → dropout → dense(16) → ReLU → dropout →
//! dense(C) → softmax.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::{
    relu, relu_backward, softmax_rows, BatchNorm, BatchNormCache, Conv2d, ConvCache, Dense,
    DenseCache, Dropout, DropoutCache, MaxPool, MaxPoolCache, ReluCache,
};
use crate::rng::{self, Stream};
use crate::tensor::Tensor;

/// One convolutional block: `filters` output channels, square `kernel`,
/// and a non-overlapping `pool`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConvBlockSpec {
    pub filters: usize,
    pub kernel: usize,
    pub pool: usize,
}

impl ConvBlockSpec {
    fn validate(&self) -> Result<()> {
        if !matches!(self.filters, 8 | 16 | 32) {
            return Err(Error::Config(format!(
                "block filters must be 8, 16 or 32, got {}",
                self.filters
            )));
        }
        if !matches!(self.kernel, 3 | 5) {
            return Err(Error::Config(format!(
                "block kernel must be 3 or 5, got {}",
                self.kernel
            )));
        }
        if !matches!(self.pool, 2 | 4) {
            return Err(Error::Config(format!(
                "block pool must be 2 or 4, got {}",
                self.pool
            )));
        }
        Ok(())
    }
}

/// The externally accepted architecture names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchName {
    /// 4-block binary detector.
    Meso4,
    /// 6-block binary detector.
    MesonetPlus,
    /// 4-block three-class detector.
    MesoMultinet,
    /// 6-block three-class detector.
    MesoMultinetPlus,
}

impl ArchName {
    pub const ALL: [ArchName; 4] = [
        ArchName::Meso4,
        ArchName::MesonetPlus,
        ArchName::MesoMultinet,
        ArchName::MesoMultinetPlus,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ArchName::Meso4 => "meso4",
            ArchName::MesonetPlus => "mesonet-plus",
            ArchName::MesoMultinet => "meso-multinet",
            ArchName::MesoMultinetPlus => "meso-multinet-plus",
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            ArchName::Meso4 | ArchName::MesonetPlus => 2,
            ArchName::MesoMultinet | ArchName::MesoMultinetPlus => 3,
        }
    }
}

impl fmt::Display for ArchName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArchName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "meso4" => Ok(ArchName::Meso4),
            "mesonet-plus" => Ok(ArchName::MesonetPlus),
            "meso-multinet" => Ok(ArchName::MesoMultinet),
            "meso-multinet-plus" => Ok(ArchName::MesoMultinetPlus),
            other => Err(Error::Config(format!(
                "unknown architecture '{other}' (expected meso4, mesonet-plus, meso-multinet or meso-multinet-plus)"
            ))),
        }
    }
}

/// Declarative architecture description, sufficient to instantiate and to
/// persist a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureSpec {
    pub name: String,
    /// (channels, height, width); always 3 channels.
    pub input: (usize, usize, usize),
    pub blocks: Vec<ConvBlockSpec>,
    pub dense_hidden: usize,
    pub dropout_rate: f64,
    pub num_classes: usize,
    pub class_names: Vec<String>,
}

/// 4-block spec: filters [8,8,16,16], kernels [3,5,3,3], pools [2,2,2,4].
/// Flatten width is 16·8·8 = 1024 at the 256×256 input.
pub fn spec_meso4(num_classes: usize, class_names: Vec<String>) -> Result<ArchitectureSpec> {
    let name = match num_classes {
        2 => ArchName::Meso4,
        3 => ArchName::MesoMultinet,
        n => return Err(Error::Config(format!("unsupported class count {n} (expected 2 or 3)"))),
    };
    ArchitectureSpec::new(
        name,
        vec![
            ConvBlockSpec { filters: 8, kernel: 3, pool: 2 },
            ConvBlockSpec { filters: 8, kernel: 5, pool: 2 },
            ConvBlockSpec { filters: 16, kernel: 3, pool: 2 },
            ConvBlockSpec { filters: 16, kernel: 3, pool: 4 },
        ],
        num_classes,
        class_names,
    )
}

/// 6-block spec: filters [8,8,16,16,32,32], kernels [3,5,5,3,3,3], pools all
/// 2. Flatten width is 32·4·4 = 512 at the 256×256 input.
pub fn spec_meso_plus6(num_classes: usize, class_names: Vec<String>) -> Result<ArchitectureSpec> {
    let name = match num_classes {
        2 => ArchName::MesonetPlus,
        3 => ArchName::MesoMultinetPlus,
        n => return Err(Error::Config(format!("unsupported class count {n} (expected 2 or 3)"))),
    };
    ArchitectureSpec::new(
        name,
        vec![
            ConvBlockSpec { filters: 8, kernel: 3, pool: 2 },
            ConvBlockSpec { filters: 8, kernel: 5, pool: 2 },
            ConvBlockSpec { filters: 16, kernel: 5, pool: 2 },
            ConvBlockSpec { filters: 16, kernel: 3, pool: 2 },
            ConvBlockSpec { filters: 32, kernel: 3, pool: 2 },
            ConvBlockSpec { filters: 32, kernel: 3, pool: 2 },
        ],
        num_classes,
        class_names,
    )
}

impl ArchitectureSpec {
    fn new(
        name: ArchName,
        blocks: Vec<ConvBlockSpec>,
        num_classes: usize,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let spec = Self {
            name: name.to_string(),
            input: (3, 256, 256),
            blocks,
            dense_hidden: 16,
            dropout_rate: 0.5,
            num_classes,
            class_names,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec for a named architecture with the given class labels.
    pub fn for_name(name: ArchName, class_names: Vec<String>) -> Result<Self> {
        match name {
            ArchName::Meso4 | ArchName::MesoMultinet => spec_meso4(name.num_classes(), class_names),
            ArchName::MesonetPlus | ArchName::MesoMultinetPlus => {
                spec_meso_plus6(name.num_classes(), class_names)
            }
        }
    }

    /// Same block stack at a different input resolution (used by the scaled
    /// synthetic fixtures). Pools must still divide the extents.
    pub fn with_input(mut self, height: usize, width: usize) -> Result<Self> {
        self.input = (3, height, width);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::Config("architecture needs at least one block".into()));
        }
        for b in &self.blocks {
            b.validate()?;
        }
        if self.num_classes != self.class_names.len() {
            return Err(Error::Config(format!(
                "num_classes {} does not match {} class names",
                self.num_classes,
                self.class_names.len()
            )));
        }
        let pool_product: usize = self.blocks.iter().map(|b| b.pool).product();
        let (_, h, w) = self.input;
        if h % pool_product != 0 || w % pool_product != 0 {
            return Err(Error::Config(format!(
                "pool product {pool_product} does not divide input extents {h}x{w}"
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Spatial extent after each block, starting at the input height:
    /// meso4 yields [256, 128, 64, 32, 8].
    pub fn spatial_chain(&self) -> Vec<usize> {
        let mut chain = vec![self.input.1];
        for b in &self.blocks {
            chain.push(chain.last().unwrap() / b.pool);
        }
        chain
    }

    /// Width of the flattened feature vector feeding the dense head.
    pub fn flatten_len(&self) -> usize {
        let last = *self.spatial_chain().last().unwrap();
        self.blocks.last().unwrap().filters * last * last
    }

    /// Total parameter element count, BN running statistics included.
    pub fn parameter_count(&self) -> usize {
        let mut count = 0;
        let mut cin = self.input.0;
        for b in &self.blocks {
            count += b.filters * cin * b.kernel * b.kernel + b.filters; // conv w + b
            count += 4 * b.filters; // BN gamma, beta, running mean/var
            cin = b.filters;
        }
        count += self.flatten_len() * self.dense_hidden + self.dense_hidden;
        count += self.dense_hidden * self.num_classes + self.num_classes;
        count
    }
}

/// One instantiated conv block.
#[derive(Debug, Clone)]
pub struct ConvBlock {
    pub conv: Conv2d,
    pub bn: BatchNorm,
    pub pool: MaxPool,
}

/// An instantiated architecture: spec plus every parameter tensor and the
/// seed it was initialized from.
#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ArchitectureSpec,
    pub blocks: Vec<ConvBlock>,
    pub dense1: Dense,
    pub dense2: Dense,
    pub dropout: Dropout,
    pub seed: u64,
}

/// He-uniform draw: U(−√(6/fan_in), +√(6/fan_in)).
fn he_uniform(shape: &[usize], fan_in: usize, rng: &mut Stream) -> Tensor {
    let limit = (6.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| rng.gen_range(-limit..limit) as f32)
        .collect();
    Tensor::from_vec(shape, data).expect("valid shape")
}

/// Instantiate a spec: He-uniform conv/dense weights from the seeded
/// stream, zero biases, identity batch norm. Deterministic for a fixed
/// (spec, seed) pair.
pub fn build(spec: &ArchitectureSpec, seed: u64) -> Result<Model> {
    spec.validate()?;
    let mut stream = rng::stream(seed, rng::tag::INIT, 0);
    let mut blocks = Vec::with_capacity(spec.blocks.len());
    let mut cin = spec.input.0;
    for b in &spec.blocks {
        let fan_in = cin * b.kernel * b.kernel;
        let weights = he_uniform(&[b.filters, cin, b.kernel, b.kernel], fan_in, &mut stream);
        let conv = Conv2d::new(weights, Tensor::zeros(&[b.filters])?)?;
        blocks.push(ConvBlock {
            conv,
            bn: BatchNorm::new(b.filters),
            pool: MaxPool::new(b.pool)?,
        });
        cin = b.filters;
    }
    let flat = spec.flatten_len();
    let dense1 = Dense::new(
        he_uniform(&[flat, spec.dense_hidden], flat, &mut stream),
        Tensor::zeros(&[spec.dense_hidden])?,
    )?;
    let dense2 = Dense::new(
        he_uniform(&[spec.dense_hidden, spec.num_classes], spec.dense_hidden, &mut stream),
        Tensor::zeros(&[spec.num_classes])?,
    )?;
    Ok(Model {
        spec: spec.clone(),
        blocks,
        dense1,
        dense2,
        dropout: Dropout::new(spec.dropout_rate)?,
        seed,
    })
}

/// Per-block forward state.
#[derive(Debug)]
pub struct BlockCache {
    pub conv: ConvCache,
    pub relu: ReluCache,
    pub bn: BatchNormCache,
    pub pool: MaxPoolCache,
    /// Shape of the block output, for shape-chain assertions.
    pub out_shape: Vec<usize>,
}

/// Everything a training step needs to run the backward pass.
#[derive(Debug)]
pub struct ForwardCaches {
    pub blocks: Vec<BlockCache>,
    pub drop1: DropoutCache,
    pub dense1: DenseCache,
    pub relu_hidden: ReluCache,
    pub drop2: DropoutCache,
    pub dense2: DenseCache,
    /// Pre-softmax activations of the class head.
    pub logits: Tensor,
    /// Softmax output, saved for the fused cross-entropy gradient.
    pub probs: Tensor,
}

/// Gradients for every trainable parameter, in model order.
#[derive(Debug)]
pub struct Gradients {
    pub blocks: Vec<BlockGrads>,
    pub dense1_w: Tensor,
    pub dense1_b: Tensor,
    pub dense2_w: Tensor,
    pub dense2_b: Tensor,
}

#[derive(Debug)]
pub struct BlockGrads {
    pub conv_w: Tensor,
    pub conv_b: Tensor,
    pub bn_gamma: Tensor,
    pub bn_beta: Tensor,
}

impl Model {
    pub fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    pub fn class_names(&self) -> &[String] {
        &self.spec.class_names
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        let (c, h, w) = self.spec.input;
        match x.shape() {
            &[n, xc, xh, xw] if (xc, xh, xw) == (c, h, w) => Ok(n),
            s => Err(Error::Shape(format!(
                "model input must be [N, {c}, {h}, {w}], got {s:?}"
            ))),
        }
    }

    /// Training forward pass: batch statistics, dropout active. Updates BN
    /// running statistics. Dropout masks come from `dropout_rng`.
    pub fn forward_train(
        &mut self,
        x: &Tensor,
        dropout_rng: &mut Stream,
    ) -> Result<(Tensor, ForwardCaches)> {
        let n = self.check_input(x)?;
        let mut cur = x.clone();
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for block in &mut self.blocks {
            let (c, conv_cache) = block.conv.forward(&cur)?;
            let (a, relu_cache) = relu(&c);
            let (b, bn_cache) = block.bn.forward_train(&a)?;
            let (p, pool_cache) = block.pool.forward(&b)?;
            let out_shape = p.shape().to_vec();
            blocks.push(BlockCache {
                conv: conv_cache,
                relu: relu_cache,
                bn: bn_cache,
                pool: pool_cache,
                out_shape,
            });
            cur = p;
        }
        let flat = cur.reshape(&[n, self.spec.flatten_len()])?;
        let (d1_in, drop1) = self.dropout.forward_train(&flat, dropout_rng)?;
        let (h1, dense1_cache) = self.dense1.forward(&d1_in)?;
        let (a1, relu_hidden) = relu(&h1);
        let (d2_in, drop2) = self.dropout.forward_train(&a1, dropout_rng)?;
        let (logits, dense2_cache) = self.dense2.forward(&d2_in)?;
        let probs = softmax_rows(&logits)?;
        Ok((
            probs.clone(),
            ForwardCaches {
                blocks,
                drop1,
                dense1: dense1_cache,
                relu_hidden,
                drop2,
                dense2: dense2_cache,
                logits,
                probs,
            },
        ))
    }

    /// Deterministic, side-effect-free inference pass returning class
    /// probabilities.
    pub fn forward_infer(&self, x: &Tensor) -> Result<Tensor> {
        softmax_rows(&self.infer_logits(x)?)
    }

    /// Inference pass stopping before the softmax; used by the transfer
    /// invariants and the binary ROC score.
    pub fn infer_logits(&self, x: &Tensor) -> Result<Tensor> {
        let n = self.check_input(x)?;
        let mut cur = x.clone();
        for block in &self.blocks {
            let (c, _) = block.conv.forward(&cur)?;
            let (a, _) = relu(&c);
            let b = block.bn.forward_infer(&a)?;
            let (p, _) = block.pool.forward(&b)?;
            cur = p;
        }
        let flat = cur.reshape(&[n, self.spec.flatten_len()])?;
        let (h1, _) = self.dense1.forward(&flat)?;
        let (a1, _) = relu(&h1);
        let (logits, _) = self.dense2.forward(&a1)?;
        Ok(logits)
    }

    /// Backward pass from the class-head gradient `dlogits` (shape [N, C]),
    /// producing gradients for every trainable parameter.
    pub fn backward(&self, caches: &ForwardCaches, dlogits: &Tensor) -> Result<Gradients> {
        let d2 = self.dense2.backward(&caches.dense2, dlogits)?;
        let dd2_in = self.dropout.backward(&caches.drop2, &d2.dx)?;
        let da1 = relu_backward(&caches.relu_hidden, &dd2_in)?;
        let d1 = self.dense1.backward(&caches.dense1, &da1)?;
        let dflat = self.dropout.backward(&caches.drop1, &d1.dx)?;

        let last = caches.blocks.last().expect("at least one block");
        let mut dcur = dflat.reshape(&last.out_shape)?;
        let mut block_grads: Vec<Option<BlockGrads>> = (0..self.blocks.len()).map(|_| None).collect();
        for (idx, (block, cache)) in self.blocks.iter().zip(&caches.blocks).enumerate().rev() {
            let dpool = block.pool.backward(&cache.pool, &dcur)?;
            let bn = block.bn.backward(&cache.bn, &dpool)?;
            let da = relu_backward(&cache.relu, &bn.dx)?;
            let conv = block.conv.backward(&cache.conv, &da)?;
            block_grads[idx] = Some(BlockGrads {
                conv_w: conv.dw,
                conv_b: conv.db,
                bn_gamma: bn.dgamma,
                bn_beta: bn.dbeta,
            });
            dcur = conv.dx;
        }

        Ok(Gradients {
            blocks: block_grads.into_iter().map(|g| g.unwrap()).collect(),
            dense1_w: d1.dw,
            dense1_b: d1.db,
            dense2_w: d2.dw,
            dense2_b: d2.db,
        })
    }

    /// Trainable parameters in canonical order (running stats excluded).
    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut params = Vec::new();
        for block in &mut self.blocks {
            params.push(&mut block.conv.weights);
            params.push(&mut block.conv.bias);
            params.push(&mut block.bn.gamma);
            params.push(&mut block.bn.beta);
        }
        params.push(&mut self.dense1.weights);
        params.push(&mut self.dense1.bias);
        params.push(&mut self.dense2.weights);
        params.push(&mut self.dense2.bias);
        params
    }

    /// Trainable parameters in canonical order, read-only.
    pub fn parameters(&self) -> Vec<&Tensor> {
        let mut params = Vec::new();
        for block in &self.blocks {
            params.push(&block.conv.weights);
            params.push(&block.conv.bias);
            params.push(&block.bn.gamma);
            params.push(&block.bn.beta);
        }
        params.push(&self.dense1.weights);
        params.push(&self.dense1.bias);
        params.push(&self.dense2.weights);
        params.push(&self.dense2.bias);
        params
    }

    /// Every persisted tensor as (name, tensor), trainable or not, in the
    /// canonical serialization order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, block) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.conv.weight"), &block.conv.weights));
            out.push((format!("block{i}.conv.bias"), &block.conv.bias));
            out.push((format!("block{i}.bn.gamma"), &block.bn.gamma));
            out.push((format!("block{i}.bn.beta"), &block.bn.beta));
            out.push((format!("block{i}.bn.running_mean"), &block.bn.running_mean));
            out.push((format!("block{i}.bn.running_var"), &block.bn.running_var));
        }
        out.push(("dense1.weight".into(), &self.dense1.weights));
        out.push(("dense1.bias".into(), &self.dense1.bias));
        out.push(("dense2.weight".into(), &self.dense2.weights));
        out.push(("dense2.bias".into(), &self.dense2.bias));
        out
    }

    /// Mutable view matching [`Model::named_tensors`] order.
    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        for (i, block) in self.blocks.iter_mut().enumerate() {
            out.push((format!("block{i}.conv.weight"), &mut block.conv.weights));
            out.push((format!("block{i}.conv.bias"), &mut block.conv.bias));
            out.push((format!("block{i}.bn.gamma"), &mut block.bn.gamma));
            out.push((format!("block{i}.bn.beta"), &mut block.bn.beta));
            out.push((format!("block{i}.bn.running_mean"), &mut block.bn.running_mean));
            out.push((format!("block{i}.bn.running_var"), &mut block.bn.running_var));
        }
        out.push(("dense1.weight".into(), &mut self.dense1.weights));
        out.push(("dense1.bias".into(), &mut self.dense1.bias));
        out.push(("dense2.weight".into(), &mut self.dense2.weights));
        out.push(("dense2.bias".into(), &mut self.dense2.bias));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

impl Gradients {
    /// Gradient tensors in the same order as [`Model::parameters`].
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for g in &self.blocks {
            out.push(&g.conv_w);
            out.push(&g.conv_b);
            out.push(&g.bn_gamma);
            out.push(&g.bn_beta);
        }
        out.push(&self.dense1_w);
        out.push(&self.dense1_b);
        out.push(&self.dense2_w);
        out.push(&self.dense2_b);
        out
    }
}
