//! Categorical cross-entropy, the Adam optimizer, and the epoch/fit loop.

use crate::arch::Model;
use crate::dataset::DataSource;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{Element, Tensor};

/// Floor applied to probabilities before the log so the loss stays finite
/// for any valid softmax output.
pub const LOG_CLAMP: f64 = 1e-12;

/// −(1/N)·Σ log p(true class). Targets must be exact one-hot rows.
pub fn categorical_cross_entropy<T: Element>(probs: &Tensor<T>, onehot: &Tensor<T>) -> Result<T> {
    let (n, c) = check_prob_pair(probs, onehot)?;
    let clamp = T::from(LOG_CLAMP).unwrap();
    let mut total = T::zero();
    for r in 0..n {
        let row = &onehot.data()[r * c..(r + 1) * c];
        let hit = row
            .iter()
            .position(|&v| v == T::one())
            .expect("validated one-hot");
        let p = probs.data()[r * c + hit].max(clamp);
        total = total - p.ln();
    }
    Ok(total / T::from(n).unwrap())
}

/// Fused gradient of the mean cross-entropy through the softmax:
/// dlogits = (probs − onehot) / N.
pub fn ce_softmax_grad<T: Element>(probs: &Tensor<T>, onehot: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, _) = check_prob_pair(probs, onehot)?;
    let scale = T::one() / T::from(n).unwrap();
    Ok(probs.sub(onehot)?.scale(scale))
}

fn check_prob_pair<T: Element>(probs: &Tensor<T>, onehot: &Tensor<T>) -> Result<(usize, usize)> {
    let (n, c) = match probs.shape() {
        &[n, c] => (n, c),
        s => return Err(Error::Shape(format!("probs must be rank 2, got {s:?}"))),
    };
    if onehot.shape() != [n, c] {
        return Err(Error::Shape(format!(
            "targets shape {:?} does not match probs {:?}",
            onehot.shape(),
            probs.shape()
        )));
    }
    for r in 0..n {
        let row = &onehot.data()[r * c..(r + 1) * c];
        let ones = row.iter().filter(|&&v| v == T::one()).count();
        let zeros = row.iter().filter(|&&v| v == T::zero()).count();
        if ones != 1 || ones + zeros != c {
            return Err(Error::Usage(format!("target row {r} is not one-hot")));
        }
    }
    Ok((n, c))
}

/// Adam state: first/second moments per parameter tensor plus the step
/// count. Defaults β1 = 0.9, β2 = 0.999, ε = 1e-8.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
    pub t: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    /// Zero-moment state for parameters of the given shapes.
    pub fn new(learning_rate: f32, shapes: &[&[usize]]) -> Result<Self> {
        let m = shapes
            .iter()
            .map(|s| Tensor::zeros(s))
            .collect::<Result<Vec<_>>>()?;
        let v = m.clone();
        Ok(Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m,
            v,
        })
    }

    /// State sized for a model's trainable parameters.
    pub fn for_model(learning_rate: f32, model: &Model) -> Result<Self> {
        let params = model.parameters();
        let shapes: Vec<&[usize]> = params.iter().map(|p| p.shape()).collect();
        Self::new(learning_rate, &shapes)
    }
}

/// One Adam update over a parameter list. Rejects non-finite gradients
/// before touching any state.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[&Tensor],
    state: &mut AdamState,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "adam_step: {} params, {} grads, {} state slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::Shape(format!(
                "adam_step: param shape {:?} vs grad shape {:?}",
                p.shape(),
                g.shape()
            )));
        }
        if g.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("adam_step: non-finite gradient".into()));
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let bias1 = 1.0 - b1.powi(t);
    let bias2 = 1.0 - b2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let pd = p.data_mut();
        let md = m.data_mut();
        let vd = v.data_mut();
        for i in 0..pd.len() {
            let gi = g.data()[i];
            md[i] = b1 * md[i] + (1.0 - b1) * gi;
            vd[i] = b2 * vd[i] + (1.0 - b2) * gi * gi;
            let m_hat = md[i] / bias1;
            let v_hat = vd[i] / bias2;
            pd[i] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

/// Training-run configuration.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 8,
            learning_rate: 1e-3,
            seed: 42,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be ≥ 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(
                "batch_size must be ≥ 2 (batch normalization needs batch statistics)".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be non-negative and finite, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Metrics of one completed epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

/// Per-epoch training record.
#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    /// `epoch,train_loss,train_acc,val_loss,val_acc` lines; validation
    /// fields stay empty when no validation set was given.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        for (i, e) in self.epochs.iter().enumerate() {
            let vl = e.val_loss.map(|v| v.to_string()).unwrap_or_default();
            let va = e.val_accuracy.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i + 1,
                e.train_loss,
                e.train_accuracy,
                vl,
                va
            ));
        }
        out
    }
}

fn check_data_matches_model(model: &Model, data: &impl DataSource) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Data("empty dataset".into()));
    }
    if data.class_names().len() != model.num_classes() {
        return Err(Error::Config(format!(
            "dataset has {} classes but the model head has {}",
            data.class_names().len(),
            model.num_classes()
        )));
    }
    Ok(())
}

/// One pass over the data: deterministic shuffle keyed by
/// (seed, epoch_index), then per-batch forward(train) / backward /
/// adam_step. Returns mean loss and accuracy over the epoch's samples.
pub fn train_epoch(
    model: &mut Model,
    data: &impl DataSource,
    optimizer: &mut AdamState,
    config: &TrainConfig,
    epoch_index: usize,
) -> Result<EpochStats> {
    config.validate()?;
    check_data_matches_model(model, data)?;

    let mut order: Vec<usize> = (0..data.len()).collect();
    if config.shuffle {
        use rand::seq::SliceRandom;
        let mut stream = rng::stream(config.seed, rng::tag::SHUFFLE, epoch_index as u64);
        order.shuffle(&mut stream);
    }

    let mut loss_sum = 0.0f64;
    let mut correct = 0usize;
    for (batch_index, chunk) in order.chunks(config.batch_size).enumerate() {
        let batch = data.load(chunk)?;
        let mut dropout_rng = rng::stream(
            config.seed,
            rng::tag::DROPOUT,
            (epoch_index as u64) << 32 | batch_index as u64,
        );
        let (probs, caches) = model.forward_train(&batch.x, &mut dropout_rng)?;
        let loss = categorical_cross_entropy(&probs, &batch.y)?;
        loss_sum += loss as f64 * chunk.len() as f64;
        correct += count_correct(&probs, &batch.y)?;

        let dlogits = ce_softmax_grad(&probs, &batch.y)?;
        let grads = model.backward(&caches, &dlogits)?;
        let grad_tensors = grads.tensors();
        let mut params = model.parameters_mut();
        adam_step(&mut params, &grad_tensors, optimizer)?;
    }

    Ok(EpochStats {
        train_loss: loss_sum / data.len() as f64,
        train_accuracy: correct as f64 / data.len() as f64,
        val_loss: None,
        val_accuracy: None,
    })
}

fn count_correct(probs: &Tensor, onehot: &Tensor) -> Result<usize> {
    let pred = probs.argmax_rows()?;
    let truth = onehot.argmax_rows()?;
    Ok(pred.iter().zip(&truth).filter(|(a, b)| a == b).count())
}

/// Infer-mode pass over a dataset: mean loss, accuracy, and the raw
/// (truth, prediction, probability) triples for downstream metrics.
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub truths: Vec<usize>,
    pub predictions: Vec<usize>,
    /// Row-major [N, C] probabilities.
    pub probabilities: Tensor,
}

pub fn evaluate(model: &Model, data: &impl DataSource, batch_size: usize) -> Result<Evaluation> {
    check_data_matches_model(model, data)?;
    let indices: Vec<usize> = (0..data.len()).collect();
    let c = model.num_classes();
    let mut probs_all = Vec::with_capacity(data.len() * c);
    let mut truths = Vec::with_capacity(data.len());
    let mut loss_sum = 0.0f64;
    for chunk in indices.chunks(batch_size.max(1)) {
        let batch = data.load(chunk)?;
        let probs = model.forward_infer(&batch.x)?;
        let loss = categorical_cross_entropy(&probs, &batch.y)?;
        loss_sum += loss as f64 * chunk.len() as f64;
        probs_all.extend_from_slice(probs.data());
        truths.extend(batch.y.argmax_rows()?);
    }
    let probabilities = Tensor::from_vec(&[data.len(), c], probs_all)?;
    let predictions = probabilities.argmax_rows()?;
    let correct = predictions
        .iter()
        .zip(&truths)
        .filter(|(a, b)| a == b)
        .count();
    Ok(Evaluation {
        loss: loss_sum / data.len() as f64,
        accuracy: correct as f64 / data.len() as f64,
        truths,
        predictions,
        probabilities,
    })
}

/// Run `config.epochs` epochs sequentially; validation (when given) runs in
/// infer mode after each epoch. The final model is retained as-is — no
/// early stopping.
pub fn fit(
    model: &mut Model,
    train: &impl DataSource,
    val: Option<&impl DataSource>,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    config.validate()?;
    let mut optimizer = AdamState::for_model(config.learning_rate, model)?;
    let mut history = TrainHistory::default();
    for epoch in 0..config.epochs {
        let mut stats = train_epoch(model, train, &mut optimizer, config, epoch)?;
        if let Some(val_data) = val {
            let eval = evaluate(model, val_data, config.batch_size)?;
            stats.val_loss = Some(eval.loss);
            stats.val_accuracy = Some(eval.accuracy);
        }
        history.epochs.push(stats);
    }
    Ok(history)
}
