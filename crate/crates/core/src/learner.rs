//! Multilayer perceptron with softmax cross-entropy, minibatch SGD,
//! intermediate feature extraction and sample-weighted model averaging.
//!
//! # Parameter layout
//!
//! A model with layer sizes `[d0, d1, ..., dL]` stores its parameters in a
//! single flat `f64` vector. Layers are laid out in order `l = 1..=L`; each
//! layer contributes its weight matrix row-major (`d_l` rows of `d_{l-1}`
//! entries, row `j` holding the incoming weights of unit `j`) followed by its
//! `d_l` biases. The total length is `sum_l (d_{l-1} + 1) * d_l`.
//!
//! Hidden layers use ReLU; the last layer is linear and produces logits.
//! Feature layers are numbered `1..=L`: layer `l < L` yields its post-ReLU
//! activations, layer `L` yields the logits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EhflError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    layer_sizes: Vec<usize>,
    values: Vec<f64>,
}

/// Parameter initialization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// All parameters zero.
    Zeros,
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    #[default]
    Uniform,
}

impl ModelParams {
    pub fn param_count(layer_sizes: &[usize]) -> usize {
        layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    pub fn zeros(layer_sizes: &[usize]) -> Self {
        assert!(
            layer_sizes.len() >= 2,
            "need at least input and output layer"
        );
        assert!(
            layer_sizes.iter().all(|&d| d > 0),
            "layer widths must be positive"
        );
        ModelParams {
            layer_sizes: layer_sizes.to_vec(),
            values: vec![0.0; Self::param_count(layer_sizes)],
        }
    }

    pub fn init<R: Rng + ?Sized>(layer_sizes: &[usize], scheme: Init, rng: &mut R) -> Self {
        let mut m = Self::zeros(layer_sizes);
        if scheme == Init::Uniform {
            let mut offset = 0;
            for w in layer_sizes.windows(2) {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                for v in &mut m.values[offset..offset + fan_in * fan_out] {
                    *v = rng.random_range(-bound..bound);
                }
                offset += (fan_in + 1) * fan_out;
            }
        }
        m
    }

    pub fn from_values(layer_sizes: &[usize], values: Vec<f64>) -> Result<Self> {
        let expected = Self::param_count(layer_sizes);
        if values.len() != expected {
            return Err(EhflError::Shape(format!(
                "expected {expected} parameters for {layer_sizes:?}, got {}",
                values.len()
            )));
        }
        Ok(ModelParams {
            layer_sizes: layer_sizes.to_vec(),
            values,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().expect("non-empty")
    }

    /// Width of feature layer `layer` (1-based).
    pub fn feature_dim(&self, layer: usize) -> usize {
        self.layer_sizes[layer]
    }

    /// Offset of layer `l` (1-based) in the flat vector.
    fn layer_offset(&self, l: usize) -> usize {
        self.layer_sizes[..l]
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    /// Weight slice and bias slice of layer `l` (1-based).
    fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (fan_in, fan_out) = (self.layer_sizes[l - 1], self.layer_sizes[l]);
        let off = self.layer_offset(l);
        let w = &self.values[off..off + fan_in * fan_out];
        let b = &self.values[off + fan_in * fan_out..off + (fan_in + 1) * fan_out];
        (w, b)
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self += factor * other`, element-wise over the flat order.
    pub fn add_scaled(&mut self, other: &ModelParams, factor: f64) -> Result<()> {
        if self.layer_sizes != other.layer_sizes {
            return Err(EhflError::Shape(format!(
                "cannot combine {:?} with {:?}",
                self.layer_sizes, other.layer_sizes
            )));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
        Ok(())
    }
}

/// Feature vector of a designated layer. As produced by [`forward`] it holds
/// the SUM of the layer's activations over the batch rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn zeros(dim: usize) -> Self {
        FeatureVector(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, factor: f64) -> FeatureVector {
        FeatureVector(self.0.iter().map(|v| v * factor).collect())
    }
}

/// Row-major batch of inputs with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    inputs: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
}

impl Minibatch {
    pub fn new(inputs: Vec<f64>, dim: usize, labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(EhflError::Shape("empty minibatch".into()));
        }
        if dim == 0 || inputs.len() != dim * labels.len() {
            return Err(EhflError::Shape(format!(
                "{} input values do not form {} rows of width {dim}",
                inputs.len(),
                labels.len()
            )));
        }
        Ok(Minibatch {
            inputs,
            dim,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }
}

/// Activations of every layer for a whole batch. `acts[0]` is the input,
/// `acts[l]` is the output of layer `l` (post-ReLU for hidden layers,
/// logits for the last one). `pre[l]` holds pre-activations.
struct Trace {
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

fn check_input(m: &ModelParams, x: &Minibatch) -> Result<()> {
    if x.dim() != m.input_dim() {
        return Err(EhflError::Shape(format!(
            "input width {} does not match model input {}",
            x.dim(),
            m.input_dim()
        )));
    }
    Ok(())
}

fn run_layers(m: &ModelParams, x: &Minibatch) -> Trace {
    let rows = x.len();
    let num_layers = m.num_layers();
    let mut acts = Vec::with_capacity(num_layers + 1);
    let mut pre = Vec::with_capacity(num_layers + 1);
    acts.push(x.inputs().to_vec());
    pre.push(Vec::new());
    for l in 1..=num_layers {
        let (fan_in, fan_out) = (m.layer_sizes[l - 1], m.layer_sizes[l]);
        let (w, b) = m.layer(l);
        let input = &acts[l - 1];
        let mut z = vec![0.0; rows * fan_out];
        for r in 0..rows {
            let a = &input[r * fan_in..(r + 1) * fan_in];
            for j in 0..fan_out {
                let wj = &w[j * fan_in..(j + 1) * fan_in];
                z[r * fan_out + j] = b[j] + wj.iter().zip(a).map(|(p, q)| p * q).sum::<f64>();
            }
        }
        let out = if l < num_layers {
            z.iter().map(|v| v.max(0.0)).collect()
        } else {
            z.clone()
        };
        pre.push(z);
        acts.push(out);
    }
    Trace { acts, pre }
}

fn column_sum(values: &[f64], rows: usize, cols: usize) -> FeatureVector {
    let mut out = vec![0.0; cols];
    for r in 0..rows {
        for (o, v) in out.iter_mut().zip(&values[r * cols..(r + 1) * cols]) {
            *o += v;
        }
    }
    FeatureVector(out)
}

fn check_feature_layer(m: &ModelParams, feature_layer: usize) -> Result<()> {
    if feature_layer == 0 || feature_layer > m.num_layers() {
        return Err(EhflError::Shape(format!(
            "feature layer {feature_layer} outside 1..={}",
            m.num_layers()
        )));
    }
    Ok(())
}

/// Output of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Row-major `batch_size x num_classes` logits.
    pub logits: Vec<f64>,
    /// Column sum over the batch of the designated layer's activations.
    pub features: FeatureVector,
}

pub fn forward(m: &ModelParams, x: &Minibatch, feature_layer: usize) -> Result<ForwardOutput> {
    check_input(m, x)?;
    check_feature_layer(m, feature_layer)?;
    let trace = run_layers(m, x);
    let features = column_sum(
        &trace.acts[feature_layer],
        x.len(),
        m.feature_dim(feature_layer),
    );
    let logits = trace.acts.into_iter().last().expect("at least one layer");
    Ok(ForwardOutput { logits, features })
}

/// Class predictions (argmax of logits, lowest index on ties).
pub fn predict(m: &ModelParams, x: &Minibatch) -> Result<Vec<usize>> {
    check_input(m, x)?;
    let trace = run_layers(m, x);
    let c = m.num_classes();
    let logits = &trace.acts[m.num_layers()];
    Ok((0..x.len())
        .map(|r| {
            let row = &logits[r * c..(r + 1) * c];
            let mut best = 0;
            for j in 1..c {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect())
}

/// Mean softmax cross-entropy and, per row, the softmax probabilities.
fn softmax_xent(logits: &[f64], labels: &[usize], c: usize) -> (f64, Vec<f64>) {
    let mut probs = vec![0.0; logits.len()];
    let mut loss = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let row = &logits[r * c..(r + 1) * c];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_sum = max + sum.ln();
        loss += log_sum - row[y];
        for j in 0..c {
            probs[r * c + j] = (row[j] - log_sum).exp();
        }
    }
    (loss / labels.len() as f64, probs)
}

pub fn loss(m: &ModelParams, x: &Minibatch) -> Result<f64> {
    check_input(m, x)?;
    if let Some(&bad) = x.labels().iter().find(|&&y| y >= m.num_classes()) {
        return Err(EhflError::Shape(format!("label {bad} out of range")));
    }
    let trace = run_layers(m, x);
    Ok(softmax_xent(&trace.acts[m.num_layers()], x.labels(), m.num_classes()).0)
}

/// Loss, flat gradient and feature sum from a single forward/backward pass.
pub struct Backprop {
    pub loss: f64,
    pub gradient: Vec<f64>,
    pub features: FeatureVector,
}

pub fn loss_and_gradient(m: &ModelParams, x: &Minibatch, feature_layer: usize) -> Result<Backprop> {
    check_input(m, x)?;
    check_feature_layer(m, feature_layer)?;
    let c = m.num_classes();
    if let Some(&bad) = x.labels().iter().find(|&&y| y >= c) {
        return Err(EhflError::Shape(format!("label {bad} out of range")));
    }
    let rows = x.len();
    let num_layers = m.num_layers();
    let trace = run_layers(m, x);
    let features = column_sum(
        &trace.acts[feature_layer],
        rows,
        m.feature_dim(feature_layer),
    );
    let (loss, probs) = softmax_xent(&trace.acts[num_layers], x.labels(), c);

    // d loss / d logits = (softmax - onehot) / rows
    let mut delta = probs;
    for (r, &y) in x.labels().iter().enumerate() {
        delta[r * c + y] -= 1.0;
    }
    delta.iter_mut().for_each(|d| *d /= rows as f64);

    let mut gradient = vec![0.0; m.len()];
    for l in (1..=num_layers).rev() {
        let (fan_in, fan_out) = (m.layer_sizes[l - 1], m.layer_sizes[l]);
        let off = m.layer_offset(l);
        let input = &trace.acts[l - 1];
        {
            let (gw, gb) =
                gradient[off..off + (fan_in + 1) * fan_out].split_at_mut(fan_in * fan_out);
            for r in 0..rows {
                let a = &input[r * fan_in..(r + 1) * fan_in];
                for j in 0..fan_out {
                    let d = delta[r * fan_out + j];
                    if d == 0.0 {
                        continue;
                    }
                    gb[j] += d;
                    for (g, ai) in gw[j * fan_in..(j + 1) * fan_in].iter_mut().zip(a) {
                        *g += d * ai;
                    }
                }
            }
        }
        if l > 1 {
            let (w, _) = m.layer(l);
            let below = &trace.pre[l - 1];
            let mut next = vec![0.0; rows * fan_in];
            for r in 0..rows {
                for j in 0..fan_out {
                    let d = delta[r * fan_out + j];
                    if d == 0.0 {
                        continue;
                    }
                    for i in 0..fan_in {
                        next[r * fan_in + i] += w[j * fan_in + i] * d;
                    }
                }
                for i in 0..fan_in {
                    if below[r * fan_in + i] <= 0.0 {
                        next[r * fan_in + i] = 0.0;
                    }
                }
            }
            delta = next;
        }
    }
    Ok(Backprop {
        loss,
        gradient,
        features,
    })
}

/// Result of one SGD step.
#[derive(Debug, Clone)]
pub struct TrainStep {
    pub params: ModelParams,
    /// Feature sum computed with the weights BEFORE the update.
    pub features: FeatureVector,
    pub loss: f64,
}

/// One SGD step on the mean cross-entropy of `batch`. The returned features
/// come from the same forward pass that produced the gradient.
pub fn batch_train(
    m: &ModelParams,
    batch: &Minibatch,
    gamma: f64,
    feature_layer: usize,
) -> Result<TrainStep> {
    let bp = loss_and_gradient(m, batch, feature_layer)?;
    let mut params = m.clone();
    if gamma != 0.0 {
        for (p, g) in params.values.iter_mut().zip(&bp.gradient) {
            *p -= gamma * g;
        }
    }
    Ok(TrainStep {
        params,
        features: bp.features,
        loss: bp.loss,
    })
}

/// Historical feature moment: the per-batch feature sums accumulated over a
/// training run, divided by the number of sample presentations.
pub fn finalize_training(
    per_batch: &[FeatureVector],
    samples_seen: usize,
    kappa: usize,
) -> Result<FeatureVector> {
    if per_batch.len() != kappa {
        return Err(EhflError::IncompleteTraining {
            expected: kappa,
            got: per_batch.len(),
        });
    }
    if samples_seen == 0 {
        return Err(EhflError::Shape("no samples seen during training".into()));
    }
    let dim = per_batch[0].len();
    let mut sum = vec![0.0; dim];
    for f in per_batch {
        if f.len() != dim {
            return Err(EhflError::Shape("feature sums of different length".into()));
        }
        for (s, v) in sum.iter_mut().zip(f.as_slice()) {
            *s += v;
        }
    }
    Ok(FeatureVector(sum).scaled(1.0 / samples_seen as f64))
}

/// Sample-count weighted average of the received models. Weights are
/// normalized over the received messages only.
pub fn aggregate<'a, I>(messages: I) -> Result<ModelParams>
where
    I: IntoIterator<Item = (&'a ModelParams, usize)>,
{
    let messages: Vec<_> = messages.into_iter().collect();
    let Some(&(first, _)) = messages.first() else {
        return Err(EhflError::Shape(
            "aggregate needs at least one message".into(),
        ));
    };
    let total: usize = messages.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return Err(EhflError::Shape("messages carry zero samples".into()));
    }
    let mut out = ModelParams::zeros(first.layer_sizes());
    for (m, n) in &messages {
        out.add_scaled(m, *n as f64 / total as f64)?;
    }
    Ok(out)
}
