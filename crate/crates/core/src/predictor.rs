//! Beam-index classifier: a small fully-connected network mapping a raster
//! observation to a probability over beams, trained with cross-entropy SGD.
//! All parameters and arithmetic are f64 so finite-difference checks are
//! meaningful.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, SimError};
use crate::scene::{LabeledSample, SceneImage};

/// Layer sizes from raster input to beam output. Hidden layers use a
/// rectified-linear activation; the output layer is affine + softmax.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.output == 0 || self.hidden.contains(&0) {
            return Err(SimError::Domain(format!(
                "architecture with a zero-width layer: {self:?}"
            )));
        }
        Ok(())
    }

    /// (fan_in, fan_out) of every affine layer in order.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input;
        for &h in &self.hidden {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output));
        dims
    }
}

/// One affine layer; `weights` is row-major `fan_out x fan_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Layer {
        Layer { weights: vec![0.0; self.weights.len()], bias: vec![0.0; self.bias.len()] }
    }
}

/// The full parameter set (symbolically, everything the training loop
/// tunes).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParameters {
    pub arch: Architecture,
    pub layers: Vec<Layer>,
}

/// Output distribution over beams: non-negative, sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamProbabilities {
    pub probs: Vec<f64>,
}

impl BeamProbabilities {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::Domain(format!(
                "invalid probability vector (sum {sum})"
            )));
        }
        Ok(Self { probs })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    /// SGD step size; zero leaves parameters untouched.
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub weight_init_scale: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { learning_rate: 0.05, epochs: 200, batch_size: 16, seed: 0, weight_init_scale: 1.0 }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) {
            return Err(SimError::Domain("training.learning_rate: must be >= 0".into()));
        }
        if self.epochs == 0 {
            return Err(SimError::Domain("training.epochs: must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(SimError::Domain("training.batch_size: must be >= 1".into()));
        }
        if !(self.weight_init_scale >= 0.0) {
            return Err(SimError::Domain("training.weight_init_scale: must be >= 0".into()));
        }
        Ok(())
    }
}

/// Weights i.i.d. uniform in `[-s, s]` with `s = init_scale / sqrt(fan_in)`;
/// biases zero. Deterministic under the seed.
pub fn init_classifier(
    arch: &Architecture,
    init_scale: f64,
    seed: u64,
) -> Result<ClassifierParameters> {
    arch.validate()?;
    if !(init_scale >= 0.0) {
        return Err(SimError::Domain("init_classifier: scale must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = arch
        .layer_dims()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let scale = init_scale / (fan_in as f64).sqrt();
            let weights = (0..fan_in * fan_out)
                .map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * scale)
                .collect();
            Layer { weights, bias: vec![0.0; fan_out] }
        })
        .collect();
    Ok(ClassifierParameters { arch: arch.clone(), layers })
}

fn affine(layer: &Layer, input: &[f64]) -> Vec<f64> {
    let fan_in = input.len();
    layer
        .bias
        .iter()
        .enumerate()
        .map(|(o, &b)| {
            let row = &layer.weights[o * fan_in..(o + 1) * fan_in];
            b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>()
        })
        .collect()
}

fn image_input(params: &ClassifierParameters, image: &SceneImage) -> Result<Vec<f64>> {
    if image.width * image.height != params.arch.input {
        return Err(SimError::Dimension(format!(
            "image {}x{} does not match classifier input {}",
            image.width, image.height, params.arch.input
        )));
    }
    Ok(image.pixels.iter().map(|&p| p as f64).collect())
}

fn logits(params: &ClassifierParameters, x: Vec<f64>) -> Vec<f64> {
    let mut activation = x;
    let last = params.layers.len() - 1;
    for (l, layer) in params.layers.iter().enumerate() {
        let z = affine(layer, &activation);
        activation = if l < last { z.into_iter().map(|v| v.max(0.0)).collect() } else { z };
    }
    activation
}

/// log-sum-exp with the max subtracted first.
fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

/// Full forward pass: affine/ReLU chain, then a numerically stabilized
/// softmax.
pub fn forward(params: &ClassifierParameters, image: &SceneImage) -> Result<BeamProbabilities> {
    let z = logits(params, image_input(params, image)?);
    let lse = log_sum_exp(&z);
    BeamProbabilities::new(z.into_iter().map(|v| (v - lse).exp()).collect())
}

/// Index of the largest probability; ties break to the lowest index.
pub fn predict_best_beam(probs: &BeamProbabilities) -> usize {
    let mut best = 0;
    let mut best_p = f64::NEG_INFINITY;
    for (j, &p) in probs.probs.iter().enumerate() {
        if p > best_p {
            best_p = p;
            best = j;
        }
    }
    best
}

/// Render + classify in one step.
pub fn classify_image(params: &ClassifierParameters, image: &SceneImage) -> Result<usize> {
    Ok(predict_best_beam(&forward(params, image)?))
}

/// Mean cross-entropy over the batch and its gradient, same shape as the
/// parameters. The loss is computed through log-sum-exp so near-zero
/// predicted probabilities cannot underflow to -inf.
pub fn loss_and_gradient(
    params: &ClassifierParameters,
    batch: &[LabeledSample],
) -> Result<(f64, Vec<Layer>)> {
    if batch.is_empty() {
        return Err(SimError::Domain("loss_and_gradient: empty batch".into()));
    }
    let mut grads: Vec<Layer> = params.layers.iter().map(Layer::zeros_like).collect();
    let mut total_loss = 0.0;
    let last = params.layers.len() - 1;

    for sample in batch {
        if sample.label >= params.arch.output {
            return Err(SimError::Domain(format!(
                "label {} outside classifier output {}",
                sample.label, params.arch.output
            )));
        }
        // Forward, keeping each layer's input and pre-activation.
        let mut inputs = Vec::with_capacity(params.layers.len());
        let mut pre_acts = Vec::with_capacity(params.layers.len());
        let mut activation = image_input(params, &sample.image)?;
        for (l, layer) in params.layers.iter().enumerate() {
            let z = affine(layer, &activation);
            inputs.push(activation);
            if l < last {
                activation = z.iter().map(|&v| v.max(0.0)).collect();
            } else {
                activation = z.clone();
            }
            pre_acts.push(z);
        }

        let z = &pre_acts[last];
        let lse = log_sum_exp(z);
        total_loss += lse - z[sample.label];

        // delta = softmax(z) - onehot(label), then backpropagate.
        let mut delta: Vec<f64> = z.iter().map(|&v| (v - lse).exp()).collect();
        delta[sample.label] -= 1.0;
        for l in (0..params.layers.len()).rev() {
            let input = &inputs[l];
            let fan_in = input.len();
            let grad = &mut grads[l];
            for (o, &d) in delta.iter().enumerate() {
                grad.bias[o] += d;
                let row = &mut grad.weights[o * fan_in..(o + 1) * fan_in];
                for (g, &x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            if l > 0 {
                let layer = &params.layers[l];
                let mut prev = vec![0.0; fan_in];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * fan_in..(o + 1) * fan_in];
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                // ReLU gate from the previous layer's pre-activation.
                for (p, &z_prev) in prev.iter_mut().zip(&pre_acts[l - 1]) {
                    if z_prev <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }

    let n = batch.len() as f64;
    for grad in &mut grads {
        for w in &mut grad.weights {
            *w /= n;
        }
        for b in &mut grad.bias {
            *b /= n;
        }
    }
    Ok((total_loss / n, grads))
}

/// Mean cross-entropy of the batch (no gradient).
pub fn mean_loss(params: &ClassifierParameters, batch: &[LabeledSample]) -> Result<f64> {
    if batch.is_empty() {
        return Err(SimError::Domain("mean_loss: empty batch".into()));
    }
    let mut total = 0.0;
    for sample in batch {
        let z = logits(params, image_input(params, &sample.image)?);
        total += log_sum_exp(&z) - z[sample.label];
    }
    Ok(total / batch.len() as f64)
}

/// Mini-batch SGD with per-epoch shuffling driven by the config seed.
/// A non-finite batch loss aborts with the epoch and batch indices.
pub fn train(
    params: ClassifierParameters,
    samples: &[LabeledSample],
    config: &TrainingConfig,
) -> Result<ClassifierParameters> {
    config.validate()?;
    if samples.is_empty() {
        return Err(SimError::Domain("train: no samples".into()));
    }
    let mut params = params;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<LabeledSample> = chunk.iter().map(|&i| samples[i].clone()).collect();
            let (loss, grads) = loss_and_gradient(&params, &batch)?;
            if !loss.is_finite() {
                return Err(SimError::Diverged { epoch, batch: batch_idx, loss });
            }
            for (layer, grad) in params.layers.iter_mut().zip(&grads) {
                for (w, g) in layer.weights.iter_mut().zip(&grad.weights) {
                    *w -= config.learning_rate * g;
                }
                for (b, g) in layer.bias.iter_mut().zip(&grad.bias) {
                    *b -= config.learning_rate * g;
                }
            }
        }
    }
    Ok(params)
}

/// Fraction of samples whose predicted beam equals the stored label.
pub fn top1_accuracy(params: &ClassifierParameters, samples: &[LabeledSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(SimError::Domain("top1_accuracy: no samples".into()));
    }
    let mut hits = 0usize;
    for sample in samples {
        if classify_image(params, &sample.image)? == sample.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

// ── Model persistence ────────────────────────────────────────────────────

const MAGIC: &[u8; 8] = b"MMNOMAMD";
const VERSION: u32 = 1;

/// Versioned flat model file: magic, version, architecture, then all
/// parameters as little-endian f64 in layer order. Round-trips bit-exactly.
pub fn save_model(path: &Path, params: &ClassifierParameters) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(params.arch.input as u32).to_le_bytes())?;
    out.write_all(&(params.arch.hidden.len() as u32).to_le_bytes())?;
    for &h in &params.arch.hidden {
        out.write_all(&(h as u32).to_le_bytes())?;
    }
    out.write_all(&(params.arch.output as u32).to_le_bytes())?;
    for layer in &params.layers {
        for &w in &layer.weights {
            out.write_all(&w.to_le_bytes())?;
        }
        for &b in &layer.bias {
            out.write_all(&b.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ClassifierParameters> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SimError::Format(format!("{}: not a model file", path.display())));
    }
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |input: &mut BufReader<File>| -> Result<u32> {
        input.read_exact(&mut u32buf)?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(SimError::Format(format!("unsupported model version {version}")));
    }
    let arch_input = read_u32(&mut input)? as usize;
    let hidden_len = read_u32(&mut input)? as usize;
    let mut hidden = Vec::with_capacity(hidden_len);
    for _ in 0..hidden_len {
        hidden.push(read_u32(&mut input)? as usize);
    }
    let output = read_u32(&mut input)? as usize;
    let arch = Architecture { input: arch_input, hidden, output };
    arch.validate().map_err(|e| SimError::Format(format!("model header: {e}")))?;

    let mut f64buf = [0u8; 8];
    let mut read_f64 = |input: &mut BufReader<File>| -> Result<f64> {
        input.read_exact(&mut f64buf)?;
        Ok(f64::from_le_bytes(f64buf))
    };
    let mut layers = Vec::new();
    for (fan_in, fan_out) in arch.layer_dims() {
        let mut weights = Vec::with_capacity(fan_in * fan_out);
        for _ in 0..fan_in * fan_out {
            weights.push(read_f64(&mut input)?);
        }
        let mut bias = Vec::with_capacity(fan_out);
        for _ in 0..fan_out {
            bias.push(read_f64(&mut input)?);
        }
        layers.push(Layer { weights, bias });
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(SimError::Format("model has trailing bytes".into()));
    }
    Ok(ClassifierParameters { arch, layers })
}
