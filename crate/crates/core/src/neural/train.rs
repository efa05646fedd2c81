use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lstm::ForwardCache;
use super::loss::softmax_in_place;
use super::model::{to_time_major, BatchTargets, Mode, Model};
use super::optim::{
    adam_step, clip_gradients, AdamState, DEFAULT_CLIP_THRESHOLD, DEFAULT_L2_ALPHA,
    DEFAULT_LEARNING_RATE,
};
use crate::error::{Error, Result};

pub const DEFAULT_EPOCHS: usize = 60;
pub const DEFAULT_TRANSFER_EPOCHS: usize = 50;
pub const DEFAULT_BATCH: usize = 32;

/// Standardized training windows with their targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Examples {
    pub seq_len: usize,
    pub dim: usize,
    /// `len × seq_len × dim`, row-major per window.
    pub inputs: Vec<f64>,
    pub targets: Targets,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// `len × outputs` standardized values.
    Regression { outputs: usize, values: Vec<f64> },
    Classes { classes: usize, labels: Vec<usize> },
}

impl Examples {
    pub fn len(&self) -> usize {
        match &self.targets {
            Targets::Regression { outputs, values } => values.len() / outputs,
            Targets::Classes { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn window(&self, i: usize) -> &[f64] {
        let n = self.seq_len * self.dim;
        &self.inputs[i * n..(i + 1) * n]
    }

    /// Examples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Examples {
        let mut inputs = Vec::with_capacity(indices.len() * self.seq_len * self.dim);
        for &i in indices {
            inputs.extend_from_slice(self.window(i));
        }
        let targets = match &self.targets {
            Targets::Regression { outputs, values } => Targets::Regression {
                outputs: *outputs,
                values: indices
                    .iter()
                    .flat_map(|&i| values[i * outputs..(i + 1) * outputs].iter().copied())
                    .collect(),
            },
            Targets::Classes { classes, labels } => Targets::Classes {
                classes: *classes,
                labels: indices.iter().map(|&i| labels[i]).collect(),
            },
        };
        Examples {
            seq_len: self.seq_len,
            dim: self.dim,
            inputs,
            targets,
        }
    }

    fn check(&self, model: &Model) -> Result<()> {
        let c = &model.config;
        if self.seq_len != c.seq_len || self.dim != c.input_dim {
            return Err(Error::Shape(format!(
                "examples are {} × {}, model expects {} × {}",
                self.seq_len, self.dim, c.seq_len, c.input_dim
            )));
        }
        let ok = match &self.targets {
            Targets::Regression { outputs, .. } => !c.is_classification() && *outputs == c.outputs,
            Targets::Classes { classes, .. } => c.is_classification() && *classes == c.outputs,
        };
        if !ok {
            return Err(Error::Shape("targets do not match the model head".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch: usize,
    pub seed: u64,
    pub alpha: f64,
    pub clip: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: DEFAULT_EPOCHS,
            learning_rate: DEFAULT_LEARNING_RATE,
            batch: DEFAULT_BATCH,
            seed: 0,
            alpha: DEFAULT_L2_ALPHA,
            clip: DEFAULT_CLIP_THRESHOLD,
        }
    }
}

/// Trains in place and returns the per-epoch mean training loss.
///
/// The example order is shuffled exactly once, before the first epoch;
/// every epoch then walks the same sequence of minibatches, keeping the
/// final partial batch. Each update is: gradient of loss plus L2 penalty,
/// global-norm clipping, Adam. Parameters end rounded to `f32`
/// precision so the in-memory model equals its saved form.
pub fn train(model: &mut Model, data: &Examples, opts: &TrainOptions) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if opts.batch == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    data.check(model)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);

    let (l, d) = (data.seq_len, data.dim);
    let mut adam = AdamState::new(model.param_count());
    let mut grads = vec![0.0; model.param_count()];
    let mut cache = ForwardCache::default();
    let mut history = Vec::with_capacity(opts.epochs);
    let mut batch_targets: Vec<f64> = Vec::new();
    let mut batch_labels: Vec<usize> = Vec::new();

    for _ in 0..opts.epochs {
        let mut total = 0.0;
        for chunk in order.chunks(opts.batch) {
            let windows: Vec<&[f64]> = chunk.iter().map(|&i| data.window(i)).collect();
            let xs = to_time_major(&windows, l, d);
            let mode = if model.config.dropout > 0.0 {
                Mode::Train {
                    mask_seed: rng.random(),
                }
            } else {
                Mode::Infer
            };
            model.forward_batch_into(xs, chunk.len(), mode, &mut cache)?;
            let targets = match &data.targets {
                Targets::Regression { outputs, values } => {
                    batch_targets.clear();
                    for &i in chunk {
                        batch_targets.extend_from_slice(&values[i * outputs..(i + 1) * outputs]);
                    }
                    BatchTargets::Regression(&batch_targets)
                }
                Targets::Classes { labels, .. } => {
                    batch_labels.clear();
                    batch_labels.extend(chunk.iter().map(|&i| labels[i]));
                    BatchTargets::Classes(&batch_labels)
                }
            };
            let loss = model.backward_into(&cache, targets, opts.alpha, &mut grads)?;
            clip_gradients(&mut grads, opts.clip);
            adam_step(&mut model.params.values, &grads, &mut adam, opts.learning_rate);
            model.touch();
            total += loss * chunk.len() as f64;
        }
        history.push(total / data.len() as f64);
    }
    model.round_to_storage_precision();
    model.meta.seed = opts.seed;
    model.meta.epochs += opts.epochs;
    model.meta.loss_history.extend_from_slice(&history);
    Ok(history)
}

/// Continues training a copy of `model` on a small adaptation set with a
/// fresh optimizer state. `data` must already be standardized with the
/// model's stored statistics.
pub fn transfer_train(model: &Model, data: &Examples, opts: &TrainOptions) -> Result<Model> {
    if data.is_empty() {
        return Err(Error::Empty("adaptation set"));
    }
    let mut adapted = model.clone();
    train(&mut adapted, data, opts)?;
    Ok(adapted)
}

/// Inference over every example: standardized regression outputs or class
/// probabilities, `len × outputs`.
pub fn predict_examples(model: &Model, data: &Examples) -> Result<Vec<f64>> {
    data.check(model)?;
    const CHUNK: usize = 256;
    let o = model.config.outputs;
    let mut out = Vec::with_capacity(data.len() * o);
    let indices: Vec<usize> = (0..data.len()).collect();
    let mut cache = ForwardCache::default();
    for chunk in indices.chunks(CHUNK) {
        let windows: Vec<&[f64]> = chunk.iter().map(|&i| data.window(i)).collect();
        let xs = to_time_major(&windows, data.seq_len, data.dim);
        model.forward_batch_into(xs, chunk.len(), Mode::Infer, &mut cache)?;
        let mut values = cache.outputs.clone();
        if model.config.is_classification() {
            for row in values.chunks_exact_mut(o) {
                softmax_in_place(row);
            }
        }
        out.extend_from_slice(&values);
    }
    Ok(out)
}
