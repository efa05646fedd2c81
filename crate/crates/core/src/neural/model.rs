use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Layout, ModelConfig};
use super::lstm::{self, ForwardCache};
use super::loss::{rmse_with_grad, softmax_in_place, xent_with_grad};
use super::optim::add_l2_gradient;
use crate::dataset::NormalizationStats;
use crate::error::{Error, Result};

/// Flat parameter vector in [`Layout`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub layout: Layout,
    pub values: Vec<f64>,
}

impl Params {
    pub fn zeros(layout: Layout) -> Self {
        Params {
            layout,
            values: vec![0.0; layout.len()],
        }
    }

    pub fn w(&self) -> &[f64] {
        &self.values[self.layout.w()]
    }

    pub fn u(&self) -> &[f64] {
        &self.values[self.layout.u()]
    }

    pub fn b(&self) -> &[f64] {
        &self.values[self.layout.b()]
    }

    /// Forget-gate slice of the LSTM bias.
    pub fn forget_bias(&self) -> &[f64] {
        let h = self.layout.hidden;
        &self.b()[h..2 * h]
    }
}

pub type Gradients = Params;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: Params,
    pub norm: NormalizationStats,
    pub meta: TrainingMeta,
    /// Bumped on every parameter update; forward caches remember it.
    pub(crate) generation: u64,
}

/// Models compare by what the model file stores: config, statistics and
/// parameters. Training metadata is not part of the identity.
impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.norm == other.norm && self.params == other.params
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Infer,
    /// Dropout active with a mask drawn from this seed.
    Train { mask_seed: u64 },
}

/// Supervision for a minibatch.
#[derive(Debug, Clone, Copy)]
pub enum BatchTargets<'a> {
    /// B × O standardized regression targets.
    Regression(&'a [f64]),
    Classes(&'a [usize]),
}

/// Uniform in `±sqrt(1 / fan_in)`.
fn fill_uniform(values: &mut [f64], fan_in: usize, rng: &mut ChaCha8Rng) {
    let bound = (1.0 / fan_in as f64).sqrt();
    for v in values.iter_mut() {
        *v = rng.random_range(-bound..bound);
    }
}

/// Deterministic initialization: weights uniform in `±sqrt(1/fan_in)`,
/// biases zero except the forget-gate bias, which starts at 1.
pub fn init_model(config: ModelConfig, seed: u64) -> Result<Model> {
    config.validate()?;
    let layout = Layout::new(&config);
    let mut params = Params::zeros(layout);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = &mut params.values;
    fill_uniform(&mut v[layout.w()], layout.input_dim, &mut rng);
    fill_uniform(&mut v[layout.u()], layout.hidden, &mut rng);
    fill_uniform(&mut v[layout.fc_w()], layout.hidden, &mut rng);
    fill_uniform(&mut v[layout.out_w()], layout.fc, &mut rng);
    let h = layout.hidden;
    let b = layout.b();
    v[b.start + h..b.start + 2 * h].iter_mut().for_each(|x| *x = 1.0);
    Ok(Model {
        config,
        params,
        norm: NormalizationStats::identity(config.input_dim, config.task.target_names().len()),
        meta: TrainingMeta {
            seed,
            ..TrainingMeta::default()
        },
        generation: 0,
    })
}

/// Runs only the recurrence over one sequence (`seq_len × D`, row-major)
/// and returns `h_L` with the activation cache.
pub fn lstm_forward(params: &Params, sequence: &[f64], seq_len: usize) -> Result<(Vec<f64>, ForwardCache)> {
    let d = params.layout.input_dim;
    if seq_len == 0 || sequence.len() != seq_len * d {
        return Err(Error::Shape(format!(
            "sequence of {} values is not {seq_len} × {d}",
            sequence.len()
        )));
    }
    let mut cache = ForwardCache::default();
    lstm::lstm_forward_batch(&params.values, &params.layout, sequence.to_vec(), 1, seq_len, &mut cache);
    let h_last = cache.final_hidden(params.layout.hidden).to_vec();
    Ok((h_last, cache))
}

impl Model {
    pub fn layout(&self) -> Layout {
        self.params.layout
    }

    pub fn param_count(&self) -> usize {
        self.params.values.len()
    }

    fn dropout_mask(&self, batch: usize, seed: u64) -> Vec<f64> {
        let p = self.config.dropout;
        if p <= 0.0 {
            return Vec::new();
        }
        let keep = 1.0 / (1.0 - p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..batch * self.config.hidden)
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect()
    }

    /// Forward pass over a time-major batch (`seq_len × batch × D`).
    /// Leaves raw outputs (logits for classification) in the cache.
    pub fn forward_batch(&self, xs: Vec<f64>, batch: usize, mode: Mode) -> Result<ForwardCache> {
        let mut cache = ForwardCache::default();
        self.forward_batch_into(xs, batch, mode, &mut cache)?;
        Ok(cache)
    }

    pub(crate) fn forward_batch_into(
        &self,
        xs: Vec<f64>,
        batch: usize,
        mode: Mode,
        cache: &mut ForwardCache,
    ) -> Result<()> {
        let (l, d) = (self.config.seq_len, self.config.input_dim);
        if batch == 0 || xs.len() != l * batch * d {
            return Err(Error::Shape(format!(
                "batch buffer of {} values is not {l} × {batch} × {d}",
                xs.len()
            )));
        }
        let layout = self.layout();
        lstm::lstm_forward_batch(&self.params.values, &layout, xs, batch, l, cache);
        let mask = match mode {
            Mode::Infer => Vec::new(),
            Mode::Train { mask_seed } => self.dropout_mask(batch, mask_seed),
        };
        lstm::head_forward(&self.params.values, &layout, mask, cache);
        cache.generation = self.generation;
        Ok(())
    }

    /// Single-window forward pass that reuses `cache`; raw outputs are left
    /// in the cache.
    pub(crate) fn forward_into_cache(
        &self,
        window: Vec<f64>,
        mode: Mode,
        cache: &mut ForwardCache,
    ) -> Result<()> {
        self.forward_batch_into(window, 1, mode, cache)
    }

    /// Forward pass on one standardized window (`seq_len × D`, row-major).
    /// Returns standardized regression outputs or class probabilities.
    pub fn forward(&self, window: &[f64], mode: Mode) -> Result<Vec<f64>> {
        let cache = self.forward_batch(window.to_vec(), 1, mode)?;
        let mut out = cache.outputs;
        if self.config.is_classification() {
            softmax_in_place(&mut out);
        }
        Ok(out)
    }

    /// Loss and exact gradient of `loss + alpha · Σθ²` for a cached minibatch.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        targets: BatchTargets<'_>,
        alpha: f64,
    ) -> Result<(f64, Gradients)> {
        let mut grads = Params::zeros(self.layout());
        let loss = self.backward_into(cache, targets, alpha, &mut grads.values)?;
        Ok((loss, grads))
    }

    pub(crate) fn backward_into(
        &self,
        cache: &ForwardCache,
        targets: BatchTargets<'_>,
        alpha: f64,
        grads: &mut [f64],
    ) -> Result<f64> {
        if cache.generation != self.generation || cache.outputs.is_empty() {
            return Err(Error::InvalidArgument(
                "forward cache is stale or empty".into(),
            ));
        }
        let o = self.config.outputs;
        let batch = cache.batch;
        let mut d_out = vec![0.0; batch * o];
        let loss = match targets {
            BatchTargets::Regression(t) if !self.config.is_classification() => {
                if t.len() != batch * o {
                    return Err(Error::Shape(format!("{} targets for {batch} × {o}", t.len())));
                }
                rmse_with_grad(&cache.outputs, t, &mut d_out)
            }
            BatchTargets::Classes(labels) if self.config.is_classification() => {
                if labels.len() != batch || labels.iter().any(|&c| c >= o) {
                    return Err(Error::Shape("bad class labels for batch".into()));
                }
                xent_with_grad(&cache.outputs, labels, o, &mut d_out)
            }
            _ => {
                return Err(Error::InvalidArgument(
                    "targets do not match the output head".into(),
                ))
            }
        };
        grads.iter_mut().for_each(|g| *g = 0.0);
        lstm::backward_batch(&self.params.values, &self.layout(), cache, &d_out, grads);
        if alpha != 0.0 {
            add_l2_gradient(grads, &self.params.values, alpha);
        }
        Ok(loss)
    }

    /// Full objective `loss + alpha · Σθ²` of a batch in the given mode.
    pub fn objective(
        &self,
        xs: Vec<f64>,
        batch: usize,
        mode: Mode,
        targets: BatchTargets<'_>,
        alpha: f64,
    ) -> Result<f64> {
        let cache = self.forward_batch(xs, batch, mode)?;
        let o = self.config.outputs;
        let mut scratch = vec![0.0; batch * o];
        let loss = match targets {
            BatchTargets::Regression(t) => rmse_with_grad(&cache.outputs, t, &mut scratch),
            BatchTargets::Classes(labels) => xent_with_grad(&cache.outputs, labels, o, &mut scratch),
        };
        let penalty: f64 = self.params.values.iter().map(|p| p * p).sum();
        Ok(loss + alpha * penalty)
    }

    pub(crate) fn touch(&mut self) {
        self.generation += 1;
    }

    /// Rounds every parameter to `f32` precision, matching the model file.
    pub fn round_to_storage_precision(&mut self) {
        for v in self.params.values.iter_mut() {
            *v = *v as f32 as f64;
        }
        self.touch();
    }

    /// Prediction for one raw (unstandardized) window: de-standardized
    /// regression targets or class probabilities.
    pub fn predict_raw(&self, window: &[f64]) -> Result<Vec<f64>> {
        let mut x = window.to_vec();
        self.norm.apply_features(&mut x);
        let mut out = self.forward(&x, Mode::Infer)?;
        if !self.config.is_classification() {
            self.norm.invert_targets(&mut out);
        }
        Ok(out)
    }
}

/// Lays out `windows` (each `seq_len × D`, row-major) time-major for a batch.
pub fn to_time_major(windows: &[&[f64]], seq_len: usize, dim: usize) -> Vec<f64> {
    let batch = windows.len();
    let mut xs = vec![0.0; seq_len * batch * dim];
    for (b, w) in windows.iter().enumerate() {
        for t in 0..seq_len {
            xs[(t * batch + b) * dim..(t * batch + b + 1) * dim]
                .copy_from_slice(&w[t * dim..(t + 1) * dim]);
        }
    }
    xs
}
