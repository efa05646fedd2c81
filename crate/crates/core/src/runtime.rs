//! Frame-by-frame prediction: preprocessing, feature extraction, a FIFO of
//! the last `L` feature vectors and one model evaluation per frame.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use crate::capture::TrackingFrame;
use crate::error::{Error, Result};
use crate::features::{fill_all_features, MAX_FEATURES};
use crate::neural::{ForwardCache, Mode, Model};
use crate::preprocessing::{PreprocessConfig, Preprocessor};

/// Output for one frame once the window is full.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Arrival frame index the prediction refers to.
    pub frame_index: u64,
    /// Regression targets in original units, or class probabilities.
    pub values: Vec<f64>,
}

impl Prediction {
    /// Most probable class and its probability.
    pub fn top_class(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, p)| if p > best.1 { (i, p) } else { best })
    }
}

/// Per-frame processing time statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LatencyStats {
    pub frames: u64,
    pub total: Duration,
    pub max: Duration,
}

impl LatencyStats {
    pub fn record(&mut self, elapsed: Duration) {
        self.frames += 1;
        self.total += elapsed;
        self.max = self.max.max(elapsed);
    }

    pub fn mean(&self) -> Duration {
        if self.frames == 0 {
            Duration::ZERO
        } else {
            self.total / self.frames as u32
        }
    }
}

/// Streaming predictor with bounded memory: a fixed set of filter delay
/// lines and a window of `L × D` standardized features.
#[derive(Debug, Clone)]
pub struct Predictor {
    model: Model,
    template: Preprocessor,
    pre: Preprocessor,
    window: VecDeque<f64>,
    input: Vec<f64>,
    cache: ForwardCache,
    frames_seen: u64,
    warmup: usize,
    pub latency: LatencyStats,
}

impl Predictor {
    pub fn new(model: Model, config: &PreprocessConfig) -> Result<Self> {
        let template = Preprocessor::new(config)?;
        let (l, d) = (model.config.seq_len, model.config.input_dim);
        if d != model.config.feature_set.dim() {
            return Err(Error::Shape(format!(
                "model input width {d} does not match feature set {}",
                model.config.feature_set
            )));
        }
        Ok(Predictor {
            warmup: config.warmup_frames() + l - 1,
            pre: template.clone(),
            template,
            window: VecDeque::with_capacity(l * d),
            input: Vec::with_capacity(l * d),
            cache: ForwardCache::default(),
            frames_seen: 0,
            latency: LatencyStats::default(),
            model,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Frames consumed before the first prediction is emitted.
    pub fn warmup_frames(&self) -> usize {
        self.warmup
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    /// Starts a new stream: clears filter state and the window.
    pub fn reset(&mut self) {
        self.pre = self.template.clone();
        self.window.clear();
        self.frames_seen = 0;
    }

    /// Consumes one frame and returns a prediction once the window is full.
    pub fn push(&mut self, frame: &TrackingFrame) -> Result<Option<Prediction>> {
        let started = Instant::now();
        let out = self.step(frame);
        self.latency.record(started.elapsed());
        out
    }

    fn step(&mut self, frame: &TrackingFrame) -> Result<Option<Prediction>> {
        self.frames_seen += 1;
        let Some(processed) = self.pre.push(frame) else {
            return Ok(None);
        };
        let (l, d) = (self.model.config.seq_len, self.model.config.input_dim);
        let mut all = [0.0; MAX_FEATURES];
        fill_all_features(&processed.frame, processed.velocity.value, &mut all);
        let row = &mut all[..d];
        self.model.norm.apply_features(row);
        if self.window.len() == l * d {
            self.window.drain(..d);
        }
        self.window.extend(row.iter().copied());
        if self.window.len() < l * d {
            return Ok(None);
        }
        self.input.clear();
        self.input.extend(self.window.iter().copied());
        let input = std::mem::take(&mut self.input);
        self.model
            .forward_into_cache(input, Mode::Infer, &mut self.cache)?;
        let mut values = self.cache.outputs.clone();
        self.input = std::mem::take(&mut self.cache.xs);
        if self.model.config.is_classification() {
            crate::neural::softmax_in_place(&mut values);
        } else {
            self.model.norm.invert_targets(&mut values);
        }
        Ok(Some(Prediction {
            frame_index: processed.frame.frame_index,
            values,
        }))
    }
}
