//! Metrics, cross-validation and leave-one-group-out protocols, transfer
//! learning experiments and frame-by-frame runtime simulation.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::capture::{segment_r2g, Recording};
use crate::dataset::{
    label_at, regression_targets, split_kfold, split_leave_one_out, Dataset, DatasetSplit,
    GroupKey,
};
use crate::error::{Error, Result};
use crate::features::FeatureSetId;
use crate::neural::{
    init_model, predict_examples, train, transfer_train, Model, ModelConfig, TrainOptions,
    DEFAULT_BATCH, DEFAULT_CLIP_THRESHOLD, DEFAULT_DROPOUT, DEFAULT_EPOCHS, DEFAULT_FC,
    DEFAULT_L2_ALPHA, DEFAULT_LEARNING_RATE, DEFAULT_TRANSFER_EPOCHS,
};
use crate::preprocessing::PreprocessConfig;
use crate::runtime::Predictor;
use crate::synthgen::derive_seed;
use crate::task::Task;

/// Environment variable capping evaluation parallelism.
pub const THREADS_ENV: &str = "REACHCAST_THREADS";

/// Mean absolute error.
pub fn mae(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::Shape(format!("{} predictions for {} targets", preds.len(), targets.len())));
    }
    if preds.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    Ok(preds.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum::<f64>() / preds.len() as f64)
}

/// Percentage of predicted classes equal to the labels.
pub fn accuracy(predicted: &[usize], labels: &[usize]) -> Result<f64> {
    if predicted.len() != labels.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", predicted.len(), labels.len())));
    }
    if predicted.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    let hits = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(100.0 * hits as f64 / predicted.len() as f64)
}

/// Confusion counts; row = true class, column = predicted class.
pub fn confusion(predicted: &[usize], labels: &[usize], classes: usize) -> Result<Vec<Vec<usize>>> {
    if predicted.len() != labels.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", predicted.len(), labels.len())));
    }
    if predicted.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    let mut m = vec![vec![0; classes]; classes];
    for (&p, &l) in predicted.iter().zip(labels) {
        if p >= classes || l >= classes {
            return Err(Error::InvalidArgument(format!("class index outside 0..{classes}")));
        }
        m[l][p] += 1;
    }
    Ok(m)
}

/// Index of the largest value in each row of `probs`.
pub fn argmax_rows(probs: &[f64], classes: usize) -> Vec<usize> {
    probs
        .chunks_exact(classes)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
                .0
        })
        .collect()
}

/// Mean and sample standard deviation (n − 1; zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Names of the metrics reported for a task.
pub fn metric_names(task: Task) -> Vec<&'static str> {
    match task {
        Task::Distance => vec!["mae_distance_mm"],
        Task::Time => vec!["mae_time_ms"],
        Task::DistanceTime => vec!["mae_distance_mm", "mae_time_ms"],
        _ => vec!["accuracy_pct"],
    }
}

/// Training hyperparameters shared by every protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recipe {
    pub epochs: usize,
    pub transfer_epochs: usize,
    pub learning_rate: f64,
    pub batch: usize,
    pub alpha: f64,
    pub clip: f64,
    pub dropout: f64,
    pub fc: usize,
    /// LSTM width; `None` uses the task default (64 or 128).
    pub hidden: Option<usize>,
}

impl Default for Recipe {
    fn default() -> Self {
        Recipe {
            epochs: DEFAULT_EPOCHS,
            transfer_epochs: DEFAULT_TRANSFER_EPOCHS,
            learning_rate: DEFAULT_LEARNING_RATE,
            batch: DEFAULT_BATCH,
            alpha: DEFAULT_L2_ALPHA,
            clip: DEFAULT_CLIP_THRESHOLD,
            dropout: DEFAULT_DROPOUT,
            fc: DEFAULT_FC,
            hidden: None,
        }
    }
}

impl Recipe {
    pub fn model_config(&self, task: Task, set: FeatureSetId, seq_len: usize) -> ModelConfig {
        ModelConfig {
            hidden: self.hidden.unwrap_or(task.default_hidden()),
            fc: self.fc,
            dropout: self.dropout,
            ..ModelConfig::for_task(task, set, seq_len)
        }
    }

    pub fn train_options(&self, seed: u64) -> TrainOptions {
        TrainOptions {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch: self.batch,
            seed,
            alpha: self.alpha,
            clip: self.clip,
        }
    }
}

/// Evaluation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    KFold(usize),
    LeaveOneOut(GroupKey),
}

impl Protocol {
    pub fn name(&self) -> String {
        match self {
            Protocol::KFold(k) => format!("kfold{k}"),
            Protocol::LeaveOneOut(GroupKey::User) => "l1uo".into(),
            Protocol::LeaveOneOut(GroupKey::Session) => "l1so".into(),
            Protocol::LeaveOneOut(GroupKey::Object) => "l1oo".into(),
        }
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1uo" => Ok(Protocol::LeaveOneOut(GroupKey::User)),
            "l1so" => Ok(Protocol::LeaveOneOut(GroupKey::Session)),
            "l1oo" => Ok(Protocol::LeaveOneOut(GroupKey::Object)),
            "kfold" => Ok(Protocol::KFold(4)),
            _ => s
                .strip_prefix("kfold")
                .and_then(|k| k.parse().ok())
                .map(Protocol::KFold)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown protocol `{s}`"))),
        }
    }
}

/// Metrics of one split.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub key: String,
    pub train: usize,
    pub validation: usize,
    /// One value per metric name, in original units.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub task: Task,
    pub protocol: String,
    pub feature_set: FeatureSetId,
    pub window: usize,
    pub metrics: Vec<&'static str>,
    pub folds: Vec<FoldResult>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Summed over splits, classification only.
    pub confusion: Option<Vec<Vec<usize>>>,
    pub wall_clock_s: f64,
}

impl MetricsReport {
    fn assemble(
        task: Task,
        protocol: String,
        feature_set: FeatureSetId,
        window: usize,
        mut folds: Vec<FoldResult>,
        confusion: Option<Vec<Vec<usize>>>,
        wall_clock_s: f64,
    ) -> Self {
        folds.sort_by(|a, b| a.key.cmp(&b.key));
        let metrics = metric_names(task);
        let (mean, std) = (0..metrics.len())
            .map(|m| mean_std(&folds.iter().map(|f| f.values[m]).collect::<Vec<_>>()))
            .unzip();
        MetricsReport {
            task,
            protocol,
            feature_set,
            window,
            metrics,
            folds,
            mean,
            std,
            confusion,
            wall_clock_s,
        }
    }

    /// Mean of a metric across splits.
    pub fn mean_of(&self, metric: &str) -> Option<f64> {
        self.metrics.iter().position(|m| *m == metric).map(|i| self.mean[i])
    }

    pub fn std_of(&self, metric: &str) -> Option<f64> {
        self.metrics.iter().position(|m| *m == metric).map(|i| self.std[i])
    }

    /// Rows of `report.csv`: one per split and metric, then mean and std.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        let prefix = format!("{},{},{},{}", self.protocol, self.task, self.feature_set, self.window);
        for fold in &self.folds {
            for (m, v) in self.metrics.iter().zip(&fold.values) {
                let _ = writeln!(out, "{prefix},{},{m},{v:.6}", fold.key);
            }
        }
        for (m, (mean, std)) in self.metrics.iter().zip(self.mean.iter().zip(&self.std)) {
            let _ = writeln!(out, "{prefix},mean,{m},{mean:.6}");
            let _ = writeln!(out, "{prefix},std,{m},{std:.6}");
        }
        out
    }
}

pub const REPORT_HEADER: &str = "protocol,task,features,window,fold,metric,value\n";

/// Full `report.csv` text.
pub fn report_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    for r in reports {
        out.push_str(&r.csv_rows());
    }
    out
}

/// Training seed of one split, derived from the protocol seed and the
/// split key so that the same split always trains the same model.
pub fn split_seed(seed: u64, key: &str) -> u64 {
    derive_seed(seed, &[u64::from(crc32fast::hash(key.as_bytes()))])
}

/// Thread count for evaluation jobs: `REACHCAST_THREADS` if set to a
/// positive integer, otherwise the number of available cores.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f` inside a thread pool sized by [`thread_count`].
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(thread_count()).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Trains a fresh model on the listed windows. Normalization statistics
/// come from those windows only and are stored in the model.
pub fn train_model(
    dataset: &Dataset,
    train_idx: &[usize],
    task: Task,
    set: FeatureSetId,
    recipe: &Recipe,
    seed: u64,
) -> Result<Model> {
    if train_idx.is_empty() {
        return Err(Error::Empty("training split"));
    }
    let mut model = init_model(recipe.model_config(task, set, dataset.seq_len), seed)?;
    model.norm = dataset.norm_stats(train_idx, task, set).stats;
    let examples = dataset.examples(train_idx, task, set, &model.norm)?;
    train(&mut model, &examples, &recipe.train_options(seed))?;
    Ok(model)
}

/// Predictions of a model on dataset windows in original units.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// One value per metric name.
    pub values: Vec<f64>,
    /// `n × outputs`: de-standardized targets or class probabilities.
    pub outputs: Vec<f64>,
    pub confusion: Option<Vec<Vec<usize>>>,
}

pub fn evaluate_model(model: &Model, dataset: &Dataset, indices: &[usize]) -> Result<Evaluation> {
    if indices.is_empty() {
        return Err(Error::Empty("evaluation split"));
    }
    let task = model.config.task;
    let set = model.config.feature_set;
    let examples = dataset.examples(indices, task, set, &model.norm)?;
    let mut outputs = predict_examples(model, &examples)?;
    let o = model.config.outputs;
    if task.is_classification() {
        let predicted = argmax_rows(&outputs, o);
        let labels: Vec<usize> = indices
            .iter()
            .map(|&i| task.class_of(&dataset.provenance(i).object).unwrap_or(usize::MAX))
            .collect();
        Ok(Evaluation {
            values: vec![accuracy(&predicted, &labels)?],
            confusion: Some(confusion(&predicted, &labels, o)?),
            outputs,
        })
    } else {
        model.norm.invert_targets(&mut outputs);
        let truth: Vec<f64> = indices
            .iter()
            .flat_map(|&i| regression_targets(task, &dataset.windows[i].label))
            .collect();
        let values = (0..o)
            .map(|c| {
                let p: Vec<f64> = outputs.iter().skip(c).step_by(o).copied().collect();
                let t: Vec<f64> = truth.iter().skip(c).step_by(o).copied().collect();
                mae(&p, &t)
            })
            .collect::<Result<_>>()?;
        Ok(Evaluation {
            values,
            outputs,
            confusion: None,
        })
    }
}

/// Splits of `protocol` over the windows that carry labels for `task`,
/// as dataset window indices.
pub fn protocol_splits(dataset: &Dataset, task: Task, protocol: Protocol, seed: u64) -> Result<Vec<DatasetSplit>> {
    let idx = dataset.task_indices(task);
    if idx.is_empty() {
        return Err(Error::InvalidArgument(format!("no windows carry {task} labels")));
    }
    let local = match protocol {
        Protocol::KFold(k) => split_kfold(idx.len(), k, seed)?,
        Protocol::LeaveOneOut(key) => {
            let all = dataset.group_keys(key);
            let groups: Vec<String> = idx.iter().map(|&i| all[i].clone()).collect();
            split_leave_one_out(&groups, key)?
        }
    };
    Ok(local
        .into_iter()
        .map(|s| DatasetSplit {
            train: s.train.iter().map(|&i| idx[i]).collect(),
            validation: s.validation.iter().map(|&i| idx[i]).collect(),
            key: s.key,
        })
        .collect())
}

/// Trains one model per split and evaluates it on the held-out part.
/// Splits run in parallel; each is deterministic given the seed.
pub fn run_protocol(
    dataset: &Dataset,
    task: Task,
    set: FeatureSetId,
    protocol: Protocol,
    recipe: &Recipe,
    seed: u64,
) -> Result<MetricsReport> {
    let started = Instant::now();
    let splits = protocol_splits(dataset, task, protocol, seed)?;
    let results: Vec<(FoldResult, Option<Vec<Vec<usize>>>)> = with_pool(|| {
        splits
            .par_iter()
            .map(|split| {
                let model = train_model(dataset, &split.train, task, set, recipe, split_seed(seed, &split.key))?;
                let eval = evaluate_model(&model, dataset, &split.validation)?;
                Ok((
                    FoldResult {
                        key: split.key.clone(),
                        train: split.train.len(),
                        validation: split.validation.len(),
                        values: eval.values,
                    },
                    eval.confusion,
                ))
            })
            .collect::<Result<_>>()
    })?;
    let mut total: Option<Vec<Vec<usize>>> = None;
    let mut folds = Vec::with_capacity(results.len());
    for (fold, conf) in results {
        if let Some(c) = conf {
            match &mut total {
                None => total = Some(c),
                Some(t) => t
                    .iter_mut()
                    .flatten()
                    .zip(c.iter().flatten())
                    .for_each(|(a, b)| *a += b),
            }
        }
        folds.push(fold);
    }
    Ok(MetricsReport::assemble(
        task,
        protocol.name(),
        set,
        dataset.seq_len,
        folds,
        total,
        started.elapsed().as_secs_f64(),
    ))
}

/// Pre- and post-adaptation metrics for one adaptation-set size.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferRow {
    pub size: usize,
    pub evaluated: usize,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
    /// The adapted model; `None` for the size-0 baseline row.
    pub adapted: Option<Model>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub task: Task,
    pub user: String,
    pub metrics: Vec<&'static str>,
    pub rows: Vec<TransferRow>,
}

impl TransferReport {
    /// Rows of `report.csv` with protocol `transfer`, fold `<user>:<size>`.
    pub fn csv_rows(&self, set: FeatureSetId, window: usize) -> String {
        let mut out = String::new();
        for row in &self.rows {
            for (m, (pre, post)) in self.metrics.iter().zip(row.pre.iter().zip(&row.post)) {
                let fold = format!("{}:{}", self.user, row.size);
                let _ = writeln!(out, "transfer,{},{set},{window},{fold},{m}_pre,{pre:.6}", self.task);
                let _ = writeln!(out, "transfer,{},{set},{window},{fold},{m}_post,{post:.6}", self.task);
            }
        }
        out
    }
}

/// Minimum number of windows left for evaluation after adaptation.
pub const MIN_TRANSFER_EVALUATION: usize = 10;

/// Adapts the leave-one-user-out model of `user` with `size` randomly
/// chosen windows of that user and evaluates on the user's other windows.
///
/// `base` must be the model trained without the user; `None` trains it
/// with the same seed `run_protocol` uses for that user's split. A size of
/// 0 reports the base model on all of the user's windows.
#[allow(clippy::too_many_arguments)]
pub fn run_transfer(
    dataset: &Dataset,
    task: Task,
    set: FeatureSetId,
    user: &str,
    sizes: &[usize],
    recipe: &Recipe,
    seed: u64,
    base: Option<&Model>,
) -> Result<TransferReport> {
    let key = format!("{}={user}", GroupKey::User.name());
    let splits = protocol_splits(dataset, task, Protocol::LeaveOneOut(GroupKey::User), seed)?;
    let split = splits
        .into_iter()
        .find(|s| s.key == key)
        .ok_or_else(|| Error::InvalidArgument(format!("user {user} has no windows")))?;
    let trained;
    let base = match base {
        Some(m) => m,
        None => {
            trained = train_model(dataset, &split.train, task, set, recipe, split_seed(seed, &key))?;
            &trained
        }
    };
    let user_windows = &split.validation;
    let rows = sizes
        .iter()
        .map(|&size| {
            if size == 0 {
                let eval = evaluate_model(base, dataset, user_windows)?;
                return Ok(TransferRow {
                    size,
                    evaluated: user_windows.len(),
                    pre: eval.values.clone(),
                    post: eval.values,
                    adapted: None,
                });
            }
            if user_windows.len() < size + MIN_TRANSFER_EVALUATION {
                return Err(Error::InvalidArgument(format!(
                    "user {user} has {} windows, adaptation size {size} needs {}",
                    user_windows.len(),
                    size + MIN_TRANSFER_EVALUATION
                )));
            }
            let mut order = user_windows.clone();
            let pick_seed = derive_seed(seed, &[u64::from(crc32fast::hash(key.as_bytes())), size as u64]);
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(pick_seed));
            let (adapt, rest) = order.split_at(size);
            let mut rest = rest.to_vec();
            rest.sort_unstable();
            let examples = dataset.examples(adapt, task, set, &base.norm)?;
            let opts = TrainOptions {
                epochs: recipe.transfer_epochs,
                ..recipe.train_options(pick_seed)
            };
            let adapted = transfer_train(base, &examples, &opts)?;
            Ok(TransferRow {
                size,
                evaluated: rest.len(),
                pre: evaluate_model(base, dataset, &rest)?.values,
                post: evaluate_model(&adapted, dataset, &rest)?.values,
                adapted: Some(adapted),
            })
        })
        .collect::<Result<_>>()?;
    Ok(TransferReport {
        task,
        user: user.to_string(),
        metrics: metric_names(task),
        rows,
    })
}

/// One per-frame prediction of a runtime simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeSample {
    pub trial: usize,
    pub frame_index: u64,
    /// Frames since the reach-to-grasp start.
    pub offset: u64,
    pub time_to_grasp_ms: f64,
    pub distance_mm: f64,
    /// De-standardized targets or class probabilities.
    pub predicted: Vec<f64>,
    /// Regression truth (empty for classification).
    pub truth: Vec<f64>,
    /// Class label (classification only).
    pub class: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinAxis {
    TimeToGrasp,
    Distance,
}

/// Aggregated error (or accuracy) of predictions whose true time or
/// distance falls in `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveBin {
    pub lo: f64,
    pub hi: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    /// `mean − std`.
    pub one_std_below: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeSimulation {
    pub task: Task,
    pub samples: Vec<RuntimeSample>,
    /// Frames from the reach start to each trial's first prediction.
    pub first_prediction_offsets: Vec<u64>,
}

impl RuntimeSimulation {
    fn axis_value(sample: &RuntimeSample, axis: BinAxis) -> f64 {
        match axis {
            BinAxis::TimeToGrasp => sample.time_to_grasp_ms,
            BinAxis::Distance => sample.distance_mm,
        }
    }

    /// Absolute error of regression output `output`, or 100/0 correctness
    /// for classification.
    fn score(&self, sample: &RuntimeSample, output: usize) -> f64 {
        match sample.class {
            Some(c) => {
                let best = argmax_rows(&sample.predicted, sample.predicted.len())[0];
                if best == c {
                    100.0
                } else {
                    0.0
                }
            }
            None => (sample.predicted[output] - sample.truth[output]).abs(),
        }
    }

    /// Scores of the samples whose axis value lies in `[lo, hi)`.
    pub fn scores_in(&self, axis: BinAxis, output: usize, lo: f64, hi: f64) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| (lo..hi).contains(&Self::axis_value(s, axis)))
            .map(|s| self.score(s, output))
            .collect()
    }

    /// Contiguous bins of `width` from 0 to the largest axis value.
    pub fn curve(&self, axis: BinAxis, output: usize, width: f64) -> Vec<CurveBin> {
        let top = self
            .samples
            .iter()
            .map(|s| Self::axis_value(s, axis))
            .fold(0.0, f64::max);
        let bins = (top / width).floor() as usize + 1;
        let mut scores = vec![Vec::new(); bins];
        for s in &self.samples {
            let v = Self::axis_value(s, axis);
            if v >= 0.0 {
                scores[((v / width).floor() as usize).min(bins - 1)].push(self.score(s, output));
            }
        }
        scores
            .into_iter()
            .enumerate()
            .map(|(i, vals)| {
                let (mean, std) = mean_std(&vals);
                CurveBin {
                    lo: i as f64 * width,
                    hi: (i + 1) as f64 * width,
                    mean,
                    std,
                    count: vals.len(),
                    one_std_below: mean - std,
                }
            })
            .collect()
    }
}

/// Default bin widths of runtime curves.
pub const TIME_BIN_MS: f64 = 50.0;
pub const DISTANCE_BIN_MM: f64 = 25.0;

/// Streams every recording's reach-to-grasp segment through a fresh
/// predictor, exactly as deployment would, and pairs each prediction with
/// the ground truth at its frame. Recordings that cannot be segmented are
/// skipped.
pub fn simulate_runtime(model: &Model, recordings: &[Recording], config: &PreprocessConfig) -> Result<RuntimeSimulation> {
    let task = model.config.task;
    let mut predictor = Predictor::new(model.clone(), config)?;
    let mut samples = Vec::new();
    let mut first = Vec::new();
    for (trial, rec) in recordings.iter().enumerate() {
        let Ok(segment) = segment_r2g(rec) else { continue };
        if !task.accepts(&rec.object) {
            continue;
        }
        predictor.reset();
        let mut seen_first = false;
        for frame in rec.segment_frames(&segment) {
            let Some(pred) = predictor.push(frame)? else { continue };
            let Some(label) = label_at(rec, pred.frame_index, segment.grasp_frame) else {
                continue;
            };
            let offset = pred.frame_index - segment.start_frame;
            if !seen_first {
                first.push(offset);
                seen_first = true;
            }
            samples.push(RuntimeSample {
                trial,
                frame_index: pred.frame_index,
                offset,
                time_to_grasp_ms: label.time_to_grasp_ms,
                distance_mm: label.distance_mm,
                predicted: pred.values,
                truth: regression_targets(task, &label),
                class: task.class_of(&rec.object),
            });
        }
    }
    Ok(RuntimeSimulation {
        task,
        samples,
        first_prediction_offsets: first,
    })
}

fn json_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "null".into()
    }
}

/// `curves.jsonl`: one JSON object per bin.
pub fn curves_jsonl(curves: &[(String, Vec<CurveBin>)]) -> String {
    let mut out = String::new();
    for (name, bins) in curves {
        for b in bins {
            let _ = writeln!(
                out,
                "{{\"curve\":\"{name}\",\"bin_lo\":{},\"bin_hi\":{},\"mean\":{},\"std\":{},\"count\":{}}}",
                json_number(b.lo),
                json_number(b.hi),
                json_number(b.mean),
                json_number(b.std),
                b.count
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn metric_examples() {
        assert_eq!(mae(&[1.0, 3.0], &[0.0, 0.0]).unwrap(), 2.0);
        assert_eq!(mae(&[4.0, 5.0], &[4.0, 5.0]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 2], &[0, 1, 2]).unwrap(), 100.0);
        assert!(mae(&[], &[]).is_err());
        assert!(accuracy(&[], &[]).is_err());
        let m = confusion(&[0, 1, 1, 2], &[0, 1, 2, 2], 3).unwrap();
        assert_eq!(m, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 1, 1]]);
        let row_sums: Vec<usize> = m.iter().map(|r| r.iter().sum()).collect();
        assert_eq!(row_sums, vec![1, 1, 2]);
    }

    #[test]
    fn uniform_guessing_is_near_one_third() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let labels: Vec<usize> = (0..1000).map(|i| i % 3).collect();
        let guesses: Vec<usize> = (0..1000).map(|_| rng.random_range(0..3)).collect();
        let acc = accuracy(&guesses, &labels).unwrap();
        assert!((acc - 100.0 / 3.0).abs() < 5.0, "{acc}");
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in ["kfold4", "l1uo", "l1so", "l1oo"] {
            assert_eq!(p.parse::<Protocol>().unwrap().name(), p);
        }
        assert!("nope".parse::<Protocol>().is_err());
    }

    #[test]
    fn exact_bins_have_zero_error() {
        let sim = RuntimeSimulation {
            task: Task::Distance,
            samples: (0..10)
                .map(|i| RuntimeSample {
                    trial: 0,
                    frame_index: i,
                    offset: i,
                    time_to_grasp_ms: i as f64 * 20.0,
                    distance_mm: 100.0,
                    predicted: vec![100.0],
                    truth: vec![100.0],
                    class: None,
                })
                .collect(),
            first_prediction_offsets: vec![0],
        };
        let bins = sim.curve(BinAxis::TimeToGrasp, 0, 50.0);
        assert_eq!(bins.len(), 4);
        assert!(bins.iter().all(|b| b.count == 0 || b.mean == 0.0));
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 10);
        for w in bins.windows(2) {
            assert_eq!(w[0].hi, w[1].lo);
        }
    }
}
