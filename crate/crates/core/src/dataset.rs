//! Labeled fixed-length windows over reach-to-grasp segments, corpus
//! balancing, z-score statistics and evaluation splits.
//!
//! Each accepted recording becomes a [`TrialStream`]: the preprocessed
//! 31-dimensional feature rows of its reach-to-grasp segment together with
//! per-row labels. Windows are lightweight references into those streams,
//! so a dataset of tens of thousands of overlapping windows stores every
//! feature row once.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::capture::{
    segment_r2g, validate_recording, ExclusionReason, ExclusionReport, ObjectLabel, Recording,
};
use crate::error::{Error, Result};
use crate::features::{fill_all_features, FeatureSetId, MAX_FEATURES};
use crate::geom::distance;
use crate::neural::{Examples, Targets};
use crate::preprocessing::{PreprocessConfig, Preprocessor};
use crate::task::Task;

/// Where a window came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub user_id: String,
    pub session_id: String,
    pub trial_id: String,
    pub object: ObjectLabel,
}

/// Ground truth at a window's end frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowLabel {
    /// Distance from the unfiltered hand reference to the object, mm.
    pub distance_mm: f64,
    /// Time remaining until the grasp frame, ms.
    pub time_to_grasp_ms: f64,
    pub object_class: usize,
    pub size_class: Option<usize>,
    pub shape_class: Option<usize>,
}

/// Preprocessed feature rows of one reach-to-grasp segment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialStream {
    pub provenance: Provenance,
    /// File or generator identifier the recording was read from.
    pub source: String,
    pub rate_hz: u32,
    /// Arrival frame index of every row.
    pub frame_indices: Vec<u64>,
    /// `len × 31` feature rows; smaller feature sets use a prefix.
    pub features: Vec<f64>,
    pub labels: Vec<WindowLabel>,
}

impl TrialStream {
    pub fn len(&self) -> usize {
        self.frame_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_indices.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * MAX_FEATURES..(i + 1) * MAX_FEATURES]
    }
}

/// Label of `recording` at `frame_index`, from raw geometry.
pub fn label_at(recording: &Recording, frame_index: u64, grasp_frame: u64) -> Option<WindowLabel> {
    let pos = recording.position_of(frame_index)?;
    let hand = recording.frames[pos].hand_position();
    let object = &recording.object;
    Some(WindowLabel {
        distance_mm: distance(hand, recording.object_position),
        time_to_grasp_ms: grasp_frame.saturating_sub(frame_index) as f64 * 1000.0
            / recording.rate_hz as f64,
        object_class: object.object_class(),
        size_class: object.size_class(),
        shape_class: object.shape_class(),
    })
}

/// Segments and preprocesses one recording with a fresh copy of
/// `template`. The preprocessor starts at the segment's first frame, so the
/// first row arrives once the pipeline is primed; rows after the grasp
/// frame are never produced.
pub fn trial_stream(
    recording: &Recording,
    template: &Preprocessor,
    source: &str,
) -> std::result::Result<TrialStream, ExclusionReason> {
    let segment = segment_r2g(recording).map_err(ExclusionReason::from)?;
    let mut pre = template.clone();
    pre.reset();
    let mut stream = TrialStream {
        provenance: Provenance {
            user_id: recording.user_id.clone(),
            session_id: recording.session_id.clone(),
            trial_id: recording.trial_id.clone(),
            object: recording.object,
        },
        source: source.to_string(),
        rate_hz: recording.rate_hz,
        frame_indices: Vec::new(),
        features: Vec::new(),
        labels: Vec::new(),
    };
    let mut row = [0.0; MAX_FEATURES];
    for frame in recording.segment_frames(&segment) {
        let Some(out) = pre.push(frame) else { continue };
        let index = out.frame.frame_index;
        let Some(label) = label_at(recording, index, segment.grasp_frame) else {
            continue;
        };
        fill_all_features(&out.frame, out.velocity.value, &mut row);
        stream.frame_indices.push(index);
        stream.features.extend_from_slice(&row);
        stream.labels.push(label);
    }
    Ok(stream)
}

/// Validates, segments and preprocesses a corpus in parallel. Returns the
/// accepted streams in input order plus one exclusion report per input.
pub fn build_streams(
    recordings: &[(Recording, String)],
    config: &PreprocessConfig,
    max_duration_s: f64,
) -> Result<(Vec<TrialStream>, Vec<ExclusionReport>)> {
    let template = Preprocessor::new(config)?;
    let results: Vec<(Option<TrialStream>, ExclusionReport)> = recordings
        .par_iter()
        .map(|(rec, source)| {
            let report = validate_recording(rec, max_duration_s);
            if report.excluded {
                return (None, report);
            }
            match trial_stream(rec, &template, source) {
                Ok(stream) => (Some(stream), report),
                Err(reason) => (None, ExclusionReport::new(reason)),
            }
        })
        .collect();
    let mut streams = Vec::new();
    let mut reports = Vec::with_capacity(results.len());
    for (stream, report) in results {
        streams.extend(stream);
        reports.push(report);
    }
    Ok((streams, reports))
}

/// A window of `seq_len` consecutive rows of stream `trial`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub trial: usize,
    pub offset: usize,
    pub seq_len: usize,
    /// Arrival frame index of the last row.
    pub end_frame: u64,
    pub label: WindowLabel,
}

/// Windows of `stream` starting at offsets `0, stride, 2·stride, …`.
/// A stream shorter than `seq_len` yields no windows.
pub fn make_windows(stream: &TrialStream, trial: usize, seq_len: usize, stride: usize) -> Vec<Window> {
    if seq_len == 0 || stride == 0 || stream.len() < seq_len {
        return Vec::new();
    }
    (0..=stream.len() - seq_len)
        .step_by(stride)
        .map(|offset| {
            let end = offset + seq_len - 1;
            Window {
                trial,
                offset,
                seq_len,
                end_frame: stream.frame_indices[end],
                label: stream.labels[end],
            }
        })
        .collect()
}

fn windows_at_stride(lengths: &[usize], seq_len: usize, stride: usize) -> usize {
    lengths
        .iter()
        .filter(|&&n| n >= seq_len)
        .map(|&n| (n - seq_len) / stride + 1)
        .sum()
}

/// Windows over a set of trial streams.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub trials: Vec<TrialStream>,
    pub windows: Vec<Window>,
    pub seq_len: usize,
    pub stride: usize,
    /// How many windows short of the requested target the corpus fell.
    pub shortfall: usize,
}

/// Builds a dataset of about `target` windows of length `seq_len`.
///
/// One stride is chosen for the whole corpus: the largest stride whose
/// window count still reaches `target`. If that count exceeds the target
/// by more than 5 %, a seeded random subset of exactly `target` windows is
/// kept. A corpus too small to reach the target at stride 1 yields every
/// stride-1 window and records the shortfall.
pub fn balance_windows(trials: Vec<TrialStream>, seq_len: usize, target: usize, seed: u64) -> Result<Dataset> {
    if trials.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    if seq_len == 0 || target == 0 {
        return Err(Error::InvalidArgument("window length and target must be positive".into()));
    }
    let lengths: Vec<usize> = trials.iter().map(TrialStream::len).collect();
    let longest = lengths.iter().copied().max().unwrap_or(0);
    let mut stride = 1;
    let mut hi = longest.max(1);
    if windows_at_stride(&lengths, seq_len, 1) >= target {
        // count is non-increasing in stride: binary search the largest
        // stride that still reaches the target.
        while stride < hi {
            let mid = (stride + hi).div_ceil(2);
            if windows_at_stride(&lengths, seq_len, mid) >= target {
                stride = mid;
            } else {
                hi = mid - 1;
            }
        }
    }
    let mut windows: Vec<Window> = trials
        .iter()
        .enumerate()
        .flat_map(|(t, s)| make_windows(s, t, seq_len, stride))
        .collect();
    let shortfall = target.saturating_sub(windows.len());
    if windows.len() as f64 > 1.05 * target as f64 {
        let mut keep: Vec<usize> = (0..windows.len()).collect();
        keep.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        keep.truncate(target);
        keep.sort_unstable();
        windows = keep.into_iter().map(|i| windows[i]).collect();
    }
    Ok(Dataset {
        trials,
        windows,
        seq_len,
        stride,
        shortfall,
    })
}

/// Grouping used by leave-one-group-out evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKey {
    User,
    Session,
    Object,
}

impl GroupKey {
    pub fn name(self) -> &'static str {
        match self {
            GroupKey::User => "user",
            GroupKey::Session => "session",
            GroupKey::Object => "object",
        }
    }
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn provenance(&self, window: usize) -> &Provenance {
        &self.trials[self.windows[window].trial].provenance
    }

    /// Raw feature rows of a window restricted to `set`, `L × D` row-major.
    pub fn window_features(&self, window: usize, set: FeatureSetId) -> Vec<f64> {
        let w = &self.windows[window];
        let stream = &self.trials[w.trial];
        let d = set.dim();
        let mut out = Vec::with_capacity(w.seq_len * d);
        for r in w.offset..w.offset + w.seq_len {
            out.extend_from_slice(&stream.row(r)[..d]);
        }
        out
    }

    /// Group value of every window.
    pub fn group_keys(&self, key: GroupKey) -> Vec<String> {
        (0..self.len())
            .map(|i| {
                let p = self.provenance(i);
                match key {
                    GroupKey::User => p.user_id.clone(),
                    GroupKey::Session => p.session_id.clone(),
                    GroupKey::Object => p.object.to_string(),
                }
            })
            .collect()
    }

    /// Windows whose object carries a label for `task`.
    pub fn task_indices(&self, task: Task) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| task.accepts(&self.provenance(i).object))
            .collect()
    }

    /// Statistics over every sample of the listed training windows.
    pub fn norm_stats(&self, indices: &[usize], task: Task, set: FeatureSetId) -> NormReport {
        let d = set.dim();
        let mut rows = Vec::with_capacity(indices.len() * self.seq_len * d);
        let mut targets = Vec::new();
        for &i in indices {
            rows.extend(self.window_features(i, set));
            targets.extend(regression_targets(task, &self.windows[i].label));
        }
        compute_norm_stats(&rows, d, &targets, task.target_names().len())
    }

    /// Standardized examples for the listed windows.
    pub fn examples(
        &self,
        indices: &[usize],
        task: Task,
        set: FeatureSetId,
        norm: &NormalizationStats,
    ) -> Result<Examples> {
        let d = set.dim();
        if norm.feature_mean.len() != d {
            return Err(Error::Shape(format!(
                "statistics cover {} features, feature set has {d}",
                norm.feature_mean.len()
            )));
        }
        let mut inputs = Vec::with_capacity(indices.len() * self.seq_len * d);
        for &i in indices {
            let mut x = self.window_features(i, set);
            norm.apply_features(&mut x);
            inputs.extend_from_slice(&x);
        }
        let targets = if task.is_classification() {
            let labels = indices
                .iter()
                .map(|&i| {
                    task.class_of(&self.provenance(i).object).ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "object {} has no {task} label",
                            self.provenance(i).object
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Targets::Classes {
                classes: task.outputs(),
                labels,
            }
        } else {
            let mut values = Vec::with_capacity(indices.len() * task.outputs());
            for &i in indices {
                values.extend(regression_targets(task, &self.windows[i].label));
            }
            norm.apply_targets(&mut values);
            Targets::Regression {
                outputs: task.outputs(),
                values,
            }
        };
        Ok(Examples {
            seq_len: self.seq_len,
            dim: d,
            inputs,
            targets,
        })
    }

    /// One CSV row per window.
    pub fn manifest_csv(&self) -> String {
        let mut out = String::from(
            "user,session,trial,object,end_frame,distance_mm,time_ms,object_class,size_class,shape_class,source,offset\n",
        );
        let opt = |v: Option<usize>| v.map(|c| c.to_string()).unwrap_or_default();
        for (i, w) in self.windows.iter().enumerate() {
            let p = self.provenance(i);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.4},{:.4},{},{},{},{},{}",
                p.user_id,
                p.session_id,
                p.trial_id,
                p.object,
                w.end_frame,
                w.label.distance_mm,
                w.label.time_to_grasp_ms,
                w.label.object_class,
                opt(w.label.size_class),
                opt(w.label.shape_class),
                self.trials[w.trial].source,
                w.offset
            );
        }
        out
    }
}

/// Regression target vector of `task` for a label; empty for classification.
pub fn regression_targets(task: Task, label: &WindowLabel) -> Vec<f64> {
    match task {
        Task::Distance => vec![label.distance_mm],
        Task::Time => vec![label.time_to_grasp_ms],
        Task::DistanceTime => vec![label.distance_mm, label.time_to_grasp_ms],
        _ => Vec::new(),
    }
}

/// Per-channel z-score statistics for features and regression targets.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub target_mean: Vec<f64>,
    pub target_std: Vec<f64>,
}

/// Statistics plus the channels found constant (their std is set to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    pub stats: NormalizationStats,
    pub constant_features: Vec<usize>,
    pub constant_targets: Vec<usize>,
}

fn mean_std(values: &[f64], width: usize) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let n = if width == 0 { 0 } else { values.len() / width };
    let mut mean = vec![0.0; width];
    let mut std = vec![1.0; width];
    let mut constant = Vec::new();
    if n == 0 {
        return (mean, std, (0..width).collect());
    }
    for row in values.chunks_exact(width) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; width];
    for row in values.chunks_exact(width) {
        for c in 0..width {
            let e = row[c] - mean[c];
            var[c] += e * e;
        }
    }
    for c in 0..width {
        let s = (var[c] / n as f64).sqrt();
        if s > 1e-12 * mean[c].abs().max(1.0) {
            std[c] = s;
        } else {
            constant.push(c);
        }
    }
    (mean, std, constant)
}

/// Population mean and standard deviation of row-major `features`
/// (`n × dim`) and `targets` (`n' × targets_dim`).
pub fn compute_norm_stats(features: &[f64], dim: usize, targets: &[f64], targets_dim: usize) -> NormReport {
    let (feature_mean, feature_std, constant_features) = mean_std(features, dim);
    let (target_mean, target_std, constant_targets) = mean_std(targets, targets_dim);
    NormReport {
        stats: NormalizationStats {
            feature_mean,
            feature_std,
            target_mean,
            target_std,
        },
        constant_features,
        constant_targets,
    }
}

fn standardize(values: &mut [f64], mean: &[f64], std: &[f64]) {
    if mean.is_empty() {
        return;
    }
    for row in values.chunks_exact_mut(mean.len()) {
        for c in 0..row.len() {
            row[c] = (row[c] - mean[c]) / std[c];
        }
    }
}

fn destandardize(values: &mut [f64], mean: &[f64], std: &[f64]) {
    if mean.is_empty() {
        return;
    }
    for row in values.chunks_exact_mut(mean.len()) {
        for c in 0..row.len() {
            row[c] = row[c] * std[c] + mean[c];
        }
    }
}

impl NormalizationStats {
    /// Zero mean, unit deviation: standardization is the identity.
    pub fn identity(features: usize, targets: usize) -> Self {
        NormalizationStats {
            feature_mean: vec![0.0; features],
            feature_std: vec![1.0; features],
            target_mean: vec![0.0; targets],
            target_std: vec![1.0; targets],
        }
    }

    /// Standardizes row-major feature rows in place.
    pub fn apply_features(&self, rows: &mut [f64]) {
        standardize(rows, &self.feature_mean, &self.feature_std);
    }

    pub fn invert_features(&self, rows: &mut [f64]) {
        destandardize(rows, &self.feature_mean, &self.feature_std);
    }

    pub fn apply_targets(&self, rows: &mut [f64]) {
        standardize(rows, &self.target_mean, &self.target_std);
    }

    pub fn invert_targets(&self, rows: &mut [f64]) {
        destandardize(rows, &self.target_mean, &self.target_std);
    }
}

/// Train and validation indices of one evaluation fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    /// `fold=<i>` or `<group key>=<held-out value>`.
    pub key: String,
}

/// Shuffles `0..len` once and cuts it into `k` near-equal parts; fold `i`
/// validates on part `i`. The first `len % k` parts hold one extra item.
pub fn split_kfold(len: usize, k: usize, seed: u64) -> Result<Vec<DatasetSplit>> {
    if k < 2 {
        return Err(Error::InvalidArgument("k-fold needs k ≥ 2".into()));
    }
    if k > len {
        return Err(Error::InvalidArgument(format!("{k} folds over {len} windows")));
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (len / k, len % k);
    let mut bounds = Vec::with_capacity(k + 1);
    bounds.push(0);
    for i in 0..k {
        bounds.push(bounds[i] + base + usize::from(i < extra));
    }
    Ok((0..k)
        .map(|i| {
            let mut validation = order[bounds[i]..bounds[i + 1]].to_vec();
            let mut train: Vec<usize> = order[..bounds[i]]
                .iter()
                .chain(&order[bounds[i + 1]..])
                .copied()
                .collect();
            validation.sort_unstable();
            train.sort_unstable();
            DatasetSplit {
                train,
                validation,
                key: format!("fold={i}"),
            }
        })
        .collect())
}

/// One split per distinct group value, in sorted group order; every item
/// of the held-out group is validation, everything else is training.
pub fn split_leave_one_out(groups: &[String], key: GroupKey) -> Result<Vec<DatasetSplit>> {
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        members.entry(g.as_str()).or_default().push(i);
    }
    if members.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "leave-one-{}-out needs at least two groups",
            key.name()
        )));
    }
    Ok(members
        .iter()
        .map(|(&group, validation)| DatasetSplit {
            train: (0..groups.len()).filter(|&i| groups[i] != group).collect(),
            validation: validation.clone(),
            key: format!("{}={group}", key.name()),
        })
        .collect())
}
