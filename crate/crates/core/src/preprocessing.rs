//! Causal, streaming front end: hand velocity, dropped-frame spike repair and
//! linear-phase FIR low-pass filtering.
//!
//! Stage order per incoming frame:
//!
//! 1. raw velocity of the hand reference sensor,
//! 2. spike repair on that velocity (one frame of lookahead),
//! 3. FIR filtering of all 36 position channels and of the repaired velocity.
//!
//! Positions are held back one frame so that every output channel carries
//! the same delay: `1 + order / 2` frames behind the arrival frame.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::capture::{SensorPose, TrackingFrame, SENSOR_COUNT};
use crate::error::{Error, Result};
use crate::geom::{self, Vec3};

pub const DEFAULT_FILTER_ORDER: usize = 25;
pub const DEFAULT_CUTOFF_HZ: f64 = 25.0;
pub const DEFAULT_RATE_HZ: f64 = 960.0;
/// Frame-to-frame velocity rise that marks a candidate spike (m/s).
pub const DEFAULT_SPIKE_RISE: f64 = 0.1;
/// Frame-to-frame velocity fall that confirms it (m/s).
pub const DEFAULT_SPIKE_FALL: f64 = -0.1;

/// Windowed-sinc low-pass filter with symmetric (linear-phase) taps.
///
/// The order-25 default has 26 taps, an even length, so it is a Type II
/// linear-phase design even though such filters are often described as
/// "Type 1"; the group delay is `order / 2 = 12.5` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    pub taps: Vec<f64>,
    pub order: usize,
    pub cutoff_hz: f64,
    pub rate_hz: f64,
}

#[inline]
fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Designs a Hamming-windowed sinc low-pass FIR with unit DC gain.
///
/// `taps[n] = w[n] · sinc(2 · fc/fs · (n − order/2))` with
/// `w[n] = 0.54 − 0.46 · cos(2πn / order)`, normalized so the taps sum to 1.
pub fn design_lowpass_fir(order: usize, cutoff_hz: f64, rate_hz: f64) -> Result<FirFilter> {
    if order == 0 {
        return Err(Error::InvalidArgument("filter order must be positive".into()));
    }
    if !(rate_hz > 0.0) || !(cutoff_hz > 0.0) || cutoff_hz >= rate_hz / 2.0 {
        return Err(Error::InvalidArgument(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {}) Hz",
            rate_hz / 2.0
        )));
    }
    let normalized = 2.0 * cutoff_hz / rate_hz;
    let center = order as f64 / 2.0;
    let mut taps = vec![0.0; order + 1];
    // Only the first half is computed; the mirror keeps the symmetry bit-exact.
    for n in 0..=order / 2 {
        let window = 0.54 - 0.46 * (2.0 * PI * n as f64 / order as f64).cos();
        let tap = window * sinc(normalized * (n as f64 - center));
        taps[n] = tap;
        taps[order - n] = tap;
    }
    let sum: f64 = taps.iter().sum();
    for tap in taps.iter_mut() {
        *tap /= sum;
    }
    Ok(FirFilter {
        taps,
        order,
        cutoff_hz,
        rate_hz,
    })
}

impl FirFilter {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn group_delay_samples(&self) -> f64 {
        self.order as f64 / 2.0
    }

    /// Magnitude response in dB at `hz`.
    pub fn response_db(&self, hz: f64) -> f64 {
        let omega = 2.0 * PI * hz / self.rate_hz;
        let (mut re, mut im) = (0.0, 0.0);
        for (n, &tap) in self.taps.iter().enumerate() {
            let (s, c) = (omega * n as f64).sin_cos();
            re += tap * c;
            im -= tap * s;
        }
        20.0 * (re * re + im * im).sqrt().log10()
    }
}

/// Streaming state of one filtered channel.
#[derive(Debug, Clone)]
pub struct ChannelState {
    taps: Arc<[f64]>,
    ring: Vec<f64>,
    head: usize,
    seen: usize,
}

impl ChannelState {
    pub fn new(filter: &FirFilter) -> Self {
        Self::with_taps(filter.taps.clone().into())
    }

    fn with_taps(taps: Arc<[f64]>) -> Self {
        let n = taps.len();
        ChannelState {
            taps,
            ring: vec![0.0; n],
            head: 0,
            seen: 0,
        }
    }

    pub fn is_primed(&self) -> bool {
        self.seen >= self.taps.len()
    }

    pub fn reset(&mut self) {
        self.ring.iter_mut().for_each(|v| *v = 0.0);
        self.head = 0;
        self.seen = 0;
    }

    /// Pushes one sample. Returns `None` until `order + 1` samples were seen,
    /// then `y_k = Σ taps[n] · x_{k−n}`.
    pub fn filter_step(&mut self, x: f64) -> Option<f64> {
        let n = self.taps.len();
        self.ring[self.head] = x;
        let newest = self.head;
        self.head = (self.head + 1) % n;
        self.seen = self.seen.saturating_add(1);
        if !self.is_primed() {
            return None;
        }
        // taps[0] pairs with the newest sample.
        let mut acc = 0.0;
        let mut idx = newest;
        for &tap in self.taps.iter() {
            acc += tap * self.ring[idx];
            idx = if idx == 0 { n - 1 } else { idx - 1 };
        }
        Some(acc)
    }
}

/// Hand speed from two consecutive positions in mm, returned in m/s.
#[inline]
pub fn compute_velocity(p_prev: Vec3, p_curr: Vec3, rate_hz: f64) -> f64 {
    rate_hz * geom::distance(p_curr, p_prev) / 1000.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeThresholds {
    pub rise: f64,
    pub fall: f64,
}

impl Default for SpikeThresholds {
    fn default() -> Self {
        SpikeThresholds {
            rise: DEFAULT_SPIKE_RISE,
            fall: DEFAULT_SPIKE_FALL,
        }
    }
}

impl SpikeThresholds {
    #[inline]
    fn is_spike(&self, before: f64, value: f64, after: f64) -> bool {
        value - before > self.rise && after - value < self.fall
    }
}

/// One-frame-lookahead spike repair on a velocity stream.
///
/// Sample `k` is replaced by the mean of its raw neighbours when it rose by
/// more than `rise` and the next sample falls by more than `|fall|`.
/// Detection always compares raw samples, so the output is a pure function
/// of the input stream.
#[derive(Debug, Clone, Default)]
pub struct VelocityState {
    thresholds: SpikeThresholds,
    previous: Option<f64>,
    pending: Option<f64>,
}

impl VelocityState {
    pub fn new(thresholds: SpikeThresholds) -> Self {
        VelocityState {
            thresholds,
            previous: None,
            pending: None,
        }
    }

    /// Feeds `ν_{k+1}` and emits the repaired `ν_k`, if there is one.
    pub fn repair_spikes(&mut self, velocity: f64) -> Option<f64> {
        let emitted = self.pending.map(|current| match self.previous {
            Some(before) if self.thresholds.is_spike(before, current, velocity) => {
                (before + velocity) / 2.0
            }
            _ => current,
        });
        if self.pending.is_some() {
            self.previous = self.pending;
        }
        self.pending = Some(velocity);
        emitted
    }

    /// Emits the last held sample unchanged at end of stream.
    pub fn flush(&mut self) -> Option<f64> {
        self.pending.take()
    }
}

/// Whole-signal spike repair. Equivalent to streaming every sample and
/// flushing the last one.
pub fn repair_spikes_batch(velocity: &[f64], thresholds: SpikeThresholds) -> Vec<f64> {
    let mut state = VelocityState::new(thresholds);
    let mut out: Vec<f64> = velocity
        .iter()
        .filter_map(|&v| state.repair_spikes(v))
        .collect();
    out.extend(state.flush());
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub order: usize,
    pub cutoff_hz: f64,
    pub rate_hz: f64,
    pub thresholds: SpikeThresholds,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            order: DEFAULT_FILTER_ORDER,
            cutoff_hz: DEFAULT_CUTOFF_HZ,
            rate_hz: DEFAULT_RATE_HZ,
            thresholds: SpikeThresholds::default(),
        }
    }
}

impl PreprocessConfig {
    /// Frames consumed before the first output: filter priming plus the
    /// single spike-repair lookahead frame.
    pub fn warmup_frames(&self) -> usize {
        self.order + 2
    }
}

/// Time-aligned output of the front end.
///
/// `frame` carries filtered positions; its `frame_index` is the arrival
/// frame that produced the output (the real-time "now"), and `touch` the
/// flags of that arrival frame. `velocity` is the repaired, filtered hand
/// speed in m/s with identical delay.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedFrame {
    pub frame: TrackingFrame,
    pub velocity: VelocitySample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySample {
    pub frame_index: u64,
    pub value: f64,
}

/// Streaming preprocessor for one recording.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    rate_hz: f64,
    positions: Vec<ChannelState>,
    velocity_filter: ChannelState,
    spikes: VelocityState,
    previous_hand: Option<Vec3>,
    held_positions: Option<[SensorPose; SENSOR_COUNT]>,
}

impl Preprocessor {
    pub fn new(config: &PreprocessConfig) -> Result<Self> {
        let filter = design_lowpass_fir(config.order, config.cutoff_hz, config.rate_hz)?;
        Ok(Self::with_filter(&filter, config.thresholds))
    }

    pub fn with_filter(filter: &FirFilter, thresholds: SpikeThresholds) -> Self {
        let taps: Arc<[f64]> = filter.taps.clone().into();
        Preprocessor {
            rate_hz: filter.rate_hz,
            positions: (0..3 * SENSOR_COUNT)
                .map(|_| ChannelState::with_taps(taps.clone()))
                .collect(),
            velocity_filter: ChannelState::with_taps(taps),
            spikes: VelocityState::new(thresholds),
            previous_hand: None,
            held_positions: None,
        }
    }

    pub fn reset(&mut self) {
        self.positions.iter_mut().for_each(ChannelState::reset);
        self.velocity_filter.reset();
        self.spikes = VelocityState::new(self.spikes.thresholds);
        self.previous_hand = None;
        self.held_positions = None;
    }

    /// Consumes one frame; returns an output once the pipeline is primed.
    /// The first frame of a stream has zero velocity by definition.
    pub fn push(&mut self, frame: &TrackingFrame) -> Option<ProcessedFrame> {
        let hand = frame.hand_position();
        let raw_velocity = match self.previous_hand {
            Some(prev) => compute_velocity(prev, hand, self.rate_hz),
            None => 0.0,
        };
        self.previous_hand = Some(hand);

        let repaired = self.spikes.repair_spikes(raw_velocity);
        let held = self.held_positions.replace(frame.sensors);
        let (Some(velocity), Some(held)) = (repaired, held) else {
            return None;
        };

        let filtered_velocity = self.velocity_filter.filter_step(velocity);
        let mut sensors = [SensorPose::default(); SENSOR_COUNT];
        let mut primed = true;
        for (i, sensor) in held.iter().enumerate() {
            for axis in 0..3 {
                match self.positions[3 * i + axis].filter_step(sensor.position[axis]) {
                    Some(v) => sensors[i].position[axis] = v,
                    None => primed = false,
                }
            }
        }
        let value = filtered_velocity?;
        if !primed {
            return None;
        }
        Some(ProcessedFrame {
            frame: TrackingFrame {
                frame_index: frame.frame_index,
                sensors,
                touch: frame.touch,
            },
            velocity: VelocitySample {
                frame_index: frame.frame_index,
                value,
            },
        })
    }
}

/// Runs the streaming preprocessor over a whole frame sequence.
pub fn preprocess_stream(
    frames: &[TrackingFrame],
    config: &PreprocessConfig,
) -> Result<Vec<ProcessedFrame>> {
    let mut pre = Preprocessor::new(config)?;
    let out: Vec<ProcessedFrame> = frames.iter().filter_map(|f| pre.push(f)).collect();
    if out.is_empty() {
        return Err(Error::NotPrimed {
            frames: frames.len(),
            needed: config.warmup_frames(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_configuration_taps() {
        let f = design_lowpass_fir(25, 25.0, 960.0).unwrap();
        assert_eq!(f.len(), 26);
        for n in 0..=25 {
            assert_eq!(f.taps[n], f.taps[25 - n]);
        }
        assert!((f.taps.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(f.group_delay_samples(), 12.5);
    }

    #[test]
    fn order_two_quarter_band() {
        let f = design_lowpass_fir(2, 240.0, 960.0).unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!(f.taps[0], f.taps[2]);
        assert!((f.taps.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn design_rejects_bad_parameters() {
        assert!(design_lowpass_fir(0, 25.0, 960.0).is_err());
        assert!(design_lowpass_fir(25, 480.0, 960.0).is_err());
        assert!(design_lowpass_fir(25, 600.0, 960.0).is_err());
        assert!(design_lowpass_fir(25, 0.0, 960.0).is_err());
    }

    #[test]
    fn constant_input_passes_after_priming() {
        let f = design_lowpass_fir(25, 25.0, 960.0).unwrap();
        let mut ch = ChannelState::new(&f);
        for k in 0..100 {
            let y = ch.filter_step(3.25);
            if k < 25 {
                assert!(y.is_none());
            } else {
                assert!((y.unwrap() - 3.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn impulse_response_equals_taps() {
        let f = design_lowpass_fir(25, 25.0, 960.0).unwrap();
        let mut ch = ChannelState::new(&f);
        // Prime on zeros, then an impulse.
        for _ in 0..26 {
            ch.filter_step(0.0);
        }
        let response: Vec<f64> = std::iter::once(1.0)
            .chain(std::iter::repeat(0.0).take(25))
            .map(|x| ch.filter_step(x).unwrap())
            .collect();
        assert_eq!(response, f.taps);
    }

    #[test]
    fn velocity_arithmetic() {
        assert!((compute_velocity([0.0; 3], [1.0, 0.0, 0.0], 960.0) - 0.96).abs() < 1e-12);
        assert_eq!(compute_velocity([4.0, 5.0, 6.0], [4.0, 5.0, 6.0], 960.0), 0.0);
        assert!((compute_velocity([0.0; 3], [1.0, 2.0, 2.0], 960.0) - 2.88).abs() < 1e-12);
    }

    #[test]
    fn isolated_spike_replaced_by_neighbour_mean() {
        let out = repair_spikes_batch(&[0.5, 0.5, 1.0, 0.5, 0.5], SpikeThresholds::default());
        assert_eq!(out, vec![0.5, 0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn smooth_ramp_unchanged() {
        let ramp = [0.10, 0.15, 0.20, 0.25];
        assert_eq!(repair_spikes_batch(&ramp, SpikeThresholds::default()), ramp);
    }

    #[test]
    fn repair_lags_one_frame() {
        let mut state = VelocityState::default();
        assert_eq!(state.repair_spikes(0.5), None);
        assert_eq!(state.repair_spikes(0.5), Some(0.5));
        assert_eq!(state.repair_spikes(1.0), Some(0.5));
        assert_eq!(state.repair_spikes(0.5), Some(0.5));
        assert_eq!(state.flush(), Some(0.5));
    }

    fn still_frame(k: u64) -> TrackingFrame {
        let mut sensors = [SensorPose::default(); SENSOR_COUNT];
        for (i, s) in sensors.iter_mut().enumerate() {
            s.position = [10.0 * i as f64, -3.0, 42.5];
        }
        TrackingFrame {
            frame_index: k,
            sensors,
            touch: [false; 3],
        }
    }

    #[test]
    fn short_stream_never_primes() {
        let frames: Vec<_> = (0..20).map(still_frame).collect();
        assert_eq!(
            preprocess_stream(&frames, &PreprocessConfig::default()),
            Err(Error::NotPrimed {
                frames: 20,
                needed: 27
            })
        );
    }

    #[test]
    fn still_hand_passes_positions_through() {
        let frames: Vec<_> = (0..60).map(still_frame).collect();
        let out = preprocess_stream(&frames, &PreprocessConfig::default()).unwrap();
        // First output on arrival frame order + 1.
        assert_eq!(out[0].frame.frame_index, 26);
        assert_eq!(out.len(), 60 - 26);
        for p in &out {
            assert_eq!(p.velocity.value, 0.0);
            assert_eq!(p.velocity.frame_index, p.frame.frame_index);
            for (a, b) in p.frame.sensors.iter().zip(still_frame(0).sensors.iter()) {
                for axis in 0..3 {
                    assert!((a.position[axis] - b.position[axis]).abs() < 1e-9);
                }
            }
        }
    }
}
