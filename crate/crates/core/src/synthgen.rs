//! Synthetic reach-to-grasp recordings with ground truth.
//!
//! The hand reference follows a minimum-jerk path from the rest position to
//! a pre-grasp pose whose duration obeys Fitts' law. Fingers shape towards
//! a grasp template while the thumb-index aperture follows a
//! peak-then-close profile. Each user has a persistent speed, hand size,
//! aperture margin and grasp style; each trial adds small jitter, Gaussian
//! sensor noise and optional frame dropouts. A noise-free, dropout-free
//! copy of every recording is kept as an oracle.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::capture::{
    ObjectLabel, RealObject, Recording, SensorPose, Shape, Size, TrackingFrame, FINGER_COUNT,
    HAND_REFERENCE, SENSOR_COUNT, THUMB_METACARPAL,
};
use crate::error::{Error, Result};
use crate::geom::{add, distance, norm, rotate_z, scale, sub, Vec3};

pub const DEFAULT_FITTS_A_S: f64 = 0.25;
pub const DEFAULT_FITTS_B_S: f64 = 0.12;
pub const REST_APERTURE_MM: f64 = 15.0;
pub const APERTURE_PEAK_PHASE: f64 = 0.65;
/// Aperture at contact exceeds the object width by this much.
pub const CLOSING_MARGIN_MM: f64 = 2.0;
pub const DEFAULT_NOISE_MM: f64 = 0.3;
pub const DEFAULT_DISTANCE_MM: f64 = 450.0;
pub const DEFAULT_START_JITTER_MM: f64 = 25.0;
pub const PROXIMAL_FRACTION: f64 = 0.55;
pub const REST_S: f64 = 0.2;
pub const HOLD_S: f64 = 0.15;

/// Movement time `speed_scale · (a + b · log2(2D / W))` in seconds.
pub fn fitts_time(d_mm: f64, w_mm: f64, a_s: f64, b_s: f64, speed_scale: f64) -> Result<f64> {
    if !(d_mm > 0.0 && w_mm > 0.0 && speed_scale > 0.0) {
        return Err(Error::InvalidArgument(
            "Fitts' law needs positive distance, width and speed scale".into(),
        ));
    }
    Ok(speed_scale * (a_s + b_s * (2.0 * d_mm / w_mm).log2()))
}

/// Minimum-jerk progress `10τ³ − 15τ⁴ + 6τ⁵` for `τ ∈ [0, 1]`.
pub fn min_jerk_progress(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// Minimum-jerk position at time `t` of a `duration`-second movement.
pub fn min_jerk(t: f64, duration: f64, p0: Vec3, p1: Vec3) -> Result<Vec3> {
    if !(duration > 0.0) || !(0.0..=duration).contains(&t) {
        return Err(Error::InvalidArgument(format!(
            "time {t} outside movement [0, {duration}]"
        )));
    }
    let s = min_jerk_progress(t / duration);
    Ok(add(p0, scale(sub(p1, p0), s)))
}

/// Thumb-index aperture at normalized movement time `tau`: opens from
/// the rest aperture to `size + margin` at the peak phase, then closes to
/// `size + 2 mm` at contact. Both pieces are minimum-jerk quintics, so the
/// curve and its first two derivatives are continuous.
pub fn aperture_profile(tau: f64, size_mm: f64, margin_mm: f64) -> f64 {
    let tau = tau.clamp(0.0, 1.0);
    let peak = size_mm + margin_mm;
    if tau <= APERTURE_PEAK_PHASE {
        let s = min_jerk_progress(tau / APERTURE_PEAK_PHASE);
        REST_APERTURE_MM + (peak - REST_APERTURE_MM) * s
    } else {
        let s = min_jerk_progress((tau - APERTURE_PEAK_PHASE) / (1.0 - APERTURE_PEAK_PHASE));
        peak + (size_mm + CLOSING_MARGIN_MM - peak) * s
    }
}

/// Grasp-relevant width of an object in mm.
pub fn object_width(label: &ObjectLabel) -> f64 {
    match label {
        ObjectLabel::Synthetic { size, .. } => size.millimeters(),
        ObjectLabel::Real(obj) => match obj {
            RealObject::Pen => 12.0,
            RealObject::Glue => 30.0,
            RealObject::Bottle => 65.0,
            RealObject::RubiksCube => 57.0,
            RealObject::EggVulcano => 45.0,
            RealObject::Toy => 35.0,
            RealObject::Scissors => 20.0,
        },
    }
}

/// Persistent kinematic traits of one synthetic participant.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user_id: String,
    /// Multiplier on movement time.
    pub speed_scale: f64,
    /// Multiplier on finger and hand lengths.
    pub hand_scale: f64,
    /// Aperture overshoot at the peak, mm.
    pub aperture_margin: f64,
    /// Seed of the user's grasp style.
    pub style_seed: u64,
}

/// Deterministic per-user grasp preferences derived from the style seed.
#[derive(Debug, Clone, PartialEq)]
struct GraspStyle {
    /// Wrist yaw reached at contact, radians.
    yaw: f64,
    /// Extra pitch of the thumb-index axis, degrees.
    axis_tilt: f64,
    centre_offset: Vec3,
    /// Multiplier on the template's finger fan angle.
    spread_gain: f64,
    rest_jitter: [Vec3; FINGER_COUNT],
    /// Fraction of the movement by which the hand shape is complete.
    shaping_end: f64,
}

impl UserProfile {
    /// Samples a profile: speed ~ N(1, 0.15²) clamped to [0.7, 1.4], hand
    /// scale ~ U[0.85, 1.15], aperture margin ~ U[15, 30] mm.
    pub fn sample(user_id: &str, seed: u64) -> UserProfile {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(1.0f64, 0.15).expect("valid normal");
        UserProfile {
            user_id: user_id.to_string(),
            speed_scale: normal.sample(&mut rng).clamp(0.7, 1.4),
            hand_scale: rng.random_range(0.85..=1.15),
            aperture_margin: rng.random_range(15.0..=30.0),
            style_seed: rng.random(),
        }
    }

    fn style(&self) -> GraspStyle {
        let mut rng = ChaCha8Rng::seed_from_u64(self.style_seed);
        let mut jitter = || -> Vec3 {
            [
                rng.random_range(-6.0..6.0),
                rng.random_range(-6.0..6.0),
                rng.random_range(-6.0..6.0),
            ]
        };
        let rest_jitter = [jitter(), jitter(), jitter(), jitter(), jitter()];
        let centre_offset = [jitter()[0], jitter()[1], jitter()[2]];
        GraspStyle {
            yaw: rng.random_range(-25.0f64..25.0).to_radians(),
            axis_tilt: rng.random_range(-15.0..15.0),
            centre_offset,
            spread_gain: rng.random_range(0.7..1.3),
            rest_jitter,
            shaping_end: rng.random_range(0.7..0.9),
        }
    }
}

/// An object placed in the workspace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthObject {
    pub label: ObjectLabel,
    pub position: Vec3,
    pub width: f64,
}

impl SynthObject {
    pub fn new(label: ObjectLabel, position: Vec3) -> Self {
        SynthObject {
            label,
            position,
            width: object_width(&label),
        }
    }
}

/// Finger posture the hand shapes towards for one object class.
#[derive(Debug, Clone, Copy, PartialEq)]
struct GraspTemplate {
    /// Which fingers (thumb … little) contact the object.
    engaged: [bool; FINGER_COUNT],
    /// Pitch of the thumb-index axis above the horizontal, degrees.
    pitch: f64,
    /// Fan angle between neighbouring engaged fingers, degrees.
    spread: f64,
    /// Shift of the grasp centre in hand coordinates, mm.
    centre: Vec3,
}

fn template(label: &ObjectLabel) -> GraspTemplate {
    const T: bool = true;
    const F: bool = false;
    let t = |engaged, pitch, spread, centre| GraspTemplate {
        engaged,
        pitch,
        spread,
        centre,
    };
    match label {
        ObjectLabel::Synthetic { shape, size } => {
            let engaged = match size {
                Size::Small => [T, T, F, F, F],
                Size::Medium => [T, T, T, F, F],
                Size::Large => [T, T, T, T, T],
            };
            match shape {
                Shape::Sphere => t(engaged, 0.0, 28.0, [0.0, 0.0, 0.0]),
                Shape::Box => t(engaged, 0.0, 0.0, [-6.0, 0.0, -8.0]),
                Shape::Cylinder => t(engaged, 40.0, 0.0, [4.0, 0.0, 6.0]),
            }
        }
        ObjectLabel::Real(obj) => match obj {
            RealObject::Pen => t([T, T, F, F, F], 60.0, 0.0, [8.0, 0.0, -10.0]),
            RealObject::Glue => t([T, T, T, F, F], 10.0, 10.0, [0.0, 0.0, 0.0]),
            RealObject::Bottle => t([T, T, T, T, T], 0.0, 5.0, [-10.0, 0.0, 5.0]),
            RealObject::RubiksCube => t([T, T, T, T, F], 0.0, 0.0, [-4.0, 0.0, -6.0]),
            RealObject::EggVulcano => t([T, T, T, T, T], 20.0, 25.0, [0.0, 0.0, 0.0]),
            RealObject::Toy => t([T, T, T, F, F], 40.0, 20.0, [6.0, 0.0, 4.0]),
            RealObject::Scissors => t([T, T, T, T, F], -30.0, -10.0, [10.0, 0.0, -4.0]),
        },
    }
}

/// Knuckle positions in hand coordinates (x forward, y towards the thumb,
/// z up) relative to the hand reference, before hand scaling.
const KNUCKLES: [Vec3; FINGER_COUNT] = [
    [15.0, 32.0, -18.0],
    [40.0, 20.0, 0.0],
    [42.0, 0.0, 0.0],
    [38.0, -18.0, 0.0],
    [32.0, -34.0, -3.0],
];
const REST_TIP_OFFSET: [Vec3; FINGER_COUNT] = [
    [35.0, 10.0, -22.0],
    [45.0, 0.0, -30.0],
    [48.0, 0.0, -32.0],
    [45.0, 0.0, -31.0],
    [38.0, 0.0, -28.0],
];
const CURLED_TIP_OFFSET: Vec3 = [18.0, 0.0, -24.0];
const THUMB_METACARPAL_POS: Vec3 = [5.0, 28.0, -12.0];
const GRASP_CENTRE: Vec3 = [85.0, 6.0, -26.0];
const REST_CENTRE: Vec3 = [68.0, 12.0, -40.0];
/// Step from one engaged finger to the next, towards the little finger.
const FINGER_STEP: Vec3 = [-3.0, -17.0, 0.0];

fn lerp(a: Vec3, b: Vec3, s: f64) -> Vec3 {
    add(a, scale(sub(b, a), s))
}

fn normalize(a: Vec3) -> Vec3 {
    scale(a, 1.0 / norm(a))
}

/// Rotation of `v` about the hand's forward (x) axis.
fn rotate_x(v: Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    [v[0], c * v[1] - s * v[2], s * v[1] + c * v[2]]
}

/// Hand-local sensor positions at one instant.
fn hand_pose(
    hand_scale: f64,
    style: &GraspStyle,
    grasp: &GraspTemplate,
    trial_centre: Vec3,
    shaping: f64,
    aperture: f64,
) -> [Vec3; SENSOR_COUNT] {
    let hs = |v: Vec3| scale(v, hand_scale);
    let pitch = (grasp.pitch + style.axis_tilt).to_radians();
    // Thumb → index direction: across the hand, pitched about x.
    let axis_grasp = [0.0, -pitch.cos(), pitch.sin()];
    let axis_rest = normalize([0.0, -0.6, -0.8]);
    let axis = normalize(lerp(axis_rest, axis_grasp, shaping));
    let centre_grasp = add(
        hs(add(add(GRASP_CENTRE, grasp.centre), style.centre_offset)),
        trial_centre,
    );
    let centre = lerp(hs(REST_CENTRE), centre_grasp, shaping);
    let half = scale(axis, aperture / 2.0);

    let mut pose = [[0.0; 3]; SENSOR_COUNT];
    pose[0] = sub(centre, half);
    pose[1] = add(centre, half);
    let fan = (grasp.spread * style.spread_gain).to_radians();
    let mut rank = 0.0;
    for f in 2..FINGER_COUNT {
        let knuckle = hs(KNUCKLES[f]);
        let rest = add(knuckle, add(hs(REST_TIP_OFFSET[f]), style.rest_jitter[f]));
        let target = if grasp.engaged[f] {
            rank += 1.0;
            add(add(centre, rotate_x(half, -rank * fan)), hs(scale(FINGER_STEP, rank)))
        } else {
            add(knuckle, hs(CURLED_TIP_OFFSET))
        };
        pose[f] = lerp(rest, target, shaping);
    }
    for f in 0..FINGER_COUNT {
        let knuckle = hs(KNUCKLES[f]);
        pose[FINGER_COUNT + f] = lerp(knuckle, pose[f], PROXIMAL_FRACTION);
    }
    let thumb_rest = add(hs(add(KNUCKLES[0], REST_TIP_OFFSET[0])), style.rest_jitter[0]);
    pose[THUMB_METACARPAL] = add(hs(THUMB_METACARPAL_POS), scale(sub(pose[0], thumb_rest), 0.1));
    pose[HAND_REFERENCE] = [0.0; 3];
    pose
}

/// Which objects a corpus contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectSet {
    Real,
    Synthetic,
    Both,
}

impl ObjectSet {
    pub fn labels(self) -> Vec<ObjectLabel> {
        match self {
            ObjectSet::Real => ObjectLabel::all_real(),
            ObjectSet::Synthetic => ObjectLabel::all_synthetic(),
            ObjectSet::Both => {
                let mut v = ObjectLabel::all_real();
                v.extend(ObjectLabel::all_synthetic());
                v
            }
        }
    }
}

impl std::str::FromStr for ObjectSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(ObjectSet::Real),
            "synthetic" => Ok(ObjectSet::Synthetic),
            "both" => Ok(ObjectSet::Both),
            _ => Err(Error::InvalidArgument(format!(
                "object set `{s}` is not real, synthetic or both"
            ))),
        }
    }
}

/// Corpus and trial generation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub users: usize,
    /// Repetitions per user and object; each repetition is one session.
    pub reps: usize,
    pub rate_hz: u32,
    /// Standard deviation of the per-coordinate sensor noise, mm.
    pub noise_mm: f64,
    /// Probability of deleting each interior frame.
    pub dropout: f64,
    pub seed: u64,
    pub objects: ObjectSet,
    /// Distance from the rest position to the nominal object position.
    pub distance_mm: f64,
    /// Half-width of the uniform per-trial object placement jitter.
    pub position_jitter_mm: f64,
    /// Half-width of the uniform per-trial jitter of the hand rest position
    /// in the horizontal plane.
    pub start_jitter_mm: f64,
    pub fitts_a_s: f64,
    pub fitts_b_s: f64,
    /// Hand reference position at rest.
    pub start: Vec3,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            users: 16,
            reps: 3,
            rate_hz: 960,
            noise_mm: DEFAULT_NOISE_MM,
            dropout: 0.0,
            seed: 42,
            objects: ObjectSet::Synthetic,
            distance_mm: DEFAULT_DISTANCE_MM,
            position_jitter_mm: 10.0,
            start_jitter_mm: DEFAULT_START_JITTER_MM,
            fitts_a_s: DEFAULT_FITTS_A_S,
            fitts_b_s: DEFAULT_FITTS_B_S,
            start: [150.0, 0.0, 40.0],
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.reps == 0 || self.rate_hz == 0 {
            return Err(Error::InvalidArgument("users, reps and rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument("dropout probability must lie in [0, 1)".into()));
        }
        if !(self.noise_mm >= 0.0) || !(self.distance_mm > 0.0) || !(self.position_jitter_mm >= 0.0)
            || !(self.start_jitter_mm >= 0.0)
        {
            return Err(Error::InvalidArgument(
                "noise, distance and jitter must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Nominal object position: `distance_mm` from the rest position,
    /// forward and slightly towards the body midline.
    pub fn object_position(&self) -> Vec3 {
        add(self.start, scale(normalize([-0.3, 1.0, 0.0]), self.distance_mm))
    }
}

/// Ground-truth timing and geometry of one generated trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSchedule {
    pub start_frame: u64,
    pub grasp_frame: u64,
    /// Fitts' law movement time, s.
    pub movement_s: f64,
    pub start_position: Vec3,
    pub pre_grasp_position: Vec3,
    pub object_position: Vec3,
    pub object_width: f64,
    pub peak_aperture: f64,
    pub final_aperture: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTrial {
    /// Noisy recording, with dropouts when requested.
    pub recording: Recording,
    /// Noise-free, dropout-free copy.
    pub clean: Recording,
    pub schedule: TrialSchedule,
    /// Original frame indices removed by dropout injection.
    pub dropped: Vec<u64>,
}

/// Rounds to the file format's four decimals so that a written and
/// re-parsed recording is identical.
fn quantize(x: f64) -> f64 {
    (x * 1e4).round() / 1e4 + 0.0
}

fn quantize_frame(frame: &mut TrackingFrame) {
    for s in frame.sensors.iter_mut() {
        for c in s.position.iter_mut() {
            *c = quantize(*c);
        }
    }
}

/// Generates one trial of `user` reaching for `object`.
pub fn generate_trial(
    user: &UserProfile,
    object: &SynthObject,
    session_id: &str,
    trial_id: &str,
    seed: u64,
    config: &GenConfig,
) -> Result<GeneratedTrial> {
    if !(object.width > 0.0) {
        return Err(Error::InvalidArgument("object width must be positive".into()));
    }
    let start = config.start;
    let d = distance(start, object.position);
    if d < 1.0 {
        return Err(Error::InvalidArgument(
            "object lies at the start position".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rate = config.rate_hz as f64;
    let movement_s = fitts_time(d, object.width, config.fitts_a_s, config.fitts_b_s, user.speed_scale)?;
    let moving = ((movement_s * rate).round() as u64).max(1);
    let rest = ((REST_S + rng.random_range(0.0..0.15)) * rate).round() as u64;
    let hold = (HOLD_S * rate).round() as u64;
    let start_frame = rest;
    let grasp_frame = rest + moving;
    let total = grasp_frame + hold + 1;

    let style = user.style();
    let grasp = template(&object.label);
    let trial_centre: Vec3 = [
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
    ];
    let yaw_final = style.yaw + rng.random_range(-3.0f64..3.0).to_radians();

    // Hand frame: x towards the object in the horizontal plane, y to the
    // left (thumb side of a right hand), z up.
    let dir = normalize([object.position[0] - start[0], object.position[1] - start[1], 0.0]);
    let to_world = |local: Vec3, yaw: f64| -> Vec3 {
        let v = [
            dir[0] * local[0] - dir[1] * local[1],
            dir[1] * local[0] + dir[0] * local[1],
            local[2],
        ];
        rotate_z(v, yaw)
    };
    let final_pose = hand_pose(
        user.hand_scale,
        &style,
        &grasp,
        trial_centre,
        1.0,
        object.width + CLOSING_MARGIN_MM,
    );
    let centre_final = lerp(final_pose[0], final_pose[1], 0.5);
    let pre_grasp = sub(object.position, to_world(centre_final, yaw_final));

    let noise = Normal::new(0.0, config.noise_mm.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut clean_frames = Vec::with_capacity(total as usize);
    let mut noisy_frames = Vec::with_capacity(total as usize);
    let mut peak_aperture: f64 = 0.0;
    for k in 0..total {
        let tau = (k.saturating_sub(start_frame) as f64 / moving as f64).min(1.0);
        let progress = min_jerk_progress(tau);
        let shaping = min_jerk_progress(tau / style.shaping_end);
        let aperture = aperture_profile(tau, object.width, user.aperture_margin);
        peak_aperture = peak_aperture.max(aperture);
        let hand = lerp(start, pre_grasp, progress);
        let yaw = yaw_final * progress;
        let pose = hand_pose(user.hand_scale, &style, &grasp, trial_centre, shaping, aperture);
        let mut sensors = [SensorPose::default(); SENSOR_COUNT];
        for (s, local) in sensors.iter_mut().zip(pose) {
            s.position = add(hand, to_world(local, yaw));
        }
        let touch = [k < start_frame, k >= grasp_frame, false];
        let mut clean = TrackingFrame {
            frame_index: k,
            sensors,
            touch,
        };
        let mut noisy = clean.clone();
        if config.noise_mm > 0.0 {
            for s in noisy.sensors.iter_mut() {
                for c in s.position.iter_mut() {
                    *c += noise.sample(&mut rng);
                }
            }
        }
        quantize_frame(&mut clean);
        quantize_frame(&mut noisy);
        clean_frames.push(clean);
        noisy_frames.push(noisy);
    }

    let make = |frames| Recording {
        user_id: user.user_id.clone(),
        session_id: session_id.to_string(),
        trial_id: trial_id.to_string(),
        object: object.label,
        rate_hz: config.rate_hz,
        object_position: object.position.map(quantize),
        frames,
    };
    let clean = make(clean_frames);
    let mut recording = make(noisy_frames);
    let mut dropped = Vec::new();
    if config.dropout > 0.0 {
        let (with_gaps, removed) = inject_dropouts(&recording, config.dropout, seed ^ 0xd20f_0a7e);
        recording = with_gaps;
        dropped = removed;
    }
    Ok(GeneratedTrial {
        recording,
        clean,
        schedule: TrialSchedule {
            start_frame,
            grasp_frame,
            movement_s,
            start_position: start,
            pre_grasp_position: pre_grasp,
            object_position: object.position,
            object_width: object.width,
            peak_aperture,
            final_aperture: object.width + CLOSING_MARGIN_MM,
        },
        dropped,
    })
}

/// Deletes interior frames independently with probability `p`, never two
/// adjacent ones, and renumbers the remaining frames consecutively from the
/// first frame's index. Returns the new recording and the original indices
/// of the deleted frames.
pub fn inject_dropouts(recording: &Recording, p: f64, seed: u64) -> (Recording, Vec<u64>) {
    let mut out = recording.clone();
    if p <= 0.0 || recording.frames.len() < 3 {
        return (out, Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = recording.frames.len();
    let mut keep = Vec::with_capacity(n);
    let mut dropped = Vec::new();
    let mut previous_dropped = false;
    for (i, frame) in recording.frames.iter().enumerate() {
        let draw: f64 = rng.random();
        let interior = i > 0 && i + 1 < n;
        if interior && !previous_dropped && draw < p {
            dropped.push(frame.frame_index);
            previous_dropped = true;
        } else {
            keep.push(frame.clone());
            previous_dropped = false;
        }
    }
    let base = recording.frames[0].frame_index;
    for (i, frame) in keep.iter_mut().enumerate() {
        frame.frame_index = base + i as u64;
    }
    out.frames = keep;
    (out, dropped)
}

/// SplitMix64 finalizer, used to derive independent child seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed of `master` for a path of indices.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

/// One row of the corpus manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub file: String,
    pub user_id: String,
    pub session_id: String,
    pub trial_id: String,
    pub object: ObjectLabel,
    pub seed: u64,
    pub schedule: TrialSchedule,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub users: Vec<UserProfile>,
    pub trials: Vec<GeneratedTrial>,
    pub manifest: Vec<ManifestEntry>,
}

pub fn user_id(index: usize) -> String {
    format!("u{:02}", index + 1)
}

/// Generates `users × objects × reps` trials in parallel; every trial's
/// seed is derived from the master seed and its (user, object, rep) path.
pub fn generate_corpus(config: &GenConfig) -> Result<Corpus> {
    config.validate()?;
    let users: Vec<UserProfile> = (0..config.users)
        .map(|u| UserProfile::sample(&user_id(u), derive_seed(config.seed, &[0, u as u64])))
        .collect();
    let labels = config.objects.labels();
    let nominal = config.object_position();
    let mut jobs = Vec::new();
    for (u, _) in users.iter().enumerate() {
        for (o, _) in labels.iter().enumerate() {
            for r in 0..config.reps {
                jobs.push((u, o, r));
            }
        }
    }
    let trials: Vec<(GeneratedTrial, ManifestEntry)> = jobs
        .par_iter()
        .map(|&(u, o, r)| {
            let seed = derive_seed(config.seed, &[1, u as u64, o as u64, r as u64]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0b1e_c7);
            let j = config.position_jitter_mm;
            let position = if j > 0.0 {
                add(nominal, [rng.random_range(-j..=j), rng.random_range(-j..=j), 0.0])
            } else {
                nominal
            };
            let s = config.start_jitter_mm;
            let trial_config = GenConfig {
                start: if s > 0.0 {
                    add(config.start, [rng.random_range(-s..=s), rng.random_range(-s..=s), 0.0])
                } else {
                    config.start
                },
                ..config.clone()
            };
            let label = labels[o];
            let user = &users[u];
            let session = format!("s{}", r + 1);
            let trial_id = format!("{}-{}-r{}", user.user_id, label, r + 1);
            let trial = generate_trial(user, &SynthObject::new(label, position), &session, &trial_id, seed, &trial_config)?;
            let entry = ManifestEntry {
                file: format!("{trial_id}.csv"),
                user_id: user.user_id.clone(),
                session_id: session,
                trial_id,
                object: label,
                seed,
                schedule: trial.schedule,
                dropped: trial.dropped.len(),
            };
            Ok((trial, entry))
        })
        .collect::<Result<_>>()?;
    let (trials, manifest) = trials.into_iter().unzip();
    Ok(Corpus {
        users,
        trials,
        manifest,
    })
}

impl Corpus {
    /// Manifest CSV with one ground-truth row per trial.
    pub fn manifest_csv(&self) -> String {
        let mut out = String::from(
            "file,user,session,trial,object,seed,object_x,object_y,object_z,width_mm,start_frame,grasp_frame,movement_s,final_aperture_mm,dropped_frames\n",
        );
        for e in &self.manifest {
            let s = &e.schedule;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.4},{:.4},{:.4},{:.1},{},{},{:.6},{:.1},{}",
                e.file,
                e.user_id,
                e.session_id,
                e.trial_id,
                e.object,
                e.seed,
                s.object_position[0],
                s.object_position[1],
                s.object_position[2],
                s.object_width,
                s.start_frame,
                s.grasp_frame,
                s.movement_s,
                s.final_aperture,
                e.dropped
            );
        }
        out
    }

    /// CRC-32 of the manifest CSV.
    pub fn manifest_checksum(&self) -> u32 {
        crc32fast::hash(self.manifest_csv().as_bytes())
    }

    /// Recordings paired with their manifest file names.
    pub fn recordings(&self) -> Vec<(Recording, String)> {
        self.trials
            .iter()
            .zip(&self.manifest)
            .map(|(t, e)| (t.recording.clone(), e.file.clone()))
            .collect()
    }
}
