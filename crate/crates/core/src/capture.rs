//! Recording data model, the `GRSPREC v1` text format, reach-to-grasp phase
//! segmentation from the touch sensors, and trial validation.
//!
//! A recording holds 12 tracked sensor positions per frame:
//!
//! | index | sensor                               |
//! |-------|--------------------------------------|
//! | 0..=4 | fingertips, thumb to little finger   |
//! | 5..=9 | proximal phalanges, same order       |
//! | 10    | thumb metacarpal                     |
//! | 11    | middle-finger metacarpal (reference) |
//!
//! and three touch surfaces: S1 (hand rest), S2 (object) and S3 (target).

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geom::Vec3;

pub const SENSOR_COUNT: usize = 12;
pub const FINGER_COUNT: usize = 5;
/// Sensor used as the hand position `p_h` and as the polygon origin.
pub const HAND_REFERENCE: usize = 11;
pub const THUMB_METACARPAL: usize = 10;
pub const DEFAULT_RATE_HZ: u32 = 960;
/// Sanity bound on any coordinate of a desk-scale workspace.
pub const MAX_COORDINATE_MM: f64 = 10_000.0;
/// A touch transition counts only once the new state persisted this many frames.
pub const TOUCH_DEBOUNCE_FRAMES: usize = 3;

pub const MAGIC_LINE_TAG: &str = "#GRSPREC";
pub const FORMAT_VERSION_TAG: &str = "v1";
/// `frame`, three touch flags and 12 × (x, y, z).
pub const COLUMN_COUNT: usize = 4 + 3 * SENSOR_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SensorPose {
    pub position: Vec3,
}

impl SensorPose {
    pub fn new(position: Vec3) -> Self {
        SensorPose { position }
    }

    pub fn is_valid(&self) -> bool {
        self.position
            .iter()
            .all(|c| c.is_finite() && c.abs() < MAX_COORDINATE_MM)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingFrame {
    pub frame_index: u64,
    pub sensors: [SensorPose; SENSOR_COUNT],
    /// S1 (rest), S2 (object), S3 (target).
    pub touch: [bool; 3],
}

impl TrackingFrame {
    pub fn time_s(&self, rate_hz: u32) -> f64 {
        self.frame_index as f64 / rate_hz as f64
    }

    pub fn position(&self, sensor: usize) -> Vec3 {
        self.sensors[sensor].position
    }

    pub fn hand_position(&self) -> Vec3 {
        self.sensors[HAND_REFERENCE].position
    }

    /// Returns a copy with every sensor moved by `offset`.
    pub fn translated(&self, offset: Vec3) -> TrackingFrame {
        let mut out = self.clone();
        for s in out.sensors.iter_mut() {
            s.position = crate::geom::add(s.position, offset);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RealObject {
    Pen,
    Glue,
    Bottle,
    RubiksCube,
    EggVulcano,
    Toy,
    Scissors,
}

impl RealObject {
    pub const ALL: [RealObject; 7] = [
        RealObject::Pen,
        RealObject::Glue,
        RealObject::Bottle,
        RealObject::RubiksCube,
        RealObject::EggVulcano,
        RealObject::Toy,
        RealObject::Scissors,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RealObject::Pen => "pen",
            RealObject::Glue => "glue",
            RealObject::Bottle => "bottle",
            RealObject::RubiksCube => "rubiks_cube",
            RealObject::EggVulcano => "egg_vulcano",
            RealObject::Toy => "toy",
            RealObject::Scissors => "scissors",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Shape {
    Sphere,
    Box,
    Cylinder,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Sphere, Shape::Box, Shape::Cylinder];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Sphere => "sphere",
            Shape::Box => "box",
            Shape::Cylinder => "cylinder",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Size {
    Small,
    Medium,
    Large,
}

impl Size {
    pub const ALL: [Size; 3] = [Size::Small, Size::Medium, Size::Large];

    pub fn name(self) -> &'static str {
        match self {
            Size::Small => "small",
            Size::Medium => "medium",
            Size::Large => "large",
        }
    }

    pub fn millimeters(self) -> f64 {
        match self {
            Size::Small => 20.0,
            Size::Medium => 40.0,
            Size::Large => 60.0,
        }
    }
}

/// Identity of the grasped object: one of 7 real objects or one of
/// 3 shapes × 3 sizes of synthetic solids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectLabel {
    Real(RealObject),
    Synthetic { shape: Shape, size: Size },
}

impl ObjectLabel {
    pub fn all_real() -> Vec<ObjectLabel> {
        RealObject::ALL.iter().map(|&o| ObjectLabel::Real(o)).collect()
    }

    pub fn all_synthetic() -> Vec<ObjectLabel> {
        let mut out = Vec::with_capacity(9);
        for shape in Shape::ALL {
            for size in Size::ALL {
                out.push(ObjectLabel::Synthetic { shape, size });
            }
        }
        out
    }

    pub fn is_real(&self) -> bool {
        matches!(self, ObjectLabel::Real(_))
    }

    /// Class index within the object's own set (0..7 real, 0..9 synthetic).
    pub fn object_class(&self) -> usize {
        match *self {
            ObjectLabel::Real(o) => o.index(),
            ObjectLabel::Synthetic { shape, size } => shape as usize * 3 + size as usize,
        }
    }

    pub fn size_class(&self) -> Option<usize> {
        match *self {
            ObjectLabel::Synthetic { size, .. } => Some(size as usize),
            ObjectLabel::Real(_) => None,
        }
    }

    pub fn shape_class(&self) -> Option<usize> {
        match *self {
            ObjectLabel::Synthetic { shape, .. } => Some(shape as usize),
            ObjectLabel::Real(_) => None,
        }
    }
}

impl fmt::Display for ObjectLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectLabel::Real(o) => f.write_str(o.name()),
            ObjectLabel::Synthetic { shape, size } => {
                write!(f, "{}_{}", shape.name(), size.name())
            }
        }
    }
}

impl FromStr for ObjectLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(o) = RealObject::ALL.iter().find(|o| o.name() == s) {
            return Ok(ObjectLabel::Real(*o));
        }
        for shape in Shape::ALL {
            for size in Size::ALL {
                if s.strip_prefix(shape.name())
                    .and_then(|rest| rest.strip_prefix('_'))
                    == Some(size.name())
                {
                    return Ok(ObjectLabel::Synthetic { shape, size });
                }
            }
        }
        Err(Error::InvalidArgument(format!("unknown object label `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub user_id: String,
    pub session_id: String,
    pub trial_id: String,
    pub object: ObjectLabel,
    pub rate_hz: u32,
    /// Known object location from the trial manifest.
    pub object_position: Vec3,
    pub frames: Vec<TrackingFrame>,
}

impl Recording {
    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::InvalidRecording("recording has no frames".into()));
        }
        if self.rate_hz == 0 {
            return Err(Error::InvalidRecording("rate must be positive".into()));
        }
        for id in [&self.user_id, &self.session_id, &self.trial_id] {
            if id.is_empty() || id.chars().any(|c| c.is_whitespace() || c == '=' || c == ',') {
                return Err(Error::InvalidRecording(format!("bad identifier `{id}`")));
            }
        }
        if !SensorPose::new(self.object_position).is_valid() {
            return Err(Error::InvalidRecording("object position out of range".into()));
        }
        for pair in self.frames.windows(2) {
            if pair[1].frame_index <= pair[0].frame_index {
                return Err(Error::InvalidRecording(format!(
                    "frame index {} follows {}",
                    pair[1].frame_index, pair[0].frame_index
                )));
            }
        }
        for frame in &self.frames {
            if !frame.sensors.iter().all(SensorPose::is_valid) {
                return Err(Error::InvalidRecording(format!(
                    "frame {} has an out-of-range coordinate",
                    frame.frame_index
                )));
            }
        }
        Ok(())
    }

    /// Position in `frames` of the frame carrying `frame_index`.
    pub fn position_of(&self, frame_index: u64) -> Option<usize> {
        self.frames
            .binary_search_by_key(&frame_index, |f| f.frame_index)
            .ok()
    }

    /// Frames from the segment's start through its grasp frame, inclusive.
    pub fn segment_frames(&self, segment: &PhaseSegment) -> &[TrackingFrame] {
        let start = self.position_of(segment.start_frame).unwrap_or(0);
        let end = self
            .position_of(segment.grasp_frame)
            .unwrap_or(self.frames.len() - 1);
        &self.frames[start..=end]
    }
}

/// Reach-to-grasp phase: from S1 release to the first S2 touch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSegment {
    pub start_frame: u64,
    pub grasp_frame: u64,
    pub object_position: Vec3,
}

impl PhaseSegment {
    pub fn len_frames(&self) -> u64 {
        self.grasp_frame - self.start_frame + 1
    }

    pub fn duration_s(&self, rate_hz: u32) -> f64 {
        (self.grasp_frame - self.start_frame) as f64 / rate_hz as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExclusionReason {
    TouchOrderError,
    ExcessiveDuration,
    MissingTouch,
    Ok,
}

impl ExclusionReason {
    pub fn name(self) -> &'static str {
        match self {
            ExclusionReason::TouchOrderError => "touch_order_error",
            ExclusionReason::ExcessiveDuration => "excessive_duration",
            ExclusionReason::MissingTouch => "missing_touch",
            ExclusionReason::Ok => "ok",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExclusionReport {
    pub excluded: bool,
    pub reason: ExclusionReason,
}

impl ExclusionReport {
    pub fn new(reason: ExclusionReason) -> Self {
        ExclusionReport {
            excluded: reason != ExclusionReason::Ok,
            reason,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentError {
    MissingTouch,
    TouchOrder,
}

impl From<SegmentError> for ExclusionReason {
    fn from(err: SegmentError) -> Self {
        match err {
            SegmentError::MissingTouch => ExclusionReason::MissingTouch,
            SegmentError::TouchOrder => ExclusionReason::TouchOrderError,
        }
    }
}

/// Debounced transitions of one touch channel as `(position, new_state)`,
/// plus the initial state. The position is the first frame of the run that
/// established the new state.
fn debounced_transitions(frames: &[TrackingFrame], channel: usize) -> (bool, Vec<(usize, bool)>) {
    let Some(first) = frames.first() else {
        return (false, Vec::new());
    };
    let initial = first.touch[channel];
    let mut state = initial;
    let mut run = 0usize;
    let mut run_start = 0usize;
    let mut out = Vec::new();
    for (k, frame) in frames.iter().enumerate().skip(1) {
        if frame.touch[channel] != state {
            if run == 0 {
                run_start = k;
            }
            run += 1;
            if run >= TOUCH_DEBOUNCE_FRAMES {
                state = frame.touch[channel];
                out.push((run_start, state));
                run = 0;
            }
        } else {
            run = 0;
        }
    }
    (initial, out)
}

/// Extracts the reach-to-grasp phase from the touch events.
///
/// `start_frame` is the first frame of the debounced S1 release and
/// `grasp_frame` the first frame of the debounced S2 touch that follows it.
/// Touch chatter after these two events is ignored.
pub fn segment_r2g(recording: &Recording) -> Result<PhaseSegment, SegmentError> {
    let frames = &recording.frames;
    let (s1_initial, s1_events) = debounced_transitions(frames, 0);
    let (s2_initial, s2_events) = debounced_transitions(frames, 1);

    let release = s1_events.iter().find(|&&(_, state)| !state).map(|&(k, _)| k);
    let first_s2_on = if s2_initial {
        Some(0)
    } else {
        s2_events.iter().find(|&&(_, state)| state).map(|&(k, _)| k)
    };

    // An S1 release requires S1 to have been on; a channel that starts off
    // and later turns on yields an on-event before its release.
    let release = match release {
        Some(k) if s1_initial || s1_events.iter().any(|&(j, on)| on && j < k) => k,
        _ => {
            return match first_s2_on {
                Some(_) if s1_initial => Err(SegmentError::TouchOrder),
                _ => Err(SegmentError::MissingTouch),
            }
        }
    };
    if let Some(k) = first_s2_on {
        if k <= release {
            return Err(SegmentError::TouchOrder);
        }
    }
    let grasp = s2_events
        .iter()
        .find(|&&(k, state)| state && k > release)
        .map(|&(k, _)| k)
        .ok_or(SegmentError::MissingTouch)?;

    Ok(PhaseSegment {
        start_frame: frames[release].frame_index,
        grasp_frame: frames[grasp].frame_index,
        object_position: recording.object_position,
    })
}

/// Longest accepted reach-to-grasp duration.
pub const DEFAULT_MAX_DURATION_S: f64 = 5.0;

pub fn validate_recording(recording: &Recording, max_duration_s: f64) -> ExclusionReport {
    match segment_r2g(recording) {
        Err(err) => ExclusionReport::new(err.into()),
        Ok(seg) if seg.duration_s(recording.rate_hz) > max_duration_s => {
            ExclusionReport::new(ExclusionReason::ExcessiveDuration)
        }
        Ok(_) => ExclusionReport::new(ExclusionReason::Ok),
    }
}

fn header_columns() -> String {
    let mut s = String::from("frame,s1,s2,s3");
    for i in 0..SENSOR_COUNT {
        for axis in ["x", "y", "z"] {
            write!(s, ",p{i}{axis}").unwrap();
        }
    }
    s
}

/// Serializes a recording in canonical form: positions with 4 decimals,
/// touch flags as `0`/`1`, LF line endings.
pub fn write_recording(recording: &Recording) -> Result<String> {
    recording.validate()?;
    let r = recording;
    let mut out = String::with_capacity(64 + r.frames.len() * 320);
    writeln!(
        out,
        "{MAGIC_LINE_TAG} {FORMAT_VERSION_TAG} user={} session={} trial={} object={} rate={} object_x={:.4} object_y={:.4} object_z={:.4}",
        r.user_id,
        r.session_id,
        r.trial_id,
        r.object,
        r.rate_hz,
        r.object_position[0],
        r.object_position[1],
        r.object_position[2]
    )
    .unwrap();
    out.push_str(&header_columns());
    out.push('\n');
    for frame in &r.frames {
        write_row(&mut out, frame);
    }
    Ok(out)
}

pub(crate) fn write_row(out: &mut String, frame: &TrackingFrame) {
    write!(
        out,
        "{},{},{},{}",
        frame.frame_index,
        frame.touch[0] as u8,
        frame.touch[1] as u8,
        frame.touch[2] as u8
    )
    .unwrap();
    for sensor in &frame.sensors {
        for c in sensor.position {
            write!(out, ",{c:.4}").unwrap();
        }
    }
    out.push('\n');
}

fn parse_header(line: &str) -> Result<(String, String, String, ObjectLabel, u32, Vec3)> {
    let err = |message: String| Error::Parse { line: 1, message };
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some(MAGIC_LINE_TAG) {
        return Err(err(format!("missing `{MAGIC_LINE_TAG}` tag")));
    }
    if tokens.next() != Some(FORMAT_VERSION_TAG) {
        return Err(err("unsupported format version".into()));
    }
    let (mut user, mut session, mut trial, mut object, mut rate) = (None, None, None, None, None);
    let mut pos = [None; 3];
    for token in tokens {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, got `{token}`")))?;
        let coord = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| err(format!("bad number `{v}` for {key}")))
        };
        match key {
            "user" => user = Some(value.to_string()),
            "session" => session = Some(value.to_string()),
            "trial" => trial = Some(value.to_string()),
            "object" => {
                object = Some(value.parse::<ObjectLabel>().map_err(|e| err(e.to_string()))?)
            }
            "rate" => {
                rate = Some(
                    value
                        .parse::<u32>()
                        .map_err(|_| err(format!("bad rate `{value}`")))?,
                )
            }
            "object_x" => pos[0] = Some(coord(value)?),
            "object_y" => pos[1] = Some(coord(value)?),
            "object_z" => pos[2] = Some(coord(value)?),
            other => return Err(err(format!("unknown header key `{other}`"))),
        }
    }
    let missing = |name: &str| err(format!("missing header key `{name}`"));
    Ok((
        user.ok_or_else(|| missing("user"))?,
        session.ok_or_else(|| missing("session"))?,
        trial.ok_or_else(|| missing("trial"))?,
        object.ok_or_else(|| missing("object"))?,
        rate.ok_or_else(|| missing("rate"))?,
        [
            pos[0].ok_or_else(|| missing("object_x"))?,
            pos[1].ok_or_else(|| missing("object_y"))?,
            pos[2].ok_or_else(|| missing("object_z"))?,
        ],
    ))
}

/// Parses one data row. `line` is the 1-based line number used in errors.
pub fn parse_row(row: &str, line: usize) -> Result<TrackingFrame> {
    let fields: Vec<&str> = row.trim_end_matches('\r').split(',').collect();
    if fields.len() != COLUMN_COUNT {
        return Err(Error::ColumnCount {
            line,
            expected: COLUMN_COUNT,
            found: fields.len(),
        });
    }
    let frame_index = fields[0].trim().parse::<u64>().map_err(|_| Error::Parse {
        line,
        message: format!("bad frame index `{}`", fields[0]),
    })?;
    let mut touch = [false; 3];
    for (t, field) in touch.iter_mut().zip(&fields[1..4]) {
        *t = match field.trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("touch flag must be 0 or 1, got `{other}`"),
                })
            }
        };
    }
    let mut sensors = [SensorPose::default(); SENSOR_COUNT];
    for (i, sensor) in sensors.iter_mut().enumerate() {
        for axis in 0..3 {
            let field = fields[4 + 3 * i + axis].trim();
            let v = field.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("bad coordinate `{field}`"),
            })?;
            sensor.position[axis] = v;
        }
        if !sensor.is_valid() {
            return Err(Error::Parse {
                line,
                message: format!("sensor {i} coordinate out of range"),
            });
        }
    }
    Ok(TrackingFrame {
        frame_index,
        sensors,
        touch,
    })
}

pub fn parse_recording(text: &str) -> Result<Recording> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let (user_id, session_id, trial_id, object, rate_hz, object_position) = parse_header(header)?;
    match lines.next() {
        Some((_, cols)) if cols.trim_end_matches('\r') == header_columns() => {}
        Some(_) => {
            return Err(Error::Parse {
                line: 2,
                message: "unexpected column header".into(),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 2,
                message: "missing column header".into(),
            })
        }
    }
    let mut frames: Vec<TrackingFrame> = Vec::new();
    for (i, row) in lines {
        let line = i + 1;
        if row.trim().is_empty() {
            continue;
        }
        let frame = parse_row(row, line)?;
        if let Some(prev) = frames.last() {
            if frame.frame_index <= prev.frame_index {
                return Err(Error::NonMonotonic {
                    line,
                    index: frame.frame_index,
                    previous: prev.frame_index,
                });
            }
        }
        frames.push(frame);
    }
    let recording = Recording {
        user_id,
        session_id,
        trial_id,
        object,
        rate_hz,
        object_position,
        frames,
    };
    recording.validate()?;
    Ok(recording)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(k: u64, s1: bool, s2: bool) -> TrackingFrame {
        TrackingFrame {
            frame_index: k,
            sensors: [SensorPose::new([k as f64 * 0.5, -1.25, 3.0]); SENSOR_COUNT],
            touch: [s1, s2, false],
        }
    }

    fn recording(frames: Vec<TrackingFrame>) -> Recording {
        Recording {
            user_id: "u01".into(),
            session_id: "s1".into(),
            trial_id: "t1".into(),
            object: ObjectLabel::Real(RealObject::Pen),
            rate_hz: DEFAULT_RATE_HZ,
            object_position: [100.0, 200.0, 0.0],
            frames,
        }
    }

    fn touch_recording(n: u64, s1: impl Fn(u64) -> bool, s2: impl Fn(u64) -> bool) -> Recording {
        recording((0..n).map(|k| frame(k, s1(k), s2(k))).collect())
    }

    #[test]
    fn smallest_valid_file() {
        let r = recording(vec![frame(0, true, false), frame(1, true, false)]);
        let text = write_recording(&r).unwrap();
        assert_eq!(text.lines().count(), 4);
        let parsed = parse_recording(&text).unwrap();
        assert_eq!(parsed.frames.len(), 2);
        assert_eq!(parsed, r);
    }

    #[test]
    fn column_count_error_names_the_row() {
        let r = recording(vec![frame(0, true, false), frame(1, true, false)]);
        let text = write_recording(&r).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let cut: Vec<&str> = lines[3].split(',').take(COLUMN_COUNT - 2).collect();
        lines[3] = cut.join(",");
        let err = parse_recording(&lines.join("\n")).unwrap_err();
        assert_eq!(
            err,
            Error::ColumnCount {
                line: 4,
                expected: COLUMN_COUNT,
                found: COLUMN_COUNT - 2
            }
        );
    }

    #[test]
    fn non_monotone_frames_rejected() {
        let r = recording(vec![frame(0, true, false), frame(1, true, false)]);
        let text = write_recording(&r).unwrap().replace("\n1,", "\n0,");
        assert!(matches!(
            parse_recording(&text),
            Err(Error::NonMonotonic { line: 4, .. })
        ));
    }

    #[test]
    fn malformed_number_reports_line() {
        let r = recording(vec![frame(0, true, false), frame(1, true, false)]);
        let text = write_recording(&r).unwrap().replace("-1.2500", "abc");
        assert!(matches!(parse_recording(&text), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn empty_recording_is_not_written() {
        assert!(write_recording(&recording(vec![])).is_err());
    }

    #[test]
    fn writing_is_deterministic() {
        let r = recording((0..5).map(|k| frame(k, k < 2, k > 3)).collect());
        assert_eq!(write_recording(&r).unwrap(), write_recording(&r).unwrap());
        assert!(!write_recording(&r).unwrap().contains('\r'));
    }

    #[test]
    fn object_labels_round_trip() {
        let all: Vec<_> = ObjectLabel::all_real()
            .into_iter()
            .chain(ObjectLabel::all_synthetic())
            .collect();
        assert_eq!(all.len(), 16);
        for label in all {
            assert_eq!(label.to_string().parse::<ObjectLabel>().unwrap(), label);
        }
        assert!("cone_small".parse::<ObjectLabel>().is_err());
    }

    #[test]
    fn segmentation_from_touch_events() {
        let r = touch_recording(1000, |k| k < 100, |k| k >= 800);
        let seg = segment_r2g(&r).unwrap();
        assert_eq!((seg.start_frame, seg.grasp_frame), (100, 800));
        assert_eq!(seg.object_position, r.object_position);
    }

    #[test]
    fn early_object_touch_is_an_order_error() {
        let r = touch_recording(1000, |k| k < 100, |k| k >= 50);
        assert_eq!(segment_r2g(&r), Err(SegmentError::TouchOrder));
        let report = validate_recording(&r, DEFAULT_MAX_DURATION_S);
        assert_eq!(report.reason, ExclusionReason::TouchOrderError);
        assert!(report.excluded);
    }

    #[test]
    fn missing_events() {
        let never_released = touch_recording(500, |_| true, |_| false);
        assert_eq!(segment_r2g(&never_released), Err(SegmentError::MissingTouch));
        let never_grasped = touch_recording(500, |k| k < 100, |_| false);
        assert_eq!(segment_r2g(&never_grasped), Err(SegmentError::MissingTouch));
        let never_rested = touch_recording(500, |_| false, |k| k > 300);
        assert_eq!(segment_r2g(&never_rested), Err(SegmentError::MissingTouch));
    }

    #[test]
    fn short_glitches_are_debounced() {
        // One- and two-frame glitches on both channels before the real events.
        let r = touch_recording(
            1000,
            |k| k < 100 && k != 40 && !(60..62).contains(&k),
            |k| k >= 800 || k == 300 || (500..502).contains(&k),
        );
        let seg = segment_r2g(&r).unwrap();
        assert_eq!((seg.start_frame, seg.grasp_frame), (100, 800));
    }

    #[test]
    fn chatter_after_grasp_is_ignored() {
        let r = touch_recording(1000, |k| k < 100 || k > 900, |k| (800..850).contains(&k) || k > 870);
        let seg = segment_r2g(&r).unwrap();
        assert_eq!((seg.start_frame, seg.grasp_frame), (100, 800));
    }

    #[test]
    fn duration_limits() {
        let ok = touch_recording(1200, |k| k < 100, |k| k >= 100 + 864);
        assert_eq!(validate_recording(&ok, 5.0).reason, ExclusionReason::Ok);
        assert!(!validate_recording(&ok, 5.0).excluded);

        // 5.2 s at 960 Hz = 4992 frames.
        let slow = touch_recording(5200, |k| k < 100, |k| k >= 100 + 4992);
        let report = validate_recording(&slow, 5.0);
        assert_eq!(report.reason, ExclusionReason::ExcessiveDuration);
        assert!(report.excluded);
    }

    #[test]
    fn time_stamps_follow_rate() {
        let f = frame(960 * 3 + 480, false, false);
        assert!((f.time_s(DEFAULT_RATE_HZ) - 3.5).abs() < 1e-9);
    }
}
