//! Hand polygon model: fingertip (FP) and proximal-phalanx (PP) offset
//! vectors relative to the hand reference sensor, plus hand speed.
//!
//! Feature layout (fixed, never reordered):
//!
//! | index  | meaning                                     |
//! |--------|---------------------------------------------|
//! | 0      | hand speed ν_h in m/s                       |
//! | 1..16  | FP offsets thumb → little, (x, y, z) in mm  |
//! | 16..31 | PP offsets thumb → little, (x, y, z) in mm  |

use std::fmt;
use std::str::FromStr;

use crate::capture::{TrackingFrame, FINGER_COUNT, HAND_REFERENCE};
use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::preprocessing::VelocitySample;

pub const MAX_FEATURES: usize = 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureSetId {
    Vh,
    VhFp,
    VhFpPp,
}

impl FeatureSetId {
    pub const ALL: [FeatureSetId; 3] = [FeatureSetId::Vh, FeatureSetId::VhFp, FeatureSetId::VhFpPp];

    pub fn dim(self) -> usize {
        match self {
            FeatureSetId::Vh => 1,
            FeatureSetId::VhFp => 16,
            FeatureSetId::VhFpPp => 31,
        }
    }

    pub fn id(self) -> u32 {
        self as u32
    }

    pub fn from_id(id: u32) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureSetId::Vh => "vh",
            FeatureSetId::VhFp => "vh+fp",
            FeatureSetId::VhFpPp => "vh+fp+pp",
        }
    }
}

impl fmt::Display for FeatureSetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase().replace('_', "+");
        Self::ALL
            .into_iter()
            .find(|f| f.name() == lower)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature set `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub set: FeatureSetId,
    pub values: Vec<f64>,
}

/// Fingertip and proximal-phalanx offsets from the reference sensor, in world axes.
pub fn polygon_vectors(frame: &TrackingFrame) -> ([Vec3; FINGER_COUNT], [Vec3; FINGER_COUNT]) {
    let origin = frame.position(HAND_REFERENCE);
    let mut fp = [[0.0; 3]; FINGER_COUNT];
    let mut pp = [[0.0; 3]; FINGER_COUNT];
    for i in 0..FINGER_COUNT {
        fp[i] = geom::sub(frame.position(i), origin);
        pp[i] = geom::sub(frame.position(FINGER_COUNT + i), origin);
    }
    (fp, pp)
}

/// Writes the full 31-value vector into `out`.
pub fn fill_all_features(frame: &TrackingFrame, velocity: f64, out: &mut [f64; MAX_FEATURES]) {
    let (fp, pp) = polygon_vectors(frame);
    out[0] = velocity;
    for i in 0..FINGER_COUNT {
        out[1 + 3 * i..4 + 3 * i].copy_from_slice(&fp[i]);
        out[16 + 3 * i..19 + 3 * i].copy_from_slice(&pp[i]);
    }
}

/// Column names of the full vector: `vh`, then `fp_<finger>_<axis>` and
/// `pp_<finger>_<axis>` for thumb, index, middle, ring and little finger.
pub fn feature_names() -> Vec<String> {
    const FINGERS: [&str; FINGER_COUNT] = ["thumb", "index", "middle", "ring", "little"];
    let mut names = vec!["vh".to_string()];
    for group in ["fp", "pp"] {
        for finger in FINGERS {
            for axis in ["x", "y", "z"] {
                names.push(format!("{group}_{finger}_{axis}"));
            }
        }
    }
    names
}

/// Builds the feature vector of `set`. The velocity sample must carry the
/// same frame index as the frame it is paired with.
pub fn assemble_features(
    frame: &TrackingFrame,
    velocity: &VelocitySample,
    set: FeatureSetId,
) -> Result<FeatureVector> {
    if frame.frame_index != velocity.frame_index {
        return Err(Error::Misaligned {
            frame: frame.frame_index,
            velocity: velocity.frame_index,
        });
    }
    let mut all = [0.0; MAX_FEATURES];
    fill_all_features(frame, velocity.value, &mut all);
    Ok(FeatureVector {
        set,
        values: all[..set.dim()].to_vec(),
    })
}

/// Thumb-to-index fingertip distance in mm.
pub fn grip_aperture(frame: &TrackingFrame) -> f64 {
    geom::distance(frame.position(0), frame.position(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::{SensorPose, SENSOR_COUNT};

    fn frame_with(offsets: impl Fn(usize) -> Vec3) -> TrackingFrame {
        let reference = [120.0, -40.0, 15.0];
        let mut sensors = [SensorPose::default(); SENSOR_COUNT];
        for (i, s) in sensors.iter_mut().enumerate() {
            s.position = geom::add(reference, offsets(i));
        }
        sensors[HAND_REFERENCE].position = reference;
        TrackingFrame {
            frame_index: 7,
            sensors,
            touch: [false; 3],
        }
    }

    fn velocity(frame_index: u64, value: f64) -> VelocitySample {
        VelocitySample { frame_index, value }
    }

    #[test]
    fn coincident_sensors_give_zero_vectors() {
        let f = frame_with(|_| [0.0; 3]);
        let (fp, pp) = polygon_vectors(&f);
        assert!(fp.iter().chain(pp.iter()).all(|v| *v == [0.0; 3]));
    }

    #[test]
    fn fingertip_offset() {
        let f = frame_with(|i| if i == 1 { [10.0, 0.0, 0.0] } else { [0.0; 3] });
        let (fp, _) = polygon_vectors(&f);
        assert_eq!(fp[1], [10.0, 0.0, 0.0]);
    }

    #[test]
    fn translation_leaves_features_unchanged() {
        let f = frame_with(|i| [i as f64 * 1.5, -(i as f64), 0.25 * i as f64]);
        let moved = f.translated([500.0, -200.0, 40.0]);
        let a = assemble_features(&f, &velocity(7, 0.3), FeatureSetId::VhFpPp).unwrap();
        let b = assemble_features(&moved, &velocity(7, 0.3), FeatureSetId::VhFpPp).unwrap();
        // Offsets use exactly representable values, so equality is exact.
        assert_eq!(a, b);
    }

    #[test]
    fn feature_set_lengths_and_layout() {
        let f = frame_with(|i| [i as f64, 2.0 * i as f64, 3.0 * i as f64]);
        let v = velocity(7, 0.8);
        let vh = assemble_features(&f, &v, FeatureSetId::Vh).unwrap();
        assert_eq!(vh.values, vec![0.8]);
        let all = assemble_features(&f, &v, FeatureSetId::VhFpPp).unwrap();
        assert_eq!(all.values.len(), 31);
        let fp = assemble_features(&f, &v, FeatureSetId::VhFp).unwrap();
        let mut expected = vec![0.8];
        for i in 0..5 {
            expected.extend([i as f64, 2.0 * i as f64, 3.0 * i as f64]);
        }
        assert_eq!(fp.values, expected);
        assert_eq!(&all.values[..16], &expected[..]);
        assert_eq!(&all.values[16..19], &[5.0, 10.0, 15.0]);
    }

    #[test]
    fn misaligned_velocity_rejected() {
        let f = frame_with(|_| [0.0; 3]);
        assert_eq!(
            assemble_features(&f, &velocity(8, 0.1), FeatureSetId::Vh),
            Err(Error::Misaligned {
                frame: 7,
                velocity: 8
            })
        );
    }

    #[test]
    fn aperture_examples() {
        let mut f = frame_with(|_| [0.0; 3]);
        f.sensors[0].position = [0.0, 0.0, 0.0];
        f.sensors[1].position = [30.0, 0.0, 0.0];
        assert_eq!(grip_aperture(&f), 30.0);
        f.sensors[1].position = f.sensors[0].position;
        assert_eq!(grip_aperture(&f), 0.0);
    }

    #[test]
    fn rotation_changes_vectors_but_keeps_aperture() {
        let f = frame_with(|i| [3.0 * i as f64 + 1.0, 7.0 - i as f64, 2.0]);
        let mut rotated = f.clone();
        for s in rotated.sensors.iter_mut() {
            s.position = geom::rotate_z(s.position, std::f64::consts::FRAC_PI_2);
        }
        let (fp, _) = polygon_vectors(&f);
        let (fp_r, _) = polygon_vectors(&rotated);
        assert_ne!(fp, fp_r);
        assert!((grip_aperture(&f) - grip_aperture(&rotated)).abs() < 1e-9);
        for i in 0..5 {
            for j in 0..5 {
                let d = geom::distance(f.position(i), f.position(j));
                let d_r = geom::distance(rotated.position(i), rotated.position(j));
                assert!((d - d_r).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn feature_set_names() {
        for set in FeatureSetId::ALL {
            assert_eq!(set.name().parse::<FeatureSetId>().unwrap(), set);
            assert_eq!(FeatureSetId::from_id(set.id()), Some(set));
        }
        assert_eq!("VH_FP".parse::<FeatureSetId>().unwrap(), FeatureSetId::VhFp);
    }
}
