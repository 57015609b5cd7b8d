use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{MotionClip, Rotation, Vec3};

/// Joints tracked by the headset and controllers.
pub const TRACKED_JOINT_NAMES: [&str; 3] = ["head", "left_wrist", "right_wrist"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedState {
    pub position: Vec3,
    /// Global orientation.
    pub orientation: Rotation,
    /// m/s
    pub linear_velocity: Vec3,
    /// rad/s, global frame
    pub angular_velocity: Vec3,
}

/// One headset/controller sample: head, left wrist, right wrist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSample {
    pub timestamp: f64,
    pub tracked: [TrackedState; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseStream {
    pub framerate: f64,
    pub samples: Vec<SparseSample>,
}

impl SparseStream {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Skeleton indices of the tracked joints, in [`TRACKED_JOINT_NAMES`] order.
pub fn tracked_joint_indices(clip: &MotionClip) -> Result<[usize; 3]> {
    let mut out = [0; 3];
    for (slot, name) in out.iter_mut().zip(TRACKED_JOINT_NAMES) {
        *slot = clip
            .skeleton
            .index_of(name)
            .ok_or_else(|| Error::Structure(format!("skeleton has no `{name}` joint")))?;
    }
    Ok(out)
}

/// Headset/controller signals derived from a ground-truth clip.
///
/// Linear velocity is the backward difference of positions times the frame
/// rate. Angular velocity is the rotation vector of `q_t q_{t-1}^-1` times
/// the frame rate, i.e. expressed in the global frame. Frame 0 velocities
/// are zero.
pub fn derive_sparse_stream(clip: &MotionClip) -> Result<SparseStream> {
    let idx = tracked_joint_indices(clip)?;
    let globals = clip.global_poses();
    let mut samples: Vec<SparseSample> = Vec::with_capacity(globals.len());
    for (t, g) in globals.iter().enumerate() {
        let tracked = std::array::from_fn(|k| {
            let j = idx[k];
            let position = g.positions[j];
            let orientation = g.rotations[j];
            let (linear_velocity, angular_velocity) = if t == 0 {
                (Vec3::zeros(), Vec3::zeros())
            } else {
                let prev = &globals[t - 1];
                let delta = orientation.mul(&prev.rotations[j].inverse());
                (
                    (position - prev.positions[j]) * clip.framerate,
                    delta.to_rotation_vector() * clip.framerate,
                )
            };
            TrackedState { position, orientation, linear_velocity, angular_velocity }
        });
        samples.push(SparseSample { timestamp: clip.timestamp(t), tracked });
    }
    Ok(SparseStream { framerate: clip.framerate, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{joint, Pose, Skeleton};
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn static_clip_has_zero_velocities() {
        let s = Arc::new(Skeleton::smpl22());
        let clip = MotionClip::new("still", s, 60.0, vec![Pose::identity(22); 3]).unwrap();
        let stream = derive_sparse_stream(&clip).unwrap();
        let g = clip.global_poses();
        for (sample, g) in stream.samples.iter().zip(&g) {
            assert_eq!(sample.tracked[0].position, g.positions[joint::HEAD]);
            for tr in &sample.tracked {
                assert_eq!(tr.linear_velocity, Vec3::zeros());
                assert_eq!(tr.angular_velocity, Vec3::zeros());
            }
        }
    }

    #[test]
    fn head_spinning_about_z() {
        let s = Arc::new(Skeleton::smpl22());
        let poses = (0..10)
            .map(|t| {
                let mut p = Pose::identity(22);
                p.local_rotations[joint::HEAD] = Rotation::from_axis_angle(&Vec3::z(), (3.0 * t as f64).to_radians());
                p
            })
            .collect();
        let clip = MotionClip::new("spin", s, 60.0, poses).unwrap();
        let stream = derive_sparse_stream(&clip).unwrap();
        for sample in &stream.samples[1..] {
            let w = sample.tracked[0].angular_velocity;
            assert!((w - Vec3::new(0.0, 0.0, PI)).norm() < 1e-6, "{w:?}");
        }
    }

    #[test]
    fn missing_tracked_joint() {
        let s = Arc::new(
            Skeleton::new(vec!["root".into(), "head".into()], vec![None, Some(0)], vec![Vec3::zeros(), Vec3::y()]).unwrap(),
        );
        let clip = MotionClip::new("short", s, 60.0, vec![Pose::identity(2)]).unwrap();
        assert!(matches!(derive_sparse_stream(&clip), Err(Error::Structure(_))));
    }
}
