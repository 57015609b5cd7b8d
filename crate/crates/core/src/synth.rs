//! Seeded synthetic motion on the canonical skeleton.
//!
//! Clips are built from a walking-like gait (hip/knee/arm swing phased
//! against each other), a root that circles the capture-volume center, and
//! a few low-frequency sinusoids per joint so every joint moves.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::skeleton::{joint, MotionClip, Pose, Rotation, Skeleton, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Number of clips.
    pub count: usize,
    pub duration_s: f64,
    #[serde(default = "default_framerate")]
    pub framerate_hz: f64,
    pub seed: u64,
}

fn default_framerate() -> f64 {
    60.0
}

/// Builds `spec.count` clips named `synth_<seed>_<index>`.
pub fn synthesize_corpus(spec: &SyntheticSpec) -> Result<Vec<MotionClip>> {
    let skeleton = Arc::new(Skeleton::smpl22());
    (0..spec.count)
        .map(|i| {
            let seed = spec.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
            synthesize_clip(
                format!("synth_{}_{:03}", spec.seed, i),
                skeleton.clone(),
                spec.duration_s,
                spec.framerate_hz,
                seed,
            )
        })
        .collect()
}

struct Wiggle {
    amp: [f64; 3],
    freq: [f64; 3],
    phase: [f64; 3],
}

impl Wiggle {
    fn random(rng: &mut ChaCha8Rng, max_deg: f64) -> Self {
        let mut w = Wiggle { amp: [0.0; 3], freq: [0.0; 3], phase: [0.0; 3] };
        for k in 0..3 {
            w.amp[k] = rng.random_range(0.0..max_deg).to_radians();
            w.freq[k] = rng.random_range(0.05..0.8);
            w.phase[k] = rng.random_range(0.0..TAU);
        }
        w
    }

    fn at(&self, t: f64) -> Vec3 {
        Vec3::from_fn(|k, _| self.amp[k] * (TAU * self.freq[k] * t + self.phase[k]).sin())
    }
}

/// One synthetic clip on `skeleton` (expected to be the canonical 22-joint tree).
pub fn synthesize_clip(
    name: impl Into<String>,
    skeleton: Arc<Skeleton>,
    duration_s: f64,
    framerate: f64,
    seed: u64,
) -> Result<MotionClip> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = ((duration_s * framerate).round() as usize).max(1);

    let gait_hz: f64 = rng.random_range(0.6..1.1);
    let activity: f64 = rng.random_range(0.4..1.0);
    let hip_amp = rng.random_range(15.0..35.0f64).to_radians() * activity;
    let knee_amp = rng.random_range(20.0..55.0f64).to_radians() * activity;
    let arm_amp = rng.random_range(10.0..35.0f64).to_radians() * activity;
    let arm_drop = rng.random_range(55.0..75.0f64).to_radians();
    let elbow_base = rng.random_range(10.0..50.0f64).to_radians();
    let path_radius = rng.random_range(0.2..0.6);
    let path_speed = rng.random_range(0.1..0.35) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let path_phase = rng.random_range(0.0..TAU);
    let head_yaw_hz = rng.random_range(0.1..0.4);
    let wiggles: Vec<Wiggle> = (0..skeleton.len()).map(|_| Wiggle::random(&mut rng, 8.0)).collect();

    let mut poses = Vec::with_capacity(frames);
    for f in 0..frames {
        let t = f as f64 / framerate;
        let phi = TAU * gait_hz * t;
        let theta = path_phase + path_speed * t;

        let mut rv = vec![Vec3::zeros(); skeleton.len()];
        for (j, w) in wiggles.iter().enumerate() {
            rv[j] = w.at(t);
        }
        // heading follows the tangent of the circular path
        let heading = if path_speed >= 0.0 { -theta } else { PI - theta };
        rv[joint::PELVIS] += Vec3::new(0.0, heading, 0.05 * phi.sin() * activity);
        rv[joint::LEFT_HIP].x += -hip_amp * phi.sin();
        rv[joint::RIGHT_HIP].x += hip_amp * phi.sin();
        rv[joint::LEFT_KNEE].x += knee_amp * 0.5 * (1.0 - (phi + 0.6).cos());
        rv[joint::RIGHT_KNEE].x += knee_amp * 0.5 * (1.0 - (phi + 0.6 + PI).cos());
        rv[joint::SPINE2].y += 0.1 * activity * phi.sin();
        rv[joint::LEFT_SHOULDER].z += -arm_drop;
        rv[joint::RIGHT_SHOULDER].z += arm_drop;
        rv[joint::LEFT_SHOULDER].x += arm_amp * phi.sin();
        rv[joint::RIGHT_SHOULDER].x += -arm_amp * phi.sin();
        rv[joint::LEFT_ELBOW].y += elbow_base + 0.3 * arm_amp * phi.cos();
        rv[joint::RIGHT_ELBOW].y += -elbow_base + 0.3 * arm_amp * phi.cos();
        rv[joint::HEAD].y += 0.4 * (TAU * head_yaw_hz * t).sin();

        let root = Vec3::new(
            path_radius * theta.cos(),
            0.95 + 0.02 * activity * (2.0 * phi).sin(),
            path_radius * theta.sin(),
        );
        poses.push(Pose {
            root_translation: root,
            local_rotations: rv.iter().map(Rotation::from_rotation_vector).collect(),
        });
    }
    MotionClip::new(name, skeleton, framerate, poses)
}

/// A random pose: each joint rotated about a uniform axis by up to
/// `max_angle` radians, root translated within a 1 m cube around the origin.
pub fn random_pose<R: Rng>(rng: &mut R, joints: usize, max_angle: f64) -> Pose {
    let local_rotations = (0..joints)
        .map(|_| {
            let axis = random_unit_vector(rng);
            Rotation::from_axis_angle(&axis, rng.random_range(0.0..=max_angle))
        })
        .collect();
    Pose {
        root_translation: Vec3::new(
            rng.random_range(-0.5..0.5),
            rng.random_range(0.5..1.5),
            rng.random_range(-0.5..0.5),
        ),
        local_rotations,
    }
}

pub fn random_unit_vector<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic() {
        let spec = SyntheticSpec { count: 2, duration_s: 1.0, framerate_hz: 60.0, seed: 3 };
        let a = synthesize_corpus(&spec).unwrap();
        let b = synthesize_corpus(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].len(), 60);
        assert_ne!(a[0].poses, a[1].poses);
    }

    #[test]
    fn subject_stays_in_capture_volume() {
        let clip = synthesize_clip("c", Arc::new(Skeleton::smpl22()), 20.0, 30.0, 11).unwrap();
        for frame in clip.global_positions() {
            for p in frame {
                assert!(p.x.abs() < 1.6 && p.z.abs() < 1.6 && p.y > -0.3 && p.y < 2.2, "{p:?}");
            }
        }
    }
}
