use serde::{Deserialize, Serialize};

use crate::skeleton::{MotionClip, Vec3};

/// Per-frame 3D positions of every joint with a validity mask.
/// Invalid joints carry the zero vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartesianSample {
    pub timestamp: f64,
    pub positions: Vec<Vec3>,
    pub valid: Vec<bool>,
}

impl CartesianSample {
    pub fn invalidate(&mut self, joint: usize) {
        self.positions[joint] = Vec3::zeros();
        self.valid[joint] = false;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartesianStream {
    pub framerate: f64,
    pub samples: Vec<CartesianSample>,
}

impl CartesianStream {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Ground-truth stream: forward kinematics of every frame, all valid.
    pub fn from_clip(clip: &MotionClip) -> Self {
        let samples = clip
            .global_positions()
            .into_iter()
            .enumerate()
            .map(|(t, positions)| CartesianSample {
                timestamp: clip.timestamp(t),
                valid: vec![true; positions.len()],
                positions,
            })
            .collect();
        Self { framerate: clip.framerate, samples }
    }

    /// Fraction of joint-frames flagged invalid.
    pub fn invalid_fraction(&self) -> f64 {
        let (invalid, total) = self.samples.iter().fold((0usize, 0usize), |(i, n), s| {
            (i + s.valid.iter().filter(|v| !**v).count(), n + s.valid.len())
        });
        if total == 0 {
            0.0
        } else {
            invalid as f64 / total as f64
        }
    }
}
