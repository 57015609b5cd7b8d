//! Flattened window features for the learned reconstructors.
//!
//! Frames are taken every `stride` frames ending at the current one and laid
//! out oldest first. Per frame:
//!
//! | block | size |
//! |---|---|
//! | head, left wrist, right wrist: position, 6D orientation, linear velocity, angular velocity | 3 × 15 |
//! | Cartesian positions, joint-major xyz | 3 × joints |
//! | validity flags as 0/1 (optional) | joints |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor_sim::{derive_sparse_stream, CartesianStream};
use crate::skeleton::{MotionClip, Pose};
use crate::sync::{align, window, FusedFrame, WINDOW_LENGTH};

/// Values per tracked joint per frame.
pub const TRACKED_FEATURES: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureLayout {
    pub window_length: usize,
    /// Use every `stride`-th frame of the window, counting back from the current one.
    pub stride: usize,
    pub joints: usize,
    pub use_validity_flags: bool,
}

impl Default for FeatureLayout {
    fn default() -> Self {
        Self { window_length: WINDOW_LENGTH, stride: 1, joints: 22, use_validity_flags: true }
    }
}

impl FeatureLayout {
    pub fn validate(&self) -> Result<()> {
        if self.window_length == 0 || self.stride == 0 || self.joints == 0 {
            return Err(Error::Parameter("window length, stride and joint count must be positive".into()));
        }
        Ok(())
    }

    /// Window offsets (0 = current frame) that enter the features, oldest first.
    pub fn sampled_offsets(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.window_length).step_by(self.stride).collect();
        v.reverse();
        v
    }

    pub fn per_frame(&self) -> usize {
        3 * TRACKED_FEATURES + 3 * self.joints + if self.use_validity_flags { self.joints } else { 0 }
    }

    pub fn dimension(&self) -> usize {
        self.sampled_offsets().len() * self.per_frame()
    }

    pub fn encode(&self, window: &[&FusedFrame]) -> Result<Vec<f64>> {
        if window.len() != self.window_length {
            return Err(Error::Structure(format!("window has {} frames, layout expects {}", window.len(), self.window_length)));
        }
        let mut out = Vec::with_capacity(self.dimension());
        for offset in self.sampled_offsets() {
            let frame = window[self.window_length - 1 - offset];
            for s in &frame.sparse.tracked {
                out.extend(s.position.iter());
                out.extend(s.orientation.to_6d());
                out.extend(s.linear_velocity.iter());
                out.extend(s.angular_velocity.iter());
            }
            let c = &frame.cartesian;
            if c.positions.len() != self.joints || c.valid.len() != self.joints {
                return Err(Error::Structure(format!("frame carries {} joints, layout expects {}", c.positions.len(), self.joints)));
            }
            for p in &c.positions {
                out.extend(p.iter());
            }
            if self.use_validity_flags {
                out.extend(c.valid.iter().map(|v| if *v { 1.0 } else { 0.0 }));
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structure("non-finite feature value".into()));
        }
        Ok(out)
    }
}

/// Feature rows and their ground-truth poses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub features: Vec<Vec<f64>>,
    pub poses: Vec<Pose>,
}

impl TrainingSet {
    /// Windows over the artifact-free fused streams of each clip, keeping
    /// every `frame_step`-th frame.
    pub fn from_clips(clips: &[MotionClip], layout: &FeatureLayout, frame_step: usize) -> Result<Self> {
        layout.validate()?;
        if clips.is_empty() {
            return Err(Error::Structure("no training clips".into()));
        }
        let step = frame_step.max(1);
        let mut set = TrainingSet::default();
        for clip in clips {
            let frames = align(&derive_sparse_stream(clip)?, &CartesianStream::from_clip(clip))?;
            for t in (0..frames.len()).step_by(step) {
                set.features.push(layout.encode(&window(&frames, t, layout.window_length))?);
                set.poses.push(clip.poses[t].clone());
            }
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Per-dimension mean and standard deviation. Constant dimensions get a
/// unit scale so they contribute nothing after centering.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var.into_iter().map(|s| (s / n).sqrt()).map(|s| if s > 1e-12 { s } else { 1.0 }).collect();
        Self { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }
}
