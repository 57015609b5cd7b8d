use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::camera::CameraModel;
use crate::seeding::frame_rng;
use crate::skeleton::MotionClip;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub u: f64,
    pub v: f64,
    pub visible: bool,
    /// Whether `(u, v)` lands inside the image. Out-of-image keypoints are kept.
    pub in_image: bool,
}

impl Keypoint {
    const HIDDEN: Keypoint = Keypoint { u: 0.0, v: 0.0, visible: false, in_image: false };
}

/// Keypoints of every joint for one frame of one view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection2D {
    pub timestamp: f64,
    pub keypoints: Vec<Keypoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionStream {
    pub framerate: f64,
    pub frames: Vec<Detection2D>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    /// Isotropic Gaussian pixel noise (standard deviation, px).
    #[serde(default)]
    pub pixel_noise_std: f64,
    /// Independent per-joint miss probability.
    #[serde(default)]
    pub miss_prob: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self { pixel_noise_std: 0.0, miss_prob: 0.0 }
    }
}

/// Stand-in for an image-based keypoint detector: exact projection of each
/// joint plus Gaussian pixel noise and independent misses.
///
/// For every frame and joint, in order, the generator draws the u noise, the
/// v noise and the miss variate, so outputs do not depend on which joints
/// happen to be behind the camera.
pub fn synthesize_detections(clip: &MotionClip, camera: &CameraModel, model: &DetectorModel, seed: u64) -> DetectionStream {
    let frames = clip
        .global_positions()
        .into_iter()
        .enumerate()
        .map(|(t, positions)| {
            let mut rng = frame_rng(seed, t);
            let keypoints = positions
                .iter()
                .map(|p| {
                    let nu: f64 = rng.sample(StandardNormal);
                    let nv: f64 = rng.sample(StandardNormal);
                    let missed = rng.random::<f64>() < model.miss_prob;
                    match camera.project(p) {
                        None => Keypoint::HIDDEN,
                        Some((u, v)) => {
                            let (u, v) = if model.pixel_noise_std > 0.0 {
                                (u + model.pixel_noise_std * nu, v + model.pixel_noise_std * nv)
                            } else {
                                (u, v)
                            };
                            Keypoint { u, v, visible: !missed, in_image: camera.in_image(u, v) }
                        }
                    }
                })
                .collect();
            Detection2D { timestamp: clip.timestamp(t), keypoints }
        })
        .collect();
    DetectionStream { framerate: clip.framerate, frames }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor_sim::camera::default_rig;
    use crate::skeleton::Skeleton;
    use crate::synth::synthesize_clip;
    use std::sync::Arc;

    fn clip() -> MotionClip {
        synthesize_clip("d", Arc::new(Skeleton::smpl22()), 0.5, 60.0, 4).unwrap()
    }

    #[test]
    fn noiseless_detections_are_projections() {
        let clip = clip();
        let [cam, _] = default_rig();
        let det = synthesize_detections(&clip, &cam, &DetectorModel::default(), 1);
        for (frame, positions) in det.frames.iter().zip(clip.global_positions()) {
            for (k, p) in frame.keypoints.iter().zip(&positions) {
                let (u, v) = cam.project(p).unwrap();
                assert_eq!((k.u, k.v, k.visible), (u, v, true));
            }
        }
    }

    #[test]
    fn certain_miss_hides_everything() {
        let [cam, _] = default_rig();
        let model = DetectorModel { pixel_noise_std: 1.0, miss_prob: 1.0 };
        let det = synthesize_detections(&clip(), &cam, &model, 1);
        assert!(det.frames.iter().flat_map(|f| &f.keypoints).all(|k| !k.visible));
    }

    #[test]
    fn seeds_reproduce() {
        let [cam, _] = default_rig();
        let model = DetectorModel { pixel_noise_std: 2.0, miss_prob: 0.1 };
        let a = synthesize_detections(&clip(), &cam, &model, 7);
        let b = synthesize_detections(&clip(), &cam, &model, 7);
        let c = synthesize_detections(&clip(), &cam, &model, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
