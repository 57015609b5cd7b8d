//! Reconstructors: fused window → full-body pose.

pub mod features;
pub mod ik;
pub mod knn;
pub mod ridge;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use features::{FeatureLayout, Standardizer, TrainingSet};
pub use ik::{IkConfig, IkReconstructor, IkSolution, IkSolver, IkTargets};
pub use knn::{KnnConfig, KnnModel, KnnReconstructor};
pub use ridge::{RidgeConfig, RidgeModel, RidgeReconstructor, RidgeRegression};

use crate::error::{Error, Result};
use crate::skeleton::{MotionClip, Pose, Skeleton};
use crate::sync::{window, FusedFrame};

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub pose: Pose,
    /// No usable input; the previous pose was carried over.
    pub held: bool,
}

pub trait Reconstructor: Send + Sync {
    fn name(&self) -> &'static str;

    /// Frames of history each prediction looks at, current frame included.
    fn window_length(&self) -> usize;

    /// Learns from ground-truth clips. A no-op for geometric methods.
    fn fit(&mut self, clips: &[MotionClip]) -> Result<()>;

    /// `window` ends at the current frame. `previous` is this method's
    /// output for the frame before, if any.
    fn predict(&self, window: &[&FusedFrame], previous: Option<&Pose>) -> Result<Prediction>;
}

/// Reconstructor choice and hyperparameters as they appear in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reconstructor", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReconstructorSpec {
    Ik(#[serde(default)] IkConfig),
    Knn(#[serde(default)] KnnConfig),
    Ridge(#[serde(default)] RidgeConfig),
}

impl Default for ReconstructorSpec {
    fn default() -> Self {
        ReconstructorSpec::Ik(IkConfig::default())
    }
}

impl ReconstructorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ReconstructorSpec::Ik(_) => "ik",
            ReconstructorSpec::Knn(_) => "knn",
            ReconstructorSpec::Ridge(_) => "ridge",
        }
    }

    pub fn needs_training(&self) -> bool {
        !matches!(self, ReconstructorSpec::Ik(_))
    }

    /// Unfitted reconstructor for clips on `skeleton`.
    pub fn build(&self, skeleton: Arc<Skeleton>) -> Result<Box<dyn Reconstructor>> {
        Ok(match self {
            ReconstructorSpec::Ik(c) => Box::new(IkReconstructor::new(skeleton, *c)?),
            ReconstructorSpec::Knn(c) => Box::new(KnnReconstructor::new(*c)?),
            ReconstructorSpec::Ridge(c) => Box::new(RidgeReconstructor::new(*c)?),
        })
    }
}

/// Runs a reconstructor over every fused frame, feeding back its own
/// previous output. Returns the predicted clip and the number of held frames.
pub fn reconstruct_clip(
    reconstructor: &dyn Reconstructor,
    frames: &[FusedFrame],
    reference: &MotionClip,
) -> Result<(MotionClip, usize)> {
    if frames.len() != reference.len() {
        return Err(Error::Structure(format!("{} fused frames for a {}-frame clip", frames.len(), reference.len())));
    }
    let mut poses: Vec<Pose> = Vec::with_capacity(frames.len());
    let mut held = 0;
    for t in 0..frames.len() {
        let w = window(frames, t, reconstructor.window_length());
        let prediction = reconstructor.predict(&w, poses.last())?;
        prediction.pose.check(&reference.skeleton)?;
        held += usize::from(prediction.held);
        poses.push(prediction.pose);
    }
    let clip = MotionClip::new(format!("{}_{}", reference.name, reconstructor.name()), reference.skeleton.clone(), reference.framerate, poses)?;
    Ok((clip, held))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{mpjpe, BodySubset};
    use crate::sensor_sim::{derive_sparse_stream, CartesianStream};
    use crate::sync::align;
    use crate::synth::synthesize_clip;

    fn fused(clip: &MotionClip) -> Vec<FusedFrame> {
        align(&derive_sparse_stream(clip).unwrap(), &CartesianStream::from_clip(clip)).unwrap()
    }

    #[test]
    fn spec_json_shapes() {
        let s: ReconstructorSpec = serde_json::from_str(r#"{"reconstructor": "knn", "k": 5}"#).unwrap();
        assert_eq!(s, ReconstructorSpec::Knn(KnnConfig { k: 5, ..Default::default() }));
        let s: ReconstructorSpec = serde_json::from_str(r#"{"reconstructor": "ik", "w_rot": 0.25}"#).unwrap();
        assert_eq!(s, ReconstructorSpec::Ik(IkConfig { w_rot: 0.25, ..Default::default() }));
        assert!(serde_json::from_str::<ReconstructorSpec>(r#"{"reconstructor": "ik", "k": 5}"#).is_err());
        assert!(serde_json::from_str::<ReconstructorSpec>(r#"{"reconstructor": "pca"}"#).is_err());
    }

    #[test]
    fn ik_tracks_clean_clip() {
        let clip = synthesize_clip("c", Arc::new(Skeleton::smpl22()), 1.0, 60.0, 3).unwrap();
        let rec = ReconstructorSpec::default().build(clip.skeleton.clone()).unwrap();
        let (pred, held) = reconstruct_clip(rec.as_ref(), &fused(&clip), &clip).unwrap();
        assert_eq!(held, 0);
        assert!(mpjpe(&pred, &clip, BodySubset::Full).unwrap() < 0.5);
    }

    #[test]
    fn knn_memorizes_training_clip() {
        let clip = synthesize_clip("c", Arc::new(Skeleton::smpl22()), 0.5, 60.0, 4).unwrap();
        let spec = ReconstructorSpec::Knn(KnnConfig { k: 1, layout: FeatureLayout { stride: 10, ..Default::default() }, frame_step: 1 });
        let mut rec = spec.build(clip.skeleton.clone()).unwrap();
        rec.fit(std::slice::from_ref(&clip)).unwrap();
        let (pred, _) = reconstruct_clip(rec.as_ref(), &fused(&clip), &clip).unwrap();
        assert_eq!(mpjpe(&pred, &clip, BodySubset::Full).unwrap(), 0.0);
    }

    #[test]
    fn predictions_are_deterministic_and_valid() {
        let train = synthesize_clip("t", Arc::new(Skeleton::smpl22()), 1.0, 60.0, 5).unwrap();
        let test = synthesize_clip("q", Arc::new(Skeleton::smpl22()), 0.5, 60.0, 6).unwrap();
        let layout = FeatureLayout { stride: 10, ..Default::default() };
        for spec in [
            ReconstructorSpec::Knn(KnnConfig { k: 3, layout, frame_step: 2 }),
            ReconstructorSpec::Ridge(RidgeConfig { lambda: 10.0, layout, frame_step: 1 }),
        ] {
            let mut rec = spec.build(train.skeleton.clone()).unwrap();
            rec.fit(std::slice::from_ref(&train)).unwrap();
            let frames = fused(&test);
            let (a, _) = reconstruct_clip(rec.as_ref(), &frames, &test).unwrap();
            let (b, _) = reconstruct_clip(rec.as_ref(), &frames, &test).unwrap();
            assert_eq!(a, b);
            for p in &a.poses {
                assert!(p.root_translation.iter().all(|v| v.is_finite()));
                assert!(p.local_rotations.iter().all(|q| (q.dot(q) - 1.0).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn unfitted_models_refuse_to_predict() {
        let clip = synthesize_clip("c", Arc::new(Skeleton::smpl22()), 0.2, 60.0, 4).unwrap();
        let rec = ReconstructorSpec::Ridge(RidgeConfig::default()).build(clip.skeleton.clone()).unwrap();
        assert!(reconstruct_clip(rec.as_ref(), &fused(&clip), &clip).is_err());
    }
}
