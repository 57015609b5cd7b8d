//! Simulated input modalities: headset/controller tracking and a two-camera
//! keypoint pipeline (projection, detection noise, triangulation).

mod camera;
mod cartesian;
mod detect;
mod sparse;
mod triangulate;

pub use camera::{default_rig, CameraModel, MIN_DEPTH_M};
pub use cartesian::{CartesianSample, CartesianStream};
pub use detect::{synthesize_detections, Detection2D, DetectionStream, DetectorModel, Keypoint};
pub use sparse::{derive_sparse_stream, tracked_joint_indices, SparseSample, SparseStream, TrackedState, TRACKED_JOINT_NAMES};
pub use triangulate::{reconstruct_cartesian_stream, triangulate, MIN_BASELINE_M, MIN_SINGULAR_RATIO};

use crate::error::Result;
use crate::skeleton::MotionClip;

/// Runs the full camera pipeline on a clip: project into both views,
/// detect with `model` (view seeds derived from `seed`), triangulate.
pub fn triangulated_stream(
    clip: &MotionClip,
    rig: &[CameraModel; 2],
    model: &DetectorModel,
    seed: u64,
) -> Result<CartesianStream> {
    let da = synthesize_detections(clip, &rig[0], model, crate::seeding::derive_subseed(seed, 0xA));
    let db = synthesize_detections(clip, &rig[1], model, crate::seeding::derive_subseed(seed, 0xB));
    reconstruct_cartesian_stream(&da, &db, &rig[0], &rig[1])
}
