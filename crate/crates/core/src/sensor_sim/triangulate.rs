//! Two-view linear (DLT) triangulation.

use nalgebra::{Matrix4, RowVector4};

use super::camera::CameraModel;
use super::cartesian::{CartesianSample, CartesianStream};
use super::detect::DetectionStream;
use crate::error::{Error, Result};
use crate::skeleton::Vec3;

/// Minimum distance between optical centers.
pub const MIN_BASELINE_M: f64 = 1e-6;
/// Minimum ratio of the third to the first singular value of the DLT system.
pub const MIN_SINGULAR_RATIO: f64 = 1e-10;

/// Homogeneous DLT: stacks `u·P₃ − P₁` and `v·P₃ − P₂` for both views
/// (rows scaled to unit norm) and takes the right singular vector of the
/// smallest singular value.
pub fn triangulate(cam_a: &CameraModel, cam_b: &CameraModel, px_a: (f64, f64), px_b: (f64, f64)) -> Result<Vec3> {
    let baseline = (cam_a.center - cam_b.center).norm();
    if baseline < MIN_BASELINE_M {
        return Err(Error::DegenerateGeometry(format!("camera baseline {baseline} m is below {MIN_BASELINE_M} m")));
    }
    let mut a = Matrix4::<f64>::zeros();
    for (view, (cam, (u, v))) in [(cam_a, px_a), (cam_b, px_b)].into_iter().enumerate() {
        if !(u.is_finite() && v.is_finite()) {
            return Err(Error::DegenerateGeometry("non-finite pixel coordinate".into()));
        }
        let p = cam.projection_matrix();
        let r0: RowVector4<f64> = p.row(2) * u - p.row(0);
        let r1: RowVector4<f64> = p.row(2) * v - p.row(1);
        a.set_row(2 * view, &(r0 / r0.norm()));
        a.set_row(2 * view + 1, &(r1 / r1.norm()));
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s = &svd.singular_values;
    if s[order[2]] < MIN_SINGULAR_RATIO * s[order[0]] {
        return Err(Error::DegenerateGeometry("rays are near-parallel".into()));
    }
    let x = v_t.row(order[3]);
    if x[3].abs() < 1e-12 * x.norm() {
        return Err(Error::DegenerateGeometry("point at infinity".into()));
    }
    Ok(Vec3::new(x[0] / x[3], x[1] / x[3], x[2] / x[3]))
}

/// Triangulates every joint seen in both views; anything else is invalid.
pub fn reconstruct_cartesian_stream(
    detections_a: &DetectionStream,
    detections_b: &DetectionStream,
    cam_a: &CameraModel,
    cam_b: &CameraModel,
) -> Result<CartesianStream> {
    if detections_a.frames.len() != detections_b.frames.len() {
        return Err(Error::Structure(format!(
            "detection streams differ in length ({} vs {})",
            detections_a.frames.len(),
            detections_b.frames.len()
        )));
    }
    let mut samples = Vec::with_capacity(detections_a.frames.len());
    for (t, (fa, fb)) in detections_a.frames.iter().zip(&detections_b.frames).enumerate() {
        if fa.keypoints.len() != fb.keypoints.len() {
            return Err(Error::Structure(format!("frame {t}: views disagree on joint count")));
        }
        let n = fa.keypoints.len();
        let mut sample = CartesianSample { timestamp: fa.timestamp, positions: vec![Vec3::zeros(); n], valid: vec![false; n] };
        for (j, (ka, kb)) in fa.keypoints.iter().zip(&fb.keypoints).enumerate() {
            if !(ka.visible && kb.visible) {
                continue;
            }
            if let Ok(p) = triangulate(cam_a, cam_b, (ka.u, ka.v), (kb.u, kb.v)) {
                sample.positions[j] = p;
                sample.valid[j] = true;
            }
        }
        samples.push(sample);
    }
    Ok(CartesianStream { framerate: detections_a.framerate, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor_sim::camera::default_rig;
    use crate::sensor_sim::detect::{Detection2D, Keypoint};
    use crate::skeleton::Rotation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_round_trip() {
        let [a, b] = default_rig();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0), rng.random_range(-1.0..1.0));
            let x = triangulate(&a, &b, a.project(&p).unwrap(), b.project(&p).unwrap()).unwrap();
            assert!((x - p).norm() < 1e-6, "{p:?} -> {x:?}");
        }
    }

    #[test]
    fn shared_center_is_degenerate() {
        let [a, _] = default_rig();
        let mut b = a.clone();
        b.rotation = Rotation::from_axis_angle(&Vec3::y(), 0.3).mul(&a.rotation);
        let p = Vec3::new(0.0, 1.0, 0.0);
        let err = triangulate(&a, &b, a.project(&p).unwrap(), b.project(&p).unwrap());
        assert!(matches!(err, Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn principal_point_lands_on_optical_axis() {
        let [a, b] = default_rig();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let axis = a.rotation.rotate(&Vec3::z());
        for _ in 0..20 {
            let depth = rng.random_range(1.0..5.0);
            let p = a.center + axis * depth;
            let x = triangulate(&a, &b, (a.cx, a.cy), b.project(&p).unwrap()).unwrap();
            let rel = x - a.center;
            let off_axis = (rel - axis * rel.dot(&axis)).norm();
            assert!(off_axis < 1e-6, "{off_axis}");
        }
    }

    #[test]
    fn one_sided_visibility_invalidates_joint() {
        let [a, b] = default_rig();
        let p = Vec3::new(0.1, 1.2, 0.0);
        let kp = |cam: &CameraModel, visible| {
            let (u, v) = cam.project(&p).unwrap();
            Keypoint { u, v, visible, in_image: true }
        };
        let da = DetectionStream { framerate: 60.0, frames: vec![Detection2D { timestamp: 0.0, keypoints: vec![kp(&a, true), kp(&a, true)] }] };
        let db = DetectionStream { framerate: 60.0, frames: vec![Detection2D { timestamp: 0.0, keypoints: vec![kp(&b, true), kp(&b, false)] }] };
        let s = reconstruct_cartesian_stream(&da, &db, &a, &b).unwrap();
        assert!(s.samples[0].valid[0]);
        assert!((s.samples[0].positions[0] - p).norm() < 1e-6);
        assert!(!s.samples[0].valid[1]);
        assert_eq!(s.samples[0].positions[1], Vec3::zeros());
    }

    #[test]
    fn empty_and_mismatched_streams() {
        let [a, b] = default_rig();
        let empty = DetectionStream { framerate: 60.0, frames: vec![] };
        let s = reconstruct_cartesian_stream(&empty, &empty, &a, &b).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.framerate, 60.0);
        let one = DetectionStream { framerate: 60.0, frames: vec![Detection2D { timestamp: 0.0, keypoints: vec![] }] };
        assert!(matches!(reconstruct_cartesian_stream(&one, &empty, &a, &b), Err(Error::Structure(_))));
    }
}
