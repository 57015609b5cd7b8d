//! Per-joint position, rotation and velocity errors, and report assembly.

mod report;

pub use report::{build_report, read_report_csv, MeasuredRow, MetricsReport, ReportMetadata, ReportRow, REPORT_HEADER};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{geodesic_angle, joint, position_velocities, MotionClip, Rotation, Vec3, SMPL_JOINT_COUNT};

/// Hips, knees, ankles and feet.
pub const LOW_JOINTS: [usize; 8] = [
    joint::LEFT_HIP,
    joint::RIGHT_HIP,
    joint::LEFT_KNEE,
    joint::RIGHT_KNEE,
    joint::LEFT_ANKLE,
    joint::RIGHT_ANKLE,
    joint::LEFT_FOOT,
    joint::RIGHT_FOOT,
];

/// Everything not in [`LOW_JOINTS`], pelvis and spine included.
pub const UP_JOINTS: [usize; 14] = [
    joint::PELVIS,
    joint::SPINE1,
    joint::SPINE2,
    joint::SPINE3,
    joint::NECK,
    joint::LEFT_COLLAR,
    joint::RIGHT_COLLAR,
    joint::HEAD,
    joint::LEFT_SHOULDER,
    joint::RIGHT_SHOULDER,
    joint::LEFT_ELBOW,
    joint::RIGHT_ELBOW,
    joint::LEFT_WRIST,
    joint::RIGHT_WRIST,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BodySubset {
    Up,
    Low,
    Full,
}

impl BodySubset {
    pub fn label(&self) -> &'static str {
        match self {
            BodySubset::Up => "Up",
            BodySubset::Low => "Low",
            BodySubset::Full => "Full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Up" => Some(BodySubset::Up),
            "Low" => Some(BodySubset::Low),
            "Full" => Some(BodySubset::Full),
            _ => None,
        }
    }

    /// Joint indices for a skeleton with `joints` joints. Up and Low are only
    /// defined on the 22-joint layout.
    pub fn joints(&self, joints: usize) -> Result<Vec<usize>> {
        match self {
            BodySubset::Full => Ok((0..joints).collect()),
            _ if joints != SMPL_JOINT_COUNT => Err(Error::Structure(format!(
                "the {} subset needs the {SMPL_JOINT_COUNT}-joint skeleton, got {joints} joints",
                self.label()
            ))),
            BodySubset::Up => Ok(UP_JOINTS.to_vec()),
            BodySubset::Low => Ok(LOW_JOINTS.to_vec()),
        }
    }
}

impl std::fmt::Display for BodySubset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Which rotations MPJRE compares.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationFrame {
    #[default]
    Local,
    Global,
}

/// MPJPE (cm), MPJRE (degrees) and MPJVE (cm/s).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub mpjpe_cm: f64,
    pub mpjre_deg: f64,
    pub mpjve_cmps: f64,
}

fn check_lengths(pred: usize, gt: usize) -> Result<()> {
    if pred != gt {
        return Err(Error::Structure(format!("prediction has {pred} frames, ground truth has {gt}")));
    }
    if gt == 0 {
        return Err(Error::Structure("cannot evaluate an empty sequence".into()));
    }
    Ok(())
}

fn check_clips(pred: &MotionClip, gt: &MotionClip) -> Result<()> {
    check_lengths(pred.len(), gt.len())?;
    if pred.skeleton.len() != gt.skeleton.len() || pred.skeleton.parents() != gt.skeleton.parents() {
        return Err(Error::Structure("prediction and ground truth use different skeletons".into()));
    }
    Ok(())
}

/// Running sums behind the three metrics. Sums over several clips give the
/// mean over all joint-frames.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricAccumulator {
    pub position_sum_cm: f64,
    pub position_count: usize,
    pub rotation_sum_deg: f64,
    pub rotation_count: usize,
    pub velocity_sum_cmps: f64,
    pub velocity_count: usize,
}

impl MetricAccumulator {
    pub fn add_positions(&mut self, pred: &[Vec<Vec3>], gt: &[Vec<Vec3>], joints: &[usize]) -> Result<()> {
        check_lengths(pred.len(), gt.len())?;
        for (p, g) in pred.iter().zip(gt) {
            for &j in joints {
                self.position_sum_cm += 100.0 * (p[j] - g[j]).norm();
            }
            self.position_count += joints.len();
        }
        Ok(())
    }

    /// Velocity errors over frames `t >= 1`.
    pub fn add_velocities(&mut self, pred: &[Vec<Vec3>], gt: &[Vec<Vec3>], framerate: f64, joints: &[usize]) -> Result<()> {
        check_lengths(pred.len(), gt.len())?;
        let vp = position_velocities(pred, framerate);
        let vg = position_velocities(gt, framerate);
        for (p, g) in vp.iter().zip(&vg).skip(1) {
            for &j in joints {
                self.velocity_sum_cmps += 100.0 * (p[j] - g[j]).norm();
            }
            self.velocity_count += joints.len();
        }
        Ok(())
    }

    pub fn add_rotations(&mut self, pred: &[Vec<Rotation>], gt: &[Vec<Rotation>], joints: &[usize]) -> Result<()> {
        check_lengths(pred.len(), gt.len())?;
        for (p, g) in pred.iter().zip(gt) {
            for &j in joints {
                self.rotation_sum_deg += geodesic_angle(p[j].wxyz(), g[j].wxyz())?;
            }
            self.rotation_count += joints.len();
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &MetricAccumulator) {
        self.position_sum_cm += other.position_sum_cm;
        self.position_count += other.position_count;
        self.rotation_sum_deg += other.rotation_sum_deg;
        self.rotation_count += other.rotation_count;
        self.velocity_sum_cmps += other.velocity_sum_cmps;
        self.velocity_count += other.velocity_count;
    }

    /// Means; a metric with no samples reports 0.
    pub fn finish(&self) -> MetricTriple {
        let mean = |sum: f64, n: usize| if n == 0 { 0.0 } else { sum / n as f64 };
        MetricTriple {
            mpjpe_cm: mean(self.position_sum_cm, self.position_count),
            mpjre_deg: mean(self.rotation_sum_deg, self.rotation_count),
            mpjve_cmps: mean(self.velocity_sum_cmps, self.velocity_count),
        }
    }
}

fn rotations(clip: &MotionClip, frame: RotationFrame) -> Vec<Vec<Rotation>> {
    match frame {
        RotationFrame::Local => clip.poses.iter().map(|p| p.local_rotations.clone()).collect(),
        RotationFrame::Global => clip.global_poses().into_iter().map(|g| g.rotations).collect(),
    }
}

/// Accumulates all three metrics of one clip pair on one subset.
pub fn accumulate_clip(pred: &MotionClip, gt: &MotionClip, subset: BodySubset, frame: RotationFrame) -> Result<MetricAccumulator> {
    check_clips(pred, gt)?;
    if pred.framerate != gt.framerate {
        return Err(Error::Structure(format!("framerates differ ({} vs {})", pred.framerate, gt.framerate)));
    }
    let joints = subset.joints(gt.skeleton.len())?;
    let (pp, gp) = (pred.global_positions(), gt.global_positions());
    let mut acc = MetricAccumulator::default();
    acc.add_positions(&pp, &gp, &joints)?;
    acc.add_velocities(&pp, &gp, gt.framerate, &joints)?;
    acc.add_rotations(&rotations(pred, frame), &rotations(gt, frame), &joints)?;
    Ok(acc)
}

/// Mean joint position error in centimeters.
pub fn mpjpe(pred: &MotionClip, gt: &MotionClip, subset: BodySubset) -> Result<f64> {
    check_clips(pred, gt)?;
    mpjpe_positions(&pred.global_positions(), &gt.global_positions(), subset)
}

pub fn mpjpe_positions(pred: &[Vec<Vec3>], gt: &[Vec<Vec3>], subset: BodySubset) -> Result<f64> {
    check_lengths(pred.len(), gt.len())?;
    let mut acc = MetricAccumulator::default();
    acc.add_positions(pred, gt, &subset.joints(gt[0].len())?)?;
    Ok(acc.finish().mpjpe_cm)
}

/// Mean geodesic angle between local joint rotations, in degrees.
pub fn mpjre(pred: &MotionClip, gt: &MotionClip, subset: BodySubset) -> Result<f64> {
    mpjre_in(pred, gt, subset, RotationFrame::Local)
}

pub fn mpjre_in(pred: &MotionClip, gt: &MotionClip, subset: BodySubset, frame: RotationFrame) -> Result<f64> {
    check_clips(pred, gt)?;
    let mut acc = MetricAccumulator::default();
    acc.add_rotations(&rotations(pred, frame), &rotations(gt, frame), &subset.joints(gt.skeleton.len())?)?;
    Ok(acc.finish().mpjre_deg)
}

/// Mean joint velocity error in cm/s over frames `t >= 1`.
pub fn mpjve(pred: &MotionClip, gt: &MotionClip, subset: BodySubset) -> Result<f64> {
    check_clips(pred, gt)?;
    if pred.framerate != gt.framerate {
        return Err(Error::Structure(format!("framerates differ ({} vs {})", pred.framerate, gt.framerate)));
    }
    mpjve_positions(&pred.global_positions(), &gt.global_positions(), gt.framerate, subset)
}

pub fn mpjve_positions(pred: &[Vec<Vec3>], gt: &[Vec<Vec3>], framerate: f64, subset: BodySubset) -> Result<f64> {
    check_lengths(pred.len(), gt.len())?;
    let mut acc = MetricAccumulator::default();
    acc.add_velocities(pred, gt, framerate, &subset.joints(gt[0].len())?)?;
    Ok(acc.finish().mpjve_cmps)
}
