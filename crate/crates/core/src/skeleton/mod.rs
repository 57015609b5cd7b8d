//! Kinematic tree, poses, clips and forward kinematics.

mod rotation;

use std::sync::Arc;

pub use rotation::{geodesic_angle, matrix_from_6d, skew, Mat3, Rotation, Vec3, NORM_TOLERANCE};

use crate::error::{Error, Result};

/// Number of joints in the canonical body skeleton.
pub const SMPL_JOINT_COUNT: usize = 22;

/// Joint indices of the canonical 22-joint body skeleton (SMPL body order).
pub mod joint {
    pub const PELVIS: usize = 0;
    pub const LEFT_HIP: usize = 1;
    pub const RIGHT_HIP: usize = 2;
    pub const SPINE1: usize = 3;
    pub const LEFT_KNEE: usize = 4;
    pub const RIGHT_KNEE: usize = 5;
    pub const SPINE2: usize = 6;
    pub const LEFT_ANKLE: usize = 7;
    pub const RIGHT_ANKLE: usize = 8;
    pub const SPINE3: usize = 9;
    pub const LEFT_FOOT: usize = 10;
    pub const RIGHT_FOOT: usize = 11;
    pub const NECK: usize = 12;
    pub const LEFT_COLLAR: usize = 13;
    pub const RIGHT_COLLAR: usize = 14;
    pub const HEAD: usize = 15;
    pub const LEFT_SHOULDER: usize = 16;
    pub const RIGHT_SHOULDER: usize = 17;
    pub const LEFT_ELBOW: usize = 18;
    pub const RIGHT_ELBOW: usize = 19;
    pub const LEFT_WRIST: usize = 20;
    pub const RIGHT_WRIST: usize = 21;
}

const SMPL_NAMES: [&str; SMPL_JOINT_COUNT] = [
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
];

const SMPL_PARENTS: [Option<usize>; SMPL_JOINT_COUNT] = [
    None,
    Some(0),
    Some(0),
    Some(0),
    Some(1),
    Some(2),
    Some(3),
    Some(4),
    Some(5),
    Some(6),
    Some(7),
    Some(8),
    Some(9),
    Some(9),
    Some(9),
    Some(12),
    Some(13),
    Some(14),
    Some(16),
    Some(17),
    Some(18),
    Some(19),
];

// Neutral SMPL rest offsets (y up, +x towards the body's left, +z forward), meters.
const SMPL_OFFSETS: [[f64; 3]; SMPL_JOINT_COUNT] = [
    [0.0, 0.0, 0.0],
    [0.0695, -0.0914, -0.0068],
    [-0.0677, -0.0905, -0.0043],
    [-0.0025, 0.1089, -0.0267],
    [0.0343, -0.3752, -0.0045],
    [-0.0383, -0.3826, -0.0089],
    [0.0055, 0.1352, 0.0011],
    [-0.0136, -0.3980, -0.0437],
    [0.0158, -0.3984, -0.0423],
    [0.0015, 0.0529, 0.0254],
    [0.0264, -0.0558, 0.1193],
    [-0.0254, -0.0482, 0.1233],
    [-0.0028, 0.2139, -0.0429],
    [0.0788, 0.1218, -0.0341],
    [-0.0818, 0.1188, -0.0386],
    [0.0052, 0.0650, 0.0513],
    [0.0910, 0.0305, -0.0089],
    [-0.0960, 0.0326, -0.0091],
    [0.2596, -0.0128, -0.0275],
    [-0.2537, -0.0134, -0.0215],
    [0.2493, 0.0090, -0.0012],
    [-0.2550, 0.0078, -0.0056],
];

/// A topologically sorted kinematic tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    names: Vec<String>,
    parents: Vec<Option<usize>>,
    offsets: Vec<Vec3>,
}

impl Skeleton {
    /// Validates and builds a skeleton. Joint 0 must be the only root, every
    /// parent index must precede its child, and the root offset must be zero.
    pub fn new(names: Vec<String>, parents: Vec<Option<usize>>, offsets: Vec<Vec3>) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::Structure("skeleton has no joints".into()));
        }
        if parents.len() != n || offsets.len() != n {
            return Err(Error::Structure(format!(
                "skeleton arrays disagree: {} names, {} parents, {} offsets",
                n,
                parents.len(),
                offsets.len()
            )));
        }
        if parents[0].is_some() {
            return Err(Error::Structure("joint 0 must be the root".into()));
        }
        for (i, p) in parents.iter().enumerate().skip(1) {
            match p {
                None => return Err(Error::Structure(format!("joint {i} ({}) is a second root", names[i]))),
                Some(p) if *p >= i => {
                    return Err(Error::Structure(format!(
                        "joint {i} ({}) has parent {p}; parents must precede children",
                        names[i]
                    )))
                }
                _ => {}
            }
        }
        if offsets[0] != Vec3::zeros() {
            return Err(Error::Structure("root rest offset must be zero".into()));
        }
        if offsets.iter().any(|o| !o.iter().all(|c| c.is_finite())) {
            return Err(Error::Structure("non-finite rest offset".into()));
        }
        Ok(Self { names, parents, offsets })
    }

    /// The canonical 22-joint body skeleton.
    pub fn smpl22() -> Self {
        Self {
            names: SMPL_NAMES.iter().map(|s| s.to_string()).collect(),
            parents: SMPL_PARENTS.to_vec(),
            offsets: SMPL_OFFSETS.iter().map(|o| Vec3::new(o[0], o[1], o[2])).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parents[joint]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn offset(&self, joint: usize) -> &Vec3 {
        &self.offsets[joint]
    }

    pub fn offsets(&self) -> &[Vec3] {
        &self.offsets
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// `joint` followed by its ancestors up to the root.
    pub fn ancestry(&self, joint: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(Some(joint), move |&j| self.parents[j])
    }

    pub fn is_leaf(&self, joint: usize) -> bool {
        !self.parents.iter().any(|p| *p == Some(joint))
    }
}

/// Root translation plus one local rotation per joint.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub root_translation: Vec3,
    pub local_rotations: Vec<Rotation>,
}

impl Pose {
    pub fn identity(joints: usize) -> Self {
        Self { root_translation: Vec3::zeros(), local_rotations: vec![Rotation::IDENTITY; joints] }
    }

    pub fn check(&self, skeleton: &Skeleton) -> Result<()> {
        if self.local_rotations.len() != skeleton.len() {
            return Err(Error::Structure(format!(
                "pose has {} rotations but the skeleton has {} joints",
                self.local_rotations.len(),
                skeleton.len()
            )));
        }
        Ok(())
    }
}

/// Global joint positions and orientations of one pose.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPose {
    pub positions: Vec<Vec3>,
    pub rotations: Vec<Rotation>,
}

/// Forward kinematics: accumulates local rotations and rest offsets down the tree.
pub fn forward_kinematics(skeleton: &Skeleton, pose: &Pose) -> Result<GlobalPose> {
    pose.check(skeleton)?;
    Ok(forward_kinematics_unchecked(skeleton, pose))
}

pub(crate) fn forward_kinematics_unchecked(skeleton: &Skeleton, pose: &Pose) -> GlobalPose {
    let n = skeleton.len();
    let mut positions = Vec::with_capacity(n);
    let mut rotations: Vec<Rotation> = Vec::with_capacity(n);
    for j in 0..n {
        match skeleton.parents[j] {
            None => {
                positions.push(pose.root_translation);
                rotations.push(pose.local_rotations[j]);
            }
            Some(p) => {
                let pos = positions[p] + rotations[p].rotate(&skeleton.offsets[j]);
                let rot = rotations[p].mul(&pose.local_rotations[j]);
                positions.push(pos);
                rotations.push(rot);
            }
        }
    }
    GlobalPose { positions, rotations }
}

/// A uniformly sampled pose sequence on one skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    pub name: String,
    pub skeleton: Arc<Skeleton>,
    pub framerate: f64,
    pub poses: Vec<Pose>,
}

impl MotionClip {
    pub fn new(name: impl Into<String>, skeleton: Arc<Skeleton>, framerate: f64, poses: Vec<Pose>) -> Result<Self> {
        if !(framerate.is_finite() && framerate > 0.0) {
            return Err(Error::Structure(format!("framerate must be positive, got {framerate}")));
        }
        if poses.is_empty() {
            return Err(Error::Structure("clip has no frames".into()));
        }
        for (t, pose) in poses.iter().enumerate() {
            pose.check(&skeleton)
                .map_err(|e| Error::Structure(format!("frame {t}: {e}")))?;
        }
        Ok(Self { name: name.into(), skeleton, framerate, poses })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn frame_time(&self) -> f64 {
        1.0 / self.framerate
    }

    /// Timestamp of frame `t` in seconds.
    pub fn timestamp(&self, t: usize) -> f64 {
        t as f64 / self.framerate
    }

    /// Forward kinematics of every frame.
    pub fn global_poses(&self) -> Vec<GlobalPose> {
        self.poses.iter().map(|p| forward_kinematics_unchecked(&self.skeleton, p)).collect()
    }

    pub fn global_positions(&self) -> Vec<Vec<Vec3>> {
        self.global_poses().into_iter().map(|g| g.positions).collect()
    }
}

/// Backward-difference joint velocities in m/s; frame 0 is zero.
pub fn joint_velocities(clip: &MotionClip) -> Vec<Vec<Vec3>> {
    position_velocities(&clip.global_positions(), clip.framerate)
}

/// Backward-difference velocities of a position track; frame 0 is zero.
pub fn position_velocities(positions: &[Vec<Vec3>], framerate: f64) -> Vec<Vec<Vec3>> {
    let mut out = Vec::with_capacity(positions.len());
    for t in 0..positions.len() {
        if t == 0 {
            out.push(vec![Vec3::zeros(); positions[0].len()]);
        } else {
            out.push(
                positions[t]
                    .iter()
                    .zip(&positions[t - 1])
                    .map(|(a, b)| (a - b) * framerate)
                    .collect(),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn chain(child_offset: Vec3) -> Skeleton {
        Skeleton::new(
            vec!["root".into(), "child".into()],
            vec![None, Some(0)],
            vec![Vec3::zeros(), child_offset],
        )
        .unwrap()
    }

    #[test]
    fn smpl22_is_valid() {
        let s = Skeleton::smpl22();
        let rebuilt = Skeleton::new(s.names().to_vec(), s.parents().to_vec(), s.offsets().to_vec()).unwrap();
        assert_eq!(rebuilt.len(), SMPL_JOINT_COUNT);
        assert_eq!(s.index_of("head"), Some(joint::HEAD));
        assert_eq!(s.index_of("left_wrist"), Some(joint::LEFT_WRIST));
        assert_eq!(s.index_of("right_wrist"), Some(joint::RIGHT_WRIST));
        assert_eq!(s.ancestry(joint::HEAD).collect::<Vec<_>>(), vec![15, 12, 9, 6, 3, 0]);
    }

    #[test]
    fn invalid_skeletons_are_rejected() {
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(Skeleton::new(names.clone(), vec![None, None], vec![Vec3::zeros(); 2]).is_err());
        assert!(Skeleton::new(names.clone(), vec![Some(1), None], vec![Vec3::zeros(); 2]).is_err());
        assert!(Skeleton::new(names, vec![None, Some(0)], vec![Vec3::x(), Vec3::x()]).is_err());
    }

    #[test]
    fn fk_identity_chain() {
        let s = chain(Vec3::new(0.0, 0.5, 0.0));
        let g = forward_kinematics(&s, &Pose::identity(2)).unwrap();
        assert_eq!(g.positions[1], Vec3::new(0.0, 0.5, 0.0));
    }

    #[test]
    fn fk_quarter_turn() {
        let s = chain(Vec3::new(1.0, 0.0, 0.0));
        let mut pose = Pose::identity(2);
        pose.local_rotations[0] = Rotation::from_axis_angle(&Vec3::z(), FRAC_PI_2);
        let g = forward_kinematics(&s, &pose).unwrap();
        assert!((g.positions[1] - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn fk_rejects_wrong_joint_count() {
        let s = chain(Vec3::x());
        assert!(matches!(forward_kinematics(&s, &Pose::identity(3)), Err(Error::Structure(_))));
    }

    #[test]
    fn fk_rest_pose_accumulates_offsets() {
        let s = Skeleton::smpl22();
        let g = forward_kinematics(&s, &Pose::identity(s.len())).unwrap();
        for j in 0..s.len() {
            let sum: Vec3 = s.ancestry(j).map(|a| *s.offset(a)).sum();
            assert!((g.positions[j] - sum).norm() < 1e-15);
        }
    }

    #[test]
    fn velocities_of_linear_motion() {
        let s = Arc::new(chain(Vec3::y()));
        let poses = (0..5)
            .map(|t| {
                let mut p = Pose::identity(2);
                p.root_translation = Vec3::new(0.01 * t as f64, 0.0, 0.0);
                p
            })
            .collect();
        let clip = MotionClip::new("ramp", s, 60.0, poses).unwrap();
        let v = joint_velocities(&clip);
        assert_eq!(v[0], vec![Vec3::zeros(); 2]);
        for frame in &v[1..] {
            for vel in frame {
                assert!((vel - Vec3::new(0.6, 0.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn static_clip_has_zero_velocity() {
        let s = Arc::new(Skeleton::smpl22());
        let clip = MotionClip::new("static", s, 60.0, vec![Pose::identity(22); 4]).unwrap();
        assert!(joint_velocities(&clip).iter().flatten().all(|v| *v == Vec3::zeros()));
    }

    #[test]
    fn empty_clip_is_rejected() {
        let s = Arc::new(Skeleton::smpl22());
        assert!(MotionClip::new("empty", s, 60.0, vec![]).is_err());
    }
}
