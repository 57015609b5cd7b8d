use std::sync::Arc;

use posebench::degrade::{compose, DegradationConfig};
use posebench::metrics::{mpjpe, mpjpe_positions, BodySubset};
use posebench::mocap_io::{parse_bvh, parse_bvh_with, serialize_bvh, BvhOptions, REFERENCE_TABLE1_CSV, REFERENCE_TABLE1_MPJPE_SUM};
use posebench::reconstruct::{reconstruct_clip, IkConfig, IkReconstructor};
use posebench::sensor_sim::{default_rig, derive_sparse_stream, triangulated_stream, CartesianStream, DetectorModel};
use posebench::skeleton::{forward_kinematics, Skeleton, Vec3};
use posebench::sync::align;
use posebench::synth::{random_pose, synthesize_clip};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TWO_JOINT_CM: &str = "HIERARCHY
ROOT hips
{
  OFFSET 0 0 0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT knee
  {
    OFFSET 0 -40 0
    CHANNELS 3 Zrotation Xrotation Yrotation
    End Site
    {
      OFFSET 0 -40 0
    }
  }
}
MOTION
Frames: 3
Frame Time: 0.0333333
10 90 0 90 0 0 0 0 0
10 90 0 0 90 0 0 0 0
0 100 0 0 0 0 0 0 90
";

#[test]
fn hand_computed_bvh_positions() {
    let clip = parse_bvh_with(TWO_JOINT_CM, "legs", &BvhOptions { scale: 0.01 }).unwrap();
    assert_eq!(clip.len(), 3);
    assert_eq!(clip.skeleton.names(), ["hips", "knee"]);
    assert!((clip.framerate - 30.0).abs() < 1e-3);
    let expect = [
        [Vec3::new(0.1, 0.9, 0.0), Vec3::new(0.5, 0.9, 0.0)],
        [Vec3::new(0.1, 0.9, 0.0), Vec3::new(0.1, 0.9, -0.4)],
        [Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.6, 0.0)],
    ];
    for (got, want) in clip.global_positions().iter().zip(expect) {
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).norm() < 1e-12, "{g} vs {w}");
        }
    }
    // knee spun about its own vertical axis leaves positions unchanged
    let knee = clip.poses[2].local_rotations[1];
    let spun = knee.rotate(&Vec3::x());
    assert!((spun - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12, "{spun}");
}

#[test]
fn shipped_reference_table_matches_its_checksum_file() {
    let checksum = include_str!("../data/reference_table1.checksum");
    let field = |key: &str| {
        checksum.lines().find_map(|l| l.strip_prefix(key)).map(|v| v.trim().to_string()).unwrap()
    };
    let rows = REFERENCE_TABLE1_CSV.lines().skip(1).filter(|l| !l.is_empty()).count();
    let sum: f64 = REFERENCE_TABLE1_CSV.lines().skip(1).map(|l| l.split(',').nth(4).unwrap().parse::<f64>().unwrap()).sum();
    assert_eq!(rows.to_string(), field("rows="));
    assert_eq!(field("mpjpe_sum=").parse::<f64>().unwrap(), REFERENCE_TABLE1_MPJPE_SUM);
    assert!((sum - REFERENCE_TABLE1_MPJPE_SUM).abs() < 1e-9);
}

#[test]
fn noiseless_cameras_feed_ik_to_ground_truth() {
    let clip = synthesize_clip("e2e", Arc::new(Skeleton::smpl22()), 3.0, 30.0, 77).unwrap();
    let cart = triangulated_stream(&clip, &default_rig(), &DetectorModel::default(), 1).unwrap();
    let gt = clip.global_positions();
    let pos: Vec<Vec<Vec3>> = cart.samples.iter().map(|s| s.positions.clone()).collect();
    assert!(mpjpe_positions(&pos, &gt, BodySubset::Full).unwrap() < 1e-6);

    let frames = align(&derive_sparse_stream(&clip).unwrap(), &cart).unwrap();
    let ik = IkReconstructor::new(clip.skeleton.clone(), IkConfig::default()).unwrap();
    let (pred, held) = reconstruct_clip(&ik, &frames, &clip).unwrap();
    assert_eq!(held, 0);
    assert!(mpjpe(&pred, &clip, BodySubset::Full).unwrap() < 0.5);
}

#[test]
fn degraded_streams_depend_only_on_config() {
    let clip = synthesize_clip("d", Arc::new(Skeleton::smpl22()), 2.0, 60.0, 5).unwrap();
    let base = CartesianStream::from_clip(&clip);
    let cfg = DegradationConfig { delay_frames: 3, fps_ratio: 2, noise_std_m: 0.02, occlusion_prob: 0.1, seed: 11 };
    let a = compose(&base, &cfg).unwrap();
    assert_eq!(a, compose(&base, &cfg).unwrap());
    assert_ne!(a, compose(&base, &DegradationConfig { seed: 12, ..cfg }).unwrap());
    assert_eq!(a.len(), base.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bvh_round_trip_preserves_global_positions(seed in any::<u64>(), frames in 1usize..12, fps in 10.0f64..240.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let skeleton = Arc::new(Skeleton::smpl22());
        let poses = (0..frames).map(|_| random_pose(&mut rng, 22, std::f64::consts::PI)).collect();
        let clip = posebench::skeleton::MotionClip::new("p", skeleton.clone(), fps, poses).unwrap();
        let back = parse_bvh(&serialize_bvh(&clip)).unwrap();
        prop_assert_eq!(back.len(), clip.len());
        prop_assert_eq!(back.skeleton.parents(), skeleton.parents());
        for (a, b) in clip.poses.iter().zip(&back.poses) {
            let pa = forward_kinematics(&skeleton, a).unwrap().positions;
            let pb = forward_kinematics(&back.skeleton, b).unwrap().positions;
            for (x, y) in pa.iter().zip(&pb) {
                prop_assert!((x - y).norm() < 1e-6);
            }
        }
    }
}
