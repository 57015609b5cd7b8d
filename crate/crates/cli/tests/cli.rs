use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use posebench::mocap_io::serialize_bvh;
use posebench::skeleton::Skeleton;
use posebench::synth::synthesize_clip;

fn posebench(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posebench"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) {
    fs::write(dir.join("config.json"), body).unwrap();
}

const SMALL: &str = r#"{
  "synthetic": {"count": 2, "duration_s": 2.0, "seed": 3},
  "grid": {"delay_frames": [2], "fps_ratio": [1], "occlusion_prob": [0.05], "noise_std_m": [0.01]},
  "seeds": [0, 1],
  "output_dir": "out"
}"#;

fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), SMALL);
    for out in ["a", "b"] {
        let o = posebench(&["simulate", "--config", "config.json", "--out", out], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = read_tree(&dir.path().join("a"));
    assert!(a.iter().any(|(name, _)| name.ends_with("sparse.json")));
    assert_eq!(a, read_tree(&dir.path().join("b")));
}

#[test]
fn sweep_writes_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), SMALL);
    let o = posebench(&["sweep", "--config", "config.json"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    // clean plus three artifact levels, two subsets each
    assert_eq!(csv.lines().count(), 1 + 4 * 2);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("out/run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["failures"].as_array().unwrap().len(), 0);
    assert!(manifest["outputs"]["report.csv"].is_string());
    assert!(fs::metadata(dir.path().join("out/report.md")).is_ok());
}

#[test]
fn reuse_without_simulate_names_the_missing_step() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), &SMALL.replace(r#""seeds""#, r#""reuse_simulated": true, "seeds""#));
    let o = posebench(&["sweep", "--config", "config.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("posebench simulate"));

    assert!(posebench(&["simulate", "--config", "config.json"], dir.path()).status.success());
    let o = posebench(&["sweep", "--config", "config.json"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unreadable_clip_is_recorded_and_the_rest_still_runs() {
    let dir = tempfile::tempdir().unwrap();
    let clip = synthesize_clip("walk", std::sync::Arc::new(Skeleton::smpl22()), 1.0, 30.0, 1).unwrap();
    fs::write(dir.path().join("walk.bvh"), serialize_bvh(&clip)).unwrap();
    fs::write(dir.path().join("broken.bvh"), "HIERARCHY\nROOT hips {\n").unwrap();
    write_config(
        dir.path(),
        r#"{"clips": ["*.bvh"], "grid": {"delay_frames": [2], "fps_ratio": [1], "occlusion_prob": [0.0], "noise_std_m": [0.0]}, "seeds": [0], "output_dir": "out"}"#,
    );
    let o = posebench(&["sweep", "--config", "config.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken.bvh"));
    let csv = fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
}

#[test]
fn report_merge_rejects_conflicting_rows() {
    let dir = tempfile::tempdir().unwrap();
    let header = "condition,level,model,subset,mpjpe,mpjre,mpjve,reference_model,delta_mpjpe,delta_mpjre,delta_mpjve\n";
    fs::write(dir.path().join("a.csv"), format!("{header}clean,,ik,Up,1.0000,2.0000,3.0000,,,,\n")).unwrap();
    fs::write(dir.path().join("b.csv"), format!("{header}clean,,ik,Up,1.5000,2.0000,3.0000,,,,\n")).unwrap();
    fs::write(dir.path().join("c.csv"), format!("{header}delay,2,ik,Up,4.0000,2.0000,9.0000,,,,\n")).unwrap();

    let o = posebench(&["report", "a.csv", "b.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("conflicting") && err.contains("clean"), "{err}");

    let o = posebench(&["report", "a.csv", "c.csv", "a.csv", "--out", "merged"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let merged = fs::read_to_string(dir.path().join("merged/report.csv")).unwrap();
    assert_eq!(merged.lines().count(), 3);
}

#[test]
fn invalid_config_is_a_fatal_error() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), r#"{"seeds": [0], "grid": {"delay_frames": [], "fps_ratio": [0], "occlusion_prob": [], "noise_std_m": []}, "bogus": 1}"#);
    let o = posebench(&["validate-config", "--config", "config.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}
