//! Canonical JSON clip format.
//!
//! ```json
//! {
//!   "schema_version": "1",
//!   "name": "walk",
//!   "framerate_hz": 60.0,
//!   "joints": [{"name": "pelvis", "parent": null, "offset_m": [0.0, 0.0, 0.0]}, ...],
//!   "frames": [{"root_t_m": [0.0, 0.95, 0.0], "quats_wxyz": [[1.0, 0.0, 0.0, 0.0], ...]}, ...]
//! }
//! ```
//!
//! Numbers are written in shortest round-trip form, so save/load is bit-exact.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{MotionClip, Pose, Rotation, Skeleton, Vec3};

pub const CLIP_SCHEMA_VERSION: &str = "1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClipFile {
    schema_version: String,
    name: String,
    framerate_hz: f64,
    joints: Vec<JointEntry>,
    frames: Vec<FrameEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointEntry {
    name: String,
    parent: Option<usize>,
    offset_m: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameEntry {
    root_t_m: [f64; 3],
    quats_wxyz: Vec<[f64; 4]>,
}

pub fn save_clip_json(clip: &MotionClip) -> Vec<u8> {
    let s = &clip.skeleton;
    let file = ClipFile {
        schema_version: CLIP_SCHEMA_VERSION.to_string(),
        name: clip.name.clone(),
        framerate_hz: clip.framerate,
        joints: (0..s.len())
            .map(|j| {
                let o = s.offset(j);
                JointEntry { name: s.names()[j].clone(), parent: s.parent(j), offset_m: [o.x, o.y, o.z] }
            })
            .collect(),
        frames: clip
            .poses
            .iter()
            .map(|p| FrameEntry {
                root_t_m: [p.root_translation.x, p.root_translation.y, p.root_translation.z],
                quats_wxyz: p.local_rotations.iter().map(Rotation::wxyz).collect(),
            })
            .collect(),
    };
    serde_json::to_vec(&file).expect("clip serialization cannot fail")
}

pub fn load_clip_json(bytes: &[u8]) -> Result<MotionClip> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| Error::ClipJson(e.to_string()))?;
    match value.get("schema_version") {
        Some(serde_json::Value::String(v)) if v == CLIP_SCHEMA_VERSION => {}
        Some(serde_json::Value::String(v)) => {
            return Err(Error::SchemaVersion { found: v.clone(), supported: CLIP_SCHEMA_VERSION.into() })
        }
        Some(other) => {
            return Err(Error::SchemaVersion { found: other.to_string(), supported: CLIP_SCHEMA_VERSION.into() })
        }
        None => return Err(Error::ClipJson("missing schema_version".into())),
    }
    let file: ClipFile = serde_json::from_value(value).map_err(|e| Error::ClipJson(e.to_string()))?;

    let finite = |v: &[f64]| v.iter().all(|c| c.is_finite());
    if !file.framerate_hz.is_finite() {
        return Err(Error::ClipJson("framerate_hz is not finite".into()));
    }
    if file.joints.iter().any(|j| !finite(&j.offset_m)) {
        return Err(Error::ClipJson("non-finite joint offset".into()));
    }
    let skeleton = Arc::new(Skeleton::new(
        file.joints.iter().map(|j| j.name.clone()).collect(),
        file.joints.iter().map(|j| j.parent).collect(),
        file.joints.iter().map(|j| Vec3::from(j.offset_m)).collect(),
    )?);
    let mut poses = Vec::with_capacity(file.frames.len());
    for (t, frame) in file.frames.iter().enumerate() {
        if !finite(&frame.root_t_m) {
            return Err(Error::ClipJson(format!("frame {t}: non-finite root translation")));
        }
        let local_rotations = frame
            .quats_wxyz
            .iter()
            .enumerate()
            .map(|(j, q)| Rotation::from_wxyz(*q).map_err(|e| Error::ClipJson(format!("frame {t}, joint {j}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        poses.push(Pose { root_translation: Vec3::from(frame.root_t_m), local_rotations });
    }
    MotionClip::new(file.name, skeleton, file.framerate_hz, poses)
}
