//! BVH reader and writer.
//!
//! Reads the usual subset: `HIERARCHY`, `ROOT`/`JOINT`/`End Site` blocks with
//! `OFFSET` and `CHANNELS`, then `MOTION` with `Frames:` and `Frame Time:`.
//! Euler channels are intrinsic rotations composed in the declared order.
//! The writer always emits `Zrotation Xrotation Yrotation`.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::skeleton::{Mat3, MotionClip, Pose, Rotation, Skeleton, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvhOptions {
    /// Multiplier from file units to meters (0.01 for centimeter files).
    pub scale: f64,
}

impl Default for BvhOptions {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Channel {
    Xposition,
    Yposition,
    Zposition,
    Xrotation,
    Yrotation,
    Zrotation,
}

impl Channel {
    fn parse(token: &str) -> Option<Self> {
        Some(match token.to_ascii_lowercase().as_str() {
            "xposition" => Channel::Xposition,
            "yposition" => Channel::Yposition,
            "zposition" => Channel::Zposition,
            "xrotation" => Channel::Xrotation,
            "yrotation" => Channel::Yrotation,
            "zrotation" => Channel::Zrotation,
            _ => return None,
        })
    }
}

struct ParsedJoint {
    name: String,
    parent: Option<usize>,
    offset: Vec3,
    channels: Vec<Channel>,
}

struct Tokens<'a> {
    items: Vec<(&'a str, usize)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(i, l)| l.split_whitespace().map(move |t| (t, i + 1)))
            .collect();
        Self { items, pos: 0, last_line: 1 }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Bvh { line: self.last_line, message: message.into() }
    }

    fn next(&mut self) -> Result<&'a str> {
        match self.items.get(self.pos) {
            Some(&(t, line)) => {
                self.pos += 1;
                self.last_line = line;
                Ok(t)
            }
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).map(|&(t, _)| t)
    }

    fn expect(&mut self, want: &str) -> Result<()> {
        let t = self.next()?;
        if t.eq_ignore_ascii_case(want) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{want}`, found `{t}`")))
        }
    }

    fn number(&mut self) -> Result<f64> {
        let t = self.next()?;
        parse_number(t).ok_or_else(|| self.err(format!("malformed number `{t}`")))
    }
}

fn parse_number(t: &str) -> Option<f64> {
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses a BVH document with default options (file units are meters).
pub fn parse_bvh(text: &str) -> Result<MotionClip> {
    parse_bvh_with(text, "bvh", &BvhOptions::default())
}

/// Parses a BVH document.
///
/// The root `OFFSET` is folded into the root translation so that the
/// resulting skeleton has a zero root offset. `End Site` blocks are skipped.
/// A frame rate within 1e-4 (relative) of an integer is snapped to it, since
/// frame times are usually written with few digits.
pub fn parse_bvh_with(text: &str, name: &str, options: &BvhOptions) -> Result<MotionClip> {
    let mut tok = Tokens::new(text);
    tok.expect("HIERARCHY")?;
    tok.expect("ROOT")?;
    let mut joints = Vec::new();
    parse_joint(&mut tok, None, &mut joints)?;
    if joints.is_empty() {
        return Err(tok.err("hierarchy has no joints"));
    }

    match tok.peek() {
        Some(t) if t.eq_ignore_ascii_case("MOTION") => {
            tok.next()?;
        }
        Some(t) => {
            tok.next()?;
            return Err(tok.err(format!("expected `MOTION`, found `{t}`")));
        }
        None => return Err(tok.err("missing MOTION section")),
    }
    tok.expect("Frames:")?;
    let frames_token = tok.next()?;
    let frame_count: usize = frames_token
        .parse()
        .map_err(|_| tok.err(format!("malformed frame count `{frames_token}`")))?;
    let frames_line = tok.last_line;
    tok.expect("Frame")?;
    tok.expect("Time:")?;
    let frame_time = tok.number()?;
    if frame_time <= 0.0 {
        return Err(tok.err(format!("frame time must be positive, got {frame_time}")));
    }
    let time_line = tok.last_line;
    let mut framerate = 1.0 / frame_time;
    if (framerate - framerate.round()).abs() <= 1e-4 * framerate {
        framerate = framerate.round();
    }

    let channel_count: usize = joints.iter().map(|j| j.channels.len()).sum();
    let skeleton = Arc::new(Skeleton::new(
        joints.iter().map(|j| j.name.clone()).collect(),
        joints.iter().map(|j| j.parent).collect(),
        joints
            .iter()
            .enumerate()
            .map(|(i, j)| if i == 0 { Vec3::zeros() } else { j.offset * options.scale })
            .collect(),
    )
    .map_err(|e| Error::Bvh { line: frames_line, message: e.to_string() })?);
    for (i, j) in joints.iter().enumerate().skip(1) {
        if j.channels.iter().any(|c| matches!(c, Channel::Xposition | Channel::Yposition | Channel::Zposition)) {
            log::warn!("ignoring position channels on non-root joint {} ({})", i, j.name);
        }
    }

    let mut poses = Vec::with_capacity(frame_count);
    for (idx, line) in text.lines().enumerate().skip(time_line) {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if poses.len() == frame_count {
            return Err(Error::Bvh {
                line: line_no,
                message: format!("frame-count mismatch: header declares {frame_count} frames but more follow"),
            });
        }
        let mut values = Vec::with_capacity(channel_count);
        for t in line.split_whitespace() {
            values.push(parse_number(t).ok_or_else(|| Error::Bvh {
                line: line_no,
                message: format!("malformed number `{t}`"),
            })?);
        }
        if values.len() != channel_count {
            return Err(Error::Bvh {
                line: line_no,
                message: format!("expected {channel_count} channel values, found {}", values.len()),
            });
        }
        poses.push(decode_frame(&joints, &values, options.scale));
    }
    if poses.len() != frame_count {
        return Err(Error::Bvh {
            line: frames_line,
            message: format!("frame-count mismatch: header declares {frame_count} frames, found {}", poses.len()),
        });
    }
    let (skeleton, poses) = match canonical_order(&skeleton) {
        Some((canonical, order)) => {
            let poses = poses
                .into_iter()
                .map(|p| Pose {
                    root_translation: p.root_translation,
                    local_rotations: order.iter().map(|&j| p.local_rotations[j]).collect(),
                })
                .collect();
            (Arc::new(canonical), poses)
        }
        None => (skeleton, poses),
    };
    MotionClip::new(name, skeleton, framerate, poses)
}

/// A file carrying exactly the canonical body joints is brought back to the
/// canonical joint order, which body subsets index into. Returns the
/// reordered skeleton and, per canonical joint, its index in file order.
fn canonical_order(parsed: &Skeleton) -> Option<(Skeleton, Vec<usize>)> {
    let smpl = Skeleton::smpl22();
    if parsed.len() != smpl.len() || parsed.names() == smpl.names() {
        return None;
    }
    let order: Vec<usize> = smpl.names().iter().map(|n| parsed.index_of(n)).collect::<Option<_>>()?;
    let mut position = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        position[old] = new;
    }
    let parents = order.iter().map(|&old| parsed.parent(old).map(|p| position[p])).collect();
    let offsets = order.iter().map(|&old| *parsed.offset(old)).collect();
    Skeleton::new(smpl.names().to_vec(), parents, offsets).ok().map(|s| (s, order))
}

fn parse_joint(tok: &mut Tokens<'_>, parent: Option<usize>, joints: &mut Vec<ParsedJoint>) -> Result<()> {
    let name = tok.next()?.to_string();
    tok.expect("{")?;
    let index = joints.len();
    joints.push(ParsedJoint { name, parent, offset: Vec3::zeros(), channels: Vec::new() });
    loop {
        let t = tok.next()?;
        match t.to_ascii_uppercase().as_str() {
            "OFFSET" => {
                joints[index].offset = Vec3::new(tok.number()?, tok.number()?, tok.number()?);
            }
            "CHANNELS" => {
                let n_token = tok.next()?;
                let n: usize = n_token
                    .parse()
                    .map_err(|_| tok.err(format!("malformed channel count `{n_token}`")))?;
                let mut channels = Vec::with_capacity(n);
                for _ in 0..n {
                    let c = tok.next()?;
                    channels.push(Channel::parse(c).ok_or_else(|| tok.err(format!("unknown channel `{c}`")))?);
                }
                joints[index].channels = channels;
            }
            "JOINT" => parse_joint(tok, Some(index), joints)?,
            "END" => {
                tok.expect("Site")?;
                tok.expect("{")?;
                while tok.next()? != "}" {}
            }
            "}" => return Ok(()),
            _ => return Err(tok.err(format!("unexpected token `{t}`"))),
        }
    }
}

fn axis_rotation(channel: Channel, degrees: f64) -> Rotation {
    let axis = match channel {
        Channel::Xrotation => Vec3::x(),
        Channel::Yrotation => Vec3::y(),
        _ => Vec3::z(),
    };
    Rotation::from_axis_angle(&axis, degrees.to_radians())
}

fn decode_frame(joints: &[ParsedJoint], values: &[f64], scale: f64) -> Pose {
    let mut pose = Pose::identity(joints.len());
    let mut cursor = 0;
    for (j, joint) in joints.iter().enumerate() {
        let mut rotation = Rotation::IDENTITY;
        let mut translation = joint.offset;
        for &c in &joint.channels {
            let v = values[cursor];
            cursor += 1;
            match c {
                Channel::Xposition => translation.x += v,
                Channel::Yposition => translation.y += v,
                Channel::Zposition => translation.z += v,
                _ => rotation = rotation.mul(&axis_rotation(c, v)),
            }
        }
        pose.local_rotations[j] = rotation;
        if j == 0 {
            pose.root_translation = translation * scale;
        }
    }
    pose
}

/// Intrinsic Z-X-Y Euler angles (radians) with `R = Rz(z) Rx(x) Ry(y)`.
pub(crate) fn zxy_euler(m: &Mat3) -> (f64, f64, f64) {
    let sx = m[(2, 1)].clamp(-1.0, 1.0);
    let x = sx.asin();
    if sx.abs() < 1.0 - 1e-12 {
        let y = (-m[(2, 0)]).atan2(m[(2, 2)]);
        let z = (-m[(0, 1)]).atan2(m[(1, 1)]);
        (z, x, y)
    } else {
        // gimbal lock: fold the remaining freedom into z
        let z = m[(1, 0)].atan2(m[(0, 0)]);
        (z, x, 0.0)
    }
}

/// Serializes a clip as BVH in meters.
pub fn serialize_bvh(clip: &MotionClip) -> String {
    serialize_bvh_with(clip, &BvhOptions::default())
}

/// Serializes a clip as BVH; lengths are written as `meters / options.scale`.
pub fn serialize_bvh_with(clip: &MotionClip, options: &BvhOptions) -> String {
    let skeleton = &clip.skeleton;
    let mut out = String::from("HIERARCHY\n");
    let mut order = Vec::with_capacity(skeleton.len());
    write_joint(&mut out, skeleton, 0, 0, options.scale, &mut order);
    let _ = writeln!(out, "MOTION");
    let _ = writeln!(out, "Frames: {}", clip.len());
    let _ = writeln!(out, "Frame Time: {}", 1.0 / clip.framerate);
    for pose in &clip.poses {
        let mut fields: Vec<String> = Vec::with_capacity(3 + 3 * skeleton.len());
        for c in pose.root_translation.iter() {
            fields.push(format!("{}", c / options.scale + 0.0));
        }
        // channel values follow the hierarchy, which is depth-first
        for &j in &order {
            let (z, x, y) = zxy_euler(&pose.local_rotations[j].to_matrix());
            for a in [z, x, y] {
                fields.push(format!("{:.6}", a.to_degrees() + 0.0));
            }
        }
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    out
}

fn write_joint(out: &mut String, skeleton: &Skeleton, j: usize, depth: usize, scale: f64, order: &mut Vec<usize>) {
    order.push(j);
    let pad = "\t".repeat(depth);
    let offset = skeleton.offset(j) / scale;
    let keyword = if j == 0 { "ROOT" } else { "JOINT" };
    let _ = writeln!(out, "{pad}{keyword} {}", skeleton.names()[j]);
    let _ = writeln!(out, "{pad}{{");
    let _ = writeln!(out, "{pad}\tOFFSET {} {} {}", offset.x + 0.0, offset.y + 0.0, offset.z + 0.0);
    if j == 0 {
        let _ = writeln!(out, "{pad}\tCHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation");
    } else {
        let _ = writeln!(out, "{pad}\tCHANNELS 3 Zrotation Xrotation Yrotation");
    }
    let children: Vec<usize> = (j + 1..skeleton.len()).filter(|&c| skeleton.parent(c) == Some(j)).collect();
    if children.is_empty() {
        let _ = writeln!(out, "{pad}\tEnd Site");
        let _ = writeln!(out, "{pad}\t{{");
        let _ = writeln!(out, "{pad}\t\tOFFSET 0 0 0");
        let _ = writeln!(out, "{pad}\t}}");
    }
    for c in children {
        write_joint(out, skeleton, c, depth + 1, scale, order);
    }
    let _ = writeln!(out, "{pad}}}");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::forward_kinematics;

    const MINIMAL: &str = "HIERARCHY
ROOT hips
{
  OFFSET 0 0 0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT spine
  {
    OFFSET 1 0 0
    CHANNELS 3 Zrotation Xrotation Yrotation
    End Site
    {
      OFFSET 0 1 0
    }
  }
}
MOTION
Frames: 2
Frame Time: 0.0333333
0 0 0 0 0 0 0 0 0
0 0 0 90 0 0 0 0 0
";

    #[test]
    fn minimal_fixture() {
        let clip = parse_bvh(MINIMAL).unwrap();
        assert_eq!(clip.len(), 2);
        assert_eq!(clip.framerate, 30.0);
        assert_eq!(clip.skeleton.names(), ["hips", "spine"]);
        assert_eq!(clip.poses[0], Pose::identity(2));
        let g = forward_kinematics(&clip.skeleton, &clip.poses[1]).unwrap();
        assert!((g.positions[1] - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn channel_order_is_honored() {
        let text = MINIMAL
            .replace("CHANNELS 3 Zrotation Xrotation Yrotation", "CHANNELS 3 Xrotation Yrotation Zrotation")
            .replace("0 0 0 90 0 0 0 0 0", "0 0 0 0 0 0 90 90 0");
        let clip = parse_bvh(&text).unwrap();
        let r = clip.poses[1].local_rotations[1].to_matrix();
        let rx = Rotation::from_axis_angle(&Vec3::x(), std::f64::consts::FRAC_PI_2).to_matrix();
        let ry = Rotation::from_axis_angle(&Vec3::y(), std::f64::consts::FRAC_PI_2).to_matrix();
        assert!((r - rx * ry).abs().max() < 1e-12);
    }

    #[test]
    fn missing_motion_section() {
        let text = MINIMAL.split("MOTION").next().unwrap();
        let err = parse_bvh(text).unwrap_err();
        assert!(matches!(err, Error::Bvh { ref message, .. } if message.contains("MOTION")), "{err}");
    }

    #[test]
    fn frame_count_mismatch_reports_line() {
        let text = MINIMAL.replace("Frames: 2", "Frames: 3");
        match parse_bvh(&text).unwrap_err() {
            Error::Bvh { line, message } => {
                assert_eq!(line, 17);
                assert!(message.contains("frame-count mismatch"));
            }
            e => panic!("{e}"),
        }
        let text = MINIMAL.replace("Frames: 2", "Frames: 1");
        match parse_bvh(&text).unwrap_err() {
            Error::Bvh { line, .. } => assert_eq!(line, 20),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_channel_reports_line() {
        let text = MINIMAL.replace("CHANNELS 3 Zrotation", "CHANNELS 3 Wrotation");
        match parse_bvh(&text).unwrap_err() {
            Error::Bvh { line, message } => {
                assert_eq!(line, 9);
                assert!(message.contains("Wrotation"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn short_frame_line_is_rejected() {
        let text = MINIMAL.replace("0 0 0 90 0 0 0 0 0", "0 0 0 90 0 0 0 0");
        assert!(matches!(parse_bvh(&text), Err(Error::Bvh { line: 20, .. })));
    }

    #[test]
    fn centimeter_scale() {
        let text = MINIMAL.replace("OFFSET 1 0 0", "OFFSET 100 0 0");
        let clip = parse_bvh_with(&text, "cm", &BvhOptions { scale: 0.01 }).unwrap();
        assert!((clip.skeleton.offset(1) - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zxy_decomposition_reproduces_matrix() {
        for (z, x, y) in [(0.3, -0.4, 1.2), (2.0, 1.5, -2.5), (-0.1, std::f64::consts::FRAC_PI_2, 0.7)] {
            let r = Rotation::from_axis_angle(&Vec3::z(), z)
                .mul(&Rotation::from_axis_angle(&Vec3::x(), x))
                .mul(&Rotation::from_axis_angle(&Vec3::y(), y));
            let (a, b, c) = zxy_euler(&r.to_matrix());
            let back = Rotation::from_axis_angle(&Vec3::z(), a)
                .mul(&Rotation::from_axis_angle(&Vec3::x(), b))
                .mul(&Rotation::from_axis_angle(&Vec3::y(), c));
            assert!(r.angle_to_deg(&back) < 1e-6);
        }
    }
}
