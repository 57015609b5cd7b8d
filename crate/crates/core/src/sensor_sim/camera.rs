use nalgebra::{Matrix3x4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{Mat3, Rotation, Vec3};

/// Points closer than this to the image plane (or behind it) are not visible.
pub const MIN_DEPTH_M: f64 = 1e-6;

/// Pinhole camera. `rotation` maps camera axes to world axes (x right,
/// y down, z along the optical axis); `center` is the optical center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
    #[serde(rename = "rotation_quat_wxyz")]
    pub rotation: Rotation,
    #[serde(rename = "center_m")]
    pub center: Vec3,
}

fn default_width() -> u32 {
    640
}

fn default_height() -> u32 {
    480
}

impl CameraModel {
    /// A camera at `center` whose optical axis points at `target`, with
    /// image "up" aligned to world +y.
    pub fn look_at(center: Vec3, target: Vec3, fx: f64, fy: f64, width: u32, height: u32) -> Result<Self> {
        let forward = (target - center)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::Parameter("camera target coincides with its center".into()))?;
        let right = forward
            .cross(&Vec3::y())
            .try_normalize(1e-12)
            .ok_or_else(|| Error::Parameter("camera looks straight up or down".into()))?;
        let down = forward.cross(&right);
        let rotation = Rotation::from_matrix(&Mat3::from_columns(&[right, down, forward]));
        let camera = Self {
            fx,
            fy,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
            rotation,
            center,
        };
        camera.validate()?;
        Ok(camera)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite())
            && self.center.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Parameter("camera parameters must be finite".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::Parameter(format!("focal lengths must be positive (fx={}, fy={})", self.fx, self.fy)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Parameter("image size must be nonzero".into()));
        }
        if !(0.0..=self.width as f64).contains(&self.cx) || !(0.0..=self.height as f64).contains(&self.cy) {
            return Err(Error::Parameter(format!(
                "principal point ({}, {}) outside the {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// World point in camera coordinates, `Rᵀ (p - c)`.
    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation.inverse().rotate(&(p - self.center))
    }

    /// Pixel coordinates of a world point, or `None` when the point is at or
    /// behind the camera.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64)> {
        let x = self.to_camera(p);
        if x.z <= MIN_DEPTH_M {
            return None;
        }
        Some((self.fx * x.x / x.z + self.cx, self.fy * x.y / x.z + self.cy))
    }

    pub fn in_image(&self, u: f64, v: f64) -> bool {
        (0.0..self.width as f64).contains(&u) && (0.0..self.height as f64).contains(&v)
    }

    /// The 3×4 projection matrix `K [Rᵀ | -Rᵀ c]`.
    pub fn projection_matrix(&self) -> Matrix3x4<f64> {
        let k = Mat3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0);
        let rt = self.rotation.to_matrix().transpose();
        let t = -(rt * self.center);
        let mut ext = Matrix3x4::zeros();
        ext.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        ext.set_column(3, &t);
        k * ext
    }

    /// Homogeneous projection, used by tests to cross-check [`Self::project`].
    pub fn project_homogeneous(&self, p: &Vec3) -> Vec3 {
        self.projection_matrix() * Vector4::new(p.x, p.y, p.z, 1.0)
    }
}

/// Two 640×480 cameras 2.5 m high, 3 m from the capture-volume center
/// (0, 1, 0) horizontally and 90° apart, both aimed at that center.
pub fn default_rig() -> [CameraModel; 2] {
    let target = Vec3::new(0.0, 1.0, 0.0);
    let a = CameraModel::look_at(Vec3::new(0.0, 2.5, 3.0), target, 500.0, 500.0, 640, 480)
        .expect("default rig is valid");
    let b = CameraModel::look_at(Vec3::new(3.0, 2.5, 0.0), target, 500.0, 500.0, 640, 480)
        .expect("default rig is valid");
    [a, b]
}
