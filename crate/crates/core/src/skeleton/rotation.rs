//! Unit quaternion rotations and their matrix / 6D encodings.
//!
//! Quaternions are stored w-first. Every constructor and product returns the
//! canonical representative with `w >= 0`, so two equal rotations compare
//! equal component-wise.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Accepted drift from unit norm before a raw quaternion is rejected.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// A 3D rotation as a canonical unit quaternion `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rotation {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for Rotation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl TryFrom<[f64; 4]> for Rotation {
    type Error = Error;

    fn try_from(q: [f64; 4]) -> Result<Self> {
        Self::from_wxyz(q)
    }
}

impl From<Rotation> for [f64; 4] {
    fn from(r: Rotation) -> Self {
        r.wxyz()
    }
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Builds a rotation from raw components.
    ///
    /// Inputs within `1e-9` of unit norm keep their exact bits (only the sign
    /// is canonicalized); inputs within [`NORM_TOLERANCE`] are renormalized;
    /// anything further away, or non-finite, is rejected.
    pub fn from_wxyz(q: [f64; 4]) -> Result<Self> {
        if q.iter().any(|c| !c.is_finite()) {
            return Err(Error::Rotation(format!("non-finite quaternion {q:?}")));
        }
        let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        let deviation = (norm - 1.0).abs();
        if deviation > NORM_TOLERANCE {
            return Err(Error::Rotation(format!(
                "quaternion norm {norm} deviates from 1 by more than {NORM_TOLERANCE}"
            )));
        }
        let q = if deviation > 1e-9 { q.map(|c| c / norm) } else { q };
        Ok(Self::canonical(q[0], q[1], q[2], q[3]))
    }

    /// Normalizes an arbitrary nonzero quaternion.
    pub fn normalized(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if !(norm.is_finite() && norm > 1e-12) {
            return Err(Error::Rotation(format!("cannot normalize ({w}, {x}, {y}, {z})")));
        }
        Ok(Self::canonical(w / norm, x / norm, y / norm, z / norm))
    }

    fn canonical(w: f64, x: f64, y: f64, z: f64) -> Self {
        if w < 0.0 {
            Self { w: -w, x: -x, y: -y, z: -z }
        } else {
            Self { w, x, y, z }
        }
    }

    /// Renormalizes after arithmetic; the input is assumed close to unit.
    fn renorm(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        Self::canonical(w / n, x / n, y / n, z / n)
    }

    pub fn wxyz(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n < 1e-300 || angle == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (angle * 0.5).sin_cos();
        let a = axis / n;
        Self::renorm(c, a.x * s, a.y * s, a.z * s)
    }

    /// Exponential map of a rotation vector (axis × angle in radians).
    pub fn from_rotation_vector(v: &Vec3) -> Self {
        let angle = v.norm();
        if angle < 1e-12 {
            // first-order expansion keeps tiny steps exact enough for the IK
            return Self::renorm(1.0, 0.5 * v.x, 0.5 * v.y, 0.5 * v.z);
        }
        Self::from_axis_angle(v, angle)
    }

    /// Logarithm map: the rotation vector of the shortest-path rotation.
    pub fn to_rotation_vector(&self) -> Vec3 {
        let v = Vec3::new(self.x, self.y, self.z);
        let s = v.norm();
        if s < 1e-12 {
            return v * 2.0;
        }
        // w >= 0 so the angle is in [0, pi]
        let angle = 2.0 * s.atan2(self.w);
        v * (angle / s)
    }

    pub fn inverse(&self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Hamilton product `self * other` (apply `other` first).
    pub fn mul(&self, o: &Rotation) -> Self {
        let (a, b) = (self, o);
        Self::renorm(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    /// Rotates a vector.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    /// Four-dimensional dot product, used for geodesic distance and blending.
    pub fn dot(&self, o: &Rotation) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Geodesic angle to `other` in degrees, in `[0, 180]`.
    pub fn angle_to_deg(&self, other: &Rotation) -> f64 {
        // atan2 of the relative rotation stays accurate for tiny angles, where acos does not
        let (a, b) = (self, other);
        let w = a.dot(b);
        let x = (a.w * b.x - a.x * b.w) + (a.z * b.y - a.y * b.z);
        let y = (a.w * b.y - a.y * b.w) + (a.x * b.z - a.z * b.x);
        let z = (a.w * b.z - a.z * b.w) + (a.y * b.x - a.x * b.y);
        (2.0 * (x * x + y * y + z * z).sqrt().atan2(w.abs())).to_degrees()
    }

    pub fn to_matrix(&self) -> Mat3 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Mat3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Converts a proper rotation matrix (Shepperd's method).
    pub fn from_matrix(m: &Mat3) -> Self {
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Self::renorm(
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            Self::renorm(
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            Self::renorm(
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            )
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            Self::renorm(
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            )
        }
    }

    /// The first two matrix columns, `(c0.x, c0.y, c0.z, c1.x, c1.y, c1.z)`.
    pub fn to_6d(&self) -> [f64; 6] {
        let m = self.to_matrix();
        [m[(0, 0)], m[(1, 0)], m[(2, 0)], m[(0, 1)], m[(1, 1)], m[(2, 1)]]
    }

    /// Decodes a 6D vector with Gram-Schmidt orthonormalization.
    pub fn from_6d(v: &[f64; 6]) -> Result<Self> {
        Ok(Self::from_matrix(&matrix_from_6d(v)?))
    }
}

/// Gram-Schmidt decode of a 6D rotation encoding into a rotation matrix.
pub fn matrix_from_6d(v: &[f64; 6]) -> Result<Mat3> {
    if v.iter().any(|c| !c.is_finite()) {
        return Err(Error::Rotation(format!("non-finite 6D encoding {v:?}")));
    }
    let a = Vec3::new(v[0], v[1], v[2]);
    let b = Vec3::new(v[3], v[4], v[5]);
    let na = a.norm();
    if na < 1e-9 {
        return Err(Error::Rotation("6D encoding has a zero first column".into()));
    }
    let c0 = a / na;
    let ortho = b - c0 * c0.dot(&b);
    let nb = ortho.norm();
    if nb < 1e-9 * b.norm().max(1.0) {
        return Err(Error::Rotation("6D encoding has parallel columns".into()));
    }
    let c1 = ortho / nb;
    let c2 = c0.cross(&c1);
    Ok(Mat3::from_columns(&[c0, c1, c2]))
}

/// Geodesic angle between two raw quaternions, in degrees.
///
/// Inputs off unit norm by less than [`NORM_TOLERANCE`] are normalized first;
/// larger deviations are an error.
pub fn geodesic_angle(a: [f64; 4], b: [f64; 4]) -> Result<f64> {
    let a = Rotation::from_wxyz(a)?;
    let b = Rotation::from_wxyz(b)?;
    Ok(a.angle_to_deg(&b))
}

/// Skew-symmetric cross-product matrix.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn arb_rotation() -> impl Strategy<Value = Rotation> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("nonzero", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
            .prop_map(|(w, x, y, z)| Rotation::normalized(w, x, y, z).unwrap())
    }

    /// acos((tr(Aᵀ B) - 1) / 2) in degrees.
    fn trace_angle(a: &Rotation, b: &Rotation) -> f64 {
        let m = a.to_matrix().transpose() * b.to_matrix();
        let c = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos().to_degrees()
    }

    #[test]
    fn identity_encodings() {
        assert_eq!(Rotation::IDENTITY.to_matrix(), Mat3::identity());
        assert_eq!(Rotation::IDENTITY.to_6d(), [1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn half_turn_about_y() {
        let r = Rotation::from_axis_angle(&Vec3::y(), PI);
        let m = r.to_matrix();
        let expected = Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, -1.0));
        assert!((m - expected).abs().max() < 1e-15);
    }

    #[test]
    fn geodesic_known_values() {
        let q = Rotation::normalized(0.3, -0.2, 0.9, 0.1).unwrap();
        assert_eq!(q.angle_to_deg(&q), 0.0);
        let rx = Rotation::from_axis_angle(&Vec3::x(), PI / 2.0);
        assert!((Rotation::IDENTITY.angle_to_deg(&rx) - 90.0).abs() < 1e-12);
        // sign flip is the same rotation
        let [w, x, y, z] = q.wxyz();
        assert!(geodesic_angle([w, x, y, z], [-w, -x, -y, -z]).unwrap() < 1e-6);
    }

    #[test]
    fn geodesic_normalizes_small_drift_and_rejects_large() {
        let a = [1.0 + 5e-7, 0.0, 0.0, 0.0];
        assert_eq!(geodesic_angle(a, [1.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(geodesic_angle([1.1, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn parallel_6d_is_rejected() {
        assert!(Rotation::from_6d(&[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]).is_err());
        assert!(Rotation::from_6d(&[0.0; 6]).is_err());
    }

    #[test]
    fn rotation_vector_round_trip() {
        let v = Vec3::new(0.3, -1.2, 0.4);
        let back = Rotation::from_rotation_vector(&v).to_rotation_vector();
        assert!((back - v).norm() < 1e-12);
    }

    #[test]
    fn bits_are_kept_for_unit_input() {
        let r = Rotation::normalized(0.5, 0.1, -0.7, 0.2).unwrap();
        let again = Rotation::from_wxyz(r.wxyz()).unwrap();
        assert_eq!(r.wxyz(), again.wxyz());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn matrix_round_trip(r in arb_rotation()) {
            let back = Rotation::from_matrix(&r.to_matrix());
            prop_assert!(r.angle_to_deg(&back) <= 1e-6);
            let six = Rotation::from_6d(&r.to_6d()).unwrap();
            prop_assert!(r.angle_to_deg(&six) <= 1e-6);
        }

        #[test]
        fn geodesic_matches_trace_formula(a in arb_rotation(), b in arb_rotation()) {
            prop_assert!((a.angle_to_deg(&b) - trace_angle(&a, &b)).abs() < 1e-6);
        }

        #[test]
        fn geodesic_is_a_metric(a in arb_rotation(), b in arb_rotation(), c in arb_rotation()) {
            let ab = a.angle_to_deg(&b);
            prop_assert!(ab >= 0.0 && ab <= 180.0);
            prop_assert_eq!(ab, b.angle_to_deg(&a));
            prop_assert!(ab <= a.angle_to_deg(&c) + c.angle_to_deg(&b) + 1e-6);
        }

        #[test]
        fn products_stay_unit_and_canonical(a in arb_rotation(), b in arb_rotation()) {
            let p = a.mul(&b);
            let n: f64 = p.wxyz().iter().map(|c| c * c).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-9);
            prop_assert!(p.w() >= 0.0);
            let v = Vec3::new(0.2, -0.4, 1.1);
            let lhs = p.rotate(&v);
            let rhs = a.to_matrix() * (b.to_matrix() * v);
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }
    }
}
