//! Cartesian poses, joint targets and the handful of geometric helpers the
//! planner and the timing model share.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("pose component `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("segment has zero length")]
    DegenerateSegment,
}

/// Wraps an angle in degrees into `[-180, 180)`.
pub fn normalize_degrees(deg: f64) -> f64 {
    let wrapped = (deg + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can return exactly 360.0 for tiny negative inputs
    if wrapped >= 180.0 {
        wrapped - 360.0
    } else {
        wrapped
    }
}

/// TCP pose: position in millimeters, orientation as fixed-axis Z-Y'-X''
/// angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 6]", into = "[f64; 6]")]
pub struct Pose {
    x: f64,
    y: f64,
    z: f64,
    a: f64,
    b: f64,
    c: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, z: f64, a: f64, b: f64, c: f64) -> Result<Self, GeometryError> {
        for (name, v) in [("x", x), ("y", y), ("z", z), ("a", a), ("b", b), ("c", c)] {
            if !v.is_finite() {
                return Err(GeometryError::NonFinite(name));
            }
        }
        Ok(Self {
            x,
            y,
            z,
            a: normalize_degrees(a),
            b: normalize_degrees(b),
            c: normalize_degrees(c),
        })
    }

    /// Position-only pose with zero orientation.
    pub fn at(x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        Self::new(x, y, z, 0.0, 0.0, 0.0)
    }

    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.x, self.y, self.z, self.a, self.b, self.c]
    }

    /// Same orientation, different position.
    pub fn with_position(&self, p: Vector3<f64>) -> Result<Self, GeometryError> {
        Self::new(p.x, p.y, p.z, self.a, self.b, self.c)
    }

    /// Shift the position along `offset`, keeping the orientation.
    pub fn translated(&self, offset: Vector3<f64>) -> Result<Self, GeometryError> {
        self.with_position(self.position() + offset)
    }
}

impl TryFrom<[f64; 6]> for Pose {
    type Error = GeometryError;

    fn try_from(v: [f64; 6]) -> Result<Self, Self::Error> {
        Pose::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }
}

impl From<Pose> for [f64; 6] {
    fn from(p: Pose) -> Self {
        p.to_array()
    }
}

/// Six joint angles in degrees. Robots with fewer axes leave the tail at zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "[f64; 6]", into = "[f64; 6]")]
pub struct JointTarget([f64; 6]);

impl JointTarget {
    pub fn new(joints: [f64; 6]) -> Result<Self, GeometryError> {
        if joints.iter().any(|j| !j.is_finite()) {
            return Err(GeometryError::NonFinite("joint"));
        }
        Ok(Self(joints))
    }

    pub fn joints(&self) -> [f64; 6] {
        self.0
    }

    /// Per-axis difference `other - self`.
    pub fn deltas_to(&self, other: &JointTarget) -> [f64; 6] {
        std::array::from_fn(|i| other.0[i] - self.0[i])
    }
}

impl TryFrom<[f64; 6]> for JointTarget {
    type Error = GeometryError;

    fn try_from(v: [f64; 6]) -> Result<Self, Self::Error> {
        JointTarget::new(v)
    }
}

impl From<JointTarget> for [f64; 6] {
    fn from(j: JointTarget) -> Self {
        j.0
    }
}

/// Euclidean distance between the positions of two poses, in mm.
pub fn pose_distance(p: &Pose, q: &Pose) -> f64 {
    (q.position() - p.position()).norm()
}

/// Turn angle at `corner` between the incoming and outgoing directions.
/// Zero means a straight continuation, π a full reversal.
pub fn corner_angle(prev: &Pose, corner: &Pose, next: &Pose) -> Result<f64, GeometryError> {
    let incoming = corner.position() - prev.position();
    let outgoing = next.position() - corner.position();
    direction_angle(&incoming, &outgoing)
}

/// Angle between two direction vectors, in `[0, π]`.
pub fn direction_angle(u: &Vector3<f64>, v: &Vector3<f64>) -> Result<f64, GeometryError> {
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(GeometryError::DegenerateSegment);
    }
    // atan2 keeps precision near 0 and π where acos does not
    let cross = u.cross(v).norm();
    let dot = u.dot(v);
    Ok(cross.atan2(dot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn p(x: f64, y: f64, z: f64) -> Pose {
        Pose::at(x, y, z).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(pose_distance(&p(1.0, 2.0, 3.0), &p(1.0, 2.0, 3.0)), 0.0);
        assert_eq!(pose_distance(&p(0.0, 0.0, 0.0), &p(300.0, 0.0, 0.0)), 300.0);
        assert_eq!(pose_distance(&p(0.0, 0.0, 0.0), &p(3.0, 4.0, 0.0)), 5.0);
    }

    #[test]
    fn corner_angle_examples() {
        let o = p(0.0, 0.0, 0.0);
        assert_eq!(corner_angle(&o, &p(1.0, 0.0, 0.0), &p(2.0, 0.0, 0.0)).unwrap(), 0.0);
        let right = corner_angle(&o, &p(10.0, 0.0, 0.0), &p(10.0, 10.0, 0.0)).unwrap();
        assert!((right - FRAC_PI_2).abs() < 1e-15);
        let back = corner_angle(&o, &p(10.0, 0.0, 0.0), &o).unwrap();
        assert!((back - PI).abs() < 1e-15);
    }

    #[test]
    fn corner_angle_rejects_zero_length() {
        let o = p(0.0, 0.0, 0.0);
        assert_eq!(corner_angle(&o, &o, &p(1.0, 0.0, 0.0)), Err(GeometryError::DegenerateSegment));
        assert_eq!(
            corner_angle(&o, &p(1.0, 0.0, 0.0), &p(1.0, 0.0, 0.0)),
            Err(GeometryError::DegenerateSegment)
        );
    }

    #[test]
    fn pose_rejects_non_finite_and_wraps_angles() {
        assert!(Pose::new(f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(Pose::new(0.0, 0.0, 0.0, f64::INFINITY, 0.0, 0.0).is_err());
        let q = Pose::new(0.0, 0.0, 0.0, 180.0, 540.0, -190.0).unwrap();
        assert_eq!((q.a(), q.b(), q.c()), (-180.0, -180.0, 170.0));
        assert!(JointTarget::new([0.0, f64::NAN, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn normalized_angles_in_range(deg in -1e6f64..1e6) {
            let n = normalize_degrees(deg);
            prop_assert!((-180.0..180.0).contains(&n));
        }

        #[test]
        fn corner_angle_invariant_under_rigid_motion(
            pts in prop::array::uniform9(-500.0f64..500.0),
            axis in prop::array::uniform3(-1.0f64..1.0),
            angle in -PI..PI,
            shift in prop::array::uniform3(-1e3f64..1e3),
        ) {
            let a = Vector3::new(pts[0], pts[1], pts[2]);
            let b = Vector3::new(pts[3], pts[4], pts[5]);
            let c = Vector3::new(pts[6], pts[7], pts[8]);
            prop_assume!((b - a).norm() > 1e-3 && (c - b).norm() > 1e-3);
            let axis = Vector3::new(axis[0], axis[1], axis[2]);
            prop_assume!(axis.norm() > 1e-3);
            let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
            let t = Vector3::new(shift[0], shift[1], shift[2]);
            let mv = |v: Vector3<f64>| {
                let w = rot * v + t;
                Pose::at(w.x, w.y, w.z).unwrap()
            };
            let before = corner_angle(&p(a.x, a.y, a.z), &p(b.x, b.y, b.z), &p(c.x, c.y, c.z)).unwrap();
            let after = corner_angle(&mv(a), &mv(b), &mv(c)).unwrap();
            prop_assert!((0.0..=PI).contains(&before));
            prop_assert!((before - after).abs() < 1e-9, "{before} vs {after}");
        }
    }
}
