//! Vector and rotation primitives shared by every other module.
//!
//! Quaternions use the Hamilton convention with the scalar part named `w`.
//! A [`UnitQuaternion`] always carries the representative with `w >= 0`, so
//! two values describing the same rotation compare equal (except on the
//! `w == 0` great circle, where both signs remain valid).

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Three real components. Units depend on use: m, m/s or rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn is_zero(self) -> bool {
        self.x == 0.0 && self.y == 0.0 && self.z == 0.0
    }

    /// Scales the vector down so its norm does not exceed `max`.
    pub fn clamp_norm(self, max: f64) -> Vec3 {
        let n = self.norm();
        if n > max && n > 0.0 {
            self * (max / n)
        } else {
            self
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, rhs: Vec3) {
        *self = *self + rhs;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuatError {
    #[error("quaternion has non-finite components")]
    NonFinite,
    #[error("quaternion norm {0} is not unit")]
    NotUnit(f64),
    #[error("zero-norm quaternion")]
    Zero,
}

/// Wire tolerance on `|q| - 1` accepted by [`UnitQuaternion::from_wire`].
pub const WIRE_UNIT_TOLERANCE: f64 = 1e-6;

/// Rotation stored as a unit quaternion with a non-negative scalar part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuatWire", into = "QuatWire")]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

/// Raw quaternion as it appears on the wire, `(x, y, z, w)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuatWire {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl TryFrom<QuatWire> for UnitQuaternion {
    type Error = QuatError;

    fn try_from(q: QuatWire) -> Result<Self, Self::Error> {
        UnitQuaternion::from_wire(q.w, q.x, q.y, q.z)
    }
}

impl From<UnitQuaternion> for QuatWire {
    fn from(q: UnitQuaternion) -> Self {
        QuatWire {
            x: q.x,
            y: q.y,
            z: q.z,
            w: q.w,
        }
    }
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes arbitrary (non-zero, finite) components.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, QuatError> {
        if !(w.is_finite() && x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(QuatError::NonFinite);
        }
        let n2 = w * w + x * x + y * y + z * z;
        if n2 == 0.0 {
            return Err(QuatError::Zero);
        }
        Ok(Self::canonical(w, x, y, z))
    }

    /// Accepts components that are unit within [`WIRE_UNIT_TOLERANCE`].
    /// Values already unit within 1e-9 keep their exact bits (up to sign).
    pub fn from_wire(w: f64, x: f64, y: f64, z: f64) -> Result<Self, QuatError> {
        if !(w.is_finite() && x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(QuatError::NonFinite);
        }
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if (n - 1.0).abs() > WIRE_UNIT_TOLERANCE {
            return Err(QuatError::NotUnit(n));
        }
        Ok(Self::canonical(w, x, y, z))
    }

    /// Renormalizes only when the norm has drifted, then picks `w >= 0`.
    fn canonical(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n2 = w * w + x * x + y * y + z * z;
        let (w, x, y, z) = if (n2 - 1.0).abs() > 1e-12 {
            let n = n2.sqrt();
            (w / n, x / n, y / n, z / n)
        } else {
            (w, x, y, z)
        };
        if w < 0.0 {
            Self {
                w: -w,
                x: -x,
                y: -y,
                z: -z,
            }
        } else {
            Self { w, x, y, z }
        }
    }

    /// Rotation of `angle` rad about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (angle / 2.0).sin_cos();
        let a = axis * (1.0 / n);
        Self::canonical(c, a.x * s, a.y * s, a.z * s)
    }

    /// Rotation whose axis is the direction of `v` and angle is `|v|`.
    pub fn from_rotation_vector(v: Vec3) -> Self {
        Self::from_axis_angle(v, v.norm())
    }

    pub fn rotz(angle: f64) -> Self {
        Self::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), angle)
    }

    pub fn rotx(angle: f64) -> Self {
        Self::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), angle)
    }

    pub fn w(&self) -> f64 {
        self.w
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

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn conj(&self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Rotates `v` by this quaternion.
    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }
}

/// Hamilton product `a * b`, i.e. the rotation `b` followed by `a`.
pub fn quat_mul(a: UnitQuaternion, b: UnitQuaternion) -> UnitQuaternion {
    let w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z;
    let x = a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y;
    let y = a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x;
    let z = a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w;
    UnitQuaternion::canonical(w, x, y, z)
}

/// Axis-angle vector of `target * conj(current)`, shortest path (angle in [0, pi]).
pub fn quat_error(target: UnitQuaternion, current: UnitQuaternion) -> Vec3 {
    let r = quat_mul(target, current.conj());
    // quat_mul already returns w >= 0, which selects the short way round.
    let v = Vec3::new(r.x, r.y, r.z);
    let s = v.norm();
    if s < 1e-12 {
        // sin(a/2) ~ a/2 for tiny angles
        return v * 2.0;
    }
    let angle = 2.0 * s.atan2(r.w);
    v * (angle / s)
}

/// Position plus orientation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: UnitQuaternion,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        position: Vec3::ZERO,
        orientation: UnitQuaternion::IDENTITY,
    };

    pub fn new(position: Vec3, orientation: UnitQuaternion) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
    }

    /// Composition `self * other` (other expressed in self's frame).
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            position: self.position + self.orientation.rotate(other.position),
            orientation: quat_mul(self.orientation, other.orientation),
        }
    }
}
