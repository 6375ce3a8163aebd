//! Plane virtual fixtures acting on commanded twists.
//!
//! A forbidden plane removes the into-plane velocity component once the end
//! effector is within `tol` of the plane. A guidance plane projects the
//! velocity onto the plane and adds a spring term pulling the end effector
//! back onto it. Fixtures are applied in list order; angular velocity is
//! never touched.

use thiserror::Error;

use crate::messages::{FixtureConfigMsg, FixtureMode, FixtureSpec, Pose, TwistCommand, Vec3};

/// Accepted deviation of an incoming normal from unit length.
pub const NORMAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FixtureError {
    #[error("fixture {index}: normal has length {norm}, expected 1")]
    NonUnitNormal { index: usize, norm: f64 },
    #[error("fixture {index}: {reason}")]
    Invalid { index: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFixture {
    pub point: Vec3,
    normal: Vec3,
    pub mode: FixtureMode,
    pub tol: f64,
    pub k_attract: f64,
    pub enabled: bool,
}

impl PlaneFixture {
    /// Builds a fixture; `normal` must be unit within [`NORMAL_TOLERANCE`]
    /// and is renormalized.
    pub fn new(point: Vec3, normal: Vec3, mode: FixtureMode) -> Result<Self, FixtureError> {
        Self::from_spec(
            0,
            &FixtureSpec {
                point,
                normal,
                mode,
                tol: 0.001,
                k_attract: 2.0,
                enabled: true,
            },
        )
    }

    fn from_spec(index: usize, s: &FixtureSpec) -> Result<Self, FixtureError> {
        if !s.point.is_finite() || !s.normal.is_finite() {
            return Err(FixtureError::Invalid {
                index,
                reason: "non-finite geometry".into(),
            });
        }
        let norm = s.normal.norm();
        if (norm - 1.0).abs() > NORMAL_TOLERANCE {
            return Err(FixtureError::NonUnitNormal { index, norm });
        }
        if !(s.tol.is_finite() && s.tol >= 0.0) {
            return Err(FixtureError::Invalid {
                index,
                reason: "tol must be finite and >= 0".into(),
            });
        }
        if !(s.k_attract.is_finite() && s.k_attract >= 0.0) {
            return Err(FixtureError::Invalid {
                index,
                reason: "k_attract must be finite and >= 0".into(),
            });
        }
        Ok(PlaneFixture {
            point: s.point,
            normal: s.normal * (1.0 / norm),
            mode: s.mode,
            tol: s.tol,
            k_attract: s.k_attract,
            enabled: s.enabled,
        })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol.max(0.0);
        self
    }

    pub fn with_k_attract(mut self, k: f64) -> Self {
        self.k_attract = k.max(0.0);
        self
    }

    pub fn with_enabled(mut self, enabled: bool) -> Self {
        self.enabled = enabled;
        self
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn to_spec(&self) -> FixtureSpec {
        FixtureSpec {
            point: self.point,
            normal: self.normal,
            mode: self.mode,
            tol: self.tol,
            k_attract: self.k_attract,
            enabled: self.enabled,
        }
    }

    /// Distance from the plane, positive on the side the normal points to.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p - self.point)
    }

    /// Applies this fixture's rule to a linear velocity at position `p`.
    pub fn apply(&self, p: Vec3, v: Vec3, max_lin: f64) -> Vec3 {
        if !self.enabled {
            return v;
        }
        let n = self.normal;
        let d = self.signed_distance(p);
        match self.mode {
            FixtureMode::Forbidden => {
                let vn = v.dot(n);
                if d <= self.tol && vn < 0.0 {
                    v - n * vn
                } else {
                    v
                }
            }
            FixtureMode::Guidance => {
                let projected = v - n * v.dot(n);
                (projected - n * (self.k_attract * d)).clamp_norm(max_lin)
            }
        }
    }
}

pub fn signed_distance(f: &PlaneFixture, p: Vec3) -> f64 {
    f.signed_distance(p)
}

/// Ordered list of fixtures.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixtureSet {
    fixtures: Vec<PlaneFixture>,
}

impl FixtureSet {
    pub fn new(fixtures: Vec<PlaneFixture>) -> Self {
        FixtureSet { fixtures }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PlaneFixture> {
        self.fixtures.iter()
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }

    /// Enabled forbidden planes, for penetration metrics.
    pub fn forbidden(&self) -> impl Iterator<Item = &PlaneFixture> {
        self.fixtures
            .iter()
            .filter(|f| f.enabled && f.mode == FixtureMode::Forbidden)
    }

    pub fn from_msg(msg: &FixtureConfigMsg) -> Result<Self, FixtureError> {
        let fixtures = msg
            .fixtures
            .iter()
            .enumerate()
            .map(|(i, s)| PlaneFixture::from_spec(i, s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FixtureSet { fixtures })
    }

    pub fn to_msg(&self) -> FixtureConfigMsg {
        FixtureConfigMsg {
            fixtures: self.fixtures.iter().map(PlaneFixture::to_spec).collect(),
        }
    }
}

/// Passes the linear part of `cmd` through every enabled fixture in order.
pub fn filter_twist(fs: &FixtureSet, ee: &Pose, cmd: TwistCommand, max_lin: f64) -> TwistCommand {
    let linear = fs
        .iter()
        .fold(cmd.linear, |v, f| f.apply(ee.position, v, max_lin));
    TwistCommand {
        linear,
        angular: cmd.angular,
    }
}

/// Replaces `fs` with the set described by `msg` in one step. On error `fs`
/// is left untouched.
pub fn update_fixtures(fs: &mut FixtureSet, msg: &FixtureConfigMsg) -> Result<(), FixtureError> {
    *fs = FixtureSet::from_msg(msg)?;
    Ok(())
}
