//! Payload schemas carried in the `msg` field of a publish envelope.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::geometry::{Pose, Vec3};

/// Built-in schema names, as carried in the envelope `type` field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemaName {
    PoseStamped,
    JointState,
    Twist,
    Grab,
    Float64,
    FixtureConfig,
    PointCloud,
}

impl SchemaName {
    pub const ALL: [SchemaName; 7] = [
        SchemaName::PoseStamped,
        SchemaName::JointState,
        SchemaName::Twist,
        SchemaName::Grab,
        SchemaName::Float64,
        SchemaName::FixtureConfig,
        SchemaName::PointCloud,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemaName::PoseStamped => "PoseStamped",
            SchemaName::JointState => "JointState",
            SchemaName::Twist => "Twist",
            SchemaName::Grab => "Grab",
            SchemaName::Float64 => "Float64",
            SchemaName::FixtureConfig => "FixtureConfig",
            SchemaName::PointCloud => "PointCloud",
        }
    }
}

impl fmt::Display for SchemaName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemaName {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchemaName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or(())
    }
}

/// A payload rule violation, with the dotted path of the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    NonFinite,
    Rule(String),
}

impl Violation {
    fn non_finite(path: impl Into<String>) -> Self {
        Violation {
            path: path.into(),
            kind: ViolationKind::NonFinite,
        }
    }

    fn rule(path: impl Into<String>, why: impl Into<String>) -> Self {
        Violation {
            path: path.into(),
            kind: ViolationKind::Rule(why.into()),
        }
    }
}

fn finite(v: f64, path: &str) -> Result<(), Violation> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Violation::non_finite(path))
    }
}

fn finite_vec3(v: Vec3, path: &str) -> Result<(), Violation> {
    finite(v.x, &format!("{path}.x"))?;
    finite(v.y, &format!("{path}.y"))?;
    finite(v.z, &format!("{path}.z"))
}

fn finite_slice(vs: &[f64], path: &str) -> Result<(), Violation> {
    match vs.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Violation::non_finite(format!("{path}[{i}]"))),
        None => Ok(()),
    }
}

/// Checks that a typed payload satisfies its field rules.
pub trait Validate {
    fn validate(&self) -> Result<(), Violation>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stamp {
    pub sec: i64,
    pub nanosec: u32,
}

impl Stamp {
    pub fn from_secs_f64(t: f64) -> Self {
        let sec = t.floor();
        let nanosec = (((t - sec) * 1e9).round() as u32).min(999_999_999);
        Stamp {
            sec: sec as i64,
            nanosec,
        }
    }

    pub fn as_secs_f64(&self) -> f64 {
        self.sec as f64 + self.nanosec as f64 * 1e-9
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub seq: u64,
    pub stamp: Stamp,
    pub frame_id: String,
}

impl Header {
    pub fn new(seq: u64, stamp: Stamp, frame_id: impl Into<String>) -> Self {
        Header {
            seq,
            stamp,
            frame_id: frame_id.into(),
        }
    }
}

impl Validate for Header {
    fn validate(&self) -> Result<(), Violation> {
        if self.stamp.nanosec >= 1_000_000_000 {
            return Err(Violation::rule("header.stamp.nanosec", "must be < 1e9"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StampedPose {
    pub header: Header,
    pub pose: Pose,
}

impl Validate for StampedPose {
    fn validate(&self) -> Result<(), Violation> {
        self.header.validate()?;
        finite_vec3(self.pose.position, "pose.position")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointStateMsg {
    pub header: Header,
    pub name: Vec<String>,
    pub position: Vec<f64>,
    #[serde(default)]
    pub velocity: Vec<f64>,
    #[serde(default)]
    pub effort: Vec<f64>,
}

impl Validate for JointStateMsg {
    fn validate(&self) -> Result<(), Violation> {
        self.header.validate()?;
        let n = self.name.len();
        if self.position.len() != n {
            return Err(Violation::rule(
                "position",
                format!("{} positions for {n} names", self.position.len()),
            ));
        }
        for (field, vals) in [("velocity", &self.velocity), ("effort", &self.effort)] {
            if !vals.is_empty() && vals.len() != n {
                return Err(Violation::rule(
                    field,
                    format!("{} values for {n} names", vals.len()),
                ));
            }
        }
        finite_slice(&self.position, "position")?;
        finite_slice(&self.velocity, "velocity")?;
        finite_slice(&self.effort, "effort")
    }
}

/// End-effector velocity command: linear m/s, angular rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistCommand {
    pub linear: Vec3,
    pub angular: Vec3,
}

impl TwistCommand {
    pub const ZERO: TwistCommand = TwistCommand {
        linear: Vec3::ZERO,
        angular: Vec3::ZERO,
    };

    pub fn is_zero(&self) -> bool {
        self.linear.is_zero() && self.angular.is_zero()
    }

    /// True when both parts respect the given norm bounds.
    pub fn within(&self, max_lin: f64, max_ang: f64) -> bool {
        self.linear.norm() <= max_lin && self.angular.norm() <= max_ang
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.linear.x,
            self.linear.y,
            self.linear.z,
            self.angular.x,
            self.angular.y,
            self.angular.z,
        ]
    }
}

impl Validate for TwistCommand {
    fn validate(&self) -> Result<(), Violation> {
        finite_vec3(self.linear, "linear")?;
        finite_vec3(self.angular, "angular")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrabMsg {
    pub grabbed: bool,
}

impl Validate for GrabMsg {
    fn validate(&self) -> Result<(), Violation> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Float64Msg {
    pub data: f64,
}

impl Validate for Float64Msg {
    fn validate(&self) -> Result<(), Violation> {
        finite(self.data, "data")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixtureMode {
    Forbidden,
    Guidance,
}

fn default_tol() -> f64 {
    0.001
}

fn default_k_attract() -> f64 {
    2.0
}

fn default_enabled() -> bool {
    true
}

/// One plane as carried on `/teleop/fixtures`. The normal is checked and
/// renormalized when the fixture set is rebuilt, not here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSpec {
    pub point: Vec3,
    pub normal: Vec3,
    pub mode: FixtureMode,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_k_attract")]
    pub k_attract: f64,
    #[serde(default = "default_enabled")]
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureConfigMsg {
    pub fixtures: Vec<FixtureSpec>,
}

impl Validate for FixtureConfigMsg {
    fn validate(&self) -> Result<(), Violation> {
        for (i, f) in self.fixtures.iter().enumerate() {
            let p = format!("fixtures[{i}]");
            finite_vec3(f.point, &format!("{p}.point"))?;
            finite_vec3(f.normal, &format!("{p}.normal"))?;
            finite(f.tol, &format!("{p}.tol"))?;
            finite(f.k_attract, &format!("{p}.k_attract"))?;
            if f.tol < 0.0 {
                return Err(Violation::rule(format!("{p}.tol"), "must be >= 0"));
            }
            if f.k_attract < 0.0 {
                return Err(Violation::rule(format!("{p}.k_attract"), "must be >= 0"));
            }
        }
        Ok(())
    }
}

/// One chunk of a point-cloud frame on `/cloud/points`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointCloudChunk {
    pub header: Header,
    pub frame_seq: u64,
    pub chunk: u32,
    pub of: u32,
    pub last: bool,
    pub points: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colors: Option<Vec<[u8; 3]>>,
}

impl Validate for PointCloudChunk {
    fn validate(&self) -> Result<(), Violation> {
        self.header.validate()?;
        if self.of == 0 || self.chunk >= self.of {
            return Err(Violation::rule("chunk", "chunk index must be < of"));
        }
        if self.last != (self.chunk + 1 == self.of) {
            return Err(Violation::rule("last", "set exactly on the final chunk"));
        }
        if let Some(c) = &self.colors {
            if c.len() != self.points.len() {
                return Err(Violation::rule("colors", "length differs from points"));
            }
        }
        for (i, p) in self.points.iter().enumerate() {
            finite_slice(p, &format!("points[{i}]"))?;
        }
        Ok(())
    }
}
