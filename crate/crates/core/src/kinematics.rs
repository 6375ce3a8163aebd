//! Serial-chain kinematics for the hot-box arms.
//!
//! Chains use standard Denavit-Hartenberg parameters: each row contributes
//! `Rz(q + theta_offset) * Tz(d) * Tx(a) * Rx(alpha)`, composed onto the
//! chain's mount pose in the world frame. Only revolute joints exist.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::messages::{quat_mul, Pose, TwistCommand, UnitQuaternion, Vec3};

/// Eigenvalue floor below which the damped system counts as singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-10;

/// Default damping factor for [`dls`].
pub const DEFAULT_DAMPING: f64 = 0.05;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("damped system is singular (min eigenvalue {0:e})")]
    Singular(f64),
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("joint {joint} = {value} outside [{min}, {max}]")]
    OutOfLimits {
        joint: usize,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("chain file {path}: {reason}")]
    ChainFile { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    #[default]
    Revolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointLimits {
    pub min: f64,
    pub max: f64,
}

impl JointLimits {
    pub fn clamp(&self, q: f64) -> f64 {
        q.clamp(self.min, self.max)
    }

    pub fn contains(&self, q: f64) -> bool {
        q >= self.min && q <= self.max
    }
}

/// One DH row plus joint limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DHRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    #[serde(default)]
    pub theta_offset: f64,
    #[serde(default)]
    pub joint: JointKind,
    pub limits: JointLimits,
    pub vel_limit: f64,
}

impl DHRow {
    /// Link transform for joint value `q`.
    pub fn transform(&self, q: f64) -> Pose {
        let theta = q + self.theta_offset;
        let (st, ct) = theta.sin_cos();
        Pose {
            position: Vec3::new(self.a * ct, self.a * st, self.d),
            orientation: quat_mul(
                UnitQuaternion::rotz(theta),
                UnitQuaternion::rotx(self.alpha),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicChain {
    pub name: String,
    pub base_pose: Pose,
    pub rows: Vec<DHRow>,
}

impl KinematicChain {
    pub fn new(
        name: impl Into<String>,
        base_pose: Pose,
        rows: Vec<DHRow>,
    ) -> Result<Self, KinematicsError> {
        let chain = KinematicChain {
            name: name.into(),
            base_pose,
            rows,
        };
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        if self.rows.is_empty() {
            return Err(KinematicsError::InvalidChain("chain has no rows".into()));
        }
        if !self.base_pose.position.is_finite() {
            return Err(KinematicsError::InvalidChain(
                "non-finite base position".into(),
            ));
        }
        for (i, r) in self.rows.iter().enumerate() {
            let finite = [
                r.a,
                r.alpha,
                r.d,
                r.theta_offset,
                r.limits.min,
                r.limits.max,
                r.vel_limit,
            ]
            .iter()
            .all(|v| v.is_finite());
            if !finite {
                return Err(KinematicsError::InvalidChain(format!(
                    "row {i}: non-finite value"
                )));
            }
            if r.limits.min >= r.limits.max {
                return Err(KinematicsError::InvalidChain(format!(
                    "row {i}: min >= max"
                )));
            }
            if r.vel_limit <= 0.0 {
                return Err(KinematicsError::InvalidChain(format!(
                    "row {i}: vel_limit <= 0"
                )));
            }
        }
        Ok(())
    }

    pub fn dof(&self) -> usize {
        self.rows.len()
    }

    pub fn vel_limits(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.vel_limit).collect()
    }

    /// Two unit links in the xy plane, identity mount. Used as an oracle chain.
    pub fn planar2() -> Self {
        let row = DHRow {
            a: 1.0,
            alpha: 0.0,
            d: 0.0,
            theta_offset: 0.0,
            joint: JointKind::Revolute,
            limits: JointLimits { min: -PI, max: PI },
            vel_limit: 10.0,
        };
        KinematicChain {
            name: "planar2".into(),
            base_pose: Pose::IDENTITY,
            rows: vec![row, row],
        }
    }

    /// Seven-joint arm with Gen3-class joint layout and link lengths shortened
    /// to fit the box, hung top-down from the lid of a 1.0 x 0.6 x 0.8 m box
    /// at `x = ±0.3`.
    pub fn hotbox7(side: Side) -> Self {
        let big = 1.39;
        let small = 1.22;
        let row = |alpha: f64, d: f64, lim: f64, vel: f64| DHRow {
            a: 0.0,
            alpha,
            d,
            theta_offset: 0.0,
            joint: JointKind::Revolute,
            limits: JointLimits {
                min: -lim,
                max: lim,
            },
            vel_limit: vel,
        };
        let h = PI / 2.0;
        let rows = vec![
            row(-h, 0.20, PI, big),
            row(h, 0.0, 2.25, big),
            row(h, 0.30, PI, big),
            row(-h, 0.0, 2.58, big),
            row(-h, 0.25, PI, small),
            row(h, 0.0, 2.10, small),
            row(0.0, 0.12, PI, small),
        ];
        let x = match side {
            Side::Left => -0.3,
            Side::Right => 0.3,
        };
        KinematicChain {
            name: format!("hotbox7_{}", side.as_str()),
            base_pose: Pose::new(Vec3::new(x, 0.0, 0.8), UnitQuaternion::rotx(PI)),
            rows,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, KinematicsError> {
        let chain: KinematicChain =
            serde_json::from_str(text).map_err(|e| KinematicsError::InvalidChain(e.to_string()))?;
        chain.validate()?;
        Ok(chain)
    }

    pub fn load(path: &Path) -> Result<Self, KinematicsError> {
        let text = fs::read_to_string(path).map_err(|e| KinematicsError::ChainFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|e| KinematicsError::ChainFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chain serializes")
    }

    fn check_dim(&self, q: &[f64]) -> Result<(), KinematicsError> {
        if q.len() != self.rows.len() {
            return Err(KinematicsError::Dimension {
                expected: self.rows.len(),
                got: q.len(),
            });
        }
        Ok(())
    }

    /// Joint configuration the hotbox arms start in: elbow bent, wrist
    /// pointing down, well away from singularities.
    pub fn home(&self) -> Vec<f64> {
        if self.rows.len() == 7 {
            vec![PI / 2.0, 0.6, 0.0, 1.9, 0.0, 1.4, 0.0]
        } else {
            vec![0.0; self.rows.len()]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(format!("unknown arm {other:?}, expected left or right")),
        }
    }
}

/// World-frame pose of every joint frame: entry 0 is the mount, entry `i`
/// is frame `i` (after joint `i`), the last entry is the end effector.
pub fn frames(chain: &KinematicChain, q: &[f64]) -> Result<Vec<Pose>, KinematicsError> {
    chain.check_dim(q)?;
    let mut out = Vec::with_capacity(q.len() + 1);
    let mut t = chain.base_pose;
    out.push(t);
    for (row, &qi) in chain.rows.iter().zip(q) {
        t = t.compose(&row.transform(qi));
        out.push(t);
    }
    Ok(out)
}

/// End-effector pose in the world frame.
pub fn fk(chain: &KinematicChain, q: &[f64]) -> Result<Pose, KinematicsError> {
    Ok(*frames(chain, q)?.last().expect("at least the base frame"))
}

/// 6 x n geometric Jacobian; rows are linear xyz then angular xyz.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian(pub DMatrix<f64>);

impl Jacobian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    /// Keeps only the listed task rows (e.g. `[0, 1]` for planar xy motion).
    pub fn select_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        self.0.select_rows(rows)
    }
}

pub fn jacobian(chain: &KinematicChain, q: &[f64]) -> Result<Jacobian, KinematicsError> {
    let fr = frames(chain, q)?;
    let n = q.len();
    let p_ee = fr[n].position;
    let mut j = DMatrix::zeros(6, n);
    for i in 0..n {
        let z = fr[i].orientation.rotate(Vec3::new(0.0, 0.0, 1.0));
        let lin = z.cross(p_ee - fr[i].position);
        for (r, v) in [lin.x, lin.y, lin.z, z.x, z.y, z.z].into_iter().enumerate() {
            j[(r, i)] = v;
        }
    }
    Ok(Jacobian(j))
}

/// Damped least squares on the full twist: `J^T (J J^T + lambda^2 I)^-1 v`,
/// then uniformly scaled to respect `vel_limits`.
pub fn dls(
    jac: &Jacobian,
    twist: &TwistCommand,
    lambda: f64,
    vel_limits: &[f64],
) -> Result<Vec<f64>, KinematicsError> {
    let v = DVector::from_row_slice(&twist.to_array());
    dls_task(jac.matrix(), &v, lambda, vel_limits)
}

/// [`dls`] for an arbitrary m x n task matrix.
pub fn dls_task(
    j: &DMatrix<f64>,
    v: &DVector<f64>,
    lambda: f64,
    vel_limits: &[f64],
) -> Result<Vec<f64>, KinematicsError> {
    if v.len() != j.nrows() {
        return Err(KinematicsError::Dimension {
            expected: j.nrows(),
            got: v.len(),
        });
    }
    if vel_limits.len() != j.ncols() {
        return Err(KinematicsError::Dimension {
            expected: j.ncols(),
            got: vel_limits.len(),
        });
    }
    if v.iter().all(|x| *x == 0.0) {
        return Ok(vec![0.0; j.ncols()]);
    }
    let m = j.nrows();
    let a = j * j.transpose() + DMatrix::identity(m, m) * (lambda * lambda);
    let min_eig = a.clone().symmetric_eigenvalues().min();
    if min_eig < SINGULAR_TOLERANCE {
        return Err(KinematicsError::Singular(min_eig));
    }
    let y = a
        .cholesky()
        .ok_or(KinematicsError::Singular(min_eig))?
        .solve(v);
    let qdot = j.transpose() * y;
    let scale = qdot
        .iter()
        .zip(vel_limits)
        .filter(|(qd, lim)| qd.abs() > **lim)
        .map(|(qd, lim)| lim / qd.abs())
        .fold(1.0_f64, f64::min);
    Ok(qdot.iter().map(|qd| qd * scale).collect())
}

/// Joint configuration with its cached end-effector pose.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmState {
    q: Vec<f64>,
    qdot: Vec<f64>,
    ee: Pose,
}

impl ArmState {
    pub fn new(chain: &KinematicChain, q: Vec<f64>) -> Result<Self, KinematicsError> {
        chain.check_dim(&q)?;
        for (i, (row, &v)) in chain.rows.iter().zip(&q).enumerate() {
            if !row.limits.contains(v) {
                return Err(KinematicsError::OutOfLimits {
                    joint: i,
                    value: v,
                    min: row.limits.min,
                    max: row.limits.max,
                });
            }
        }
        let ee = fk(chain, &q)?;
        let n = q.len();
        Ok(ArmState {
            q,
            qdot: vec![0.0; n],
            ee,
        })
    }

    pub fn home(chain: &KinematicChain) -> Self {
        Self::new(chain, chain.home()).expect("home configuration lies within limits")
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn qdot(&self) -> &[f64] {
        &self.qdot
    }

    pub fn ee(&self) -> &Pose {
        &self.ee
    }
}

/// Explicit Euler step with joint-limit clamping. Joints that end on a limit
/// report zero achieved velocity.
pub fn step(
    chain: &KinematicChain,
    state: &ArmState,
    qdot: &[f64],
    dt: f64,
) -> Result<ArmState, KinematicsError> {
    chain.check_dim(qdot)?;
    let mut q = Vec::with_capacity(qdot.len());
    let mut achieved = Vec::with_capacity(qdot.len());
    for ((row, &qi), &vi) in chain.rows.iter().zip(&state.q).zip(qdot) {
        let raw = qi + vi * dt;
        let clamped = row.limits.clamp(raw);
        q.push(clamped);
        achieved.push(if clamped == raw { vi } else { 0.0 });
    }
    let ee = if qdot.iter().all(|v| *v == 0.0) {
        state.ee
    } else {
        fk(chain, &q)?
    };
    Ok(ArmState {
        q,
        qdot: achieved,
        ee,
    })
}
