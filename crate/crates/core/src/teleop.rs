//! Clutched pose-to-twist teleoperation.
//!
//! While the operator holds the grab, the end effector servos toward a
//! virtual target: the latched end-effector pose displaced by the hand's
//! (scaled) motion since the grab. The servo is proportional, deadbanded and
//! norm-clamped, so every emitted twist respects `max_lin` / `max_ang`.
//!
//! Deadbands gate the start of motion. Once a component is moving it keeps
//! servoing until its error falls below `SETTLE_FRACTION * deadband`, so the
//! arm settles close to the target instead of stopping at the deadband edge.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::messages::{quat_error, quat_mul, Pose, StampedPose, TwistCommand, Vec3};

/// Fraction of the deadband at which an active servo component stops.
pub const SETTLE_FRACTION: f64 = 0.1;

/// Upper bound on the motion scale factor.
pub const MAX_SCALE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TeleopError {
    #[error("scale {0} rejected: must be finite and > 0")]
    BadScale(f64),
    #[error("invalid controller config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub kp_lin: f64,
    pub kp_ang: f64,
    pub max_lin: f64,
    pub max_ang: f64,
    pub deadband_lin: f64,
    pub deadband_ang: f64,
    pub scale: f64,
    pub stale_timeout: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            kp_lin: 2.0,
            kp_ang: 2.0,
            max_lin: 0.25,
            max_ang: 1.0,
            deadband_lin: 0.005,
            deadband_ang: 0.02,
            scale: 1.0,
            stale_timeout: 0.25,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), TeleopError> {
        let fields = [
            ("kp_lin", self.kp_lin),
            ("kp_ang", self.kp_ang),
            ("max_lin", self.max_lin),
            ("max_ang", self.max_ang),
            ("deadband_lin", self.deadband_lin),
            ("deadband_ang", self.deadband_ang),
            ("scale", self.scale),
            ("stale_timeout", self.stale_timeout),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(TeleopError::BadConfig(format!(
                    "{name} = {v} must be positive"
                )));
            }
        }
        if self.scale > MAX_SCALE {
            return Err(TeleopError::BadConfig(format!(
                "scale {} > {MAX_SCALE}",
                self.scale
            )));
        }
        Ok(())
    }
}

/// Grab latch plus the latest hand sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClutchState {
    pub engaged: bool,
    pub hand_latch: Pose,
    pub ee_latch: Pose,
    pub last_hand: Option<StampedPose>,
    /// Receive time of `last_hand`, in seconds.
    pub last_rx: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TeleopController {
    cfg: ControllerConfig,
    clutch: ClutchState,
    lin_active: bool,
    ang_active: bool,
}

impl TeleopController {
    pub fn new(cfg: ControllerConfig) -> Result<Self, TeleopError> {
        cfg.validate()?;
        Ok(TeleopController {
            cfg,
            clutch: ClutchState::default(),
            lin_active: false,
            ang_active: false,
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn clutch(&self) -> &ClutchState {
        &self.clutch
    }

    pub fn engaged(&self) -> bool {
        self.clutch.engaged
    }

    pub fn last_hand(&self) -> Option<&StampedPose> {
        self.clutch.last_hand.as_ref()
    }

    /// Latches (or re-latches) on grab; releases on `grabbed == false`.
    pub fn on_grab(&mut self, grabbed: bool, hand: Pose, ee: Pose) {
        self.lin_active = false;
        self.ang_active = false;
        if grabbed {
            self.clutch.engaged = true;
            self.clutch.hand_latch = hand;
            self.clutch.ee_latch = ee;
        } else {
            self.clutch.engaged = false;
        }
    }

    /// Records a hand sample unless it is older (by sequence) than the last.
    /// Returns whether the sample was kept.
    pub fn on_hand_sample(&mut self, sample: StampedPose, now: f64) -> bool {
        if let Some(last) = &self.clutch.last_hand {
            if sample.header.seq < last.header.seq {
                return false;
            }
        }
        self.clutch.last_hand = Some(sample);
        self.clutch.last_rx = Some(now);
        true
    }

    /// Engaged and the hand stream is fresh at `now`.
    pub fn is_live(&self, now: f64) -> bool {
        self.clutch.engaged
            && matches!(self.clutch.last_rx, Some(rx) if now - rx <= self.cfg.stale_timeout)
            && self.clutch.last_hand.is_some()
    }

    /// Virtual target pose, defined whenever engaged with a hand sample.
    pub fn target(&self) -> Option<Pose> {
        if !self.clutch.engaged {
            return None;
        }
        let hand = self.clutch.last_hand.as_ref()?.pose;
        let c = &self.clutch;
        let position =
            c.ee_latch.position + (hand.position - c.hand_latch.position) * self.cfg.scale;
        let hand_rot = quat_mul(hand.orientation, c.hand_latch.orientation.conj());
        let orientation = quat_mul(hand_rot, c.ee_latch.orientation);
        Some(Pose::new(position, orientation))
    }

    /// Twist driving `ee_now` toward the target; zero when released or stale.
    pub fn compute_twist(&mut self, ee_now: &Pose, now: f64) -> TwistCommand {
        if !self.is_live(now) {
            self.lin_active = false;
            self.ang_active = false;
            return TwistCommand::ZERO;
        }
        let Some(target) = self.target() else {
            return TwistCommand::ZERO;
        };
        let cfg = &self.cfg;
        let e_lin = target.position - ee_now.position;
        let e_ang = quat_error(target.orientation, ee_now.orientation);
        self.lin_active = gate(self.lin_active, e_lin.norm(), cfg.deadband_lin);
        self.ang_active = gate(self.ang_active, e_ang.norm(), cfg.deadband_ang);
        let linear = if self.lin_active {
            (e_lin * cfg.kp_lin).clamp_norm(cfg.max_lin)
        } else {
            Vec3::ZERO
        };
        let angular = if self.ang_active {
            (e_ang * cfg.kp_ang).clamp_norm(cfg.max_ang)
        } else {
            Vec3::ZERO
        };
        TwistCommand { linear, angular }
    }

    /// Sets the motion scale; values above [`MAX_SCALE`] are clamped.
    pub fn set_scale(&mut self, s: f64) -> Result<(), TeleopError> {
        if !s.is_finite() || s <= 0.0 {
            return Err(TeleopError::BadScale(s));
        }
        self.cfg.scale = s.min(MAX_SCALE);
        Ok(())
    }
}

fn gate(active: bool, err: f64, deadband: f64) -> bool {
    if active {
        err >= deadband * SETTLE_FRACTION
    } else {
        err >= deadband
    }
}
