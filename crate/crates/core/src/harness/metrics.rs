use serde::{Deserialize, Serialize};

use crate::kinematics::Side;
use crate::messages::{TwistCommand, Vec3};

/// What one arm did during one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    pub tick: u64,
    /// Logical time at the start of the tick, in seconds.
    pub t: f64,
    pub side: Side,
    pub engaged: bool,
    /// Engaged with a fresh hand stream.
    pub live: bool,
    /// Virtual target position while engaged.
    pub target: Option<Vec3>,
    /// End-effector position after the tick's step.
    pub ee: Vec3,
    /// Published (post-fixture) twist.
    pub twist: TwistCommand,
    /// Depth behind the deepest enabled forbidden plane, or 0.
    pub penetration: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMetrics {
    pub mean_tracking_error: f64,
    pub max_tracking_error: f64,
    pub max_penetration: f64,
    pub messages_in: u64,
    pub messages_out: u64,
    pub dropped: u64,
    pub ticks: u64,
}

impl RunMetrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

/// Tracking error over engaged ticks (0 when never engaged), penetration over
/// all ticks, and the number of distinct ticks. Message counters are left at
/// zero for the caller to fill in.
pub fn compute_metrics(ticks: &[TickRecord]) -> RunMetrics {
    let mut m = RunMetrics::default();
    let mut n = 0u64;
    let mut last_tick = None;
    for r in ticks {
        if last_tick != Some(r.tick) {
            m.ticks += 1;
            last_tick = Some(r.tick);
        }
        m.max_penetration = m.max_penetration.max(r.penetration);
        if let (true, Some(target)) = (r.engaged, r.target) {
            let e = (target - r.ee).norm();
            n += 1;
            // Running mean stays exact when every sample is equal.
            m.mean_tracking_error += (e - m.mean_tracking_error) / n as f64;
            m.max_tracking_error = m.max_tracking_error.max(e);
        }
    }
    m
}
