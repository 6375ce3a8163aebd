//! Builder for synthetic operator sessions.

use crate::kinematics::Side;
use crate::messages::{
    Envelope, FixtureConfigMsg, Float64Msg, GrabMsg, Header, Payload, Pose, Stamp, StampedPose,
    UnitQuaternion, Vec3,
};

use super::log::{Direction, LogRecord, SessionLog};
use super::sim::{grab_topic, hand_topic, FIXTURES_TOPIC, SCALE_TOPIC, WORLD_FRAME};

/// Scripts an operator: grabs, hand streams, scale and fixture changes.
#[derive(Debug, Clone, Default)]
pub struct Script {
    records: Vec<LogRecord>,
    seq: u64,
}

impl Script {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, t: f64, topic: String, schema: &str, msg: Payload) {
        self.records.push(LogRecord {
            t_mono: t,
            direction: Direction::In,
            envelope: Envelope::publish(topic, msg).with_schema(schema),
        });
    }

    pub fn grab(&mut self, t: f64, side: Side, grabbed: bool) -> &mut Self {
        self.push(
            t,
            grab_topic(side),
            "Grab",
            Payload::Grab(GrabMsg { grabbed }),
        );
        self
    }

    pub fn hand(&mut self, t: f64, side: Side, pose: Pose) -> &mut Self {
        self.seq += 1;
        let msg = StampedPose {
            header: Header::new(self.seq, Stamp::from_secs_f64(t), WORLD_FRAME),
            pose,
        };
        self.push(
            t,
            hand_topic(side),
            "PoseStamped",
            Payload::PoseStamped(msg),
        );
        self
    }

    pub fn scale(&mut self, t: f64, s: f64) -> &mut Self {
        self.push(
            t,
            SCALE_TOPIC.into(),
            "Float64",
            Payload::Float64(Float64Msg { data: s }),
        );
        self
    }

    pub fn fixtures(&mut self, t: f64, msg: FixtureConfigMsg) -> &mut Self {
        self.push(
            t,
            FIXTURES_TOPIC.into(),
            "FixtureConfig",
            Payload::FixtureConfig(msg),
        );
        self
    }

    /// Hand samples at `rate` Hz moving linearly from `from` to `to` over
    /// `duration` seconds starting at `t0`, both endpoints included.
    /// Returns the time of the last sample.
    pub fn drag(
        &mut self,
        side: Side,
        t0: f64,
        from: Vec3,
        to: Vec3,
        duration: f64,
        rate: f64,
    ) -> f64 {
        let n = (duration * rate).round().max(1.0) as u64;
        for k in 0..=n {
            let s = k as f64 / n as f64;
            let p = from + (to - from) * s;
            self.hand(
                t0 + duration * s,
                side,
                Pose::new(p, UnitQuaternion::IDENTITY),
            );
        }
        t0 + duration
    }

    /// Hand held still at `at`, streaming at `rate` Hz for `duration` s,
    /// first sample one period after `t0`.
    pub fn hold(&mut self, side: Side, t0: f64, at: Vec3, duration: f64, rate: f64) -> f64 {
        let n = (duration * rate).round() as u64;
        for k in 1..=n {
            self.hand(
                t0 + k as f64 / rate,
                side,
                Pose::new(at, UnitQuaternion::IDENTITY),
            );
        }
        t0 + n as f64 / rate
    }

    /// The session, ordered by time (ties keep insertion order).
    pub fn build(&self) -> SessionLog {
        let mut records = self.records.clone();
        records.sort_by(|a, b| a.t_mono.total_cmp(&b.t_mono));
        SessionLog { records }
    }
}

/// Grab at `t = 0`, drag the hand by `displacement` over `duration`, then
/// keep the hand still (still streaming) for `hold` seconds.
pub fn grab_drag_hold(side: Side, displacement: Vec3, duration: f64, hold: f64) -> SessionLog {
    const RATE: f64 = 30.0;
    let mut s = Script::new();
    s.hand(0.0, side, Pose::IDENTITY);
    s.grab(0.0, side, true);
    let end = s.drag(side, 1.0 / RATE, Vec3::ZERO, displacement, duration, RATE);
    s.hold(side, end, displacement, hold, RATE);
    s.build()
}
