//! The tick loop: operator input in, arm motion and state out.

use crate::bridge::{Bridge, Session};
use crate::fixtures::{filter_twist, update_fixtures, FixtureSet};
use crate::kinematics::{dls, jacobian, step, ArmState, KinematicChain, KinematicsError, Side};
use crate::messages::{
    Envelope, GrabMsg, Header, JointStateMsg, Level, Op, Payload, Pose, SchemaName, Stamp,
    StampedPose, TwistCommand, Vec3,
};
use crate::teleop::TeleopController;

use super::config::ServerConfig;
use super::metrics::TickRecord;
use super::HarnessError;

pub const WORLD_FRAME: &str = "world";
pub const SCALE_TOPIC: &str = "/teleop/scale";
pub const FIXTURES_TOPIC: &str = "/teleop/fixtures";

pub fn hand_topic(side: Side) -> String {
    format!("/hand/{}", side.as_str())
}

pub fn grab_topic(side: Side) -> String {
    format!("/hand/{}/grab", side.as_str())
}

pub fn joint_states_topic(side: Side) -> String {
    format!("/arm/{}/joint_states", side.as_str())
}

pub fn ee_pose_topic(side: Side) -> String {
    format!("/arm/{}/ee_pose", side.as_str())
}

pub fn twist_topic(side: Side) -> String {
    format!("/arm/{}/twist_cmd", side.as_str())
}

struct Arm {
    side: Side,
    chain: KinematicChain,
    joint_names: Vec<String>,
    state: ArmState,
    ctrl: TeleopController,
    /// Grab received while the hand stream was stale; latches on the next
    /// fresh sample.
    pending_grab: bool,
    hand_topic: String,
    grab_topic: String,
    joint_topic: String,
    ee_topic: String,
    twist_topic: String,
}

impl Arm {
    fn on_grab(&mut self, grabbed: bool, now: f64) {
        if !grabbed {
            self.pending_grab = false;
            self.ctrl.on_grab(false, Pose::IDENTITY, *self.state.ee());
            return;
        }
        let fresh = self
            .ctrl
            .clutch()
            .last_rx
            .is_some_and(|rx| now - rx <= self.ctrl.config().stale_timeout);
        match self.ctrl.last_hand() {
            Some(h) if fresh => {
                let hand = h.pose;
                self.pending_grab = false;
                self.ctrl.on_grab(true, hand, *self.state.ee());
            }
            _ => self.pending_grab = true,
        }
    }

    fn on_hand(&mut self, sample: StampedPose, now: f64) {
        let pose = sample.pose;
        if self.ctrl.on_hand_sample(sample, now) && self.pending_grab {
            self.pending_grab = false;
            self.ctrl.on_grab(true, pose, *self.state.ee());
        }
    }
}

/// Counters for envelopes crossing the simulation's bridge session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimCounters {
    pub messages_in: u64,
    pub messages_out: u64,
}

/// Owns all arm, controller and fixture state. Talks to the rest of the
/// system only through its bridge session.
pub struct Simulation {
    bridge: Bridge,
    session: Session,
    arms: Vec<Arm>,
    fixtures: FixtureSet,
    damping: f64,
    dt: f64,
    publish_every: f64,
    tick: u64,
    seq: u64,
    counters: SimCounters,
}

impl Simulation {
    pub fn new(bridge: &Bridge, cfg: &ServerConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let mut arms = Vec::new();
        for side in Side::BOTH {
            let chain = cfg.chain(side)?;
            let joint_names = (1..=chain.dof())
                .map(|i| format!("{}_joint_{i}", side.as_str()))
                .collect();
            arms.push(Arm {
                side,
                state: ArmState::home(&chain),
                joint_names,
                chain,
                ctrl: TeleopController::new(cfg.controller(side))?,
                pending_grab: false,
                hand_topic: hand_topic(side),
                grab_topic: grab_topic(side),
                joint_topic: joint_states_topic(side),
                ee_topic: ee_pose_topic(side),
                twist_topic: twist_topic(side),
            });
        }
        let session = bridge.connect();
        let mut sim = Simulation {
            bridge: bridge.clone(),
            session,
            arms,
            fixtures: cfg.fixture_set(),
            damping: cfg.damping,
            dt: cfg.dt(),
            publish_every: cfg.tick_rate / cfg.joint_state_publish_rate,
            tick: 0,
            seq: 0,
            counters: SimCounters::default(),
        };
        sim.wire_up();
        Ok(sim)
    }

    fn wire_up(&mut self) {
        let s = &self.session;
        for arm in &self.arms {
            s.send(Envelope::advertise(&arm.joint_topic, "JointState"));
            s.send(Envelope::advertise(&arm.ee_topic, "PoseStamped"));
            s.send(Envelope::advertise(&arm.twist_topic, "Twist"));
            s.send(Envelope::subscribe(&arm.hand_topic).with_schema("PoseStamped"));
            s.send(Envelope::subscribe(&arm.grab_topic).with_schema("Grab"));
        }
        s.send(Envelope::subscribe(SCALE_TOPIC).with_schema("Float64"));
        s.send(Envelope::advertise(FIXTURES_TOPIC, "FixtureConfig"));
        let initial = Payload::FixtureConfig(self.fixtures.to_msg());
        self.publish(FIXTURES_TOPIC, initial.clone());
        self.session
            .send(Envelope::subscribe(FIXTURES_TOPIC).with_schema("FixtureConfig"));
        // The subscription replays the latch; skip our own initial set.
        if let Some(d) = self.session.try_recv() {
            if let Some(msg) = d.envelope.msg.clone().filter(|m| *m != initial) {
                self.counters.messages_in += 1;
                self.apply(FIXTURES_TOPIC, msg, 0.0);
            }
        }
        self.publish_state();
    }

    pub fn session_id(&self) -> u64 {
        self.session.id()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Logical time of the next tick, in seconds.
    pub fn now(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn ticks(&self) -> u64 {
        self.tick
    }

    pub fn counters(&self) -> SimCounters {
        self.counters
    }

    pub fn fixtures(&self) -> &FixtureSet {
        &self.fixtures
    }

    pub fn ee(&self, side: Side) -> Pose {
        *self.arm(side).state.ee()
    }

    pub fn q(&self, side: Side) -> &[f64] {
        self.arm(side).state.q()
    }

    pub fn controller(&self, side: Side) -> &TeleopController {
        &self.arm(side).ctrl
    }

    fn arm(&self, side: Side) -> &Arm {
        self.arms
            .iter()
            .find(|a| a.side == side)
            .expect("both arms exist")
    }

    fn publish(&mut self, topic: &str, msg: Payload) {
        self.session.send(Envelope::publish(topic, msg));
        self.counters.messages_out += 1;
    }

    fn next_header(&mut self, t: f64) -> Header {
        self.seq += 1;
        Header::new(self.seq, Stamp::from_secs_f64(t), WORLD_FRAME)
    }

    /// Publishes joint states and end-effector poses of both arms.
    pub fn publish_state(&mut self) {
        let t = self.now();
        for i in 0..self.arms.len() {
            let header = self.next_header(t);
            let arm = &self.arms[i];
            let js = JointStateMsg {
                header: header.clone(),
                name: arm.joint_names.clone(),
                position: arm.state.q().to_vec(),
                velocity: arm.state.qdot().to_vec(),
                effort: Vec::new(),
            };
            let pose = StampedPose {
                header,
                pose: *arm.state.ee(),
            };
            let (jt, et) = (arm.joint_topic.clone(), arm.ee_topic.clone());
            self.publish(&jt, Payload::JointState(js));
            self.publish(&et, Payload::PoseStamped(pose));
        }
    }

    fn drain_mailbox(&mut self, now: f64) {
        for d in self.session.recv_all() {
            let env = &d.envelope;
            if env.op != Op::Publish {
                if env.op == Op::Status && env.level == Some(Level::Error) {
                    tracing::warn!("bridge: {}", env.text.as_deref().unwrap_or(""));
                }
                continue;
            }
            self.counters.messages_in += 1;
            let topic = env.topic();
            let Some(msg) = env.msg.clone() else { continue };
            self.apply(topic, msg, now);
        }
    }

    fn apply(&mut self, topic: &str, msg: Payload, now: f64) {
        match msg {
            Payload::PoseStamped(p) => {
                if let Some(arm) = self.arms.iter_mut().find(|a| a.hand_topic == topic) {
                    arm.on_hand(p, now);
                }
            }
            Payload::Grab(GrabMsg { grabbed }) => {
                if let Some(arm) = self.arms.iter_mut().find(|a| a.grab_topic == topic) {
                    arm.on_grab(grabbed, now);
                }
            }
            Payload::Float64(f) if topic == SCALE_TOPIC => {
                for arm in &mut self.arms {
                    if let Err(e) = arm.ctrl.set_scale(f.data) {
                        self.bridge.broadcast_status(Level::Error, e.to_string());
                        break;
                    }
                }
            }
            Payload::FixtureConfig(m) if topic == FIXTURES_TOPIC => {
                if let Err(e) = update_fixtures(&mut self.fixtures, &m) {
                    self.bridge.broadcast_status(Level::Error, e.to_string());
                }
            }
            other => tracing::debug!(
                "ignoring {:?} on {topic}",
                other.schema().map(SchemaName::as_str)
            ),
        }
    }

    /// Runs one tick: drain input, servo both arms, publish twists and, at
    /// the publish rate, joint states and poses.
    pub fn tick(&mut self) -> Vec<TickRecord> {
        let now = self.now();
        self.drain_mailbox(now);
        let mut records = Vec::with_capacity(self.arms.len());
        let mut twists = Vec::with_capacity(self.arms.len());
        for arm in &mut self.arms {
            let ee = *arm.state.ee();
            let cfg = *arm.ctrl.config();
            let mut cmd = arm.ctrl.compute_twist(&ee, now);
            let live = arm.ctrl.is_live(now);
            if live {
                cmd = filter_twist(&self.fixtures, &ee, cmd, cfg.max_lin);
            }
            let qdot = match solve(&arm.chain, &arm.state, &cmd, self.damping) {
                Ok(v) => v,
                Err(e) => {
                    tracing::warn!(side = arm.side.as_str(), "holding: {e}");
                    vec![0.0; arm.chain.dof()]
                }
            };
            if let Ok(next) = step(&arm.chain, &arm.state, &qdot, self.dt) {
                arm.state = next;
            }
            let ee_after = arm.state.ee().position;
            let penetration = self
                .fixtures
                .forbidden()
                .map(|f| (-f.signed_distance(ee_after)).max(0.0))
                .fold(0.0, f64::max);
            records.push(TickRecord {
                tick: self.tick,
                t: now,
                side: arm.side,
                engaged: arm.ctrl.engaged(),
                live,
                target: arm.ctrl.target().map(|p| p.position),
                ee: ee_after,
                twist: cmd,
                penetration,
            });
            twists.push((arm.twist_topic.clone(), cmd));
        }
        for (topic, cmd) in twists {
            self.publish(&topic, Payload::Twist(cmd));
        }
        self.tick += 1;
        let due = (self.tick as f64 / self.publish_every).floor()
            > ((self.tick - 1) as f64 / self.publish_every).floor();
        if due {
            self.publish_state();
        }
        records
    }
}

fn solve(
    chain: &KinematicChain,
    state: &ArmState,
    cmd: &TwistCommand,
    damping: f64,
) -> Result<Vec<f64>, KinematicsError> {
    if cmd.is_zero() {
        return Ok(vec![0.0; chain.dof()]);
    }
    let j = jacobian(chain, state.q())?;
    dls(&j, cmd, damping, &chain.vel_limits())
}

/// Position of `side`'s end effector after home, for scripting sessions.
pub fn home_ee(cfg: &ServerConfig, side: Side) -> Result<Vec3, HarnessError> {
    let chain = cfg.chain(side)?;
    Ok(ArmState::home(&chain).ee().position)
}
