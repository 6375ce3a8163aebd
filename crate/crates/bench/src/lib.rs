//! Workloads shared by the benchmarks and the timing-budget tests.

use hotbox_core::bridge::{Bridge, Session};
use hotbox_core::harness::{grab_topic, hand_topic, home_ee, Simulation};
use hotbox_core::messages::{FixtureConfigMsg, FixtureSpec, GrabMsg, Payload, Stamp};
use hotbox_core::pointcloud::{publish_cloud, PointCloudFrame};
use hotbox_core::{
    Envelope, FixtureMode, Header, JointStateMsg, Pose, ServerConfig, Side, StampedPose,
    UnitQuaternion, Vec3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two 7-DOF arms with three active fixtures around their workspaces.
pub fn desk_config() -> ServerConfig {
    let mut cfg = ServerConfig::default();
    let left = home_ee(&cfg, Side::Left).expect("built-in chain");
    let right = home_ee(&cfg, Side::Right).expect("built-in chain");
    let spec = |point: Vec3, normal: Vec3, mode| FixtureSpec {
        point,
        normal,
        mode,
        tol: 0.001,
        k_attract: 2.0,
        enabled: true,
    };
    cfg.fixtures = FixtureConfigMsg {
        fixtures: vec![
            spec(
                Vec3::new(0.0, 0.0, left.z.min(right.z) - 0.1),
                Vec3::new(0.0, 0.0, 1.0),
                FixtureMode::Forbidden,
            ),
            spec(
                Vec3::new(left.x.max(right.x) + 0.15, 0.0, 0.0),
                Vec3::new(-1.0, 0.0, 0.0),
                FixtureMode::Forbidden,
            ),
            spec(left, Vec3::new(0.0, 1.0, 0.0), FixtureMode::Guidance),
        ],
    };
    cfg
}

/// A running simulation with both arms engaged and an operator streaming
/// hand poses along a slow circle.
pub struct DeskRig {
    pub bridge: Bridge,
    pub sim: Simulation,
    operator: Session,
    seq: u64,
}

impl DeskRig {
    pub fn new() -> Self {
        let cfg = desk_config();
        let bridge = Bridge::new(cfg.bridge.clone());
        let sim = Simulation::new(&bridge, &cfg).expect("desk config is valid");
        let operator = bridge.connect();
        for side in Side::BOTH {
            operator.send(Envelope::advertise(hand_topic(side), "PoseStamped"));
            operator.send(Envelope::advertise(grab_topic(side), "Grab"));
        }
        let mut rig = DeskRig {
            bridge,
            sim,
            operator,
            seq: 0,
        };
        rig.stream_hands();
        for side in Side::BOTH {
            rig.operator.send(Envelope::publish(
                grab_topic(side),
                Payload::Grab(GrabMsg { grabbed: true }),
            ));
        }
        rig
    }

    fn stream_hands(&mut self) {
        let t = self.sim.now();
        for side in Side::BOTH {
            self.seq += 1;
            let p = Vec3::new(0.05 * (t * 0.5).sin(), 0.05 * (t * 0.5).cos() - 0.05, 0.0);
            let msg = StampedPose {
                header: Header::new(self.seq, Stamp::from_secs_f64(t), "world"),
                pose: Pose::new(p, UnitQuaternion::IDENTITY),
            };
            self.operator.send(Envelope::publish(
                hand_topic(side),
                Payload::PoseStamped(msg),
            ));
        }
    }

    /// One operator sample per arm followed by one simulation tick.
    pub fn step(&mut self) {
        self.stream_hands();
        self.sim.tick();
        // Keep the operator's queue from growing without bound.
        let _ = self.operator.recv_all();
    }
}

impl Default for DeskRig {
    fn default() -> Self {
        Self::new()
    }
}

/// Typical traffic: a hand pose, a joint state and a cloud chunk.
pub fn sample_envelopes() -> Vec<Envelope> {
    let header = Header::new(42, Stamp::from_secs_f64(12.5), "world");
    vec![
        Envelope::publish(
            "/hand/left",
            Payload::PoseStamped(StampedPose {
                header: header.clone(),
                pose: Pose::new(Vec3::new(0.1, -0.2, 0.3), UnitQuaternion::rotz(0.4)),
            }),
        ),
        Envelope::publish(
            "/arm/left/joint_states",
            Payload::JointState(JointStateMsg {
                header,
                name: (0..7).map(|i| format!("left_joint_{i}")).collect(),
                position: (0..7).map(|i| 0.1 * i as f64).collect(),
                velocity: vec![0.0; 7],
                effort: Vec::new(),
            }),
        ),
        publish_cloud(&random_cloud(512, 1), 4096).remove(0),
    ]
}

/// `n` uniform points in a 2 m cube.
pub fn random_cloud(n: usize, seed: u64) -> PointCloudFrame {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            Vec3::new(
                r.random_range(-1.0..1.0),
                r.random_range(-1.0..1.0),
                r.random_range(-1.0..1.0),
            )
        })
        .collect();
    PointCloudFrame::new(Header::default(), points, None)
}
