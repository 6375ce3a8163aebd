//! Remote manipulation from a mixed-reality headset: a pub/sub bridge, per-arm
//! teleoperation with clutching and virtual fixtures, a kinematic arm
//! simulator, point-cloud reduction, and a record/replay harness.

pub mod bridge;
pub mod fixtures;
pub mod harness;
pub mod kinematics;
pub mod messages;
pub mod pointcloud;
pub mod teleop;

pub use bridge::{Bridge, BridgeConfig, Session};
pub use fixtures::{FixtureSet, PlaneFixture};
pub use harness::{LatencyModel, RunMetrics, ServerConfig, SessionLog};
pub use kinematics::{ArmState, KinematicChain, Side};
pub use messages::{
    decode, encode, Envelope, FixtureMode, Header, JointStateMsg, Op, Payload, Pose, Stamp,
    StampedPose, TwistCommand, UnitQuaternion, Vec3,
};
pub use pointcloud::PointCloudFrame;
pub use teleop::{ControllerConfig, TeleopController};
