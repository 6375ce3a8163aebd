//! Message schemas, the canonical wire codec and geometry primitives.

mod codec;
mod geometry;
mod schema;

pub use codec::{
    decode, encode, is_valid_topic, DecodeError, EncodeError, Envelope, Level, Op, Payload,
};
pub use geometry::{
    quat_error, quat_mul, Pose, QuatError, QuatWire, UnitQuaternion, Vec3, WIRE_UNIT_TOLERANCE,
};
pub use schema::{
    FixtureConfigMsg, FixtureMode, FixtureSpec, Float64Msg, GrabMsg, Header, JointStateMsg,
    PointCloudChunk, SchemaName, Stamp, StampedPose, TwistCommand, Validate, Violation,
    ViolationKind,
};
