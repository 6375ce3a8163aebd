//! Server wiring, session recording and deterministic replay.

mod config;
mod latency;
mod log;
mod metrics;
mod replay;
mod script;
mod server;
mod sim;

use thiserror::Error;

use crate::kinematics::KinematicsError;
use crate::teleop::TeleopError;

pub use config::{CloudConfig, ServerConfig};
pub use latency::{Channel, LatencyModel};
pub use log::{Direction, LogError, LogRecord, SessionLog, LOG_HEADER};
pub use metrics::{compute_metrics, RunMetrics, TickRecord};
pub use replay::{replay, replay_file, ReplayError, ReplayOptions, ReplayOutcome};
pub use script::{grab_drag_hold, Script};
pub use server::{record, run_server, RecordError, Server};
pub use sim::{
    ee_pose_topic, grab_topic, hand_topic, home_ee, joint_states_topic, twist_topic, SimCounters,
    Simulation, FIXTURES_TOPIC, SCALE_TOPIC, WORLD_FRAME,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Teleop(#[from] TeleopError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("cloud: {0}")]
    Cloud(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
