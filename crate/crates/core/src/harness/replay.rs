//! Deterministic replay of operator sessions through an in-process bridge.
//!
//! Time is the simulation tick counter, never the wall clock, so a given
//! (log, latency seed, config) always produces the same run.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use thiserror::Error;

use crate::bridge::Bridge;
use crate::messages::{Envelope, Op};

use super::config::ServerConfig;
use super::latency::{Channel, LatencyModel};
use super::log::{Direction, LogError, SessionLog};
use super::metrics::{compute_metrics, RunMetrics, TickRecord};
use super::sim::Simulation;
use super::HarnessError;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("malformed log line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("log: {0}")]
    Log(String),
    #[error("speed must be finite and positive, got {0}")]
    Speed(f64),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

impl From<LogError> for ReplayError {
    fn from(e: LogError) -> Self {
        match e {
            LogError::Line { line, reason } => ReplayError::Line { line, reason },
            other => ReplayError::Log(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOptions {
    /// Playback speed multiplier on the recorded timing.
    pub speed: f64,
    pub latency: LatencyModel,
    /// Simulated time to keep ticking after the last delivery, in seconds.
    pub settle: f64,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions {
            speed: 1.0,
            latency: LatencyModel::ideal(),
            settle: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub metrics: RunMetrics,
    /// One record per arm per tick, in tick order.
    pub trace: Vec<TickRecord>,
}

pub fn replay_file(
    path: &Path,
    cfg: &ServerConfig,
    opts: &ReplayOptions,
) -> Result<ReplayOutcome, ReplayError> {
    let f = File::open(path).map_err(|e| ReplayError::Log(format!("{}: {e}", path.display())))?;
    let log = SessionLog::read(BufReader::new(f))?;
    replay(&log, cfg, opts)
}

/// Re-publishes the log's `in` publishes at their (scaled) recorded times,
/// through `opts.latency`, into a fresh bridge + simulation.
pub fn replay(
    log: &SessionLog,
    cfg: &ServerConfig,
    opts: &ReplayOptions,
) -> Result<ReplayOutcome, ReplayError> {
    if !(opts.speed.is_finite() && opts.speed > 0.0) {
        return Err(ReplayError::Speed(opts.speed));
    }
    let mut channel = Channel::new(opts.latency.clone())?;
    let bridge = Bridge::new(cfg.bridge.clone());
    let mut sim = Simulation::new(&bridge, cfg)?;
    let client = bridge.connect();

    let inputs: Vec<_> = log
        .records
        .iter()
        .filter(|r| r.direction == Direction::In && r.envelope.op == Op::Publish)
        .collect();
    let t0 = inputs.first().map_or(0.0, |r| r.t_mono);

    let mut advertised = std::collections::BTreeSet::new();
    let mut schedule: Vec<(f64, Envelope)> = Vec::with_capacity(inputs.len());
    for r in &inputs {
        let env = &r.envelope;
        let topic = env.topic().to_string();
        if advertised.insert(topic.clone()) {
            let schema = env
                .schema
                .clone()
                .or_else(|| env.msg.as_ref()?.schema().map(|s| s.as_str().to_string()));
            if let Some(schema) = schema {
                client.send(Envelope::advertise(&topic, schema));
            }
        }
        let t_send = (r.t_mono - t0) / opts.speed;
        if let Some(t) = channel.transmit(&topic, t_send) {
            schedule.push((t, env.clone()));
        }
    }
    // Stable: per-topic order survives because per-topic times never decrease.
    schedule.sort_by(|a, b| a.0.total_cmp(&b.0));

    let end = schedule.last().map_or(0.0, |s| s.0) + opts.settle.max(0.0);
    let mut trace = Vec::new();
    let mut next = 0;
    while sim.now() <= end {
        let now = sim.now();
        while next < schedule.len() && schedule[next].0 <= now {
            client.send(schedule[next].1.clone());
            next += 1;
        }
        trace.extend(sim.tick());
        for d in client.recv_all() {
            tracing::debug!("replay client got: {}", d.text);
        }
    }

    let mut metrics = compute_metrics(&trace);
    let c = sim.counters();
    metrics.messages_in = c.messages_in;
    metrics.messages_out = c.messages_out;
    metrics.dropped = channel.dropped() + bridge.dropped_count();
    Ok(ReplayOutcome { metrics, trace })
}
