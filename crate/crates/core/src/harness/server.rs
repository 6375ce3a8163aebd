//! The live server and the recording client.

use std::collections::BTreeMap;
use std::future::Future;
use std::io::{LineWriter, Write};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::time::MissedTickBehavior;
use tokio_tungstenite::tungstenite::Message;

use crate::bridge::{ws, Bridge};
use crate::kinematics::KinematicChain;
use crate::messages::{decode, Envelope, Level, Op};
use crate::pointcloud::{parse_xyz, publish_cloud, voxel_downsample, CLOUD_TOPIC};

use super::config::{CloudConfig, ServerConfig};
use super::log::{Direction, LogRecord, LOG_HEADER};
use super::sim::Simulation;
use super::HarnessError;

/// A bound, not yet running server.
pub struct Server {
    listener: TcpListener,
    bridge: Bridge,
    sim: Simulation,
    chains: Arc<BTreeMap<&'static str, KinematicChain>>,
    dt: f64,
}

impl Server {
    /// Validates the config, loads chains and the optional cloud, and binds
    /// the listen socket.
    pub async fn bind(cfg: ServerConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let mut chains = BTreeMap::new();
        for side in crate::kinematics::Side::BOTH {
            chains.insert(side.as_str(), cfg.chain(side)?);
        }
        let bridge = Bridge::new(cfg.bridge.clone());
        let sim = Simulation::new(&bridge, &cfg)?;
        if let Some(cloud) = &cfg.cloud {
            publish_cloud_file(&bridge, cloud)?;
        }
        let addr = format!("{}:{}", cfg.bridge.host, cfg.bridge.port);
        let listener = TcpListener::bind(&addr)
            .await
            .map_err(|source| HarnessError::Bind { addr, source })?;
        Ok(Server {
            listener,
            bridge,
            sim,
            chains: Arc::new(chains),
            dt: cfg.dt(),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener
            .local_addr()
            .expect("bound listener has an address")
    }

    pub fn bridge(&self) -> &Bridge {
        &self.bridge
    }

    /// Serves WebSocket clients at `/` and the chain descriptions at
    /// `/config/chains`, ticking the simulation until `shutdown` resolves.
    /// On shutdown the final arm state is published before clients are
    /// disconnected.
    pub async fn run(self, shutdown: impl Future<Output = ()>) -> Result<(), HarnessError> {
        let Server {
            listener,
            bridge,
            mut sim,
            chains,
            dt,
        } = self;
        let app = Router::new()
            .route(
                "/config/chains",
                get(move || async move { Json(chains.as_ref().clone()) }),
            )
            .merge(ws::router(bridge.clone()));
        let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
        let http = tokio::spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = stop_rx.await;
                })
                .await
        });

        let mut interval = tokio::time::interval(Duration::from_secs_f64(dt));
        // Catch up after stalls so logical time keeps pace with wall time.
        interval.set_missed_tick_behavior(MissedTickBehavior::Burst);
        tokio::pin!(shutdown);
        loop {
            tokio::select! {
                _ = &mut shutdown => break,
                _ = interval.tick() => {
                    sim.tick();
                }
            }
        }

        tracing::info!(ticks = sim.ticks(), "shutting down");
        sim.publish_state();
        bridge.broadcast_status(Level::Info, "server shutting down");
        bridge.shutdown();
        let _ = stop_tx.send(());
        match tokio::time::timeout(Duration::from_secs(2), http).await {
            Ok(Ok(r)) => r.map_err(HarnessError::Io),
            Ok(Err(e)) => Err(HarnessError::Io(std::io::Error::other(e))),
            Err(_) => Ok(()),
        }
    }
}

pub async fn run_server(
    cfg: ServerConfig,
    shutdown: impl Future<Output = ()>,
) -> Result<(), HarnessError> {
    Server::bind(cfg).await?.run(shutdown).await
}

fn publish_cloud_file(bridge: &Bridge, c: &CloudConfig) -> Result<(), HarnessError> {
    let bytes = std::fs::read(&c.path)
        .map_err(|e| HarnessError::Cloud(format!("{}: {e}", c.path.display())))?;
    let frame = parse_xyz(&bytes).map_err(|e| HarnessError::Cloud(e.to_string()))?;
    let reduced =
        voxel_downsample(&frame, c.leaf).map_err(|e| HarnessError::Cloud(e.to_string()))?;
    tracing::info!(
        input = frame.len(),
        output = reduced.len(),
        "cloud downsampled"
    );
    let session = bridge.connect();
    session.send(Envelope::advertise(CLOUD_TOPIC, "PointCloud"));
    for env in publish_cloud(&reduced, c.max_points_per_msg) {
        session.send(env);
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("cannot connect to {url}: {reason}")]
    Connect { url: String, reason: String },
    #[error("websocket: {0}")]
    Protocol(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Subscribes to `topics` on the server at `url` and appends every received
/// publish to a session log at `out` until `stop` resolves or the server
/// closes the connection. Returns the number of records written.
pub async fn record(
    url: &str,
    topics: &[String],
    out: &Path,
    stop: impl Future<Output = ()>,
) -> Result<usize, RecordError> {
    let (mut ws, _) =
        tokio_tungstenite::connect_async(url)
            .await
            .map_err(|e| RecordError::Connect {
                url: url.to_string(),
                reason: e.to_string(),
            })?;
    let mut file = LineWriter::new(std::fs::File::create(out)?);
    writeln!(file, "{LOG_HEADER}")?;
    for t in topics {
        ws.send(Message::Text(
            Envelope::subscribe(t.as_str()).to_string().into(),
        ))
        .await
        .map_err(|e| RecordError::Protocol(e.to_string()))?;
    }

    let start = Instant::now();
    let mut count = 0;
    tokio::pin!(stop);
    loop {
        let frame = tokio::select! {
            _ = &mut stop => break,
            f = ws.next() => f,
        };
        let text = match frame {
            Some(Ok(Message::Text(t))) => t,
            Some(Ok(Message::Close(_))) | None => break,
            Some(Ok(_)) => continue,
            Some(Err(e)) => {
                tracing::warn!("recording ended: {e}");
                break;
            }
        };
        let env = match decode(text.as_str(), None) {
            Ok(env) => env,
            Err(e) => {
                tracing::warn!("skipping undecodable frame: {e}");
                continue;
            }
        };
        if env.op != Op::Publish {
            if env.op == Op::Status {
                tracing::info!("server status: {}", env.text.as_deref().unwrap_or(""));
            }
            continue;
        }
        let rec = LogRecord {
            t_mono: start.elapsed().as_secs_f64(),
            direction: Direction::of_topic(env.topic()),
            envelope: env,
        };
        let line = rec
            .to_line()
            .map_err(|e| RecordError::Protocol(e.to_string()))?;
        writeln!(file, "{line}")?;
        count += 1;
    }
    file.flush()?;
    let _ = ws.close(None).await;
    Ok(count)
}
