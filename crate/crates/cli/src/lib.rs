//! Argument parsing and command runners behind the `hotbox` binary.

use std::future::Future;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use hotbox_core::harness::{record, replay_file, run_server, ReplayOptions};
use hotbox_core::{ControllerConfig, LatencyModel, ServerConfig, Side};

#[derive(Debug, Parser)]
#[command(
    name = "hotbox",
    version,
    about = "Dual-arm hot-box teleoperation server and test rig"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the bridge and arm simulation until interrupted.
    Serve(ServeArgs),
    /// Subscribe to topics on a running server and write a session log.
    Record(RecordArgs),
    /// Replay a session log offline and report run metrics.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Server configuration file (JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    /// Chain description per arm, e.g. `--chain left=l.json right=r.json`.
    #[arg(long, num_args = 1.., value_parser = parse_chain)]
    pub chain: Vec<(Side, PathBuf)>,
    #[arg(long)]
    pub tick_rate: Option<f64>,
    #[command(flatten)]
    pub controller: ControllerOverrides,
}

/// Controller settings applied to both arms on top of the config file.
#[derive(Debug, Default, Args)]
pub struct ControllerOverrides {
    #[arg(long)]
    pub kp_lin: Option<f64>,
    #[arg(long)]
    pub kp_ang: Option<f64>,
    /// Linear speed clamp, m/s.
    #[arg(long)]
    pub max_lin: Option<f64>,
    /// Angular speed clamp, rad/s.
    #[arg(long)]
    pub max_ang: Option<f64>,
    #[arg(long)]
    pub deadband_lin: Option<f64>,
    #[arg(long)]
    pub deadband_ang: Option<f64>,
    /// Hand-to-arm motion scale.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Seconds without a hand sample before commands are zeroed.
    #[arg(long)]
    pub stale_timeout: Option<f64>,
}

impl ControllerOverrides {
    pub fn apply(&self, c: &mut ControllerConfig) {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut c.kp_lin, self.kp_lin);
        set(&mut c.kp_ang, self.kp_ang);
        set(&mut c.max_lin, self.max_lin);
        set(&mut c.max_ang, self.max_ang);
        set(&mut c.deadband_lin, self.deadband_lin);
        set(&mut c.deadband_ang, self.deadband_ang);
        set(&mut c.scale, self.scale);
        set(&mut c.stale_timeout, self.stale_timeout);
    }
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    /// Server WebSocket endpoint, e.g. `ws://127.0.0.1:9090/`.
    #[arg(long)]
    pub url: String,
    /// Comma-separated topics; `*` matches one path segment.
    #[arg(long, value_delimiter = ',', required = true)]
    pub topics: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Stop after this many seconds instead of waiting for Ctrl-C.
    #[arg(long)]
    pub duration: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub log: PathBuf,
    /// Server configuration the session is replayed against.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    /// One-way latency, ms.
    #[arg(long, default_value_t = 0.0)]
    pub latency_base: f64,
    /// Uniform latency jitter, ± ms.
    #[arg(long, default_value_t = 0.0)]
    pub latency_jitter: f64,
    /// Probability of dropping each injected message.
    #[arg(long, default_value_t = 0.0)]
    pub drop: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Restrict drops to these topic patterns (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub drop_topics: Vec<String>,
    /// Simulated seconds to keep running after the last delivery.
    #[arg(long, default_value_t = 2.0)]
    pub settle: f64,
    /// Write the metrics here instead of standard output.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn parse_chain(s: &str) -> Result<(Side, PathBuf), String> {
    let (side, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected side=path, got {s:?}"))?;
    if path.is_empty() {
        return Err(format!("missing chain path for {side}"));
    }
    Ok((side.parse()?, PathBuf::from(path)))
}

fn load_config(path: Option<&PathBuf>) -> Result<ServerConfig> {
    match path {
        Some(p) => ServerConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ServerConfig::default()),
    }
}

/// The effective server configuration: file, then command-line overrides.
pub fn serve_config(args: &ServeArgs) -> Result<ServerConfig> {
    let mut cfg = load_config(args.config.as_ref())?;
    if let Some(host) = &args.host {
        cfg.bridge.host = host.clone();
    }
    if let Some(port) = args.port {
        cfg.bridge.port = port;
    }
    for (side, path) in &args.chain {
        cfg.chains.insert(*side, path.clone());
    }
    if let Some(rate) = args.tick_rate {
        cfg.tick_rate = rate;
    }
    for side in Side::BOTH {
        args.controller
            .apply(cfg.controllers.entry(side).or_default());
    }
    cfg.validate()?;
    Ok(cfg)
}

pub async fn serve(args: ServeArgs, shutdown: impl Future<Output = ()>) -> Result<()> {
    let cfg = serve_config(&args)?;
    tracing::info!(host = %cfg.bridge.host, port = cfg.bridge.port, "starting server");
    run_server(cfg, shutdown).await?;
    Ok(())
}

pub async fn record_session(
    args: RecordArgs,
    interrupt: impl Future<Output = ()>,
) -> Result<usize> {
    let stop = async {
        match args.duration {
            Some(d) => {
                tokio::select! {
                    _ = interrupt => {}
                    _ = tokio::time::sleep(Duration::from_secs_f64(d.max(0.0))) => {}
                }
            }
            None => interrupt.await,
        }
    };
    let n = record(&args.url, &args.topics, &args.out, stop).await?;
    tracing::info!(records = n, out = %args.out.display(), "recording finished");
    Ok(n)
}

/// Replays the log and returns the metrics document.
pub fn replay_session(args: &ReplayArgs) -> Result<String> {
    let cfg = load_config(args.config.as_ref())?;
    let opts = ReplayOptions {
        speed: args.speed,
        latency: LatencyModel {
            base: args.latency_base,
            jitter: args.latency_jitter,
            drop_prob: args.drop,
            seed: args.seed,
            drop_topics: args.drop_topics.clone(),
        },
        settle: args.settle,
    };
    let out = replay_file(&args.log, &cfg, &opts)?;
    let doc = out.metrics.to_json();
    if let Some(path) = &args.report {
        std::fs::write(path, format!("{doc}\n"))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("hotbox").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn chain_pairs_parse() {
        let Command::Serve(s) = parse(&["serve", "--chain", "left=a.json", "right=b.json"]).command
        else {
            panic!()
        };
        assert_eq!(
            s.chain,
            vec![
                (Side::Left, "a.json".into()),
                (Side::Right, "b.json".into())
            ]
        );
        assert!(Cli::try_parse_from(["hotbox", "serve", "--chain", "middle=a.json"]).is_err());
        assert!(Cli::try_parse_from(["hotbox", "serve", "--chain", "left"]).is_err());
    }

    #[test]
    fn overrides_reach_both_arms() {
        let Command::Serve(s) =
            parse(&["serve", "--port", "0", "--scale", "0.5", "--max-lin", "0.1"]).command
        else {
            panic!()
        };
        let cfg = serve_config(&s).unwrap();
        assert_eq!(cfg.bridge.port, 0);
        for side in Side::BOTH {
            assert_eq!(cfg.controller(side).scale, 0.5);
            assert_eq!(cfg.controller(side).max_lin, 0.1);
            assert_eq!(
                cfg.controller(side).kp_lin,
                ControllerConfig::default().kp_lin
            );
        }
    }

    #[test]
    fn invalid_override_is_rejected() {
        let Command::Serve(s) = parse(&["serve", "--scale=-1"]).command else {
            panic!()
        };
        assert!(serve_config(&s).is_err());
    }

    #[test]
    fn replay_flags_and_defaults() {
        let Command::Replay(r) = parse(&[
            "replay",
            "--log",
            "s.log",
            "--latency-base",
            "50",
            "--latency-jitter",
            "20",
            "--drop",
            "0.1",
            "--seed",
            "7",
            "--drop-topics",
            "/hand/left,/hand/right",
        ])
        .command
        else {
            panic!()
        };
        assert_eq!(r.speed, 1.0);
        assert_eq!(
            (r.latency_base, r.latency_jitter, r.drop, r.seed),
            (50.0, 20.0, 0.1, 7)
        );
        assert_eq!(r.drop_topics, vec!["/hand/left", "/hand/right"]);
    }

    #[test]
    fn record_topics_split_on_commas() {
        let Command::Record(r) = parse(&[
            "record", "--url", "ws://x/", "--topics", "/a,/b", "--out", "o",
        ])
        .command
        else {
            panic!()
        };
        assert_eq!(r.topics, vec!["/a", "/b"]);
    }
}
