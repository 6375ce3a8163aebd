//! Offline replay: log errors, speed, latency and the safety clamp.

use hotbox_core::harness::{
    grab_drag_hold, replay, replay_file, LatencyModel, ReplayError, ReplayOptions, ServerConfig,
    SessionLog, LOG_HEADER,
};
use hotbox_core::kinematics::Side;
use hotbox_core::messages::Vec3;

fn drag() -> SessionLog {
    grab_drag_hold(Side::Left, Vec3::new(0.1, 0.05, 0.0), 1.5, 1.0)
}

#[test]
fn malformed_line_is_reported_by_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.log");
    let mut text = drag().to_string();
    let lines: Vec<&str> = text.lines().collect();
    text = format!("{}\n{}\n0.5 in {{not json\n", lines[0], lines[1]);
    std::fs::write(&path, text).unwrap();
    match replay_file(&path, &ServerConfig::default(), &ReplayOptions::default()) {
        Err(ReplayError::Line { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_header_and_missing_file_are_errors() {
    assert!(SessionLog::parse("0 in {}\n").is_err());
    let r = replay_file(
        std::path::Path::new("/nonexistent/session.log"),
        &ServerConfig::default(),
        &ReplayOptions::default(),
    );
    assert!(matches!(r, Err(ReplayError::Log(_))));
}

#[test]
fn non_positive_speed_is_rejected() {
    for speed in [0.0, -1.0, f64::NAN] {
        let opts = ReplayOptions {
            speed,
            ..Default::default()
        };
        assert!(matches!(
            replay(&drag(), &ServerConfig::default(), &opts),
            Err(ReplayError::Speed(_))
        ));
    }
}

#[test]
fn empty_log_replays_idle() {
    let log = SessionLog::parse(&format!("{LOG_HEADER}\n")).unwrap();
    let out = replay(&log, &ServerConfig::default(), &ReplayOptions::default()).unwrap();
    assert_eq!(out.metrics.mean_tracking_error, 0.0);
    assert_eq!(out.metrics.messages_in, 0);
    assert!(out.metrics.ticks > 0);
    assert!(out.trace.iter().all(|t| t.twist.is_zero()));
}

#[test]
fn double_speed_halves_the_session() {
    let cfg = ServerConfig::default();
    let slow = replay(
        &drag(),
        &cfg,
        &ReplayOptions {
            settle: 0.0,
            ..Default::default()
        },
    )
    .unwrap();
    let fast = replay(
        &drag(),
        &cfg,
        &ReplayOptions {
            speed: 2.0,
            settle: 0.0,
            ..Default::default()
        },
    )
    .unwrap();
    let ratio = slow.metrics.ticks as f64 / fast.metrics.ticks as f64;
    assert!((ratio - 2.0).abs() < 0.05, "{ratio}");
    assert_eq!(slow.metrics.messages_in, fast.metrics.messages_in);
}

#[test]
fn replay_is_deterministic_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.log");
    std::fs::write(&path, drag().to_string()).unwrap();
    let opts = ReplayOptions {
        latency: LatencyModel {
            base: 50.0,
            jitter: 20.0,
            drop_prob: 0.1,
            seed: 7,
            drop_topics: Vec::new(),
        },
        ..Default::default()
    };
    let a = replay_file(&path, &ServerConfig::default(), &opts)
        .unwrap()
        .metrics;
    let b = replay_file(&path, &ServerConfig::default(), &opts)
        .unwrap()
        .metrics;
    assert_eq!(a.to_json(), b.to_json());
    assert!(a.dropped > 0);
    let other = ReplayOptions {
        latency: LatencyModel {
            seed: 8,
            ..opts.latency.clone()
        },
        ..opts
    };
    let c = replay_file(&path, &ServerConfig::default(), &other)
        .unwrap()
        .metrics;
    assert_ne!(a.to_json(), c.to_json());
}

#[test]
fn heavy_drop_engages_stale_timeout_and_stays_clamped() {
    let cfg = ServerConfig::default();
    let ctrl = cfg.controller(Side::Left);
    for seed in 0..5 {
        let opts = ReplayOptions {
            latency: LatencyModel {
                base: 0.0,
                jitter: 0.0,
                drop_prob: 0.5,
                seed,
                drop_topics: vec!["/hand/left".into()],
            },
            ..Default::default()
        };
        let out = replay(&drag(), &cfg, &opts).unwrap();
        let left: Vec<_> = out.trace.iter().filter(|t| t.side == Side::Left).collect();
        assert!(
            left.iter().any(|t| t.engaged && !t.live),
            "seed {seed}: never went stale"
        );
        for t in &left {
            assert!(t.twist.within(ctrl.max_lin + 1e-12, ctrl.max_ang + 1e-12));
            if !t.live {
                assert!(
                    t.twist.is_zero(),
                    "seed {seed}: motion while stale at {}",
                    t.t
                );
            }
        }
    }
}
