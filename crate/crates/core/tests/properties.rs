//! Property tests for the invariants of each module.

mod common;

use hotbox_core::bridge::{Bridge, BridgeConfig};
use hotbox_core::fixtures::{filter_twist, FixtureSet, PlaneFixture};
use hotbox_core::kinematics::{dls, fk, jacobian, step, ArmState, KinematicChain, Side};
use hotbox_core::messages::{
    decode, encode, quat_error, quat_mul, Envelope, FixtureMode, Float64Msg, Header, Payload, Pose,
    Stamp, StampedPose, TwistCommand, UnitQuaternion, Vec3,
};
use hotbox_core::pointcloud::{voxel_downsample, voxel_index, PointCloudFrame};
use hotbox_core::teleop::{ControllerConfig, TeleopController};
use proptest::prelude::*;
use rand::SeedableRng;

fn seeded() -> impl Strategy<Value = rand_chacha::ChaCha8Rng> {
    any::<u64>().prop_map(rand_chacha::ChaCha8Rng::seed_from_u64)
}

fn small_vec() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = Vec3> {
    seeded().prop_map(|mut r| common::unit_vec(&mut r))
}

fn quat() -> impl Strategy<Value = UnitQuaternion> {
    seeded().prop_map(|mut r| common::quat(&mut r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn encode_is_canonical(mut r in seeded()) {
        let env = common::envelope(&mut r);
        let a = encode(&env).unwrap();
        let back = decode(&a, None).unwrap();
        prop_assert_eq!(&back, &env);
        prop_assert_eq!(encode(&back).unwrap(), a);
    }

    #[test]
    fn decode_is_total(mut r in seeded()) {
        let base = encode(&common::envelope(&mut r)).unwrap();
        let mangled = common::mutate(&mut r, &base);
        let _ = decode(&mangled, None);
    }

    #[test]
    fn quat_ops_stay_unit(a in quat(), b in quat()) {
        let c = quat_mul(a, b);
        prop_assert!((c.norm() - 1.0).abs() <= 1e-9);
        prop_assert!(c.w() >= 0.0);
    }

    #[test]
    fn bridge_preserves_publish_order(sends in prop::collection::vec((0..2usize, 0..3usize), 1..200)) {
        let bridge = Bridge::new(BridgeConfig { queue_capacity: 1024, ..Default::default() });
        let pubs = [bridge.connect(), bridge.connect()];
        let sub = bridge.connect();
        for t in 0..3 {
            for p in &pubs {
                p.send(Envelope::advertise(format!("/t/{t}"), "Float64"));
            }
            sub.send(Envelope::subscribe(format!("/t/{t}")));
        }
        for (i, &(p, t)) in sends.iter().enumerate() {
            pubs[p].send(Envelope::publish(format!("/t/{t}"), Payload::Float64(Float64Msg { data: i as f64 })));
        }
        let got: Vec<(String, f64)> = sub
            .recv_all()
            .into_iter()
            .map(|d| match d.envelope.msg.as_ref() {
                Some(Payload::Float64(f)) => (d.envelope.topic().to_string(), f.data),
                other => panic!("{other:?}"),
            })
            .collect();
        let want: Vec<(String, f64)> = sends
            .iter()
            .enumerate()
            .map(|(i, &(_, t))| (format!("/t/{t}"), i as f64))
            .collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn quat_error_reproduces_target(target in quat(), current in quat()) {
        let e = quat_error(target, current);
        prop_assert!(e.norm() <= std::f64::consts::PI + 1e-12);
        let composed = common::mat_mul3(&common::rodrigues(e), &common::rot_matrix(current));
        let want = common::rot_matrix(target);
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((composed[i][j] - want[i][j]).abs() <= 1e-7);
            }
        }
    }

    #[test]
    fn forbidden_filter_properties(
        n in unit(),
        p in small_vec(),
        v in small_vec(),
        offset in -0.01..0.01f64,
    ) {
        let f = PlaneFixture::new(p, n, FixtureMode::Forbidden).unwrap();
        let fs = FixtureSet::new(vec![f]);
        let ee = Pose::new(p + f.normal() * offset, UnitQuaternion::IDENTITY);
        let cmd = TwistCommand { linear: v, angular: Vec3::new(0.3, -0.2, 0.1) };
        let once = filter_twist(&fs, &ee, cmd, 10.0);
        let twice = filter_twist(&fs, &ee, once, 10.0);
        let n = f.normal();
        // Only the normal component may change.
        let dv = once.linear - v;
        prop_assert!((dv - n * dv.dot(n)).norm() <= 1e-12);
        prop_assert_eq!(once.angular, cmd.angular);
        if offset <= f.tol {
            prop_assert!(once.linear.dot(n) >= -1e-15);
        } else {
            prop_assert_eq!(once, cmd);
        }
        prop_assert!((twice.linear - once.linear).norm() <= 1e-15);
    }

    #[test]
    fn guidance_respects_clamp(n in unit(), p in small_vec(), v in small_vec(), ee in small_vec()) {
        let fs = FixtureSet::new(vec![PlaneFixture::new(p, n, FixtureMode::Guidance).unwrap()]);
        let out = filter_twist(&fs, &Pose::new(ee, UnitQuaternion::IDENTITY),
            TwistCommand { linear: v * 0.25, angular: Vec3::ZERO }, 0.25);
        prop_assert!(out.linear.norm() <= 0.25 + 1e-15);
    }

    #[test]
    fn disabled_fixtures_are_transparent(n in unit(), p in small_vec(), v in small_vec(), ee in small_vec()) {
        let fs = FixtureSet::new(vec![
            PlaneFixture::new(p, n, FixtureMode::Forbidden).unwrap().with_enabled(false),
            PlaneFixture::new(p, n, FixtureMode::Guidance).unwrap().with_enabled(false),
        ]);
        let cmd = TwistCommand { linear: v, angular: v };
        prop_assert_eq!(filter_twist(&fs, &Pose::new(ee, UnitQuaternion::IDENTITY), cmd, 10.0), cmd);
    }

    #[test]
    fn voxel_invariants(
        pts in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64), 0..300),
        leaf in 0.01..1.0f64,
    ) {
        let points: Vec<Vec3> = pts.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect();
        let frame = PointCloudFrame::new(Default::default(), points.clone(), None);
        let out = voxel_downsample(&frame, leaf).unwrap();
        prop_assert!(out.len() <= frame.len());
        prop_assert_eq!(out.len(), common::voxel_count_oracle(&points, leaf));
        let coarse = voxel_downsample(&frame, 2.0 * leaf).unwrap();
        prop_assert!(coarse.len() <= out.len());
        // Each output point lies in the bounding box of its voxel's members.
        let mut groups: std::collections::BTreeMap<_, Vec<Vec3>> = Default::default();
        for p in &points {
            groups.entry(voxel_index(*p, leaf)).or_default().push(*p);
        }
        prop_assert_eq!(groups.len(), out.len());
        for (members, c) in groups.values().zip(&out.points) {
            for axis in 0..3 {
                let get = |v: &Vec3| v.to_array()[axis];
                let lo = members.iter().map(get).fold(f64::INFINITY, f64::min);
                let hi = members.iter().map(get).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(get(c) >= lo && get(c) <= hi);
            }
        }
        // Deterministic.
        prop_assert_eq!(voxel_downsample(&frame, leaf).unwrap(), out);
    }

    #[test]
    fn dls_residual_and_damping(mut r in seeded()) {
        use rand::Rng;
        let chain = KinematicChain::hotbox7(Side::Left);
        let q: Vec<f64> = chain.rows.iter().map(|row| r.random_range(row.limits.min..row.limits.max)).collect();
        let j = jacobian(&chain, &q).unwrap();
        let v = TwistCommand {
            linear: Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)),
            angular: Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)),
        };
        let free = vec![1e9; 7];
        let vv = nalgebra::DVector::from_row_slice(&v.to_array());
        let mut last_norm = f64::INFINITY;
        for lambda in [0.01, 0.05, 0.1, 0.5] {
            let qd = dls(&j, &v, lambda, &free).unwrap();
            let qv = nalgebra::DVector::from_vec(qd);
            prop_assert!((j.matrix() * &qv - &vv).norm() <= vv.norm() + 1e-9);
            prop_assert!(qv.norm() <= last_norm + 1e-9);
            last_norm = qv.norm();
        }
        // Velocity limits scale uniformly.
        let limits = chain.vel_limits();
        let raw = dls(&j, &v, 0.05, &free).unwrap();
        let capped = dls(&j, &v, 0.05, &limits).unwrap();
        let s = capped.iter().zip(&raw).find(|(_, r)| r.abs() > 1e-12).map(|(c, r)| c / r).unwrap();
        prop_assert!(s <= 1.0 + 1e-12);
        for ((c, r), lim) in capped.iter().zip(&raw).zip(&limits) {
            prop_assert!((c - r * s).abs() <= 1e-12);
            prop_assert!(c.abs() <= lim + 1e-12);
        }
    }

    #[test]
    fn steps_respect_limits_and_cache(mut r in seeded()) {
        use rand::Rng;
        let chain = KinematicChain::hotbox7(Side::Right);
        let mut s = ArmState::home(&chain);
        for _ in 0..50 {
            let qd: Vec<f64> = (0..7).map(|_| r.random_range(-20.0..20.0)).collect();
            s = step(&chain, &s, &qd, 0.01).unwrap();
            for (q, row) in s.q().iter().zip(&chain.rows) {
                prop_assert!(row.limits.contains(*q));
            }
            prop_assert_eq!(*s.ee(), fk(&chain, s.q()).unwrap());
        }
    }

    #[test]
    fn scale_is_linear(dx in 0.05..0.3f64, dy in -0.3..0.3f64, s in 0.2..1.0f64) {
        let cfg = ControllerConfig { kp_lin: 0.1, max_lin: 10.0, ..Default::default() };
        let twist_at = |scale: f64| {
            let mut c = TeleopController::new(ControllerConfig { scale, ..cfg }).unwrap();
            let sample = |seq, p| StampedPose {
                header: Header::new(seq, Stamp::default(), "world"),
                pose: Pose::new(p, UnitQuaternion::IDENTITY),
            };
            c.on_hand_sample(sample(0, Vec3::ZERO), 0.0);
            c.on_grab(true, Pose::IDENTITY, Pose::IDENTITY);
            c.on_hand_sample(sample(1, Vec3::new(dx, dy, 0.0)), 0.0);
            c.compute_twist(&Pose::IDENTITY, 0.0).linear
        };
        let one = twist_at(s);
        let two = twist_at(2.0 * s);
        prop_assert!((two - one * 2.0).norm() <= 1e-15);
    }
}
