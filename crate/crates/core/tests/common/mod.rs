//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashSet;

use hotbox_core::kinematics::{fk, KinematicChain};
use hotbox_core::messages::{
    Envelope, FixtureConfigMsg, FixtureMode, FixtureSpec, Float64Msg, GrabMsg, Header,
    JointStateMsg, Level, Payload, PointCloudChunk, Pose, Stamp, StampedPose, TwistCommand,
    UnitQuaternion, Vec3,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Finite float drawn across many magnitudes, including awkward ones.
pub fn float(r: &mut impl Rng) -> f64 {
    match r.random_range(0..6) {
        0 => r.random_range(-1.0..1.0),
        1 => r.random_range(-1e3..1e3),
        2 => (r.random_range(-1e6..1e6) as f64).round(),
        3 => r.random_range(-1.0..1.0) * 10f64.powi(r.random_range(-300..300)),
        4 => *[
            0.0,
            -0.0,
            0.1,
            1.0 / 3.0,
            f64::MAX,
            f64::MIN_POSITIVE,
            5e-324,
        ]
        .choose(r)
        .unwrap(),
        _ => {
            let v = f64::from_bits(r.random());
            if v.is_finite() {
                v
            } else {
                0.5
            }
        }
    }
}

pub fn vec3(r: &mut impl Rng) -> Vec3 {
    Vec3::new(float(r), float(r), float(r))
}

pub fn unit_vec(r: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v * (1.0 / n);
        }
    }
}

pub fn quat(r: &mut impl Rng) -> UnitQuaternion {
    loop {
        let c: [f64; 4] = std::array::from_fn(|_| r.random_range(-1.0..1.0));
        if c.iter().map(|x| x * x).sum::<f64>() > 0.01 {
            return UnitQuaternion::new(c[0], c[1], c[2], c[3]).unwrap();
        }
    }
}

pub fn text(r: &mut impl Rng) -> String {
    const ALPHABET: &[&str] = &[
        "a", "Z", "0", "_", " ", "\"", "\\", "\n", "é", "☃", "/", "{", "\u{1}",
    ];
    (0..r.random_range(0..12))
        .map(|_| *ALPHABET.choose(r).unwrap())
        .collect()
}

pub fn topic(r: &mut impl Rng) -> String {
    const SEG: &[u8] = b"abcXYZ019_";
    (0..r.random_range(1..4))
        .map(|_| {
            let s: String = (0..r.random_range(1..6))
                .map(|_| *SEG.choose(r).unwrap() as char)
                .collect();
            format!("/{s}")
        })
        .collect()
}

pub fn header(r: &mut impl Rng) -> Header {
    Header::new(
        r.random::<u32>() as u64,
        Stamp {
            sec: r.random_range(-1_000_000..2_000_000_000),
            nanosec: r.random_range(0..1_000_000_000),
        },
        text(r),
    )
}

fn list(r: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| float(r)).collect()
}

pub fn payload(r: &mut impl Rng) -> Payload {
    match r.random_range(0..8) {
        0 => Payload::PoseStamped(StampedPose {
            header: header(r),
            pose: Pose::new(vec3(r), quat(r)),
        }),
        1 => {
            let n = r.random_range(0..8);
            let with_vel = r.random_bool(0.5);
            Payload::JointState(JointStateMsg {
                header: header(r),
                name: (0..n).map(|_| text(r)).collect(),
                position: list(r, n),
                velocity: if with_vel { list(r, n) } else { Vec::new() },
                effort: Vec::new(),
            })
        }
        2 => Payload::Twist(TwistCommand {
            linear: vec3(r),
            angular: vec3(r),
        }),
        3 => Payload::Grab(GrabMsg {
            grabbed: r.random(),
        }),
        4 => Payload::Float64(Float64Msg { data: float(r) }),
        5 => Payload::FixtureConfig(FixtureConfigMsg {
            fixtures: (0..r.random_range(0..4))
                .map(|_| FixtureSpec {
                    point: vec3(r),
                    normal: unit_vec(r),
                    mode: if r.random() {
                        FixtureMode::Forbidden
                    } else {
                        FixtureMode::Guidance
                    },
                    tol: r.random_range(0.0..0.01),
                    k_attract: r.random_range(0.0..5.0),
                    enabled: r.random(),
                })
                .collect(),
        }),
        6 => {
            let of = r.random_range(1..5);
            let chunk = r.random_range(0..of);
            let n = r.random_range(0..6);
            let points: Vec<[f64; 3]> = (0..n).map(|_| [float(r), float(r), float(r)]).collect();
            let colors = r
                .random_bool(0.5)
                .then(|| (0..n).map(|_| r.random::<[u8; 3]>()).collect());
            Payload::PointCloud(PointCloudChunk {
                header: header(r),
                frame_seq: r.random::<u32>() as u64,
                chunk,
                of,
                last: chunk + 1 == of,
                points,
                colors,
            })
        }
        _ => Payload::Raw(raw_value(r, 2)),
    }
}

fn raw_value(r: &mut impl Rng, depth: u32) -> Value {
    match r.random_range(0..if depth == 0 { 4 } else { 6 }) {
        0 => Value::Null,
        1 => json!(r.random::<bool>()),
        2 => json!(float(r)),
        3 => json!(text(r)),
        4 => Value::Array(
            (0..r.random_range(0..4))
                .map(|_| raw_value(r, depth - 1))
                .collect(),
        ),
        _ => Value::Object(
            (0..r.random_range(0..4))
                .map(|_| (text(r), raw_value(r, depth - 1)))
                .collect(),
        ),
    }
}

/// A random envelope satisfying every wire invariant.
pub fn envelope(r: &mut impl Rng) -> Envelope {
    let mut e = match r.random_range(0..6) {
        0 => Envelope::advertise(topic(r), "Twist"),
        1 => Envelope::unadvertise(topic(r)),
        2 => Envelope::subscribe(topic(r)),
        3 => Envelope::unsubscribe(topic(r)),
        4 => {
            let p = payload(r);
            let schema = p.schema().map(|s| s.as_str().to_string());
            let e = Envelope::publish(topic(r), p);
            match schema {
                Some(s) if r.random_bool(0.8) => e.with_schema(s),
                _ => e,
            }
        }
        _ => {
            let lvl = *[Level::Error, Level::Warn, Level::Info].choose(r).unwrap();
            Envelope::status(lvl, text(r))
        }
    };
    if r.random_bool(0.3) {
        e = e.with_id(text(r));
    }
    e
}

/// Arbitrary mangling of a valid wire text.
pub fn mutate(r: &mut impl Rng, text: &str) -> String {
    let mut b = text.as_bytes().to_vec();
    for _ in 0..r.random_range(1..4) {
        if b.is_empty() {
            break;
        }
        let i = r.random_range(0..b.len());
        match r.random_range(0..6) {
            0 => b[i] = r.random(),
            1 => {
                b.truncate(i);
            }
            2 => {
                b.remove(i);
            }
            3 => b.insert(i, *b"{}[]\",:0-e.nNtf\\".choose(r).unwrap()),
            4 => {
                let j = r.random_range(i..b.len());
                let dup = b[i..=j.min(b.len() - 1)].to_vec();
                b.splice(i..i, dup);
            }
            _ => {
                let j = r.random_range(0..b.len());
                b.swap(i, j)
            }
        }
    }
    String::from_utf8_lossy(&b).into_owned()
}

/// Central-difference Jacobian of fk: linear rows from position, angular
/// rows from the rotation-vector difference of orientations.
pub fn finite_difference_jacobian(chain: &KinematicChain, q: &[f64], h: f64) -> Vec<[f64; 6]> {
    (0..q.len())
        .map(|i| {
            let mut qp = q.to_vec();
            let mut qm = q.to_vec();
            qp[i] += h;
            qm[i] -= h;
            let a = fk(chain, &qp).unwrap();
            let b = fk(chain, &qm).unwrap();
            let dp = (a.position - b.position) * (1.0 / (2.0 * h));
            let w = rotation_vector_between(b.orientation, a.orientation) * (1.0 / (2.0 * h));
            [dp.x, dp.y, dp.z, w.x, w.y, w.z]
        })
        .collect()
}

/// World-frame rotation vector taking `from` to `to`, via rotation matrices.
pub fn rotation_vector_between(from: UnitQuaternion, to: UnitQuaternion) -> Vec3 {
    let ra = rot_matrix(to);
    let rb = rot_matrix(from);
    // R = Ra * Rb^T
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = (0..3).map(|k| ra[i][k] * rb[j][k]).sum();
        }
    }
    let cos = ((r[0][0] + r[1][1] + r[2][2] - 1.0) / 2.0).clamp(-1.0, 1.0);
    let angle = cos.acos();
    let axis = Vec3::new(r[2][1] - r[1][2], r[0][2] - r[2][0], r[1][0] - r[0][1]);
    if angle < 1e-12 {
        return axis * 0.5;
    }
    axis * (angle / (2.0 * angle.sin()))
}

pub fn rot_matrix(q: UnitQuaternion) -> [[f64; 3]; 3] {
    let (w, x, y, z) = (q.w(), q.x(), q.y(), q.z());
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Rotation matrix of an axis-angle vector (Rodrigues).
pub fn rodrigues(v: Vec3) -> [[f64; 3]; 3] {
    let th = v.norm();
    if th == 0.0 {
        return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    }
    let k = v * (1.0 / th);
    let (s, c) = th.sin_cos();
    let kx = [[0.0, -k.z, k.y], [k.z, 0.0, -k.x], [-k.y, k.x, 0.0]];
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let kk: f64 = (0..3).map(|m| kx[i][m] * kx[m][j]).sum();
            r[i][j] = if i == j { 1.0 } else { 0.0 } + s * kx[i][j] + (1.0 - c) * kk;
        }
    }
    r
}

pub fn mat_mul3(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    r
}

/// Dense inverse by Gauss-Jordan elimination with partial pivoting.
pub fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let f = a[row][col];
                if f != 0.0 {
                    let pivot_row = a[col].clone();
                    for (v, pv) in a[row].iter_mut().zip(pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// `J^T (J J^T + lambda^2 I)^-1 v` by explicit inversion, no limit scaling.
pub fn dense_dls(j: &[Vec<f64>], v: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let m = j.len();
    let n = j[0].len();
    let a: Vec<Vec<f64>> = (0..m)
        .map(|r| {
            (0..m)
                .map(|c| {
                    let dot: f64 = (0..n).map(|k| j[r][k] * j[c][k]).sum();
                    dot + if r == c { lambda * lambda } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let inv = invert(&a)?;
    let y: Vec<f64> = (0..m)
        .map(|r| (0..m).map(|c| inv[r][c] * v[c]).sum())
        .collect();
    Some(
        (0..n)
            .map(|k| (0..m).map(|r| j[r][k] * y[r]).sum())
            .collect(),
    )
}

/// Number of distinct occupied voxels, by hashing integer cell indices.
pub fn voxel_count_oracle(points: &[Vec3], leaf: f64) -> usize {
    let cells: HashSet<(i64, i64, i64)> = points
        .iter()
        .map(|p| {
            (
                (p.x / leaf).floor() as i64,
                (p.y / leaf).floor() as i64,
                (p.z / leaf).floor() as i64,
            )
        })
        .collect();
    cells.len()
}
