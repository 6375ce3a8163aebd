//! Point-cloud frames: XYZ file parsing, voxel-grid reduction and chunked
//! publication on `/cloud/points`.
//!
//! XYZ file layout: a header line `XYZ1 <count> <has_color:0|1>` followed by
//! `count` rows of `x y z` or `x y z r g b`, whitespace separated.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::messages::{Envelope, Header, Payload, PointCloudChunk, SchemaName, Vec3};

pub const CLOUD_TOPIC: &str = "/cloud/points";
pub const DEFAULT_LEAF: f64 = 0.01;
pub const DEFAULT_MAX_POINTS_PER_MSG: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("bad magic, expected XYZ1")]
    Magic,
    #[error("malformed header: {0}")]
    Header(String),
    #[error("truncated: header declares {expected} points, found {got}")]
    Truncated { expected: usize, got: usize },
    #[error("non-finite coordinate in row {0}")]
    NonFinite(usize),
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("{0} rows beyond the declared count")]
    ExtraRows(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("leaf size must be positive and finite, got {0}")]
    Leaf(f64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloudFrame {
    pub header: Header,
    pub points: Vec<Vec3>,
    pub colors: Option<Vec<[u8; 3]>>,
}

impl PointCloudFrame {
    pub fn new(header: Header, points: Vec<Vec3>, colors: Option<Vec<[u8; 3]>>) -> Self {
        if let Some(c) = &colors {
            assert_eq!(c.len(), points.len(), "colors must match points");
        }
        PointCloudFrame {
            header,
            points,
            colors,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Parses an XYZ frame file.
pub fn parse_xyz(bytes: &[u8]) -> Result<PointCloudFrame, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ParseError::Header(e.to_string()))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or(ParseError::Magic)?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("XYZ1") {
        return Err(ParseError::Magic);
    }
    let count: usize = fields
        .next()
        .ok_or_else(|| ParseError::Header("missing count".into()))?
        .parse()
        .map_err(|_| ParseError::Header("count is not a non-negative integer".into()))?;
    let has_color = match fields.next() {
        Some("0") => false,
        Some("1") => true,
        _ => return Err(ParseError::Header("has_color must be 0 or 1".into())),
    };
    if fields.next().is_some() {
        return Err(ParseError::Header("trailing header fields".into()));
    }

    let rows: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    if rows.len() < count {
        return Err(ParseError::Truncated {
            expected: count,
            got: rows.len(),
        });
    }
    if rows.len() > count {
        return Err(ParseError::ExtraRows(rows.len() - count));
    }

    let width = if has_color { 6 } else { 3 };
    let mut points = Vec::with_capacity(count);
    let mut colors = has_color.then(|| Vec::with_capacity(count));
    for (row, line) in rows.iter().enumerate() {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != width {
            return Err(ParseError::Row {
                row,
                reason: format!("expected {width} fields, found {}", f.len()),
            });
        }
        let mut xyz = [0.0_f64; 3];
        for (dst, src) in xyz.iter_mut().zip(&f[..3]) {
            *dst = src.parse().map_err(|_| ParseError::Row {
                row,
                reason: format!("bad coordinate {src:?}"),
            })?;
            if !dst.is_finite() {
                return Err(ParseError::NonFinite(row));
            }
        }
        points.push(Vec3::from_array(xyz));
        if let Some(colors) = colors.as_mut() {
            let mut rgb = [0u8; 3];
            for (dst, src) in rgb.iter_mut().zip(&f[3..]) {
                *dst = src.parse().map_err(|_| ParseError::Row {
                    row,
                    reason: format!("bad color channel {src:?}"),
                })?;
            }
            colors.push(rgb);
        }
    }
    Ok(PointCloudFrame {
        header: Header::new(0, Default::default(), "world"),
        points,
        colors,
    })
}

/// Writes a frame in the XYZ file format.
pub fn write_xyz(frame: &PointCloudFrame) -> String {
    let mut out = String::new();
    let has_color = frame.colors.is_some();
    let _ = writeln!(out, "XYZ1 {} {}", frame.points.len(), u8::from(has_color));
    for (i, p) in frame.points.iter().enumerate() {
        let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
        if let Some(c) = &frame.colors {
            let _ = write!(out, " {} {} {}", c[i][0], c[i][1], c[i][2]);
        }
        out.push('\n');
    }
    out
}

struct Bucket {
    sum: Vec3,
    min: Vec3,
    max: Vec3,
    rgb: [u64; 3],
    n: usize,
}

/// Voxel index of `p` on a grid anchored at the origin.
pub fn voxel_index(p: Vec3, leaf: f64) -> (i64, i64, i64) {
    (
        (p.x / leaf).floor() as i64,
        (p.y / leaf).floor() as i64,
        (p.z / leaf).floor() as i64,
    )
}

/// Replaces the points of every occupied voxel with their centroid.
/// Output is ordered by voxel index.
pub fn voxel_downsample(frame: &PointCloudFrame, leaf: f64) -> Result<PointCloudFrame, ParamError> {
    if !(leaf.is_finite() && leaf > 0.0) {
        return Err(ParamError::Leaf(leaf));
    }
    let mut grid: BTreeMap<(i64, i64, i64), Bucket> = BTreeMap::new();
    for (i, &p) in frame.points.iter().enumerate() {
        let b = grid.entry(voxel_index(p, leaf)).or_insert(Bucket {
            sum: Vec3::ZERO,
            min: p,
            max: p,
            rgb: [0; 3],
            n: 0,
        });
        b.sum += p;
        b.min = Vec3::new(b.min.x.min(p.x), b.min.y.min(p.y), b.min.z.min(p.z));
        b.max = Vec3::new(b.max.x.max(p.x), b.max.y.max(p.y), b.max.z.max(p.z));
        if let Some(c) = &frame.colors {
            for (acc, ch) in b.rgb.iter_mut().zip(c[i]) {
                *acc += u64::from(ch);
            }
        }
        b.n += 1;
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut colors = frame
        .colors
        .as_ref()
        .map(|_| Vec::with_capacity(grid.len()));
    for b in grid.values() {
        let n = b.n as f64;
        // Rounding can push the mean of near-identical points a hair outside
        // their bounds; clamp it back.
        let c = Vec3::new(b.sum.x / n, b.sum.y / n, b.sum.z / n);
        points.push(Vec3::new(
            c.x.clamp(b.min.x, b.max.x),
            c.y.clamp(b.min.y, b.max.y),
            c.z.clamp(b.min.z, b.max.z),
        ));
        if let Some(colors) = colors.as_mut() {
            let avg = |s: u64| ((s as f64 / n).round() as u64).min(255) as u8;
            colors.push([avg(b.rgb[0]), avg(b.rgb[1]), avg(b.rgb[2])]);
        }
    }
    Ok(PointCloudFrame {
        header: frame.header.clone(),
        points,
        colors,
    })
}

/// Splits a frame into chunk payloads of at most `max_points_per_msg` points.
/// An empty frame yields one empty chunk so consumers can clear old clouds.
pub fn chunk_frame(frame: &PointCloudFrame, max_points_per_msg: usize) -> Vec<PointCloudChunk> {
    let per = max_points_per_msg.max(1);
    let n = frame.points.len();
    let of = n.div_ceil(per).max(1);
    (0..of)
        .map(|i| {
            let lo = (i * per).min(n);
            let hi = ((i + 1) * per).min(n);
            PointCloudChunk {
                header: frame.header.clone(),
                frame_seq: frame.header.seq,
                chunk: i as u32,
                of: of as u32,
                last: i + 1 == of,
                points: frame.points[lo..hi].iter().map(|p| p.to_array()).collect(),
                colors: frame.colors.as_ref().map(|c| c[lo..hi].to_vec()),
            }
        })
        .collect()
}

/// Publish envelopes for a frame on [`CLOUD_TOPIC`].
pub fn publish_cloud(frame: &PointCloudFrame, max_points_per_msg: usize) -> Vec<Envelope> {
    chunk_frame(frame, max_points_per_msg)
        .into_iter()
        .map(|c| {
            Envelope::publish(CLOUD_TOPIC, Payload::PointCloud(c))
                .with_schema(SchemaName::PointCloud.as_str())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReassembleError {
    #[error("no chunks")]
    Empty,
    #[error("chunk {0} missing or out of order")]
    Missing(u32),
    #[error("chunks belong to different frames")]
    MixedFrames,
}

/// Joins the chunks of one frame back together.
pub fn reassemble(chunks: &[PointCloudChunk]) -> Result<PointCloudFrame, ReassembleError> {
    let first = chunks.first().ok_or(ReassembleError::Empty)?;
    let of = first.of;
    if chunks.len() != of as usize {
        return Err(ReassembleError::Missing(chunks.len() as u32));
    }
    let mut points = Vec::new();
    let mut colors = first.colors.as_ref().map(|_| Vec::new());
    for (i, c) in chunks.iter().enumerate() {
        if c.frame_seq != first.frame_seq || c.of != of {
            return Err(ReassembleError::MixedFrames);
        }
        if c.chunk != i as u32 {
            return Err(ReassembleError::Missing(i as u32));
        }
        points.extend(c.points.iter().copied().map(Vec3::from_array));
        match (colors.as_mut(), &c.colors) {
            (Some(acc), Some(cs)) => acc.extend_from_slice(cs),
            (None, None) => {}
            _ => return Err(ReassembleError::MixedFrames),
        }
    }
    Ok(PointCloudFrame {
        header: first.header.clone(),
        points,
        colors,
    })
}
