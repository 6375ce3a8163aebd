//! Line-oriented session logs: a header line, then one
//! `<t_mono> <in|out> <envelope>` record per line.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::messages::{decode, encode, EncodeError, Envelope};

pub const LOG_HEADER: &str = "#hotbox-session v1";

/// Relative to the server: operator input is `in`, server output is `out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

impl Direction {
    /// Operator-side topics (`/hand/*`, `/teleop/*`) flow in.
    pub fn of_topic(topic: &str) -> Direction {
        if topic.starts_with("/hand/") || topic.starts_with("/teleop/") {
            Direction::In
        } else {
            Direction::Out
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::In => "in",
            Direction::Out => "out",
        }
    }
}

impl FromStr for Direction {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "in" => Ok(Direction::In),
            "out" => Ok(Direction::Out),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub t_mono: f64,
    pub direction: Direction,
    pub envelope: Envelope,
}

impl LogRecord {
    pub fn to_line(&self) -> Result<String, EncodeError> {
        Ok(format!(
            "{} {} {}",
            self.t_mono,
            self.direction.as_str(),
            encode(&self.envelope)?
        ))
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("missing or unknown log header")]
    Header,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionLog {
    pub records: Vec<LogRecord>,
}

impl SessionLog {
    pub fn parse(text: &str) -> Result<Self, LogError> {
        Self::read(text.as_bytes())
    }

    pub fn read(r: impl BufRead) -> Result<Self, LogError> {
        let mut lines = r.lines();
        match lines.next().transpose()? {
            Some(h) if h.trim_end() == LOG_HEADER => {}
            _ => return Err(LogError::Header),
        }
        let mut records = Vec::new();
        let mut last_t = f64::NEG_INFINITY;
        for (i, line) in lines.enumerate() {
            let line = line?;
            let n = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let rec = parse_line(&line).map_err(|reason| LogError::Line { line: n, reason })?;
            if rec.t_mono < last_t {
                return Err(LogError::Line {
                    line: n,
                    reason: format!("time {} goes backwards", rec.t_mono),
                });
            }
            last_t = rec.t_mono;
            records.push(rec);
        }
        Ok(SessionLog { records })
    }

    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{LOG_HEADER}")?;
        for r in &self.records {
            let line = r
                .to_line()
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl fmt::Display for SessionLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(|_| fmt::Error)?;
        f.write_str(&String::from_utf8_lossy(&buf))
    }
}

fn parse_line(line: &str) -> Result<LogRecord, String> {
    let mut parts = line.splitn(3, ' ');
    let (Some(t), Some(dir), Some(env)) = (parts.next(), parts.next(), parts.next()) else {
        return Err("expected `<t_mono> <in|out> <envelope>`".into());
    };
    let t_mono: f64 = t.parse().map_err(|_| format!("bad timestamp {t:?}"))?;
    if !(t_mono.is_finite() && t_mono >= 0.0) {
        return Err(format!("bad timestamp {t:?}"));
    }
    let direction = dir.parse().map_err(|_| format!("bad direction {dir:?}"))?;
    let envelope = decode(env, None).map_err(|e| e.to_string())?;
    Ok(LogRecord {
        t_mono,
        direction,
        envelope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::messages::{GrabMsg, Payload};

    fn grab(t: f64) -> LogRecord {
        LogRecord {
            t_mono: t,
            direction: Direction::In,
            envelope: Envelope::publish(
                "/hand/left/grab",
                Payload::Grab(GrabMsg { grabbed: true }),
            )
            .with_schema("Grab"),
        }
    }

    #[test]
    fn empty_log_round_trips() {
        let text = SessionLog::default().to_string();
        assert_eq!(text, format!("{LOG_HEADER}\n"));
        assert!(SessionLog::parse(&text).unwrap().is_empty());
    }

    #[test]
    fn records_round_trip() {
        let log = SessionLog {
            records: vec![grab(0.0), grab(0.1), grab(0.1 + 0.2)],
        };
        assert_eq!(SessionLog::parse(&log.to_string()).unwrap(), log);
    }

    #[test]
    fn malformed_line_reports_number() {
        let text = format!(
            "{LOG_HEADER}\n{}\n0.2 sideways {{}}\n",
            grab(0.1).to_line().unwrap()
        );
        match SessionLog::parse(&text) {
            Err(LogError::Line { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn time_must_not_go_backwards() {
        let text = format!(
            "{LOG_HEADER}\n{}\n{}\n",
            grab(0.5).to_line().unwrap(),
            grab(0.4).to_line().unwrap()
        );
        assert!(matches!(
            SessionLog::parse(&text),
            Err(LogError::Line { line: 3, .. })
        ));
    }

    #[test]
    fn header_required() {
        assert!(matches!(SessionLog::parse(""), Err(LogError::Header)));
        assert!(matches!(
            SessionLog::parse("0 in {}\n"),
            Err(LogError::Header)
        ));
    }

    #[test]
    fn directions() {
        assert_eq!(Direction::of_topic("/hand/left"), Direction::In);
        assert_eq!(Direction::of_topic("/teleop/scale"), Direction::In);
        assert_eq!(Direction::of_topic("/arm/left/ee_pose"), Direction::Out);
    }
}
