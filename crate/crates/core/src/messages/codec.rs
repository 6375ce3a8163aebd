//! Envelope framing and the canonical wire text.
//!
//! Encoded text is a JSON object whose keys are sorted lexicographically at
//! every level, with floats written in shortest round-trip form. Equal
//! envelopes therefore encode to identical bytes.

use std::fmt;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use super::schema::{
    FixtureConfigMsg, Float64Msg, GrabMsg, JointStateMsg, PointCloudChunk, SchemaName, StampedPose,
    TwistCommand, Validate, Violation, ViolationKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Advertise,
    Unadvertise,
    Subscribe,
    Unsubscribe,
    Publish,
    Status,
}

impl Op {
    pub fn as_str(self) -> &'static str {
        match self {
            Op::Advertise => "advertise",
            Op::Unadvertise => "unadvertise",
            Op::Subscribe => "subscribe",
            Op::Unsubscribe => "unsubscribe",
            Op::Publish => "publish",
            Op::Status => "status",
        }
    }

    fn parse(s: &str) -> Option<Op> {
        Some(match s {
            "advertise" => Op::Advertise,
            "unadvertise" => Op::Unadvertise,
            "subscribe" => Op::Subscribe,
            "unsubscribe" => Op::Unsubscribe,
            "publish" => Op::Publish,
            "status" => Op::Status,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    Error,
    Warn,
    Info,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Error => "error",
            Level::Warn => "warn",
            Level::Info => "info",
        }
    }

    fn parse(s: &str) -> Option<Level> {
        Some(match s {
            "error" => Level::Error,
            "warn" => Level::Warn,
            "info" => Level::Info,
            _ => return None,
        })
    }
}

/// Message body of a publish envelope.
///
/// Typed variants are produced when the schema is known; `Raw` holds any
/// other JSON payload (opaque topics, or decoding without a schema).
/// Equality is wire equality: two payloads are equal when they encode to the
/// same canonical value, whichever variant holds them.
#[derive(Debug, Clone)]
pub enum Payload {
    PoseStamped(StampedPose),
    JointState(JointStateMsg),
    Twist(TwistCommand),
    Grab(GrabMsg),
    Float64(Float64Msg),
    FixtureConfig(FixtureConfigMsg),
    PointCloud(PointCloudChunk),
    Raw(Value),
}

impl PartialEq for Payload {
    fn eq(&self, other: &Self) -> bool {
        match (self.to_value(), other.to_value()) {
            (Ok(a), Ok(b)) => a == b,
            _ => false,
        }
    }
}

fn typed_value<T: Serialize + Validate>(m: &T) -> Result<Value, EncodeError> {
    m.validate().map_err(EncodeError::from)?;
    serde_json::to_value(m).map_err(|e| EncodeError::Invalid(e.to_string()))
}

fn parse_typed<T: DeserializeOwned + Validate>(v: &Value) -> Result<T, DecodeError> {
    let m: T = serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        DecodeError::Schema {
            path: if path == "." { "msg".into() } else { path },
            reason: e.into_inner().to_string(),
        }
    })?;
    m.validate().map_err(DecodeError::from)?;
    Ok(m)
}

impl Payload {
    pub fn schema(&self) -> Option<SchemaName> {
        Some(match self {
            Payload::PoseStamped(_) => SchemaName::PoseStamped,
            Payload::JointState(_) => SchemaName::JointState,
            Payload::Twist(_) => SchemaName::Twist,
            Payload::Grab(_) => SchemaName::Grab,
            Payload::Float64(_) => SchemaName::Float64,
            Payload::FixtureConfig(_) => SchemaName::FixtureConfig,
            Payload::PointCloud(_) => SchemaName::PointCloud,
            Payload::Raw(_) => return None,
        })
    }

    /// Canonical JSON value; fails on non-finite numbers or rule violations.
    pub fn to_value(&self) -> Result<Value, EncodeError> {
        match self {
            Payload::PoseStamped(m) => typed_value(m),
            Payload::JointState(m) => typed_value(m),
            Payload::Twist(m) => typed_value(m),
            Payload::Grab(m) => typed_value(m),
            Payload::Float64(m) => typed_value(m),
            Payload::FixtureConfig(m) => typed_value(m),
            Payload::PointCloud(m) => typed_value(m),
            Payload::Raw(v) => Ok(v.clone()),
        }
    }

    /// Parses a JSON value against a schema, validating every field rule.
    pub fn from_value(schema: SchemaName, v: &Value) -> Result<Payload, DecodeError> {
        Ok(match schema {
            SchemaName::PoseStamped => Payload::PoseStamped(parse_typed(v)?),
            SchemaName::JointState => Payload::JointState(parse_typed(v)?),
            SchemaName::Twist => Payload::Twist(parse_typed(v)?),
            SchemaName::Grab => Payload::Grab(parse_typed(v)?),
            SchemaName::Float64 => Payload::Float64(parse_typed(v)?),
            SchemaName::FixtureConfig => Payload::FixtureConfig(parse_typed(v)?),
            SchemaName::PointCloud => Payload::PointCloud(parse_typed(v)?),
        })
    }

    /// Re-reads this payload as the given schema (typed payloads of that
    /// schema are returned unchanged).
    pub fn conform(&self, schema: SchemaName) -> Result<Payload, DecodeError> {
        if self.schema() == Some(schema) {
            self.to_value().map_err(|e| DecodeError::Schema {
                path: "msg".into(),
                reason: e.to_string(),
            })?;
            return Ok(self.clone());
        }
        let v = self.to_value().map_err(|e| DecodeError::Schema {
            path: "msg".into(),
            reason: e.to_string(),
        })?;
        Payload::from_value(schema, &v)
    }
}

/// One pub/sub frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub op: Op,
    pub id: Option<String>,
    pub topic: Option<String>,
    /// Schema name, carried as `type` on the wire.
    pub schema: Option<String>,
    pub msg: Option<Payload>,
    pub level: Option<Level>,
    pub text: Option<String>,
}

impl Envelope {
    fn bare(op: Op) -> Self {
        Envelope {
            op,
            id: None,
            topic: None,
            schema: None,
            msg: None,
            level: None,
            text: None,
        }
    }

    pub fn advertise(topic: impl Into<String>, schema: impl Into<String>) -> Self {
        Envelope {
            topic: Some(topic.into()),
            schema: Some(schema.into()),
            ..Self::bare(Op::Advertise)
        }
    }

    pub fn unadvertise(topic: impl Into<String>) -> Self {
        Envelope {
            topic: Some(topic.into()),
            ..Self::bare(Op::Unadvertise)
        }
    }

    pub fn subscribe(topic: impl Into<String>) -> Self {
        Envelope {
            topic: Some(topic.into()),
            ..Self::bare(Op::Subscribe)
        }
    }

    pub fn unsubscribe(topic: impl Into<String>) -> Self {
        Envelope {
            topic: Some(topic.into()),
            ..Self::bare(Op::Unsubscribe)
        }
    }

    pub fn publish(topic: impl Into<String>, msg: Payload) -> Self {
        Envelope {
            topic: Some(topic.into()),
            msg: Some(msg),
            ..Self::bare(Op::Publish)
        }
    }

    pub fn status(level: Level, text: impl Into<String>) -> Self {
        Envelope {
            level: Some(level),
            text: Some(text.into()),
            ..Self::bare(Op::Status)
        }
    }

    pub fn with_schema(mut self, schema: impl Into<String>) -> Self {
        self.schema = Some(schema.into());
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn with_topic(mut self, topic: impl Into<String>) -> Self {
        self.topic = Some(topic.into());
        self
    }

    pub fn topic(&self) -> &str {
        self.topic.as_deref().unwrap_or("")
    }

    /// Checks the structural invariants tying `op` to required fields.
    pub fn check(&self) -> Result<(), Violation> {
        let need = |present: bool, field: &str| {
            if present {
                Ok(())
            } else {
                Err(Violation {
                    path: field.into(),
                    kind: ViolationKind::Rule(format!("required for op {}", self.op.as_str())),
                })
            }
        };
        match self.op {
            Op::Status => {
                need(self.level.is_some(), "level")?;
                need(self.text.is_some(), "text")?;
            }
            Op::Publish => {
                need(self.topic.is_some(), "topic")?;
                need(self.msg.is_some(), "msg")?;
            }
            _ => need(self.topic.is_some(), "topic")?,
        }
        if let Some(t) = &self.topic {
            if !is_valid_topic(t) {
                return Err(Violation {
                    path: "topic".into(),
                    kind: ViolationKind::Rule(format!("invalid topic name {t:?}")),
                });
            }
        }
        Ok(())
    }
}

/// Topic names are one or more `/segment` parts of `[A-Za-z0-9_]+`.
pub fn is_valid_topic(t: &str) -> bool {
    let Some(rest) = t.strip_prefix('/') else {
        return false;
    };
    rest.split('/')
        .all(|seg| !seg.is_empty() && seg.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_'))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodeError {
    #[error("non-finite number at {0}")]
    NonFinite(String),
    #[error("invalid envelope: {0}")]
    Invalid(String),
}

impl From<Violation> for EncodeError {
    fn from(v: Violation) -> Self {
        match v.kind {
            ViolationKind::NonFinite => EncodeError::NonFinite(v.path),
            ViolationKind::Rule(why) => EncodeError::Invalid(format!("{}: {why}", v.path)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown op {0:?}")]
    UnknownOp(String),
    #[error("schema error at {path}: {reason}")]
    Schema { path: String, reason: String },
}

impl DecodeError {
    pub fn schema_path(&self) -> Option<&str> {
        match self {
            DecodeError::Schema { path, .. } => Some(path),
            _ => None,
        }
    }
}

impl From<Violation> for DecodeError {
    fn from(v: Violation) -> Self {
        let reason = match v.kind {
            ViolationKind::NonFinite => "non-finite number".to_string(),
            ViolationKind::Rule(why) => why,
        };
        DecodeError::Schema {
            path: v.path,
            reason,
        }
    }
}

/// Canonical wire text of `env`.
pub fn encode(env: &Envelope) -> Result<String, EncodeError> {
    env.check().map_err(EncodeError::from)?;
    let mut obj = Map::new();
    obj.insert("op".into(), Value::from(env.op.as_str()));
    if let Some(id) = &env.id {
        obj.insert("id".into(), Value::from(id.as_str()));
    }
    if let Some(t) = &env.topic {
        obj.insert("topic".into(), Value::from(t.as_str()));
    }
    if let Some(s) = &env.schema {
        obj.insert("type".into(), Value::from(s.as_str()));
    }
    if let Some(m) = &env.msg {
        obj.insert("msg".into(), m.to_value()?);
    }
    if let Some(l) = env.level {
        obj.insert("level".into(), Value::from(l.as_str()));
    }
    if let Some(t) = &env.text {
        obj.insert("text".into(), Value::from(t.as_str()));
    }
    // serde_json's default map is ordered by key, which gives canonical output.
    Ok(Value::Object(obj).to_string())
}

fn opt_string(obj: &Map<String, Value>, key: &str) -> Result<Option<String>, DecodeError> {
    match obj.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(DecodeError::Schema {
            path: key.into(),
            reason: "expected a string".into(),
        }),
    }
}

const ENVELOPE_KEYS: [&str; 7] = ["op", "id", "topic", "type", "msg", "level", "text"];

/// Parses and validates wire text. When `expected` is given (or the envelope
/// names a built-in schema in `type`), the message body is checked against it.
pub fn decode(text: &str, expected: Option<SchemaName>) -> Result<Envelope, DecodeError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| DecodeError::Syntax(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(DecodeError::Syntax("envelope must be an object".into()));
    };
    if let Some(k) = obj.keys().find(|k| !ENVELOPE_KEYS.contains(&k.as_str())) {
        return Err(DecodeError::Schema {
            path: k.clone(),
            reason: "unknown field".into(),
        });
    }
    let op = match obj.get("op") {
        Some(Value::String(s)) => Op::parse(s).ok_or_else(|| DecodeError::UnknownOp(s.clone()))?,
        Some(other) => return Err(DecodeError::UnknownOp(other.to_string())),
        None => {
            return Err(DecodeError::Schema {
                path: "op".into(),
                reason: "missing".into(),
            })
        }
    };
    let schema = opt_string(&obj, "type")?;
    let level = match opt_string(&obj, "level")? {
        None => None,
        Some(s) => Some(Level::parse(&s).ok_or_else(|| DecodeError::Schema {
            path: "level".into(),
            reason: format!("unknown level {s:?}"),
        })?),
    };
    let named = schema.as_deref().and_then(|s| s.parse::<SchemaName>().ok());
    if let (Some(exp), Some(s)) = (expected, schema.as_deref()) {
        if s != exp.as_str() {
            return Err(DecodeError::Schema {
                path: "type".into(),
                reason: format!("expected {exp}, got {s}"),
            });
        }
    }
    let msg = match obj.get("msg") {
        None => None,
        Some(v) => Some(match expected.or(named) {
            Some(s) => Payload::from_value(s, v)?,
            None => Payload::Raw(v.clone()),
        }),
    };
    let env = Envelope {
        op,
        id: opt_string(&obj, "id")?,
        topic: opt_string(&obj, "topic")?,
        schema,
        msg,
        level,
        text: opt_string(&obj, "text")?,
    };
    env.check().map_err(DecodeError::from)?;
    Ok(env)
}

impl fmt::Display for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match encode(self) {
            Ok(s) => f.write_str(&s),
            Err(e) => write!(f, "<unencodable envelope: {e}>"),
        }
    }
}
