//! The pub/sub bridge: topic registry, per-session outbound queues and the
//! WebSocket front end.
//!
//! Every registry mutation goes through one lock, so the effects of
//! [`Bridge::handle_envelope`] are linearizable. Outbound delivery is per
//! session: each session owns an [`Outbox`] that its writer drains at its own
//! pace, and a stalled reader only loses its own oldest messages.
//!
//! In-process components (the simulation tick loop, the replay client) talk
//! to the bridge through [`Session`] handles, using the same envelopes as
//! WebSocket clients.

mod session;
pub mod ws;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Weak};
use std::time::Instant;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::messages::{decode, Envelope, Level, Op, SchemaName};

pub use session::{Delivery, Outbox, DROP_WARN_INTERVAL};

pub type SessionId = u64;

pub const DEFAULT_PORT: u16 = 9090;
pub const DEFAULT_QUEUE_CAPACITY: usize = 256;

fn default_host() -> String {
    "127.0.0.1".into()
}

fn default_port() -> u16 {
    DEFAULT_PORT
}

fn default_capacity() -> usize {
    DEFAULT_QUEUE_CAPACITY
}

fn default_latch() -> Vec<String> {
    [
        "/arm/*/joint_states",
        "/arm/*/ee_pose",
        "/cloud/points",
        "/teleop/fixtures",
    ]
    .into_iter()
    .map(String::from)
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeConfig {
    #[serde(default = "default_host")]
    pub host: String,
    #[serde(default = "default_port")]
    pub port: u16,
    /// Topic patterns whose last message is replayed to new subscribers.
    /// `*` matches exactly one path segment.
    #[serde(default = "default_latch")]
    pub latch: Vec<String>,
    #[serde(default = "default_capacity")]
    pub queue_capacity: usize,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        BridgeConfig {
            host: default_host(),
            port: default_port(),
            latch: default_latch(),
            queue_capacity: default_capacity(),
        }
    }
}

/// Segment-wise match where `*` stands for any single segment.
pub fn topic_matches(pattern: &str, topic: &str) -> bool {
    let mut p = pattern.split('/');
    let mut t = topic.split('/');
    loop {
        match (p.next(), t.next()) {
            (None, None) => return true,
            (Some(ps), Some(ts)) if ps == "*" || ps == ts => {}
            _ => return false,
        }
    }
}

/// Read-only view of a topic for inspection and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicSnapshot {
    pub name: String,
    pub schema: Option<String>,
    pub publishers: BTreeSet<SessionId>,
    pub subscribers: BTreeSet<SessionId>,
    pub latched: Option<Arc<Envelope>>,
}

#[derive(Debug, Default)]
struct TopicRecord {
    schema: Option<String>,
    publishers: BTreeSet<SessionId>,
    subscribers: BTreeSet<SessionId>,
    latched_last: Option<Delivery>,
}

impl TopicRecord {
    fn is_garbage(&self) -> bool {
        self.publishers.is_empty() && self.subscribers.is_empty() && self.latched_last.is_none()
    }
}

struct SessionEntry {
    outbox: Arc<Outbox>,
    subscriptions: BTreeSet<String>,
    advertised: BTreeSet<String>,
}

struct Registry {
    topics: BTreeMap<String, TopicRecord>,
    sessions: BTreeMap<SessionId, SessionEntry>,
    next_id: SessionId,
}

struct Shared {
    cfg: BridgeConfig,
    registry: Mutex<Registry>,
    published: AtomicU64,
}

/// Handle to the bridge; cheap to clone.
#[derive(Clone)]
pub struct Bridge {
    shared: Arc<Shared>,
}

impl Bridge {
    pub fn new(cfg: BridgeConfig) -> Self {
        Bridge {
            shared: Arc::new(Shared {
                cfg,
                registry: Mutex::new(Registry {
                    topics: BTreeMap::new(),
                    sessions: BTreeMap::new(),
                    next_id: 1,
                }),
                published: AtomicU64::new(0),
            }),
        }
    }

    pub fn config(&self) -> &BridgeConfig {
        &self.shared.cfg
    }

    fn is_latched(&self, topic: &str) -> bool {
        self.shared
            .cfg
            .latch
            .iter()
            .any(|p| topic_matches(p, topic))
    }

    /// Registers a new session. Dropping the returned handle unregisters it.
    pub fn connect(&self) -> Session {
        let outbox = Arc::new(Outbox::new(self.shared.cfg.queue_capacity));
        let mut reg = self.shared.registry.lock();
        let id = reg.next_id;
        reg.next_id += 1;
        reg.sessions.insert(
            id,
            SessionEntry {
                outbox: outbox.clone(),
                subscriptions: BTreeSet::new(),
                advertised: BTreeSet::new(),
            },
        );
        Session {
            id,
            outbox,
            bridge: Arc::downgrade(&self.shared),
        }
    }

    /// Decodes wire text from a session and applies it; decode failures are
    /// reported back to the sender as status errors.
    pub fn handle_text(&self, session: SessionId, text: &str) {
        match decode(text, None) {
            Ok(env) => self.handle_envelope(session, env),
            Err(e) => self.send_status(session, Level::Error, format!("decode: {e}")),
        }
    }

    /// Applies one decoded envelope on behalf of `session`.
    pub fn handle_envelope(&self, session: SessionId, env: Envelope) {
        let mut reg = self.shared.registry.lock();
        if !reg.sessions.contains_key(&session) {
            return;
        }
        let topic = env.topic.clone().unwrap_or_default();
        let outcome = match env.op {
            Op::Advertise => reg.advertise(session, &topic, env.schema.as_deref()),
            Op::Unadvertise => {
                reg.unadvertise(session, &topic);
                Ok(())
            }
            Op::Subscribe => reg.subscribe(session, &topic, env.schema.as_deref()),
            Op::Unsubscribe => {
                reg.unsubscribe(session, &topic);
                Ok(())
            }
            Op::Publish => {
                let latch = self.is_latched(&topic);
                let r = reg.publish(session, env, latch);
                if r.is_ok() {
                    self.shared.published.fetch_add(1, Ordering::Relaxed);
                }
                r
            }
            Op::Status => {
                tracing::debug!(session, "client status: {:?}", env.text);
                Ok(())
            }
        };
        if let Err(text) = outcome {
            if let Some(s) = reg.sessions.get(&session) {
                s.outbox.push(Delivery::status(Level::Error, text));
            }
        }
    }

    pub fn send_status(&self, session: SessionId, level: Level, text: impl Into<String>) {
        let reg = self.shared.registry.lock();
        if let Some(s) = reg.sessions.get(&session) {
            s.outbox.push(Delivery::status(level, text));
        }
    }

    /// Sends a status envelope to every connected session.
    pub fn broadcast_status(&self, level: Level, text: impl Into<String>) {
        let d = Delivery::status(level, text);
        let reg = self.shared.registry.lock();
        for s in reg.sessions.values() {
            s.outbox.push(d.clone());
        }
    }

    /// Removes a session from every topic. Idempotent.
    pub fn drop_session(&self, session: SessionId) {
        self.shared.registry.lock().remove_session(session);
    }

    /// Disconnects every session. Queued deliveries stay readable.
    pub fn shutdown(&self) {
        let mut reg = self.shared.registry.lock();
        let ids: Vec<_> = reg.sessions.keys().copied().collect();
        for id in ids {
            reg.remove_session(id);
        }
    }

    pub fn topic(&self, name: &str) -> Option<TopicSnapshot> {
        let reg = self.shared.registry.lock();
        reg.topics.get(name).map(|t| TopicSnapshot {
            name: name.to_string(),
            schema: t.schema.clone(),
            publishers: t.publishers.clone(),
            subscribers: t.subscribers.clone(),
            latched: t.latched_last.as_ref().map(|d| d.envelope.clone()),
        })
    }

    pub fn topic_names(&self) -> Vec<String> {
        self.shared.registry.lock().topics.keys().cloned().collect()
    }

    pub fn session_count(&self) -> usize {
        self.shared.registry.lock().sessions.len()
    }

    /// Accepted publishes since start.
    pub fn published_count(&self) -> u64 {
        self.shared.published.load(Ordering::Relaxed)
    }

    /// Messages discarded by slow-consumer handling across live sessions.
    pub fn dropped_count(&self) -> u64 {
        let reg = self.shared.registry.lock();
        reg.sessions.values().map(|s| s.outbox.total_drops()).sum()
    }
}

impl Registry {
    fn advertise(
        &mut self,
        session: SessionId,
        topic: &str,
        schema: Option<&str>,
    ) -> Result<(), String> {
        let Some(schema) = schema else {
            return Err(format!("advertise {topic}: type required"));
        };
        let rec = self.topics.entry(topic.to_string()).or_default();
        match &rec.schema {
            Some(s) if s != schema => {
                let msg = format!("type mismatch on {topic}: registered {s}, got {schema}");
                if rec.is_garbage() {
                    self.topics.remove(topic);
                }
                return Err(msg);
            }
            Some(_) => {}
            None => rec.schema = Some(schema.to_string()),
        }
        rec.publishers.insert(session);
        if let Some(s) = self.sessions.get_mut(&session) {
            s.advertised.insert(topic.to_string());
        }
        Ok(())
    }

    fn unadvertise(&mut self, session: SessionId, topic: &str) {
        if let Some(rec) = self.topics.get_mut(topic) {
            rec.publishers.remove(&session);
        }
        if let Some(s) = self.sessions.get_mut(&session) {
            s.advertised.remove(topic);
        }
        self.collect(topic);
    }

    fn subscribe(
        &mut self,
        session: SessionId,
        topic: &str,
        schema: Option<&str>,
    ) -> Result<(), String> {
        let rec = self.topics.entry(topic.to_string()).or_default();
        if let (Some(have), Some(want)) = (&rec.schema, schema) {
            if have != want {
                let msg = format!("type mismatch on {topic}: registered {have}, got {want}");
                if rec.is_garbage() {
                    self.topics.remove(topic);
                }
                return Err(msg);
            }
        }
        rec.subscribers.insert(session);
        let latched = rec.latched_last.clone();
        let Some(entry) = self.sessions.get_mut(&session) else {
            return Ok(());
        };
        if entry.subscriptions.insert(topic.to_string()) {
            if let Some(d) = latched {
                entry.outbox.push(d);
            }
        }
        Ok(())
    }

    fn unsubscribe(&mut self, session: SessionId, topic: &str) {
        if let Some(rec) = self.topics.get_mut(topic) {
            rec.subscribers.remove(&session);
        }
        if let Some(s) = self.sessions.get_mut(&session) {
            s.subscriptions.remove(topic);
        }
        self.collect(topic);
    }

    fn publish(
        &mut self,
        session: SessionId,
        mut env: Envelope,
        latch: bool,
    ) -> Result<(), String> {
        let topic = env.topic.clone().unwrap_or_default();
        let Some(rec) = self.topics.get_mut(&topic) else {
            return Err(format!("topic not advertised: {topic}"));
        };
        let Some(schema) = rec.schema.clone() else {
            return Err(format!("topic not advertised: {topic}"));
        };
        if !rec.publishers.contains(&session) {
            return Err(format!("topic not advertised: {topic}"));
        }
        if let Ok(known) = schema.parse::<SchemaName>() {
            let msg = env.msg.take().expect("publish carries msg");
            match msg.conform(known) {
                Ok(typed) => env.msg = Some(typed),
                Err(e) => return Err(format!("schema violation on {topic}: {e}")),
            }
        }
        env.schema = Some(schema);
        env.id = None;
        let d = Delivery::new(env);
        if latch {
            rec.latched_last = Some(d.clone());
        }
        for sub in &rec.subscribers {
            if let Some(s) = self.sessions.get(sub) {
                s.outbox.push(d.clone());
            }
        }
        Ok(())
    }

    fn remove_session(&mut self, session: SessionId) {
        let Some(entry) = self.sessions.remove(&session) else {
            return;
        };
        entry.outbox.close();
        let touched: BTreeSet<String> = entry
            .subscriptions
            .into_iter()
            .chain(entry.advertised)
            .collect();
        for topic in touched {
            if let Some(rec) = self.topics.get_mut(&topic) {
                rec.publishers.remove(&session);
                rec.subscribers.remove(&session);
            }
            self.collect(&topic);
        }
    }

    fn collect(&mut self, topic: &str) {
        if self.topics.get(topic).is_some_and(TopicRecord::is_garbage) {
            self.topics.remove(topic);
        }
    }
}

/// A connected client of the bridge.
pub struct Session {
    id: SessionId,
    outbox: Arc<Outbox>,
    bridge: Weak<Shared>,
}

impl Session {
    pub fn id(&self) -> SessionId {
        self.id
    }

    pub fn outbox(&self) -> &Arc<Outbox> {
        &self.outbox
    }

    fn bridge(&self) -> Option<Bridge> {
        self.bridge.upgrade().map(|shared| Bridge { shared })
    }

    /// Sends an envelope to the bridge as this session.
    pub fn send(&self, env: Envelope) {
        if let Some(b) = self.bridge() {
            b.handle_envelope(self.id, env);
        }
    }

    pub fn send_text(&self, text: &str) {
        if let Some(b) = self.bridge() {
            b.handle_text(self.id, text);
        }
    }

    /// Next pending delivery, if any.
    pub fn try_recv(&self) -> Option<Delivery> {
        self.outbox.pop(Instant::now())
    }

    /// Everything currently queued, in order (drop warnings included).
    pub fn recv_all(&self) -> Vec<Delivery> {
        let now = Instant::now();
        std::iter::from_fn(|| self.outbox.pop(now)).collect()
    }

    /// Waits for the next delivery; `None` once the session is closed.
    pub async fn recv(&self) -> Option<Delivery> {
        loop {
            let notified = self.outbox.notified();
            if let Some(d) = self.outbox.pop(Instant::now()) {
                return Some(d);
            }
            if self.outbox.is_closed() {
                return None;
            }
            notified.await;
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        if let Some(b) = self.bridge() {
            b.drop_session(self.id);
        }
    }
}
