use std::collections::VecDeque;
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use tokio::sync::Notify;

use crate::messages::{encode, Envelope, Level};

/// Minimum spacing between two "dropped N" warnings on one session.
pub const DROP_WARN_INTERVAL: Duration = Duration::from_secs(1);

/// An envelope ready for delivery, with its canonical text computed once.
#[derive(Debug, Clone)]
pub struct Delivery {
    pub topic: Option<Arc<str>>,
    pub envelope: Arc<Envelope>,
    pub text: Arc<str>,
}

impl Delivery {
    pub fn new(envelope: Envelope) -> Self {
        let text = encode(&envelope).unwrap_or_else(|e| {
            // Only envelopes that already passed validation reach here.
            tracing::error!("unencodable delivery: {e}");
            String::new()
        });
        Delivery {
            topic: envelope.topic.as_deref().map(Arc::from),
            envelope: Arc::new(envelope),
            text: Arc::from(text),
        }
    }

    pub fn status(level: Level, text: impl Into<String>) -> Self {
        Self::new(Envelope::status(level, text))
    }
}

#[derive(Debug)]
struct OutboxState {
    queue: VecDeque<Delivery>,
    capacity: usize,
    pending_drops: u64,
    total_drops: u64,
    last_warn: Option<Instant>,
    closed: bool,
}

/// Bounded per-session outbound queue with drop-oldest overflow.
///
/// When full, the oldest queued message of the incoming message's topic is
/// discarded (or the oldest message overall if that topic has none queued),
/// so the surviving messages of every topic stay in publish order.
#[derive(Debug)]
pub struct Outbox {
    state: Mutex<OutboxState>,
    notify: Notify,
}

impl Outbox {
    pub fn new(capacity: usize) -> Self {
        Outbox {
            state: Mutex::new(OutboxState {
                queue: VecDeque::with_capacity(capacity.min(1024)),
                capacity: capacity.max(1),
                pending_drops: 0,
                total_drops: 0,
                last_warn: None,
                closed: false,
            }),
            notify: Notify::new(),
        }
    }

    /// Enqueues a delivery; returns true if an older message was dropped.
    pub fn push(&self, d: Delivery) -> bool {
        let mut s = self.state.lock();
        if s.closed {
            return false;
        }
        let mut dropped = false;
        if s.queue.len() >= s.capacity {
            let victim = d
                .topic
                .as_ref()
                .and_then(|t| s.queue.iter().position(|q| q.topic.as_ref() == Some(t)))
                .unwrap_or(0);
            s.queue.remove(victim);
            s.pending_drops += 1;
            s.total_drops += 1;
            dropped = true;
        }
        s.queue.push_back(d);
        drop(s);
        self.notify.notify_one();
        dropped
    }

    /// Next delivery at time `now`. A coalesced drop warning goes first when
    /// drops are pending and the last warning is at least a second old.
    pub fn pop(&self, now: Instant) -> Option<Delivery> {
        let mut s = self.state.lock();
        if s.pending_drops > 0 {
            let due = s
                .last_warn
                .is_none_or(|t| now.duration_since(t) >= DROP_WARN_INTERVAL);
            if due {
                let n = s.pending_drops;
                s.pending_drops = 0;
                s.last_warn = Some(now);
                return Some(Delivery::status(Level::Warn, format!("dropped {n}")));
            }
        }
        s.queue.pop_front()
    }

    /// Removes and returns everything queued, without drop warnings.
    pub fn drain(&self) -> Vec<Delivery> {
        self.state.lock().queue.drain(..).collect()
    }

    pub fn len(&self) -> usize {
        self.state.lock().queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total_drops(&self) -> u64 {
        self.state.lock().total_drops
    }

    pub fn close(&self) {
        self.state.lock().closed = true;
        self.notify.notify_one();
    }

    pub fn is_closed(&self) -> bool {
        self.state.lock().closed
    }

    /// Waits until something may be available.
    pub async fn notified(&self) {
        self.notify.notified().await
    }
}
