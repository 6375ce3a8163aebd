use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::bridge::topic_matches;

/// Network model applied to injected messages on the replay-client side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyModel {
    /// Base one-way delay, ms.
    pub base: f64,
    /// Uniform jitter amplitude, ms (delay in `base ± jitter`, floored at 0).
    pub jitter: f64,
    pub drop_prob: f64,
    pub seed: u64,
    /// Topic patterns subject to drops; empty means every topic.
    #[serde(default)]
    pub drop_topics: Vec<String>,
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel::ideal()
    }
}

impl LatencyModel {
    /// No delay, no loss.
    pub fn ideal() -> Self {
        LatencyModel {
            base: 0.0,
            jitter: 0.0,
            drop_prob: 0.0,
            seed: 0,
            drop_topics: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let ok = self.base.is_finite()
            && self.base >= 0.0
            && self.jitter.is_finite()
            && self.jitter >= 0.0
            && (0.0..1.0).contains(&self.drop_prob);
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Config(format!(
                "latency model needs base >= 0, jitter >= 0, drop_prob in [0, 1): {self:?}"
            )))
        }
    }

    fn drops(&self, topic: &str) -> bool {
        self.drop_topics.is_empty() || self.drop_topics.iter().any(|p| topic_matches(p, topic))
    }
}

/// Stateful application of a [`LatencyModel`] to a message stream.
#[derive(Debug)]
pub struct Channel {
    model: LatencyModel,
    rng: ChaCha8Rng,
    last_delivery: BTreeMap<String, f64>,
    dropped: u64,
}

impl Channel {
    pub fn new(model: LatencyModel) -> Result<Self, HarnessError> {
        model.validate()?;
        Ok(Channel {
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            model,
            last_delivery: BTreeMap::new(),
            dropped: 0,
        })
    }

    /// Delivery time (s) of a message sent at `t_send`, or `None` if lost.
    /// Delivery times never decrease within a topic.
    pub fn transmit(&mut self, topic: &str, t_send: f64) -> Option<f64> {
        // Both draws happen for every message so the random stream does not
        // depend on which topics are subject to drops.
        let u: f64 = self.rng.random();
        let j: f64 = self.rng.random_range(-1.0..=1.0);
        if self.model.drop_prob > 0.0 && self.model.drops(topic) && u < self.model.drop_prob {
            self.dropped += 1;
            return None;
        }
        let delay = (self.model.base + j * self.model.jitter).max(0.0) / 1000.0;
        let mut t = t_send + delay;
        let last = self.last_delivery.entry(topic.to_string()).or_insert(t);
        t = t.max(*last);
        *last = t;
        Some(t)
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_is_identity() {
        let mut c = Channel::new(LatencyModel::ideal()).unwrap();
        for k in 0..100 {
            let t = k as f64 * 0.033;
            assert_eq!(c.transmit("/hand/left", t), Some(t));
        }
        assert_eq!(c.dropped(), 0);
    }

    #[test]
    fn per_topic_fifo_under_jitter() {
        let model = LatencyModel {
            base: 50.0,
            jitter: 40.0,
            seed: 3,
            ..LatencyModel::ideal()
        };
        let mut c = Channel::new(model).unwrap();
        let mut last = 0.0;
        for k in 0..1000 {
            let t = c.transmit("/hand/left", k as f64 * 0.001).unwrap();
            assert!(t >= last);
            assert!(t >= k as f64 * 0.001 + 0.010 - 1e-12);
            last = t;
        }
    }

    #[test]
    fn drop_rate_and_filter() {
        let model = LatencyModel {
            drop_prob: 0.5,
            seed: 11,
            drop_topics: vec!["/hand/*".into()],
            ..LatencyModel::ideal()
        };
        let mut c = Channel::new(model).unwrap();
        let lost = (0..4000)
            .filter(|_| c.transmit("/hand/left", 0.0).is_none())
            .count();
        assert!((1800..2200).contains(&lost), "{lost}");
        assert!((0..100).all(|_| c.transmit("/teleop/scale", 0.0).is_some()));
    }

    #[test]
    fn same_seed_same_stream() {
        let model = LatencyModel {
            base: 10.0,
            jitter: 10.0,
            drop_prob: 0.3,
            seed: 7,
            drop_topics: vec![],
        };
        let run = |m: &LatencyModel| {
            let mut c = Channel::new(m.clone()).unwrap();
            (0..200)
                .map(|k| c.transmit("/x", k as f64))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(&model), run(&model));
    }

    #[test]
    fn invalid_models_rejected() {
        for m in [
            LatencyModel {
                base: -1.0,
                ..LatencyModel::ideal()
            },
            LatencyModel {
                drop_prob: 1.0,
                ..LatencyModel::ideal()
            },
            LatencyModel {
                jitter: f64::NAN,
                ..LatencyModel::ideal()
            },
        ] {
            assert!(Channel::new(m).is_err());
        }
    }
}
