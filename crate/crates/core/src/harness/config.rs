use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::bridge::BridgeConfig;
use crate::fixtures::FixtureSet;
use crate::kinematics::{KinematicChain, Side, DEFAULT_DAMPING};
use crate::messages::FixtureConfigMsg;
use crate::pointcloud::{DEFAULT_LEAF, DEFAULT_MAX_POINTS_PER_MSG};
use crate::teleop::ControllerConfig;

fn default_tick_rate() -> f64 {
    100.0
}

fn default_publish_rate() -> f64 {
    30.0
}

fn default_damping() -> f64 {
    DEFAULT_DAMPING
}

fn default_leaf() -> f64 {
    DEFAULT_LEAF
}

fn default_max_points() -> usize {
    DEFAULT_MAX_POINTS_PER_MSG
}

/// Point-cloud file published (latched) once at startup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudConfig {
    pub path: PathBuf,
    #[serde(default = "default_leaf")]
    pub leaf: f64,
    #[serde(default = "default_max_points")]
    pub max_points_per_msg: usize,
}

/// Server configuration, read from a JSON document. Every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    #[serde(default)]
    pub bridge: BridgeConfig,
    /// Chain description files per arm; missing arms use the built-in chain.
    #[serde(default)]
    pub chains: BTreeMap<Side, PathBuf>,
    #[serde(default)]
    pub controllers: BTreeMap<Side, ControllerConfig>,
    #[serde(default)]
    pub fixtures: FixtureConfigMsg,
    #[serde(default = "default_tick_rate")]
    pub tick_rate: f64,
    #[serde(default = "default_publish_rate")]
    pub joint_state_publish_rate: f64,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default)]
    pub cloud: Option<CloudConfig>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bridge: BridgeConfig::default(),
            chains: BTreeMap::new(),
            controllers: BTreeMap::new(),
            fixtures: FixtureConfigMsg::default(),
            tick_rate: default_tick_rate(),
            joint_state_publish_rate: default_publish_rate(),
            damping: default_damping(),
            cloud: None,
        }
    }
}

impl ServerConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: ServerConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in cfg.chains.values_mut() {
            *p = base.join(&*p);
        }
        if let Some(c) = &mut cfg.cloud {
            c.path = base.join(&c.path);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if !(self.tick_rate.is_finite() && self.tick_rate > 0.0) {
            return bad(format!("tick_rate {} must be positive", self.tick_rate));
        }
        if !(self.joint_state_publish_rate > 0.0 && self.joint_state_publish_rate <= self.tick_rate)
        {
            return bad(format!(
                "joint_state_publish_rate {} must be in (0, tick_rate]",
                self.joint_state_publish_rate
            ));
        }
        if !(self.damping.is_finite() && self.damping >= 0.0) {
            return bad(format!("damping {} must be >= 0", self.damping));
        }
        if self.bridge.queue_capacity == 0 {
            return bad("bridge.queue_capacity must be positive".into());
        }
        for (side, c) in &self.controllers {
            c.validate()
                .map_err(|e| HarnessError::Config(format!("controllers.{}: {e}", side.as_str())))?;
        }
        FixtureSet::from_msg(&self.fixtures)
            .map_err(|e| HarnessError::Config(format!("fixtures: {e}")))?;
        if let Some(c) = &self.cloud {
            if !(c.leaf.is_finite() && c.leaf > 0.0) || c.max_points_per_msg == 0 {
                return bad("cloud: leaf and max_points_per_msg must be positive".into());
            }
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.tick_rate
    }

    pub fn controller(&self, side: Side) -> ControllerConfig {
        self.controllers.get(&side).copied().unwrap_or_default()
    }

    /// Loads the chain for `side` (file if configured, else built-in).
    pub fn chain(&self, side: Side) -> Result<KinematicChain, HarnessError> {
        match self.chains.get(&side) {
            Some(p) => Ok(KinematicChain::load(p)?),
            None => Ok(KinematicChain::hotbox7(side)),
        }
    }

    pub fn fixture_set(&self) -> FixtureSet {
        FixtureSet::from_msg(&self.fixtures).expect("validated at load")
    }
}
