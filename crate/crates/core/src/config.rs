//! JSON configuration: defaults, loading and validation.
//!
//! The document has five sections (`deployment`, `energy`, `traffic`,
//! `protocol`, `experiment`). Every field is optional and unknown keys are
//! rejected. Validation errors name the offending key as `section.field`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{EnergyError, EnergyParams};
use crate::network::Deployment;
use crate::routing::RoutingPolicy;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Malformed(String),
    #[error("unknown key `{key}`")]
    UnknownKey { key: String },
    #[error("{key}: {constraint}")]
    Invalid { key: String, constraint: String },
}

impl ConfigError {
    fn invalid(key: &str, constraint: &str) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            constraint: constraint.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Random,
    Selective,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 2] = [PolicyKind::Random, PolicyKind::Selective];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::Selective => "selective",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeploymentConfig {
    pub width: f64,
    pub height: f64,
    pub node_count: u32,
    pub sink_position: [f64; 2],
    pub tx_radius: f64,
    pub sensing_radius: f64,
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        DeploymentConfig {
            width: 200.0,
            height: 200.0,
            node_count: 100,
            sink_position: [100.0, 0.0],
            tx_radius: 60.0,
            sensing_radius: 25.0,
        }
    }
}

impl DeploymentConfig {
    pub fn to_deployment(&self) -> Deployment {
        Deployment {
            width: self.width,
            height: self.height,
            node_count: self.node_count,
            sink_position: (self.sink_position[0], self.sink_position[1]),
            tx_radius: self.tx_radius,
            sensing_radius: self.sensing_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    /// Environmental events per second over the whole area.
    pub event_rate: f64,
    /// Cap on the number of environmental events generated per run.
    pub max_events: u64,
    pub data_packet_bytes: u32,
    pub beacon_bytes: u32,
    pub ack_bytes: u32,
    pub control_bytes: u32,
    /// Seconds between Security broadcasts per node; 0 disables them.
    pub security_interval: f64,
    /// Seconds between LocalControl broadcasts per node; 0 disables them.
    pub local_control_interval: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            event_rate: 1.0,
            max_events: 50_000,
            data_packet_bytes: 100,
            beacon_bytes: 12,
            ack_bytes: 8,
            control_bytes: 16,
            security_interval: 0.0,
            local_control_interval: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub policy: PolicyKind,
    pub alpha: f64,
    pub beta: f64,
    /// Neighbor-monitoring beacon period (Selective only).
    pub monitor_interval: f64,
    /// Period of the sink's network-wide control flood.
    pub sink_interval: f64,
    pub queue_capacity: u32,
    pub max_retries: u32,
    /// Extra wait added to the ack timeout, seconds.
    pub ack_guard: f64,
    /// Uniform random delay before each data transmission attempt, seconds.
    pub backoff_window: f64,
    /// Uniform random delay before a node relays a flood, seconds.
    pub flood_jitter: f64,
    /// Events sensed by no node make the sink flood a re-query.
    pub miss_requery: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            policy: PolicyKind::Selective,
            alpha: 1.0,
            beta: 1.0,
            monitor_interval: 200.0,
            sink_interval: 500.0,
            queue_capacity: 8,
            max_retries: 3,
            ack_guard: 0.005,
            backoff_window: 0.05,
            flood_jitter: 0.1,
            miss_requery: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub max_sim_time: f64,
    pub harvest_tick: f64,
    pub base_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            max_sim_time: 1.0e6,
            harvest_tick: 10.0,
            base_seed: 1,
        }
    }
}

/// Everything a simulation run needs apart from the seed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub deployment: DeploymentConfig,
    pub energy: EnergyParams,
    pub traffic: TrafficConfig,
    pub protocol: ProtocolConfig,
    pub experiment: ExperimentConfig,
}

impl SimConfig {
    pub fn policy(&self) -> RoutingPolicy {
        match self.protocol.policy {
            PolicyKind::Random => RoutingPolicy::Random,
            PolicyKind::Selective => RoutingPolicy::Selective {
                alpha: self.protocol.alpha,
                beta: self.protocol.beta,
            },
        }
    }

    pub fn with_policy(&self, policy: PolicyKind) -> SimConfig {
        let mut c = self.clone();
        c.protocol.policy = policy;
        c
    }

    /// Parse a document, filling every absent field (at any depth) from the
    /// defaults, then validate.
    pub fn from_json_str(text: &str) -> Result<SimConfig, ConfigError> {
        let doc: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Malformed(e.to_string()))?;
        if !doc.is_object() {
            return Err(ConfigError::Malformed("top level must be an object".into()));
        }
        let mut merged = serde_json::to_value(SimConfig::default()).expect("defaults serialize");
        merge(&mut merged, doc);
        let cfg: SimConfig = serde_path_to_error::deserialize(merged).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.to_string();
            if let Some(rest) = msg.strip_prefix("unknown field `") {
                let field = rest.split('`').next().unwrap_or_default();
                let key = if path == "." || path.is_empty() {
                    field.to_string()
                } else if path == field || path.ends_with(&format!(".{field}")) {
                    path
                } else {
                    format!("{path}.{field}")
                };
                ConfigError::UnknownKey { key }
            } else if inner.is_data() {
                ConfigError::Invalid {
                    key: path,
                    constraint: msg,
                }
            } else {
                ConfigError::Malformed(msg)
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Enforce every constraint before a simulation starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = &self.deployment;
        let positive = |key: &str, v: f64| -> Result<(), ConfigError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::invalid(key, "must be > 0"))
            }
        };
        let non_negative = |key: &str, v: f64| -> Result<(), ConfigError> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(ConfigError::invalid(key, "must be >= 0"))
            }
        };
        positive("deployment.width", d.width)?;
        positive("deployment.height", d.height)?;
        if d.node_count < 1 {
            return Err(ConfigError::invalid("deployment.node_count", "must be >= 1"));
        }
        positive("deployment.tx_radius", d.tx_radius)?;
        positive("deployment.sensing_radius", d.sensing_radius)?;
        if !d.to_deployment().contains(d.sink_position.into()) {
            return Err(ConfigError::invalid(
                "deployment.sink_position",
                "must lie inside the deployment area",
            ));
        }

        self.energy
            .validate()
            .and_then(|_| self.energy.for_sensing_radius(d.sensing_radius).validate())
            .map_err(|e| match e {
                EnergyError::InvalidParams { field, constraint } => ConfigError::Invalid {
                    key: format!("energy.{field}"),
                    constraint,
                },
                other => ConfigError::invalid("energy", &other.to_string()),
            })?;

        let t = &self.traffic;
        non_negative("traffic.event_rate", t.event_rate)?;
        for (key, v) in [
            ("traffic.data_packet_bytes", t.data_packet_bytes),
            ("traffic.beacon_bytes", t.beacon_bytes),
            ("traffic.ack_bytes", t.ack_bytes),
            ("traffic.control_bytes", t.control_bytes),
        ] {
            if v == 0 {
                return Err(ConfigError::invalid(key, "must be > 0"));
            }
        }
        non_negative("traffic.security_interval", t.security_interval)?;
        non_negative("traffic.local_control_interval", t.local_control_interval)?;

        let p = &self.protocol;
        non_negative("protocol.alpha", p.alpha)?;
        non_negative("protocol.beta", p.beta)?;
        if p.alpha == 0.0 && p.beta == 0.0 {
            return Err(ConfigError::invalid("protocol.alpha", "alpha and beta cannot both be 0"));
        }
        positive("protocol.monitor_interval", p.monitor_interval)?;
        positive("protocol.sink_interval", p.sink_interval)?;
        if p.queue_capacity == 0 {
            return Err(ConfigError::invalid("protocol.queue_capacity", "must be > 0"));
        }
        non_negative("protocol.ack_guard", p.ack_guard)?;
        non_negative("protocol.backoff_window", p.backoff_window)?;
        non_negative("protocol.flood_jitter", p.flood_jitter)?;

        let e = &self.experiment;
        positive("experiment.max_sim_time", e.max_sim_time)?;
        positive("experiment.harvest_tick", e.harvest_tick)?;
        Ok(())
    }
}

fn merge(base: &mut serde_json::Value, overlay: serde_json::Value) {
    match (base, overlay) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

pub fn load_config(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    SimConfig::from_json_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        let c = SimConfig::from_json_str("{}").unwrap();
        assert_eq!(c, SimConfig::default());
    }

    #[test]
    fn zero_bitrate_names_key() {
        let err = SimConfig::from_json_str(r#"{"energy":{"bitrate":0}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("energy.bitrate"), "{msg}");
        assert!(msg.contains("must be > 0"), "{msg}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = SimConfig::from_json_str(r#"{"traffic":{"event_rat":2}}"#).unwrap_err();
        assert!(matches!(&err, ConfigError::UnknownKey { key } if key == "traffic.event_rat"), "{err}");
        let err = SimConfig::from_json_str(r#"{"bogus":{}}"#).unwrap_err();
        assert!(matches!(&err, ConfigError::UnknownKey { key } if key == "bogus"), "{err}");
        let err = SimConfig::from_json_str(r#"{"energy":{"state_power":{"memory":{"hot":1}}}}"#).unwrap_err();
        assert!(
            matches!(&err, ConfigError::UnknownKey { key } if key == "energy.state_power.memory.hot"),
            "{err}"
        );
    }

    #[test]
    fn malformed_and_type_errors() {
        assert!(matches!(SimConfig::from_json_str("{"), Err(ConfigError::Malformed(_))));
        let err = SimConfig::from_json_str(r#"{"deployment":{"node_count":"many"}}"#).unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "deployment.node_count"), "{err}");
    }

    #[test]
    fn constraint_violations() {
        let cases = [
            (r#"{"deployment":{"tx_radius":0}}"#, "deployment.tx_radius"),
            (r#"{"deployment":{"sink_position":[500,1]}}"#, "deployment.sink_position"),
            (r#"{"protocol":{"queue_capacity":0}}"#, "protocol.queue_capacity"),
            (r#"{"energy":{"state_power":{"memory":{"idle":5}}}}"#, "energy.state_power.memory.active"),
            (r#"{"traffic":{"data_packet_bytes":0}}"#, "traffic.data_packet_bytes"),
        ];
        for (doc, key) in cases {
            let err = SimConfig::from_json_str(doc).unwrap_err();
            assert!(err.to_string().starts_with(key), "{doc}: {err}");
        }
    }

    #[test]
    fn partial_section_keeps_sibling_defaults() {
        let c = SimConfig::from_json_str(r#"{"energy":{"state_power":{"memory":{"idle":2e-6}}}}"#).unwrap();
        let d = SimConfig::default();
        assert_eq!(c.energy.state_power.memory.idle, 2e-6);
        assert_eq!(c.energy.state_power.memory.active, d.energy.state_power.memory.active);
        assert_eq!(c.energy.state_power.processing, d.energy.state_power.processing);
    }

    #[test]
    fn round_trip() {
        let c = SimConfig::from_json_str(r#"{"deployment":{"tx_radius":42.5},"protocol":{"policy":"random"}}"#).unwrap();
        let again = SimConfig::from_json_str(&c.to_json_string()).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.policy(), RoutingPolicy::Random);
    }
}
