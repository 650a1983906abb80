//! On-disk scenario format: a TOML document declaring the topology, the
//! traffic, the failures, the adversaries, and the monitoring plan.
//!
//! Unknown keys are rejected; parse errors carry line and column. See
//! `scenarios/` for working files. The shape:
//!
//! ```toml
//! seed = 42
//! duration_ms = 1000
//!
//! [[switches]]
//! name = "e0"
//! role = "edge"            # edge | core
//!
//! [[links]]
//! ends = ["e0", "c1"]
//!
//! [[hosts]]
//! name = "h0"
//! switch = "e0"
//!
//! [[flows]]
//! src = "h0"
//! dst = "h1"
//! packets = 10
//!
//! [[failures]]
//! at_ms = 5
//! link = ["c1", "e2"]
//!
//! [[adversaries]]
//! switch = "c1"
//! behavior = "detour"
//! via = "c3"
//!
//! [[monitors]]
//! switch = "c1"
//! flow = 0
//! ```

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::controller::ControllerConfig;
use crate::simnet::{
    AdversaryBehavior, FlowSpec, MonitorDirective, MulticastSpec, Scenario, ScenarioError,
    SimTiming,
};
use crate::topology::{SwitchRole, Topology, TopologyError};

#[derive(Debug, Error)]
pub enum ScenarioFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    /// Syntax or schema violation; the message carries line and column.
    #[error("{0}")]
    Parse(#[from] toml::de::Error),

    #[error(transparent)]
    Topology(#[from] TopologyError),

    #[error(transparent)]
    Scenario(#[from] ScenarioError),

    #[error("adversary {index}: {message}")]
    Adversary { index: usize, message: String },
}

fn default_true() -> bool {
    true
}
fn default_packets() -> u32 {
    1
}
fn default_gap_ms() -> u64 {
    1
}
fn default_payload() -> u16 {
    64
}
fn default_proto() -> u8 {
    17
}
fn default_l4_src() -> u16 {
    10_000
}
fn default_l4_dst() -> u16 {
    80
}
fn default_duration() -> u64 {
    1_000
}
fn default_mcast_start() -> u64 {
    20
}
fn default_ttl() -> u32 {
    3_600
}

/// The parsed document, names unresolved.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_duration")]
    pub duration_ms: u64,
    #[serde(default = "default_true")]
    pub report_headers: bool,
    #[serde(default)]
    pub timing: TimingSection,
    #[serde(default)]
    pub controller: ControllerSection,
    pub switches: Vec<SwitchDecl>,
    #[serde(default)]
    pub links: Vec<LinkDecl>,
    #[serde(default)]
    pub hosts: Vec<HostDecl>,
    #[serde(default)]
    pub flows: Vec<FlowDecl>,
    #[serde(default)]
    pub multicast: Vec<MulticastDecl>,
    #[serde(default)]
    pub failures: Vec<FailureDecl>,
    #[serde(default)]
    pub adversaries: Vec<AdversaryDecl>,
    #[serde(default)]
    pub monitors: Vec<MonitorDecl>,
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct TimingSection {
    pub link_delay_ms: Option<u64>,
    pub channel_delay_ms: Option<u64>,
    pub command_interval_ms: Option<u64>,
    pub reconfigure_delay_ms: Option<u64>,
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    pub flow_ttl_secs: Option<u32>,
    pub failover_ttl_secs: Option<u32>,
    pub replay_threshold: Option<u32>,
    pub reconfigure_after_failure: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchDecl {
    pub name: String,
    pub role: SwitchRole,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDecl {
    pub ends: [String; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostDecl {
    pub name: String,
    pub switch: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowDecl {
    pub src: String,
    pub dst: String,
    #[serde(default = "default_packets")]
    pub packets: u32,
    #[serde(default)]
    pub start_ms: u64,
    #[serde(default = "default_gap_ms")]
    pub gap_ms: u64,
    #[serde(default = "default_payload")]
    pub payload_bytes: u16,
    #[serde(default = "default_proto")]
    pub proto: u8,
    #[serde(default = "default_l4_src")]
    pub l4_src: u16,
    #[serde(default = "default_l4_dst")]
    pub l4_dst: u16,
    #[serde(default)]
    pub do_not_detour: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MulticastDecl {
    pub src: String,
    pub members: Vec<String>,
    #[serde(default = "default_packets")]
    pub packets: u32,
    #[serde(default = "default_mcast_start")]
    pub start_ms: u64,
    #[serde(default = "default_gap_ms")]
    pub gap_ms: u64,
    #[serde(default = "default_payload")]
    pub payload_bytes: u16,
    #[serde(default = "default_ttl")]
    pub ttl_secs: u32,
    #[serde(default)]
    pub update_at_ms: Option<u64>,
    #[serde(default = "default_true")]
    pub safeguard: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureDecl {
    pub at_ms: u64,
    pub link: [String; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryDecl {
    #[serde(default)]
    pub switch: Option<String>,
    #[serde(default)]
    pub host: Option<String>,
    pub behavior: String,
    /// Detour: the off-path neighbor handed the packet.
    #[serde(default)]
    pub via: Option<String>,
    /// Forge: the switch the forged path aims at.
    #[serde(default)]
    pub target: Option<String>,
    /// Shortcut: switches skipped.
    #[serde(default)]
    pub skip: Option<u8>,
    /// PVF replay: which packet of each flow to capture.
    #[serde(default)]
    pub source_packet: Option<u32>,
    /// Packet dropping: fraction discarded.
    #[serde(default)]
    pub rate: Option<f64>,
    /// Flow flooding: novel flows per second.
    #[serde(default)]
    pub flows_per_sec: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorDecl {
    pub switch: String,
    pub flow: usize,
}

impl ScenarioFile {
    /// Parses a scenario document. Unknown keys and malformed values are
    /// rejected with line/column diagnostics.
    pub fn parse(text: &str) -> Result<Self, ScenarioFileError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioFileError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Resolves names against the declared topology and produces a
    /// runnable scenario.
    pub fn build(&self) -> Result<Scenario, ScenarioFileError> {
        let mut topology = Topology::new();
        for decl in &self.switches {
            topology.add_switch(&decl.name, decl.role)?;
        }
        for decl in &self.links {
            let a = topology.switch_by_name(&decl.ends[0])?;
            let b = topology.switch_by_name(&decl.ends[1])?;
            topology.add_link(a, b)?;
        }
        for decl in &self.hosts {
            let switch = topology.switch_by_name(&decl.switch)?;
            topology.attach_host(&decl.name, switch)?;
        }

        let mut scenario = Scenario::new(topology);
        scenario.seed = self.seed;
        scenario.duration_ms = self.duration_ms;
        scenario.report_headers = self.report_headers;

        let defaults = SimTiming::default();
        scenario.timing = SimTiming {
            link_delay_ms: self.timing.link_delay_ms.unwrap_or(defaults.link_delay_ms),
            channel_delay_ms: self
                .timing
                .channel_delay_ms
                .unwrap_or(defaults.channel_delay_ms),
            command_interval_ms: self
                .timing
                .command_interval_ms
                .unwrap_or(defaults.command_interval_ms),
            reconfigure_delay_ms: self
                .timing
                .reconfigure_delay_ms
                .unwrap_or(defaults.reconfigure_delay_ms),
        };
        let cfg = ControllerConfig::default();
        scenario.controller = ControllerConfig {
            flow_ttl_secs: self.controller.flow_ttl_secs.unwrap_or(cfg.flow_ttl_secs),
            failover_ttl_secs: self
                .controller
                .failover_ttl_secs
                .unwrap_or(cfg.failover_ttl_secs),
            replay_threshold: self
                .controller
                .replay_threshold
                .unwrap_or(cfg.replay_threshold),
            reconfigure_after_failure: self
                .controller
                .reconfigure_after_failure
                .unwrap_or(cfg.reconfigure_after_failure),
        };

        for decl in &self.flows {
            let src = scenario.topology.host_by_name(&decl.src)?;
            let dst = scenario.topology.host_by_name(&decl.dst)?;
            scenario.flows.push(FlowSpec {
                src,
                dst,
                packets: decl.packets,
                start_ms: decl.start_ms,
                gap_ms: decl.gap_ms,
                payload_bytes: decl.payload_bytes,
                ip_proto: decl.proto,
                l4_src: decl.l4_src,
                l4_dst: decl.l4_dst,
                do_not_detour: decl.do_not_detour,
            });
        }

        for decl in &self.multicast {
            let src = scenario.topology.host_by_name(&decl.src)?;
            let members = decl
                .members
                .iter()
                .map(|m| scenario.topology.host_by_name(m))
                .collect::<Result<Vec<_>, _>>()?;
            scenario.multicast.push(MulticastSpec {
                src,
                members,
                packets: decl.packets,
                start_ms: decl.start_ms,
                gap_ms: decl.gap_ms,
                payload_bytes: decl.payload_bytes,
                ttl_secs: decl.ttl_secs,
                update_at_ms: decl.update_at_ms,
                safeguard: decl.safeguard,
            });
        }

        for decl in &self.failures {
            let a = scenario.topology.switch_by_name(&decl.link[0])?;
            let b = scenario.topology.switch_by_name(&decl.link[1])?;
            scenario.fail_link(decl.at_ms, a, b)?;
        }

        for (index, decl) in self.adversaries.iter().enumerate() {
            let behavior = self.parse_behavior(index, decl, &scenario)?;
            match (&decl.switch, &decl.host) {
                (Some(name), None) => {
                    let id = scenario.topology.switch_by_name(name)?;
                    scenario.attach_adversary(id, behavior)?;
                }
                (None, Some(name)) => {
                    let id = scenario.topology.host_by_name(name)?;
                    scenario.attach_host_adversary(id, behavior)?;
                }
                _ => {
                    return Err(ScenarioFileError::Adversary {
                        index,
                        message: "exactly one of `switch` or `host` must be set".into(),
                    })
                }
            }
        }

        for decl in &self.monitors {
            let switch = scenario.topology.switch_by_name(&decl.switch)?;
            scenario.monitors.push(MonitorDirective {
                switch,
                flow: decl.flow,
            });
        }

        scenario.validate()?;
        Ok(scenario)
    }

    fn parse_behavior(
        &self,
        index: usize,
        decl: &AdversaryDecl,
        scenario: &Scenario,
    ) -> Result<AdversaryBehavior, ScenarioFileError> {
        let missing = |what: &str| ScenarioFileError::Adversary {
            index,
            message: format!("behavior {:?} needs `{what}`", decl.behavior),
        };
        Ok(match decl.behavior.as_str() {
            "honest" => AdversaryBehavior::Honest,
            "detour" => {
                let via = decl.via.as_ref().ok_or_else(|| missing("via"))?;
                AdversaryBehavior::Detour {
                    via: scenario.topology.switch_by_name(via)?,
                }
            }
            "forge" => {
                let target = decl.target.as_ref().ok_or_else(|| missing("target"))?;
                AdversaryBehavior::Forge {
                    target: scenario.topology.switch_by_name(target)?,
                }
            }
            "shortcut" => AdversaryBehavior::Shortcut {
                skip: decl.skip.ok_or_else(|| missing("skip"))?,
            },
            "pvf_replay" => AdversaryBehavior::PvfReplay {
                source_packet: decl.source_packet.unwrap_or(1),
            },
            "seqno_replay" => AdversaryBehavior::SeqnoReplay,
            "flood_flows" => AdversaryBehavior::FloodFlows {
                rate: decl.flows_per_sec.ok_or_else(|| missing("flows_per_sec"))?,
            },
            "drop_packets" => AdversaryBehavior::DropPackets {
                rate: decl.rate.ok_or_else(|| missing("rate"))?,
            },
            "dishonest_counter" => AdversaryBehavior::DishonestCounter,
            other => {
                return Err(ScenarioFileError::Adversary {
                    index,
                    message: format!("unknown behavior {other:?}"),
                })
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
duration_ms = 200

[[switches]]
name = "e0"
role = "edge"

[[switches]]
name = "c1"
role = "core"

[[switches]]
name = "e2"
role = "edge"

[[links]]
ends = ["e0", "c1"]

[[links]]
ends = ["c1", "e2"]

[[hosts]]
name = "h0"
switch = "e0"

[[hosts]]
name = "h1"
switch = "e2"

[[flows]]
src = "h0"
dst = "h1"
packets = 3
"#;

    #[test]
    fn minimal_scenario_parses_and_runs() {
        let file = ScenarioFile::parse(MINIMAL).unwrap();
        let scenario = file.build().unwrap();
        assert_eq!(scenario.seed, 3);
        assert_eq!(scenario.flows.len(), 1);
        let out = crate::simnet::run_scenario(&scenario).unwrap();
        assert_eq!(out.delivered, 3);
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let text = format!("{MINIMAL}\nnonsense = 1\n");
        let err = ScenarioFile::parse(&text).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("nonsense"), "{message}");
        assert!(message.contains("line"), "{message}");
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let err = ScenarioFile::parse("seed = [unclosed").unwrap_err();
        let message = err.to_string();
        assert!(message.contains("line 1"), "{message}");
        assert!(message.contains("column"), "{message}");
    }

    #[test]
    fn adversary_parameters_are_checked() {
        let text = format!("{MINIMAL}\n[[adversaries]]\nswitch = \"c1\"\nbehavior = \"detour\"\n");
        let err = ScenarioFile::parse(&text).unwrap().build().unwrap_err();
        assert!(err.to_string().contains("via"), "{err}");
    }

    #[test]
    fn unknown_names_are_rejected() {
        let text = format!("{MINIMAL}\n[[monitors]]\nswitch = \"nope\"\nflow = 0\n");
        let err = ScenarioFile::parse(&text).unwrap().build().unwrap_err();
        assert!(err.to_string().contains("nope"), "{err}");
    }
}
