//! Deterministic discrete-event simulation: topologies under traffic, link
//! failures, adversarial switches, and the traces everything leaves behind.
//!
//! A run is a pure function of the scenario (including its seed). Virtual
//! time is in milliseconds; expiry comparisons floor it to whole seconds.
//! Events firing at the same instant are handled in insertion order.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::net::Ipv4Addr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{
    AddressedCommand, Controller, ControllerConfig, ControllerError, FlowKey, Notification,
    SwitchCommand, ValidationVerdict,
};
use crate::crypto::{pvf_step, verify_fe, PvfTweak};
use crate::switch::{Action, DataPacket, DropReason, HostPacket, Switch, SwitchStats};
use crate::topology::{PortPeer, Topology};
use crate::types::{FlowId, HostId, SwitchId};
use crate::wire::{self, Header, Pvf};

/// Per-hop transit delay.
pub const DEFAULT_LINK_DELAY_MS: u64 = 1;
/// Copies a sequence-number replayer emits on top of each real packet.
pub const SEQNO_REPLAY_COPIES: usize = 5;
/// Fraction of the true count a dishonest switch reports.
pub const DISHONEST_COUNTER_FACTOR: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("unknown switch {0:?}")]
    UnknownSwitch(String),

    #[error("unknown host {0:?}")]
    UnknownHost(String),

    #[error("no link between {0} and {1}")]
    NoSuchLink(String, String),

    #[error("flow {0} is invalid: {1}")]
    BadFlow(usize, String),

    #[error("multicast group {0} is invalid: {1}")]
    BadMulticast(usize, String),

    #[error("monitor directive {0} references flow {1} which does not exist")]
    BadMonitor(usize, usize),

    #[error("adversary on {0}: {1}")]
    BadAdversary(String, String),

    #[error("controller failure during simulation: {0}")]
    Controller(#[from] ControllerError),
}

/// One misbehavior, mapped to the attack it realizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryBehavior {
    Honest,
    /// Redirect traffic to an off-path neighbor instead of the authorized
    /// next hop (path detour; also the building block of the colluding
    /// wormhole when the neighbor misbehaves too).
    Detour {
        via: SwitchId,
    },
    /// Replace the remaining forwarding entries with forgeries and steer
    /// the packet toward `target` (path forging).
    Forge {
        target: SwitchId,
    },
    /// Skip `skip` switches by advancing the FE pointer past them (path
    /// shortcut).
    Shortcut {
        skip: u8,
    },
    /// Stamp every later packet with the sequence number and PVF captured
    /// from the `source_packet`-th packet of its flow (PVF replay).
    PvfReplay {
        source_packet: u32,
    },
    /// Re-emit every forwarded packet several times (packet replay).
    SeqnoReplay,
    /// Originate `rate` novel flows per second (state exhaustion; host
    /// behavior).
    FloodFlows {
        rate: u32,
    },
    /// Silently discard this fraction of packets.
    DropPackets {
        rate: f64,
    },
    /// Forward faithfully but under-report monitoring counters.
    DishonestCounter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub src: HostId,
    pub dst: HostId,
    pub packets: u32,
    pub start_ms: u64,
    pub gap_ms: u64,
    pub payload_bytes: u16,
    pub ip_proto: u8,
    pub l4_src: u16,
    pub l4_dst: u16,
    pub do_not_detour: bool,
}

impl FlowSpec {
    pub fn new(src: HostId, dst: HostId, packets: u32) -> Self {
        FlowSpec {
            src,
            dst,
            packets,
            start_ms: 0,
            gap_ms: 1,
            payload_bytes: 64,
            ip_proto: 17,
            l4_src: 10_000,
            l4_dst: 80,
            do_not_detour: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MulticastSpec {
    pub src: HostId,
    pub members: Vec<HostId>,
    pub packets: u32,
    pub start_ms: u64,
    pub gap_ms: u64,
    pub payload_bytes: u16,
    pub ttl_secs: u32,
    /// Re-create the tree (fresh tree id, same membership) at this time.
    pub update_at_ms: Option<u64>,
    /// Two-phase installation: the ingress switches over only after every
    /// other tree switch has acknowledged.
    pub safeguard: bool,
}

impl MulticastSpec {
    pub fn new(src: HostId, members: Vec<HostId>, packets: u32) -> Self {
        MulticastSpec {
            src,
            members,
            packets,
            start_ms: 20,
            gap_ms: 1,
            payload_bytes: 64,
            ttl_secs: 3600,
            update_at_ms: None,
            safeguard: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkFailure {
    pub at_ms: u64,
    pub a: SwitchId,
    pub b: SwitchId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorDirective {
    pub switch: SwitchId,
    /// Index into [`Scenario::flows`].
    pub flow: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTiming {
    pub link_delay_ms: u64,
    /// One-way controller channel latency.
    pub channel_delay_ms: u64,
    /// Spacing between commands of one multicast installation batch.
    pub command_interval_ms: u64,
    /// Operator reconfiguration lag after a failure notice.
    pub reconfigure_delay_ms: u64,
}

impl Default for SimTiming {
    fn default() -> Self {
        SimTiming {
            link_delay_ms: DEFAULT_LINK_DELAY_MS,
            channel_delay_ms: 0,
            command_interval_ms: 1,
            reconfigure_delay_ms: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub topology: Topology,
    pub seed: u64,
    pub duration_ms: u64,
    pub timing: SimTiming,
    pub controller: ControllerConfig,
    /// Egress switches report delivered packet headers.
    pub report_headers: bool,
    pub flows: Vec<FlowSpec>,
    pub multicast: Vec<MulticastSpec>,
    pub failures: Vec<LinkFailure>,
    pub switch_adversaries: BTreeMap<SwitchId, AdversaryBehavior>,
    pub host_adversaries: BTreeMap<HostId, AdversaryBehavior>,
    pub monitors: Vec<MonitorDirective>,
}

impl Scenario {
    pub fn new(topology: Topology) -> Self {
        Scenario {
            topology,
            seed: 0,
            duration_ms: 1_000,
            timing: SimTiming::default(),
            controller: ControllerConfig::default(),
            report_headers: true,
            flows: Vec::new(),
            multicast: Vec::new(),
            failures: Vec::new(),
            switch_adversaries: BTreeMap::new(),
            host_adversaries: BTreeMap::new(),
            monitors: Vec::new(),
        }
    }

    /// Schedules a link to go down at `at_ms`.
    pub fn fail_link(&mut self, at_ms: u64, a: SwitchId, b: SwitchId) -> Result<(), ScenarioError> {
        if self.topology.interface_toward(a, b, None).is_none() {
            return Err(ScenarioError::NoSuchLink(
                self.topology.switch(a).name.clone(),
                self.topology.switch(b).name.clone(),
            ));
        }
        self.failures.push(LinkFailure { at_ms, a, b });
        Ok(())
    }

    /// Assigns a behavior to a switch.
    pub fn attach_adversary(
        &mut self,
        switch: SwitchId,
        behavior: AdversaryBehavior,
    ) -> Result<(), ScenarioError> {
        let name = || self.topology.switch(switch).name.clone();
        match behavior {
            AdversaryBehavior::FloodFlows { .. } => {
                return Err(ScenarioError::BadAdversary(
                    name(),
                    "flow flooding is host behavior".into(),
                ))
            }
            AdversaryBehavior::Detour { via } => {
                if self.topology.interface_toward(switch, via, None).is_none() {
                    return Err(ScenarioError::BadAdversary(
                        name(),
                        format!("no direct link to detour target {via}"),
                    ));
                }
            }
            AdversaryBehavior::DropPackets { rate } => {
                if !(0.0..=1.0).contains(&rate) {
                    return Err(ScenarioError::BadAdversary(
                        name(),
                        format!("drop rate {rate} outside [0, 1]"),
                    ));
                }
            }
            AdversaryBehavior::Shortcut { skip: 0 } => {
                return Err(ScenarioError::BadAdversary(
                    name(),
                    "a shortcut must skip at least one switch".into(),
                ));
            }
            _ => {}
        }
        self.switch_adversaries.insert(switch, behavior);
        Ok(())
    }

    /// Assigns a behavior to a host (flow flooding only).
    pub fn attach_host_adversary(
        &mut self,
        host: HostId,
        behavior: AdversaryBehavior,
    ) -> Result<(), ScenarioError> {
        if !matches!(behavior, AdversaryBehavior::FloodFlows { .. }) {
            return Err(ScenarioError::BadAdversary(
                self.topology.host(host).name.clone(),
                "hosts can only flood flows".into(),
            ));
        }
        self.host_adversaries.insert(host, behavior);
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let hosts = self.topology.hosts().len() as u16;
        let switches = self.topology.switches().len() as u16;
        for (i, flow) in self.flows.iter().enumerate() {
            if flow.src.0 >= hosts || flow.dst.0 >= hosts {
                return Err(ScenarioError::BadFlow(i, "unknown host".into()));
            }
            if flow.src == flow.dst {
                return Err(ScenarioError::BadFlow(
                    i,
                    "source equals destination".into(),
                ));
            }
        }
        for (i, mc) in self.multicast.iter().enumerate() {
            if mc.src.0 >= hosts || mc.members.iter().any(|m| m.0 >= hosts) {
                return Err(ScenarioError::BadMulticast(i, "unknown host".into()));
            }
            if mc.members.is_empty() {
                return Err(ScenarioError::BadMulticast(i, "no members".into()));
            }
        }
        for failure in &self.failures {
            if self
                .topology
                .interface_toward(failure.a, failure.b, None)
                .is_none()
            {
                return Err(ScenarioError::NoSuchLink(
                    self.topology.switch(failure.a).name.clone(),
                    self.topology.switch(failure.b).name.clone(),
                ));
            }
        }
        for (i, m) in self.monitors.iter().enumerate() {
            if m.flow >= self.flows.len() {
                return Err(ScenarioError::BadMonitor(i, m.flow));
            }
            if m.switch.0 >= switches {
                return Err(ScenarioError::UnknownSwitch(format!("{}", m.switch)));
            }
        }
        Ok(())
    }

    /// The flow key packets of this flow spec will carry.
    pub fn flow_key(&self, index: usize) -> FlowKey {
        let spec = &self.flows[index];
        let src = self.topology.host(spec.src);
        let dst = self.topology.host(spec.dst);
        FlowKey {
            in_port: src.switch_if,
            eth_src: src.mac,
            eth_dst: dst.mac,
            ethertype: 0x0800,
            ip_src: src.ip,
            ip_dst: dst.ip,
            ip_proto: spec.ip_proto,
            l4_src: spec.l4_src,
            l4_dst: spec.l4_dst,
        }
    }

    /// Group address of the `index`-th multicast spec.
    pub fn group_address(&self, index: usize) -> Ipv4Addr {
        Ipv4Addr::new(239, 0, (index >> 8) as u8, index as u8)
    }
}

// ----------------------------------------------------------------------
// Trace.
// ----------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketSnapshot {
    pub uid: u64,
    pub header_hex: String,
    pub payload_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    /// Sent out `out_if` toward another switch (or, under misbehavior, a
    /// raw header toward a host, which discards it).
    Forward {
        out_if: u8,
        to: String,
        packet: PacketSnapshot,
    },
    /// Header stripped and handed to a host.
    Deliver {
        out_if: u8,
        to: String,
        uid: u64,
        payload_hex: String,
    },
    Drop {
        reason: DropReason,
        packet: PacketSnapshot,
    },
    /// A failover path was spliced into the packet.
    Rewrite {
        failover_path_id: u32,
        lfc: u8,
        uid: u64,
    },
    /// Header report to the controller.
    Report { packet: PacketSnapshot },
    /// Monitoring counter report to the controller.
    CounterReport { flow_id: u32, count: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time_ms: u64,
    pub seq: u64,
    pub switch: String,
    #[serde(flatten)]
    pub event: TraceEvent,
}

/// Totally ordered, replayable record of a run. One line per event when
/// exported.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventTrace {
    pub records: Vec<TraceRecord>,
}

impl EventTrace {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let mut records = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(line)?);
        }
        Ok(EventTrace { records })
    }

    pub fn deliveries(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records
            .iter()
            .filter(|r| matches!(r.event, TraceEvent::Deliver { .. }))
    }

    pub fn drops(&self) -> impl Iterator<Item = (&TraceRecord, DropReason)> {
        self.records.iter().filter_map(|r| match r.event {
            TraceEvent::Drop { reason, .. } => Some((r, reason)),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderReport {
    pub switch: String,
    pub header: Vec<u8>,
    pub uid: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterReport {
    pub switch: String,
    pub flow_id: u32,
    pub count: u64,
}

/// Everything the validation component consumes, extracted from a trace in
/// deterministic order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PvcInputs {
    pub headers: Vec<HeaderReport>,
    pub counters: Vec<CounterReport>,
}

pub fn collect_reports(trace: &EventTrace) -> PvcInputs {
    let mut inputs = PvcInputs::default();
    for record in &trace.records {
        match &record.event {
            TraceEvent::Report { packet } => inputs.headers.push(HeaderReport {
                switch: record.switch.clone(),
                header: hex::decode(&packet.header_hex).unwrap_or_default(),
                uid: packet.uid,
            }),
            TraceEvent::CounterReport { flow_id, count } => inputs.counters.push(CounterReport {
                switch: record.switch.clone(),
                flow_id: *flow_id,
                count: *count,
            }),
            _ => {}
        }
    }
    inputs
}

// ----------------------------------------------------------------------
// Simulation.
// ----------------------------------------------------------------------

#[derive(Debug)]
enum EventKind {
    HostSend {
        host: HostId,
        pkt: HostPacket,
    },
    HostArrive {
        to: SwitchId,
        in_if: u8,
        pkt: HostPacket,
        uid: u64,
    },
    Arrive {
        to: SwitchId,
        packet: DataPacket,
    },
    Command {
        to: SwitchId,
        command: SwitchCommand,
    },
    Notify {
        note: Notification,
    },
    LinkFail {
        a: SwitchId,
        if_a: u8,
        b: SwitchId,
        if_b: u8,
    },
    TreeBuild {
        index: usize,
    },
    CollectCounters,
}

struct QueuedEvent {
    at: u64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}
impl Eq for QueuedEvent {}
impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we pop earliest first.
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

struct AdversaryState {
    behavior: AdversaryBehavior,
    rng: ChaCha12Rng,
    /// pvf_replay: (seq_no, pvf) captured per flow.
    captured: BTreeMap<FlowId, (u32, Pvf)>,
    /// pvf_replay: packets of each flow seen so far.
    seen: BTreeMap<FlowId, u32>,
}

/// Final state of a run: the trace, the controller (for validation), and
/// per-switch statistics.
#[derive(Debug)]
pub struct SimOutput {
    pub trace: EventTrace,
    pub controller: Controller,
    pub stats: BTreeMap<String, SwitchStats>,
    pub table_sizes: BTreeMap<String, TableSizes>,
    pub injected: u64,
    pub delivered: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TableSizes {
    pub ingress: usize,
    pub egress: usize,
    pub failover: usize,
    pub multicast: usize,
    pub monitor: usize,
}

/// Runs a scenario to completion. Identical scenarios (same seed) produce
/// byte-identical traces.
pub fn run_scenario(scenario: &Scenario) -> Result<SimOutput, ScenarioError> {
    scenario.validate()?;
    Sim::new(scenario)?.run()
}

/// Validates every header report in a trace against the controller that
/// produced it, in trace order.
pub fn validate_trace(
    controller: &mut Controller,
    trace: &EventTrace,
) -> Vec<(HeaderReport, ValidationVerdict)> {
    let inputs = collect_reports(trace);
    let mut verdicts = Vec::with_capacity(inputs.headers.len());
    for report in inputs.headers {
        let switch = controller
            .topology
            .switch_by_name(&report.switch)
            .unwrap_or(SwitchId(u16::MAX));
        let verdict = controller.validate_header(&report.header, switch);
        verdicts.push((report, verdict));
    }
    verdicts
}

struct Sim<'a> {
    scenario: &'a Scenario,
    now: u64,
    seq: u64,
    queue: BinaryHeap<QueuedEvent>,
    switches: BTreeMap<SwitchId, Switch>,
    adversaries: BTreeMap<SwitchId, AdversaryState>,
    controller: Controller,
    records: Vec<TraceRecord>,
    trace_seq: u64,
    uid_next: u64,
    injected: u64,
    delivered: u64,
    /// do-not-detour flags by flow key, from the flow specs.
    dnd: BTreeMap<FlowKey, bool>,
}

impl<'a> Sim<'a> {
    fn new(scenario: &'a Scenario) -> Result<Self, ScenarioError> {
        let mut rng = ChaCha12Rng::seed_from_u64(scenario.seed);
        let mut controller = Controller::new(
            scenario.topology.clone(),
            scenario.controller.clone(),
            &mut rng,
        );

        // Provisioning phase: failover tables are installed before any
        // traffic exists.
        let failover_cmds = controller.precompute_failover(0)?;

        let mut switches = BTreeMap::new();
        for node in scenario.topology.switches() {
            let keys = controller
                .keystore
                .keys(node.id)
                .expect("all switches provisioned")
                .clone();
            let mut sw = Switch::new(
                node.id,
                node.name.clone(),
                node.role,
                keys,
                scenario.topology.ports(node.id).clone(),
            );
            sw.report_headers = scenario.report_headers;
            switches.insert(node.id, sw);
        }
        for AddressedCommand { to, command } in failover_cmds {
            if let SwitchCommand::InstallFailover { record } = command {
                switches
                    .get_mut(&to)
                    .expect("switch exists")
                    .install_failover(record);
            }
        }

        let mut adversaries = BTreeMap::new();
        for (&id, &behavior) in &scenario.switch_adversaries {
            adversaries.insert(
                id,
                AdversaryState {
                    behavior,
                    rng: ChaCha12Rng::seed_from_u64(
                        scenario.seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(id.0 as u64 + 1)),
                    ),
                    captured: BTreeMap::new(),
                    seen: BTreeMap::new(),
                },
            );
        }

        let mut dnd = BTreeMap::new();
        for (i, spec) in scenario.flows.iter().enumerate() {
            dnd.insert(scenario.flow_key(i), spec.do_not_detour);
        }
        for (i, _) in scenario.flows.iter().enumerate() {
            let monitors: Vec<SwitchId> = scenario
                .monitors
                .iter()
                .filter(|m| m.flow == i)
                .map(|m| m.switch)
                .collect();
            if !monitors.is_empty() {
                controller.plan_monitoring(scenario.flow_key(i), monitors);
            }
        }

        Ok(Sim {
            scenario,
            now: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            switches,
            adversaries,
            controller,
            records: Vec::new(),
            trace_seq: 0,
            uid_next: 0,
            injected: 0,
            delivered: 0,
            dnd,
        })
    }

    fn now_secs(&self) -> u32 {
        (self.now / 1000) as u32
    }

    fn schedule(&mut self, at: u64, kind: EventKind) {
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(QueuedEvent { at, seq, kind });
    }

    fn trace(&mut self, switch: &str, event: TraceEvent) {
        let record = TraceRecord {
            time_ms: self.now,
            seq: self.trace_seq,
            switch: switch.to_string(),
            event,
        };
        self.trace_seq += 1;
        self.records.push(record);
    }

    fn seed_initial_events(&mut self) {
        // Unicast flows.
        for (i, spec) in self.scenario.flows.iter().enumerate() {
            let key = self.scenario.flow_key(i);
            let src_id = self.scenario.topology.host(spec.src).id;
            for n in 0..spec.packets {
                let pkt = HostPacket {
                    eth_src: key.eth_src,
                    eth_dst: key.eth_dst,
                    ethertype: key.ethertype,
                    ip_src: key.ip_src,
                    ip_dst: key.ip_dst,
                    ip_proto: key.ip_proto,
                    l4_src: key.l4_src,
                    l4_dst: key.l4_dst,
                    payload: payload_pattern(i as u64, n as u64, spec.payload_bytes),
                };
                self.schedule(
                    spec.start_ms + n as u64 * spec.gap_ms,
                    EventKind::HostSend { host: src_id, pkt },
                );
            }
        }

        // Multicast groups: tree creation, then traffic.
        for (i, spec) in self.scenario.multicast.iter().enumerate() {
            self.schedule(0, EventKind::TreeBuild { index: i });
            if let Some(at) = spec.update_at_ms {
                self.schedule(at, EventKind::TreeBuild { index: i });
            }
            let group = self.scenario.group_address(i);
            let src = self.scenario.topology.host(spec.src).clone();
            for n in 0..spec.packets {
                let pkt = HostPacket {
                    eth_src: src.mac,
                    eth_dst: [0x01, 0x00, 0x5E, 0x00, (i >> 8) as u8, i as u8],
                    ethertype: 0x0800,
                    ip_src: src.ip,
                    ip_dst: group,
                    ip_proto: 17,
                    l4_src: 5000,
                    l4_dst: 5000,
                    payload: payload_pattern(0x4D00 + i as u64, n as u64, spec.payload_bytes),
                };
                self.schedule(
                    spec.start_ms + n as u64 * spec.gap_ms,
                    EventKind::HostSend { host: src.id, pkt },
                );
            }
        }

        // Host floods: novel flow keys at a steady rate.
        for (&host, behavior) in &self.scenario.host_adversaries {
            let AdversaryBehavior::FloodFlows { rate } = *behavior else {
                continue;
            };
            let total = (rate as u64 * self.scenario.duration_ms / 1000) as u32;
            let src = self.scenario.topology.host(host);
            let victim = self
                .scenario
                .topology
                .hosts()
                .iter()
                .find(|h| h.id != host && h.switch != src.switch)
                .or_else(|| self.scenario.topology.hosts().iter().find(|h| h.id != host))
                .expect("a flood needs a victim host");
            for n in 0..total {
                let pkt = HostPacket {
                    eth_src: src.mac,
                    eth_dst: victim.mac,
                    ethertype: 0x0800,
                    ip_src: src.ip,
                    ip_dst: victim.ip,
                    ip_proto: 17,
                    l4_src: (n >> 16) as u16,
                    l4_dst: n as u16,
                    payload: vec![0xFD; 8],
                };
                self.schedule(
                    n as u64 * self.scenario.duration_ms / total.max(1) as u64,
                    EventKind::HostSend { host, pkt },
                );
            }
        }

        // Failures.
        for failure in &self.scenario.failures {
            let if_a = self
                .scenario
                .topology
                .interface_toward(failure.a, failure.b, None)
                .expect("validated");
            let Some(PortPeer::Switch(_, if_b)) = self.scenario.topology.peer(failure.a, if_a)
            else {
                unreachable!("interface_toward returned a switch link");
            };
            self.schedule(
                failure.at_ms,
                EventKind::LinkFail {
                    a: failure.a,
                    if_a,
                    b: failure.b,
                    if_b,
                },
            );
        }

        if !self.scenario.monitors.is_empty() {
            self.schedule(self.scenario.duration_ms, EventKind::CollectCounters);
        }
    }

    fn run(mut self) -> Result<SimOutput, ScenarioError> {
        self.seed_initial_events();
        while let Some(event) = self.queue.pop() {
            self.now = event.at;
            self.dispatch(event.kind)?;
        }

        let stats = self
            .switches
            .values()
            .map(|sw| (sw.name.clone(), sw.stats))
            .collect();
        let table_sizes = self
            .switches
            .values()
            .map(|sw| {
                let (failover, multicast, monitor) = sw.core_table_sizes();
                (
                    sw.name.clone(),
                    TableSizes {
                        ingress: sw.ingress_table_len(),
                        egress: sw.egress_table_len(),
                        failover,
                        multicast,
                        monitor,
                    },
                )
            })
            .collect();
        Ok(SimOutput {
            trace: EventTrace {
                records: self.records,
            },
            controller: self.controller,
            stats,
            table_sizes,
            injected: self.injected,
            delivered: self.delivered,
        })
    }

    fn dispatch(&mut self, kind: EventKind) -> Result<(), ScenarioError> {
        match kind {
            EventKind::HostSend { host, pkt } => {
                self.injected += 1;
                let uid = self.uid_next;
                self.uid_next += 1;
                let h = self.scenario.topology.host(host);
                self.schedule(
                    self.now + self.scenario.timing.link_delay_ms,
                    EventKind::HostArrive {
                        to: h.switch,
                        in_if: h.switch_if,
                        pkt,
                        uid,
                    },
                );
            }
            EventKind::HostArrive {
                to,
                in_if,
                pkt,
                uid,
            } => {
                if self.adversary_absorbs(to) {
                    return Ok(());
                }
                let now_secs = self.now_secs();
                let actions = self
                    .switches
                    .get_mut(&to)
                    .expect("switch exists")
                    .host_receive(in_if, pkt, now_secs, uid);
                let actions = self.mutate_emissions(to, actions);
                self.process_actions(to, actions);
            }
            EventKind::Arrive { to, packet } => {
                if self.adversary_absorbs(to) {
                    return Ok(());
                }
                let actions = if self.adversaries.contains_key(&to) {
                    self.adversarial_receive(to, packet)
                } else {
                    let now_secs = self.now_secs();
                    self.switches
                        .get_mut(&to)
                        .expect("switch exists")
                        .receive(packet, now_secs)
                };
                self.process_actions(to, actions);
            }
            EventKind::Command { to, command } => {
                let now_secs = self.now_secs();
                let sw = self.switches.get_mut(&to).expect("switch exists");
                let actions = match command {
                    SwitchCommand::InstallIngress { flow_key, install } => {
                        sw.install_ingress(flow_key, install, now_secs)
                    }
                    SwitchCommand::InstallEgress { flow_key, out_if } => {
                        sw.install_egress(flow_key, out_if);
                        Vec::new()
                    }
                    SwitchCommand::InstallFailover { record } => {
                        sw.install_failover(record);
                        Vec::new()
                    }
                    SwitchCommand::InstallTree {
                        tree_id,
                        exp_time,
                        out_ifs,
                    } => sw.install_tree(tree_id, exp_time, out_ifs),
                    SwitchCommand::EnableTreeIngress {
                        group,
                        tree_id,
                        exp_time,
                        out_ifs,
                    } => sw.enable_tree_ingress(group, tree_id, exp_time, out_ifs, now_secs),
                    SwitchCommand::MonitorFlow { flow_id } => {
                        sw.monitor_flow(flow_id);
                        Vec::new()
                    }
                };
                let actions = self.mutate_emissions(to, actions);
                self.process_actions(to, actions);
            }
            EventKind::Notify { note } => self.handle_notification(note)?,
            EventKind::LinkFail { a, if_a, b, if_b } => {
                self.switches
                    .get_mut(&a)
                    .expect("switch exists")
                    .set_link_state(if_a, false);
                self.switches
                    .get_mut(&b)
                    .expect("switch exists")
                    .set_link_state(if_b, false);
            }
            EventKind::TreeBuild { index } => {
                let spec = &self.scenario.multicast[index];
                let group = self.scenario.group_address(index);
                let now_secs = self.now_secs();
                let (_, commands) = self.controller.create_multicast_tree(
                    group,
                    spec.src,
                    &spec.members,
                    now_secs,
                    spec.ttl_secs,
                    spec.safeguard,
                )?;
                self.dispatch_commands_staggered(commands);
            }
            EventKind::CollectCounters => self.collect_counters(),
        }
        Ok(())
    }

    /// Commands of one batch leave the controller one
    /// `command_interval_ms` apart, modeling sequential dispatch.
    fn dispatch_commands_staggered(&mut self, commands: Vec<AddressedCommand>) {
        let timing = self.scenario.timing;
        for (k, AddressedCommand { to, command }) in commands.into_iter().enumerate() {
            self.schedule(
                self.now + timing.channel_delay_ms + k as u64 * timing.command_interval_ms,
                EventKind::Command { to, command },
            );
        }
    }

    /// Admission responses land together; the ingress rule is installed
    /// last so the first stamped packet never races its own egress rule.
    fn dispatch_admission(&mut self, commands: Vec<AddressedCommand>, delay: u64) {
        let (ingress, rest): (Vec<_>, Vec<_>) = commands
            .into_iter()
            .partition(|c| matches!(c.command, SwitchCommand::InstallIngress { .. }));
        for AddressedCommand { to, command } in rest.into_iter().chain(ingress) {
            self.schedule(self.now + delay, EventKind::Command { to, command });
        }
    }

    fn handle_notification(&mut self, note: Notification) -> Result<(), ScenarioError> {
        match note {
            Notification::FlowRequest { flow_key, .. } => {
                let dnd = self.dnd.get(&flow_key).copied().unwrap_or(false);
                let now_secs = self.now_secs();
                let (_, commands) = self.controller.admit_flow(flow_key, now_secs, dnd)?;
                self.dispatch_admission(commands, self.scenario.timing.channel_delay_ms);
            }
            Notification::DropNotice {
                switch,
                reason,
                header,
            } => {
                self.controller.record_drop_notice(switch, reason, header);
            }
            Notification::FailureNotice { switch, interface } => {
                let now_secs = self.now_secs();
                let commands = self
                    .controller
                    .handle_failure_notice(switch, interface, now_secs)?;
                self.dispatch_admission(commands, self.scenario.timing.reconfigure_delay_ms);
            }
            Notification::TreeInstallAck { switch, tree_id } => {
                let commands = self.controller.handle_tree_ack(switch, tree_id);
                self.dispatch_commands_staggered(commands);
            }
        }
        Ok(())
    }

    fn collect_counters(&mut self) {
        for directive in &self.scenario.monitors {
            let key = self.scenario.flow_key(directive.flow);
            let Some(flow_id) = self.controller.active_flow(&key) else {
                continue;
            };
            let sw = &self.switches[&directive.switch];
            let Some(mut count) = sw.flow_packet_count(flow_id, &key) else {
                continue;
            };
            if matches!(
                self.adversaries.get(&directive.switch).map(|a| a.behavior),
                Some(AdversaryBehavior::DishonestCounter)
            ) {
                count = (count as f64 * DISHONEST_COUNTER_FACTOR).floor() as u64;
            }
            let name = sw.name.clone();
            let event = TraceEvent::CounterReport {
                flow_id: flow_id.as_u32(),
                count,
            };
            self.trace(&name, event);
        }
    }

    fn process_actions(&mut self, from: SwitchId, actions: Vec<Action>) {
        let from_name = self.switches[&from].name.clone();
        for action in actions {
            match action {
                Action::Transmit { out_if, packet } => {
                    let snapshot = PacketSnapshot {
                        uid: packet.uid,
                        header_hex: hex::encode(&packet.header),
                        payload_len: packet.payload.len(),
                    };
                    match self.scenario.topology.peer(from, out_if) {
                        Some(PortPeer::Switch(peer, _)) => {
                            let to = self.scenario.topology.switch(peer).name.clone();
                            self.trace(
                                &from_name,
                                TraceEvent::Forward {
                                    out_if,
                                    to,
                                    packet: snapshot,
                                },
                            );
                            self.schedule(
                                self.now + self.scenario.timing.link_delay_ms,
                                EventKind::Arrive { to: peer, packet },
                            );
                        }
                        Some(PortPeer::Host(host)) => {
                            // A raw header reached a host port; the host
                            // discards it. Only misbehavior does this.
                            let to = self.scenario.topology.host(host).name.clone();
                            self.trace(
                                &from_name,
                                TraceEvent::Forward {
                                    out_if,
                                    to,
                                    packet: snapshot,
                                },
                            );
                        }
                        None => {}
                    }
                }
                Action::Deliver {
                    out_if,
                    payload,
                    uid,
                } => {
                    self.delivered += 1;
                    let to = match self.scenario.topology.peer(from, out_if) {
                        Some(PortPeer::Host(host)) => {
                            self.scenario.topology.host(host).name.clone()
                        }
                        _ => "unknown".to_string(),
                    };
                    self.trace(
                        &from_name,
                        TraceEvent::Deliver {
                            out_if,
                            to,
                            uid,
                            payload_hex: hex::encode(&payload),
                        },
                    );
                }
                Action::Drop {
                    reason,
                    header,
                    uid,
                } => {
                    self.trace(
                        &from_name,
                        TraceEvent::Drop {
                            reason,
                            packet: PacketSnapshot {
                                uid,
                                header_hex: hex::encode(&header),
                                payload_len: 0,
                            },
                        },
                    );
                }
                Action::Rewrite {
                    failover_path_id,
                    lfc,
                    uid,
                } => {
                    self.trace(
                        &from_name,
                        TraceEvent::Rewrite {
                            failover_path_id: failover_path_id.as_u32(),
                            lfc,
                            uid,
                        },
                    );
                }
                Action::Report { header, uid } => {
                    self.trace(
                        &from_name,
                        TraceEvent::Report {
                            packet: PacketSnapshot {
                                uid,
                                header_hex: hex::encode(&header),
                                payload_len: 0,
                            },
                        },
                    );
                }
                Action::Notify(note) => {
                    self.schedule(
                        self.now + self.scenario.timing.channel_delay_ms,
                        EventKind::Notify { note },
                    );
                }
            }
        }
    }

    // ------------------------------------------------------------------
    // Adversaries.
    // ------------------------------------------------------------------

    /// Packet-drop misbehavior swallows packets before any processing.
    fn adversary_absorbs(&mut self, switch: SwitchId) -> bool {
        let Some(state) = self.adversaries.get_mut(&switch) else {
            return false;
        };
        if let AdversaryBehavior::DropPackets { rate } = state.behavior {
            return state.rng.gen::<f64>() < rate;
        }
        false
    }

    /// Post-processing mutations for packets this switch originates (it is
    /// the flow's ingress): redirect, forge, or slot-skip the emissions.
    fn mutate_emissions(&mut self, switch: SwitchId, actions: Vec<Action>) -> Vec<Action> {
        let Some(state) = self.adversaries.get(&switch) else {
            return actions;
        };
        let behavior = state.behavior;
        match behavior {
            AdversaryBehavior::Detour { .. }
            | AdversaryBehavior::Forge { .. }
            | AdversaryBehavior::Shortcut { .. } => {}
            _ => return actions,
        }
        actions
            .into_iter()
            .map(|action| match action {
                Action::Transmit { out_if, packet } => {
                    self.mutate_one_emission(switch, behavior, out_if, packet)
                }
                other => other,
            })
            .collect()
    }

    fn mutate_one_emission(
        &mut self,
        switch: SwitchId,
        behavior: AdversaryBehavior,
        out_if: u8,
        mut packet: DataPacket,
    ) -> Action {
        let Ok(Header::Unicast(mut header)) = wire::decode(&packet.header) else {
            return Action::Transmit { out_if, packet };
        };
        match behavior {
            AdversaryBehavior::Detour { via } => {
                let out_if = self
                    .scenario
                    .topology
                    .interface_toward(switch, via, None)
                    .expect("validated at attach time");
                Action::Transmit { out_if, packet }
            }
            AdversaryBehavior::Forge { target } => {
                let state = self.adversaries.get_mut(&switch).expect("present");
                for slot in header.fixed.fe_ptr as usize..header.fes.len() {
                    state.rng.fill_bytes(&mut header.fes[slot].mac);
                }
                packet.header = header.encode().expect("forged header re-encodes");
                let out_if = self.first_hop_toward(switch, target).unwrap_or(out_if);
                Action::Transmit { out_if, packet }
            }
            AdversaryBehavior::Shortcut { skip } => {
                let (out_if, skipped) = self.shortcut_route(switch, &header, skip, out_if);
                header.fixed.fe_ptr = header.fixed.fe_ptr.saturating_add(skipped);
                packet.header = header.encode().expect("shortcut header re-encodes");
                Action::Transmit { out_if, packet }
            }
            _ => Action::Transmit { out_if, packet },
        }
    }

    /// Adversarial handling of a transit packet. The switch keeps its own
    /// contribution plausible (verifying and extending where it can) and
    /// then misroutes, forges, skips, or replays.
    fn adversarial_receive(&mut self, switch: SwitchId, packet: DataPacket) -> Vec<Action> {
        let behavior = self.adversaries[&switch].behavior;
        let now_secs = self.now_secs();

        // Behaviors that leave transit processing honest.
        if matches!(
            behavior,
            AdversaryBehavior::Honest
                | AdversaryBehavior::DishonestCounter
                | AdversaryBehavior::FloodFlows { .. }
                | AdversaryBehavior::DropPackets { .. }
        ) {
            return self
                .switches
                .get_mut(&switch)
                .expect("switch exists")
                .receive(packet, now_secs);
        }

        let Ok(Header::Unicast(mut header)) = wire::decode(&packet.header) else {
            // Path-deviation behaviors only target unicast traffic.
            return self
                .switches
                .get_mut(&switch)
                .expect("switch exists")
                .receive(packet, now_secs);
        };

        // Process this switch's own slot the way an honest switch would,
        // covering its tracks. A colluder holding someone else's slot
        // passes the packet through untouched.
        let keys = self.switches[&switch].keys.clone();
        let mut consumed_if = None;
        if (header.fixed.fe_ptr as usize) < header.fes.len() {
            let entry = header.fes[header.fixed.fe_ptr as usize];
            let block = *header.current_flow_block();
            let b = crate::crypto::bootstrap_chain(block.flow_id, header.fixed.exp_time);
            let prev = if header.fixed.fe_ptr == 0 {
                b
            } else {
                crate::crypto::ChainValue(header.fes[header.fixed.fe_ptr as usize - 1].mac)
            };
            if verify_fe(&keys, &entry, &prev, &b) {
                let tweak = PvfTweak::for_flow(block.flow_id, block.seq_no);
                header.pvf = pvf_step(&keys, &header.pvf, &tweak);
                header.fixed.fe_ptr += 1;
                consumed_if = Some(entry.egress_if);
            }
        }

        let fallback_if = consumed_if.unwrap_or(1);
        let mut packet = packet;
        match behavior {
            AdversaryBehavior::Detour { via } => {
                let out_if = self
                    .scenario
                    .topology
                    .interface_toward(switch, via, None)
                    .expect("validated at attach time");
                packet.header = header.encode().expect("header re-encodes");
                vec![Action::Transmit { out_if, packet }]
            }
            AdversaryBehavior::Forge { target } => {
                let state = self.adversaries.get_mut(&switch).expect("present");
                for slot in header.fixed.fe_ptr as usize..header.fes.len() {
                    state.rng.fill_bytes(&mut header.fes[slot].mac);
                }
                packet.header = header.encode().expect("forged header re-encodes");
                let out_if = self.first_hop_toward(switch, target).unwrap_or(fallback_if);
                vec![Action::Transmit { out_if, packet }]
            }
            AdversaryBehavior::Shortcut { skip } => {
                let (out_if, skipped) = self.shortcut_route(switch, &header, skip, fallback_if);
                header.fixed.fe_ptr = header.fixed.fe_ptr.saturating_add(skipped);
                packet.header = header.encode().expect("shortcut header re-encodes");
                vec![Action::Transmit { out_if, packet }]
            }
            AdversaryBehavior::PvfReplay { source_packet } => {
                let flow_id = header.flow_blocks[0].flow_id;
                let state = self.adversaries.get_mut(&switch).expect("present");
                let seen = state.seen.entry(flow_id).or_insert(0);
                *seen += 1;
                if *seen == source_packet {
                    state
                        .captured
                        .insert(flow_id, (header.flow_blocks[0].seq_no, header.pvf));
                } else if let Some(&(seq, pvf)) = state.captured.get(&flow_id) {
                    for block in &mut header.flow_blocks {
                        block.seq_no = seq;
                    }
                    header.pvf = pvf;
                }
                packet.header = header.encode().expect("replayed header re-encodes");
                vec![Action::Transmit {
                    out_if: fallback_if,
                    packet,
                }]
            }
            AdversaryBehavior::SeqnoReplay => {
                packet.header = header.encode().expect("header re-encodes");
                let mut actions = Vec::with_capacity(1 + SEQNO_REPLAY_COPIES);
                for _ in 0..=SEQNO_REPLAY_COPIES {
                    actions.push(Action::Transmit {
                        out_if: fallback_if,
                        packet: packet.clone(),
                    });
                }
                actions
            }
            _ => unreachable!("honest-transit behaviors returned above"),
        }
    }

    /// Interface for a shortcut around `skip` switches: the direct link to
    /// the skip target when one exists, otherwise the first hop of the
    /// shortest route toward it.
    fn shortcut_route(
        &self,
        switch: SwitchId,
        header: &wire::SdnsecHeader,
        skip: u8,
        fallback_if: u8,
    ) -> (u8, u8) {
        let flow_id = header.flow_blocks[0].flow_id;
        let Some(record) = self.controller.flow_record(flow_id) else {
            return (fallback_if, skip);
        };
        let path = record.path.switches();
        let Some(pos) = path.iter().position(|&sw| sw == switch) else {
            return (fallback_if, skip);
        };
        let target_idx = (pos + 1 + skip as usize).min(path.len().saturating_sub(1));
        if target_idx <= pos {
            return (fallback_if, 0);
        }
        let skipped = (target_idx - pos - 1) as u8;
        let target = path[target_idx];
        let out_if = self
            .scenario
            .topology
            .interface_toward(switch, target, None)
            .or_else(|| self.first_hop_toward(switch, target))
            .unwrap_or(fallback_if);
        (out_if, skipped)
    }

    fn first_hop_toward(&self, from: SwitchId, to: SwitchId) -> Option<u8> {
        let path = self
            .scenario
            .topology
            .shortest_path(from, to, &Default::default())?;
        if path.len() < 2 {
            return None;
        }
        self.scenario.topology.interface_toward(from, path[1], None)
    }
}

/// Deterministic payload for the `index`-th packet of a traffic stream;
/// tests compare delivered bytes against it.
pub fn payload_pattern(stream: u64, index: u64, len: u16) -> Vec<u8> {
    let mut payload = Vec::with_capacity(len as usize);
    let mut state = stream
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index);
    for _ in 0..len {
        state = state
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        payload.push((state >> 56) as u8);
    }
    payload
}
