//! Controller: path computation and rule provisioning, failover and
//! multicast tree management, and reactive path validation.
//!
//! The controller talks to switches over an ordered, reliable, loss-free
//! in-process channel: it consumes [`Notification`]s and emits
//! [`AddressedCommand`]s. All state mutation runs through these entry
//! points, one call at a time; validation works on the resulting state
//! without mutating forwarding decisions.

mod validation;

pub use validation::{
    detect_pvf_replay, estimate_validation_overhead, reconcile_counters, ValidationOverheadParams,
    ValidationOverheadReport, ValidationVerdict, VerdictDetail, VerdictOutcome,
};

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::net::Ipv4Addr;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{build_fe_list, CryptoError, Keystore, PathHop};
use crate::topology::{Topology, TopologyError};
use crate::types::{FlowId, HostId, SwitchId, TreeId, MAX_ID_24};
use crate::wire::ForwardingEntry;

/// Reports are analyzed over a sliding window of this many entries per flow.
pub const SEQ_WINDOW_CAPACITY: usize = 1 << 16;
/// A sequence number repeating more often than this within the window is
/// treated as a replay.
pub const DEFAULT_REPLAY_THRESHOLD: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControllerError {
    #[error("flow identifier space exhausted")]
    FlowIdSpaceExhausted,

    #[error("tree identifier space exhausted")]
    TreeIdSpaceExhausted,

    #[error(transparent)]
    Topology(#[from] TopologyError),

    #[error(transparent)]
    Crypto(#[from] CryptoError),

    #[error("unknown flow {0}")]
    UnknownFlow(FlowId),

    #[error("counter reports do not cover a contiguous stretch of the path")]
    NonContiguousReports,
}

/// Exact-match flow specification: a nine-field subset of the OpenFlow
/// match tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowKey {
    pub in_port: u8,
    pub eth_src: [u8; 6],
    pub eth_dst: [u8; 6],
    pub ethertype: u16,
    pub ip_src: Ipv4Addr,
    pub ip_dst: Ipv4Addr,
    pub ip_proto: u8,
    pub l4_src: u16,
    pub l4_dst: u16,
}

/// A fully interfaced path: every hop knows the interface it transmits on.
/// The last hop's interface faces the destination host.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RoutedPath {
    pub hops: Vec<PathHop>,
}

impl RoutedPath {
    pub fn switches(&self) -> Vec<SwitchId> {
        self.hops.iter().map(|h| h.switch).collect()
    }

    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }
}

/// Controller-side record of an admitted flow.
#[derive(Debug, Clone)]
pub struct FlowRecord {
    pub flow_key: FlowKey,
    pub flow_id: FlowId,
    pub path: RoutedPath,
    pub exp_time: u32,
    pub egress_id: SwitchId,
    pub fes: Vec<ForwardingEntry>,
    pub do_not_detour: bool,
    /// Recently reported sequence numbers, for replay analysis.
    pub seq_window: SeqWindow,
}

/// Pre-computed detour from one switch to one egress switch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailoverPathRecord {
    pub failover_path_id: FlowId,
    pub head: SwitchId,
    pub egress_id: SwitchId,
    pub path: RoutedPath,
    pub exp_time: u32,
    pub fes: Vec<ForwardingEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstallState {
    Pending,
    Acked,
}

/// Controller-side record of a multicast distribution tree. Trees are
/// immutable once created; an update allocates a new tree.
#[derive(Debug, Clone)]
pub struct MulticastTreeRecord {
    pub tree_id: TreeId,
    pub group: Ipv4Addr,
    pub exp_time: u32,
    pub root: SwitchId,
    /// Replication interfaces per on-tree switch (child links and member
    /// host ports).
    pub out_ifs: BTreeMap<SwitchId, Vec<u8>>,
    /// Upstream neighbor of every non-root tree switch.
    pub parent: BTreeMap<SwitchId, SwitchId>,
    pub install_state: BTreeMap<SwitchId, InstallState>,
    pub ingress_enabled: bool,
}

impl MulticastTreeRecord {
    pub fn all_acked(&self) -> bool {
        self.install_state
            .values()
            .all(|s| *s == InstallState::Acked)
    }

    /// Root-to-switch sequence for validation of a report from `leaf`.
    pub fn path_to(&self, leaf: SwitchId) -> Option<Vec<SwitchId>> {
        let mut rev = vec![leaf];
        let mut at = leaf;
        while at != self.root {
            at = *self.parent.get(&at)?;
            rev.push(at);
        }
        rev.reverse();
        Some(rev)
    }
}

/// Sliding multiset of recently seen sequence numbers.
#[derive(Debug, Clone, Default)]
pub struct SeqWindow {
    order: VecDeque<u32>,
    counts: BTreeMap<u32, u32>,
}

impl SeqWindow {
    pub fn record(&mut self, seq_no: u32) {
        if self.order.len() == SEQ_WINDOW_CAPACITY {
            if let Some(old) = self.order.pop_front() {
                if let Some(c) = self.counts.get_mut(&old) {
                    *c -= 1;
                    if *c == 0 {
                        self.counts.remove(&old);
                    }
                }
            }
        }
        self.order.push_back(seq_no);
        *self.counts.entry(seq_no).or_insert(0) += 1;
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Sequence numbers seen more than `threshold` times.
    pub fn over_threshold(&self, threshold: u32) -> Vec<(u32, u32)> {
        self.counts
            .iter()
            .filter(|(_, &c)| c > threshold)
            .map(|(&s, &c)| (s, c))
            .collect()
    }
}

/// Ingress rule payload: everything the edge switch needs to stamp headers
/// for one flow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngressInstall {
    pub flow_id: FlowId,
    pub exp_time: u32,
    pub egress_id: SwitchId,
    pub out_if: u8,
    pub fes: Vec<ForwardingEntry>,
    pub do_not_detour: bool,
}

/// Controller-to-switch commands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SwitchCommand {
    InstallIngress {
        flow_key: FlowKey,
        install: IngressInstall,
    },
    InstallEgress {
        flow_key: FlowKey,
        out_if: u8,
    },
    InstallFailover {
        record: FailoverPathRecord,
    },
    InstallTree {
        tree_id: TreeId,
        exp_time: u32,
        out_ifs: Vec<u8>,
    },
    /// Switches the ingress over to a tree: maps the group address to the
    /// tree and installs the root's replication list.
    EnableTreeIngress {
        group: Ipv4Addr,
        tree_id: TreeId,
        exp_time: u32,
        out_ifs: Vec<u8>,
    },
    MonitorFlow {
        flow_id: FlowId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddressedCommand {
    pub to: SwitchId,
    pub command: SwitchCommand,
}

/// Switch-to-controller notifications.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Notification {
    FlowRequest {
        switch: SwitchId,
        flow_key: FlowKey,
    },
    DropNotice {
        switch: SwitchId,
        reason: crate::switch::DropReason,
        header: Vec<u8>,
    },
    /// A switch used (or failed to use) a failover because this interface
    /// is down.
    FailureNotice {
        switch: SwitchId,
        interface: u8,
    },
    TreeInstallAck {
        switch: SwitchId,
        tree_id: TreeId,
    },
}

/// Timing and policy knobs for the controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub flow_ttl_secs: u32,
    pub failover_ttl_secs: u32,
    pub replay_threshold: u32,
    /// Recompute paths for affected flows after a failure notice.
    pub reconfigure_after_failure: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            flow_ttl_secs: 3600,
            failover_ttl_secs: 3600,
            replay_threshold: DEFAULT_REPLAY_THRESHOLD,
            reconfigure_after_failure: false,
        }
    }
}

/// Flow identifiers grow upward from 1; failover-path identifiers grow
/// downward from the top of the same 24-bit space.
#[derive(Debug, Clone)]
pub struct FlowIdAllocator {
    next_flow: u32,
    next_failover: u32,
    freed: BTreeSet<u32>,
}

impl Default for FlowIdAllocator {
    fn default() -> Self {
        FlowIdAllocator {
            next_flow: 1,
            next_failover: MAX_ID_24,
            freed: BTreeSet::new(),
        }
    }
}

impl FlowIdAllocator {
    pub fn alloc_flow(&mut self) -> Option<FlowId> {
        if self.next_flow <= self.next_failover {
            let id = self.next_flow;
            self.next_flow += 1;
            return FlowId::new(id);
        }
        self.freed.pop_first().and_then(FlowId::new)
    }

    pub fn alloc_failover(&mut self) -> Option<FlowId> {
        if self.next_failover >= self.next_flow {
            let id = self.next_failover;
            self.next_failover -= 1;
            return FlowId::new(id);
        }
        None
    }

    /// Returns an expired flow identifier to the pool.
    pub fn release(&mut self, id: FlowId) {
        self.freed.insert(id.as_u32());
    }
}

#[derive(Debug)]
pub struct Controller {
    pub topology: Topology,
    pub keystore: Keystore,
    pub config: ControllerConfig,
    allocator: FlowIdAllocator,
    next_tree: u32,
    /// Active flows by key.
    active: BTreeMap<FlowKey, FlowId>,
    /// All admitted flows by id, kept for validation.
    records: BTreeMap<FlowId, FlowRecord>,
    /// Failover records by id, for validation of detoured packets.
    failover_records: BTreeMap<FlowId, FailoverPathRecord>,
    /// Failover id per (head switch, egress switch).
    failover_index: BTreeMap<(SwitchId, SwitchId), FlowId>,
    trees: BTreeMap<TreeId, MulticastTreeRecord>,
    /// Latest tree per group (the one new ingress traffic should use).
    group_trees: BTreeMap<Ipv4Addr, TreeId>,
    /// Links the controller has learned are down, as (switch, interface)
    /// pairs for both ends.
    failed_interfaces: BTreeSet<(SwitchId, u8)>,
    /// Flows to monitor (installed at admission time), by scenario intent:
    /// map flow key -> switches that must count it.
    monitor_plan: BTreeMap<FlowKey, Vec<SwitchId>>,
    /// Drop and failure notices received, in arrival order.
    notices: Vec<Notification>,
}

impl Controller {
    /// Builds a controller for a topology and provisions per-switch keys
    /// from the given randomness source.
    pub fn new(topology: Topology, config: ControllerConfig, rng: &mut impl RngCore) -> Self {
        let mut keystore = Keystore::new();
        for node in topology.switches() {
            keystore.provision(node.id, rng);
        }
        Controller {
            topology,
            keystore,
            config,
            allocator: FlowIdAllocator::default(),
            next_tree: 1,
            active: BTreeMap::new(),
            records: BTreeMap::new(),
            failover_records: BTreeMap::new(),
            failover_index: BTreeMap::new(),
            trees: BTreeMap::new(),
            group_trees: BTreeMap::new(),
            failed_interfaces: BTreeSet::new(),
            monitor_plan: BTreeMap::new(),
            notices: Vec::new(),
        }
    }

    pub fn flow_record(&self, id: FlowId) -> Option<&FlowRecord> {
        self.records.get(&id)
    }

    pub fn flow_record_mut(&mut self, id: FlowId) -> Option<&mut FlowRecord> {
        self.records.get_mut(&id)
    }

    pub fn flow_records(&self) -> impl Iterator<Item = &FlowRecord> {
        self.records.values()
    }

    pub fn active_flow(&self, key: &FlowKey) -> Option<FlowId> {
        self.active.get(key).copied()
    }

    pub fn failover_record(&self, id: FlowId) -> Option<&FailoverPathRecord> {
        self.failover_records.get(&id)
    }

    pub fn failover_for(&self, head: SwitchId, egress: SwitchId) -> Option<&FailoverPathRecord> {
        self.failover_index
            .get(&(head, egress))
            .and_then(|id| self.failover_records.get(id))
    }

    pub fn tree_record(&self, id: TreeId) -> Option<&MulticastTreeRecord> {
        self.trees.get(&id)
    }

    pub fn notices(&self) -> &[Notification] {
        &self.notices
    }

    /// Registers which switches must count a flow once it is admitted.
    pub fn plan_monitoring(&mut self, key: FlowKey, switches: Vec<SwitchId>) {
        self.monitor_plan.insert(key, switches);
    }

    /// Shortest usable path between two switches, skipping links the
    /// controller knows to be down. Deterministic tie-break: the
    /// lexicographically smallest switch-id sequence.
    pub fn compute_path(
        &self,
        from: SwitchId,
        to: SwitchId,
    ) -> Result<Vec<SwitchId>, ControllerError> {
        self.topology
            .shortest_path(from, to, &self.failed_interfaces)
            .ok_or(ControllerError::Topology(TopologyError::Unreachable(
                from, to,
            )))
    }

    /// Shortest path between the edge switches of two hosts.
    pub fn compute_host_path(
        &self,
        src: HostId,
        dst: HostId,
    ) -> Result<Vec<SwitchId>, ControllerError> {
        let from = self.topology.host(src).switch;
        let to = self.topology.host(dst).switch;
        self.compute_path(from, to)
    }

    fn route(
        &self,
        switches: &[SwitchId],
        final_if: u8,
        first_hop_excluding: Option<u8>,
    ) -> RoutedPath {
        let mut hops = Vec::with_capacity(switches.len());
        for (i, &sw) in switches.iter().enumerate() {
            let egress_if = if i + 1 == switches.len() {
                final_if
            } else {
                let excluding = if i == 0 { first_hop_excluding } else { None };
                self.topology
                    .interface_toward(sw, switches[i + 1], excluding)
                    .expect("consecutive path switches are linked")
            };
            hops.push(PathHop {
                switch: sw,
                egress_if,
            });
        }
        RoutedPath { hops }
    }

    /// Admits a flow: assigns an identifier, computes the path, builds the
    /// forwarding-entry chain, and returns the edge-switch install
    /// commands. Re-requesting an active flow re-issues its installs.
    pub fn admit_flow(
        &mut self,
        flow_key: FlowKey,
        now_secs: u32,
        do_not_detour: bool,
    ) -> Result<(FlowId, Vec<AddressedCommand>), ControllerError> {
        if let Some(&flow_id) = self.active.get(&flow_key) {
            // Re-issue the rules while the flow lives; an expired record
            // means the edge rules lapsed too, so admit afresh.
            if self.records[&flow_id].exp_time >= now_secs {
                let cmds = self.install_commands_for(flow_id);
                return Ok((flow_id, cmds));
            }
            self.active.remove(&flow_key);
        }

        let src_host = self.host_by_ip(flow_key.ip_src)?;
        let dst_host = self.host_by_ip(flow_key.ip_dst)?;
        let ingress = self.topology.host(src_host).switch;
        let egress = self.topology.host(dst_host).switch;
        let switches = self.compute_path(ingress, egress)?;
        let final_if = self.topology.host(dst_host).switch_if;
        let path = self.route(&switches, final_if, None);

        let flow_id = self.alloc_flow_id(now_secs)?;
        let exp_time = now_secs.saturating_add(self.config.flow_ttl_secs);
        let fes = build_fe_list(&path.hops[1..], &self.keystore, flow_id, exp_time)?;

        let record = FlowRecord {
            flow_key,
            flow_id,
            path,
            exp_time,
            egress_id: egress,
            fes,
            do_not_detour,
            seq_window: SeqWindow::default(),
        };
        self.records.insert(flow_id, record);
        self.active.insert(flow_key, flow_id);
        let mut cmds = self.install_commands_for(flow_id);
        if let Some(monitors) = self.monitor_plan.get(&flow_key) {
            for &sw in monitors.clone().iter() {
                cmds.push(AddressedCommand {
                    to: sw,
                    command: SwitchCommand::MonitorFlow { flow_id },
                });
            }
        }
        Ok((flow_id, cmds))
    }

    fn install_commands_for(&self, flow_id: FlowId) -> Vec<AddressedCommand> {
        let record = &self.records[&flow_id];
        let ingress_hop = record.path.hops[0];
        let egress_hop = *record.path.hops.last().expect("nonempty path");
        let install = IngressInstall {
            flow_id,
            exp_time: record.exp_time,
            egress_id: record.egress_id,
            out_if: ingress_hop.egress_if,
            fes: record.fes.clone(),
            do_not_detour: record.do_not_detour,
        };
        vec![
            AddressedCommand {
                to: ingress_hop.switch,
                command: SwitchCommand::InstallIngress {
                    flow_key: record.flow_key,
                    install,
                },
            },
            AddressedCommand {
                to: egress_hop.switch,
                command: SwitchCommand::InstallEgress {
                    flow_key: record.flow_key,
                    out_if: egress_hop.egress_if,
                },
            },
        ]
    }

    fn host_by_ip(&self, ip: Ipv4Addr) -> Result<HostId, ControllerError> {
        self.topology
            .hosts()
            .iter()
            .find(|h| h.ip == ip)
            .map(|h| h.id)
            .ok_or(ControllerError::Topology(TopologyError::UnknownHost(
                ip.to_string(),
            )))
    }

    fn alloc_flow_id(&mut self, now_secs: u32) -> Result<FlowId, ControllerError> {
        if let Some(id) = self.allocator.alloc_flow() {
            return Ok(id);
        }
        // Reclaim expired flows, then retry once.
        let expired: Vec<FlowId> = self
            .records
            .values()
            .filter(|r| r.exp_time < now_secs)
            .map(|r| r.flow_id)
            .collect();
        for id in expired {
            if let Some(record) = self.records.remove(&id) {
                self.active.remove(&record.flow_key);
                self.allocator.release(id);
            }
        }
        self.allocator
            .alloc_flow()
            .ok_or(ControllerError::FlowIdSpaceExhausted)
    }

    /// Pre-computes one failover path per (switch, egress switch) pair and
    /// returns the install command for each head switch. The detour avoids
    /// the head's primary link toward the egress, since that is the link
    /// whose failure will trigger it; pairs without an alternate route are
    /// omitted.
    pub fn precompute_failover(
        &mut self,
        now_secs: u32,
    ) -> Result<Vec<AddressedCommand>, ControllerError> {
        let exp_time = now_secs.saturating_add(self.config.failover_ttl_secs);
        let mut commands = Vec::new();
        let all: Vec<SwitchId> = self.topology.switches().iter().map(|s| s.id).collect();
        let egresses: Vec<SwitchId> = self.topology.edge_switches().map(|s| s.id).collect();
        for &head in &all {
            for &egress in &egresses {
                if head == egress {
                    continue; // egress reached; nothing to detour
                }
                let Some(primary) = self.topology.shortest_path(head, egress, &BTreeSet::new())
                else {
                    continue;
                };
                let primary_if = self
                    .topology
                    .interface_toward(head, primary[1], None)
                    .expect("path step implies a link");
                let banned = BTreeSet::from([(head, primary_if)]);
                let Some(alt) = self.topology.shortest_path(head, egress, &banned) else {
                    continue;
                };
                // First hop must not reuse the excluded interface even when
                // the alternate route goes through the same neighbor over a
                // parallel link.
                let first_if = self
                    .topology
                    .interface_toward(head, alt[1], Some(primary_if))
                    .expect("alternate path step implies a link");
                let mut path = self.route(&alt, 0, Some(primary_if));
                path.hops[0].egress_if = first_if;

                let failover_path_id = self
                    .allocator
                    .alloc_failover()
                    .ok_or(ControllerError::FlowIdSpaceExhausted)?;
                let fes = build_fe_list(&path.hops, &self.keystore, failover_path_id, exp_time)?;
                let record = FailoverPathRecord {
                    failover_path_id,
                    head,
                    egress_id: egress,
                    path,
                    exp_time,
                    fes,
                };
                self.failover_records
                    .insert(failover_path_id, record.clone());
                self.failover_index.insert((head, egress), failover_path_id);
                commands.push(AddressedCommand {
                    to: head,
                    command: SwitchCommand::InstallFailover { record },
                });
            }
        }
        Ok(commands)
    }

    /// Creates a multicast tree for `group` rooted at the source host's
    /// edge switch. Returns the new tree id and the install commands for
    /// every non-root tree switch. With the two-phase safeguard the ingress
    /// is enabled only once every install has been acknowledged
    /// ([`Controller::handle_tree_ack`]); without it the caller receives
    /// the enable command immediately, ordered before the installs.
    pub fn create_multicast_tree(
        &mut self,
        group: Ipv4Addr,
        src: HostId,
        members: &[HostId],
        now_secs: u32,
        ttl_secs: u32,
        safeguard: bool,
    ) -> Result<(TreeId, Vec<AddressedCommand>), ControllerError> {
        let root = self.topology.host(src).switch;
        let tree_id = TreeId::new(self.next_tree).ok_or(ControllerError::TreeIdSpaceExhausted)?;
        self.next_tree += 1;
        let exp_time = now_secs.saturating_add(ttl_secs);

        let mut parent: BTreeMap<SwitchId, SwitchId> = BTreeMap::new();
        let mut out_ifs: BTreeMap<SwitchId, BTreeSet<u8>> = BTreeMap::new();
        out_ifs.entry(root).or_default();
        for &member in members {
            let leaf = self.topology.host(member).switch;
            let path = self.compute_path(root, leaf)?;
            for pair in path.windows(2) {
                let (up, down) = (pair[0], pair[1]);
                parent.insert(down, up);
                let ifc = self
                    .topology
                    .interface_toward(up, down, None)
                    .expect("path step implies a link");
                out_ifs.entry(up).or_default().insert(ifc);
                out_ifs.entry(down).or_default();
            }
            out_ifs
                .entry(leaf)
                .or_default()
                .insert(self.topology.host(member).switch_if);
        }

        let out_ifs: BTreeMap<SwitchId, Vec<u8>> = out_ifs
            .into_iter()
            .map(|(sw, ifs)| (sw, ifs.into_iter().collect()))
            .collect();
        let install_state = out_ifs
            .keys()
            .filter(|&&sw| sw != root)
            .map(|&sw| (sw, InstallState::Pending))
            .collect();

        let record = MulticastTreeRecord {
            tree_id,
            group,
            exp_time,
            root,
            out_ifs,
            parent,
            install_state,
            ingress_enabled: !safeguard,
        };

        let mut commands = Vec::new();
        if !safeguard {
            // Unsafe mode (for comparison runs): the ingress switches over
            // before the rest of the tree is installed.
            commands.push(self.enable_command(&record));
            self.group_trees.insert(group, tree_id);
        }
        for (&sw, ifs) in &record.out_ifs {
            if sw == root {
                continue;
            }
            commands.push(AddressedCommand {
                to: sw,
                command: SwitchCommand::InstallTree {
                    tree_id,
                    exp_time,
                    out_ifs: ifs.clone(),
                },
            });
        }
        let no_installs = commands.is_empty();
        self.trees.insert(tree_id, record);
        if safeguard && no_installs {
            // Single-switch tree: nothing to wait for.
            return Ok((tree_id, self.enable_now(tree_id)));
        }
        Ok((tree_id, commands))
    }

    fn enable_command(&self, record: &MulticastTreeRecord) -> AddressedCommand {
        AddressedCommand {
            to: record.root,
            command: SwitchCommand::EnableTreeIngress {
                group: record.group,
                tree_id: record.tree_id,
                exp_time: record.exp_time,
                out_ifs: record
                    .out_ifs
                    .get(&record.root)
                    .cloned()
                    .unwrap_or_default(),
            },
        }
    }

    fn enable_now(&mut self, tree_id: TreeId) -> Vec<AddressedCommand> {
        let record = self.trees.get_mut(&tree_id).expect("tree exists");
        record.ingress_enabled = true;
        let group = record.group;
        let cmd = self.enable_command(&self.trees[&tree_id]);
        self.group_trees.insert(group, tree_id);
        vec![cmd]
    }

    /// Records an install acknowledgment. Once the whole tree has acked,
    /// returns the command that switches the ingress over to it.
    pub fn handle_tree_ack(&mut self, switch: SwitchId, tree_id: TreeId) -> Vec<AddressedCommand> {
        let Some(record) = self.trees.get_mut(&tree_id) else {
            return Vec::new();
        };
        if let Some(state) = record.install_state.get_mut(&switch) {
            *state = InstallState::Acked;
        }
        if !record.ingress_enabled && record.all_acked() {
            return self.enable_now(tree_id);
        }
        Vec::new()
    }

    /// Handles a failure notice. Marks the link down and, if reconfiguration
    /// is enabled, re-admits every active flow whose path crosses the dead
    /// link (fresh flow id, fresh path). The returned install commands
    /// should be applied after the operator's reconfiguration delay.
    pub fn handle_failure_notice(
        &mut self,
        switch: SwitchId,
        interface: u8,
        now_secs: u32,
    ) -> Result<Vec<AddressedCommand>, ControllerError> {
        self.notices
            .push(Notification::FailureNotice { switch, interface });
        self.failed_interfaces.insert((switch, interface));
        if let Some(crate::topology::PortPeer::Switch(peer, peer_if)) =
            self.topology.peer(switch, interface)
        {
            self.failed_interfaces.insert((peer, peer_if));
        }
        if !self.config.reconfigure_after_failure {
            return Ok(Vec::new());
        }

        let affected: Vec<FlowId> = self
            .records
            .values()
            .filter(|r| self.active.get(&r.flow_key) == Some(&r.flow_id))
            .filter(|r| {
                r.path.hops.iter().any(|hop| {
                    self.failed_interfaces
                        .contains(&(hop.switch, hop.egress_if))
                })
            })
            .map(|r| r.flow_id)
            .collect();

        let mut commands = Vec::new();
        for flow_id in affected {
            let record = &self.records[&flow_id];
            let key = record.flow_key;
            let do_not_detour = record.do_not_detour;
            self.active.remove(&key);
            let (_, cmds) = self.admit_flow(key, now_secs, do_not_detour)?;
            commands.extend(cmds);
        }
        Ok(commands)
    }

    pub fn record_drop_notice(
        &mut self,
        switch: SwitchId,
        reason: crate::switch::DropReason,
        header: Vec<u8>,
    ) {
        self.notices.push(Notification::DropNotice {
            switch,
            reason,
            header,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    use crate::crypto::{bootstrap_chain, verify_fe, ChainValue};
    use crate::topology::SwitchRole;

    pub(crate) fn flow_key(topo: &Topology, src: HostId, dst: HostId, l4_dst: u16) -> FlowKey {
        let s = topo.host(src);
        let d = topo.host(dst);
        FlowKey {
            in_port: s.switch_if,
            eth_src: s.mac,
            eth_dst: d.mac,
            ethertype: 0x0800,
            ip_src: s.ip,
            ip_dst: d.ip,
            ip_proto: 17,
            l4_src: 1000,
            l4_dst,
        }
    }

    fn three_tier() -> (Topology, Vec<HostId>) {
        let mut t = Topology::new();
        let e0 = t.add_switch("e0", SwitchRole::Edge).unwrap();
        let e1 = t.add_switch("e1", SwitchRole::Edge).unwrap();
        let a2 = t.add_switch("a2", SwitchRole::Core).unwrap();
        let a3 = t.add_switch("a3", SwitchRole::Core).unwrap();
        let c4 = t.add_switch("c4", SwitchRole::Core).unwrap();
        let c5 = t.add_switch("c5", SwitchRole::Core).unwrap();
        t.add_link(e0, a2).unwrap();
        t.add_link(e1, a3).unwrap();
        t.add_link(a2, c4).unwrap();
        t.add_link(a2, c5).unwrap();
        t.add_link(a3, c4).unwrap();
        t.add_link(a3, c5).unwrap();
        let h0 = t.attach_host("h0", e0).unwrap();
        let h1 = t.attach_host("h1", e1).unwrap();
        (t, vec![h0, h1])
    }

    fn controller(topo: Topology) -> Controller {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        Controller::new(topo, ControllerConfig::default(), &mut rng)
    }

    #[test]
    fn same_edge_hosts_get_single_switch_path() {
        let mut t = Topology::new();
        let e = t.add_switch("e", SwitchRole::Edge).unwrap();
        let h0 = t.attach_host("h0", e).unwrap();
        let h1 = t.attach_host("h1", e).unwrap();
        let c = controller(t);
        assert_eq!(c.compute_host_path(h0, h1).unwrap(), vec![e]);
    }

    #[test]
    fn five_switch_path_yields_four_fes() {
        let (t, hosts) = three_tier();
        let mut c = controller(t);
        let key = flow_key(&c.topology, hosts[0], hosts[1], 80);
        let (flow_id, cmds) = c.admit_flow(key, 0, false).unwrap();
        let record = c.flow_record(flow_id).unwrap();
        assert_eq!(record.path.len(), 5);
        assert_eq!(record.fes.len(), 4);
        assert_eq!(
            crate::wire::overhead_bytes(5).unwrap(),
            crate::wire::MIN_HEADER_LEN + 4 * crate::wire::FE_LEN
        );
        // One install at each edge.
        assert_eq!(cmds.len(), 2);
    }

    #[test]
    fn distinct_flows_get_distinct_ids() {
        let (t, hosts) = three_tier();
        let mut c = controller(t);
        let k1 = flow_key(&c.topology, hosts[0], hosts[1], 80);
        let k2 = flow_key(&c.topology, hosts[0], hosts[1], 81);
        let (f1, _) = c.admit_flow(k1, 0, false).unwrap();
        let (f2, _) = c.admit_flow(k2, 0, false).unwrap();
        assert_ne!(f1, f2);
    }

    #[test]
    fn readmission_is_idempotent() {
        let (t, hosts) = three_tier();
        let mut c = controller(t);
        let key = flow_key(&c.topology, hosts[0], hosts[1], 80);
        let (f1, _) = c.admit_flow(key, 0, false).unwrap();
        let (f2, cmds) = c.admit_flow(key, 0, false).unwrap();
        assert_eq!(f1, f2);
        assert_eq!(cmds.len(), 2);
    }

    #[test]
    fn fe_chain_reverifies_per_prefix() {
        let (t, hosts) = three_tier();
        let mut c = controller(t);
        let key = flow_key(&c.topology, hosts[0], hosts[1], 80);
        let (flow_id, _) = c.admit_flow(key, 0, false).unwrap();
        let record = c.flow_record(flow_id).unwrap();
        let b = bootstrap_chain(flow_id, record.exp_time);
        let mut prev = b;
        for (i, fe) in record.fes.iter().enumerate() {
            let keys = c.keystore.keys(record.path.hops[i + 1].switch).unwrap();
            assert!(verify_fe(keys, fe, &prev, &b), "prefix {i} fails");
            prev = ChainValue(fe.mac);
        }
    }

    #[test]
    fn failover_avoids_primary_link() {
        let (t, _) = three_tier();
        let mut c = controller(t);
        let cmds = c.precompute_failover(0).unwrap();
        assert!(!cmds.is_empty());
        let a2 = c.topology.switch_by_name("a2").unwrap();
        let e1 = c.topology.switch_by_name("e1").unwrap();
        let c4 = c.topology.switch_by_name("c4").unwrap();
        let c5 = c.topology.switch_by_name("c5").unwrap();
        let a3 = c.topology.switch_by_name("a3").unwrap();
        // a2's primary route to e1 goes via c4; the detour must start at c5.
        let record = c.failover_for(a2, e1).unwrap();
        assert_eq!(record.path.switches(), vec![a2, c5, a3, e1]);
        assert_ne!(
            record.path.hops[0].egress_if,
            c.topology.interface_toward(a2, c4, None).unwrap()
        );
        // Slot 0 belongs to the head switch itself.
        assert_eq!(record.fes.len(), 4);
        let b = bootstrap_chain(record.failover_path_id, record.exp_time);
        let keys = c.keystore.keys(a2).unwrap();
        assert!(verify_fe(keys, &record.fes[0], &b, &b));
    }

    #[test]
    fn adjacent_egress_failover_uses_the_parallel_link() {
        let mut t = Topology::new();
        let e0 = t.add_switch("e0", SwitchRole::Edge).unwrap();
        let e1 = t.add_switch("e1", SwitchRole::Edge).unwrap();
        let primary = t.add_link(e0, e1).unwrap();
        let secondary = t.add_link(e0, e1).unwrap();
        let mut c = controller(t);
        c.precompute_failover(0).unwrap();
        // Adjacent egress: a two-switch detour over the other link.
        let record = c.failover_for(e0, e1).unwrap();
        assert_eq!(record.path.switches(), vec![e0, e1]);
        assert_eq!(record.fes.len(), 2);
        assert_eq!(record.path.hops[0].egress_if, secondary.if_a);
        assert_ne!(record.path.hops[0].egress_if, primary.if_a);
    }

    #[test]
    fn failover_skips_unreachable_and_self() {
        let mut t = Topology::new();
        let e0 = t.add_switch("e0", SwitchRole::Edge).unwrap();
        let e1 = t.add_switch("e1", SwitchRole::Edge).unwrap();
        t.add_link(e0, e1).unwrap(); // single link: no alternate route
        let mut c = controller(t);
        let cmds = c.precompute_failover(0).unwrap();
        assert!(cmds.is_empty());
        assert!(c.failover_for(e0, e0).is_none());
        assert!(c.failover_for(e0, e1).is_none());
    }

    #[test]
    fn allocator_spaces_do_not_collide() {
        let mut alloc = FlowIdAllocator::default();
        let f = alloc.alloc_flow().unwrap();
        let fo = alloc.alloc_failover().unwrap();
        assert_eq!(f.as_u32(), 1);
        assert_eq!(fo.as_u32(), MAX_ID_24);
        alloc.release(f);
    }

    #[test]
    fn allocator_exhaustion_and_reclaim() {
        let mut alloc = FlowIdAllocator {
            next_flow: MAX_ID_24 - 1,
            next_failover: MAX_ID_24,
            freed: BTreeSet::new(),
        };
        // Two failover ids shrink the shared space to nothing.
        assert!(alloc.alloc_failover().is_some());
        assert!(alloc.alloc_failover().is_some());
        assert!(alloc.alloc_flow().is_none());
        alloc.release(FlowId::new(42).unwrap());
        assert_eq!(alloc.alloc_flow().unwrap().as_u32(), 42);
        assert!(alloc.alloc_flow().is_none());
    }

    #[test]
    fn two_phase_tree_install() {
        let (t, hosts) = three_tier();
        let mut c = controller(t);
        let group = Ipv4Addr::new(239, 0, 0, 1);
        let (tree_id, cmds) = c
            .create_multicast_tree(group, hosts[0], &[hosts[1]], 0, 600, true)
            .unwrap();
        // Not enabled until every install acks.
        assert!(!c.tree_record(tree_id).unwrap().ingress_enabled);
        let installs: Vec<SwitchId> = cmds.iter().map(|c| c.to).collect();
        let mut enable = Vec::new();
        for sw in installs {
            assert!(!c.tree_record(tree_id).unwrap().ingress_enabled);
            enable = c.handle_tree_ack(sw, tree_id);
        }
        assert_eq!(enable.len(), 1);
        let record = c.tree_record(tree_id).unwrap();
        assert!(record.ingress_enabled);
        assert!(record.all_acked());
        // Root-to-leaf path reconstruction.
        let e1 = c.topology.switch_by_name("e1").unwrap();
        let path = record.path_to(e1).unwrap();
        assert_eq!(path.first(), Some(&record.root));
        assert_eq!(path.last(), Some(&e1));
    }

    #[test]
    fn unsafe_tree_enables_immediately() {
        let (t, hosts) = three_tier();
        let mut c = controller(t);
        let group = Ipv4Addr::new(239, 0, 0, 2);
        let (tree_id, cmds) = c
            .create_multicast_tree(group, hosts[0], &[hosts[1]], 0, 600, false)
            .unwrap();
        assert!(c.tree_record(tree_id).unwrap().ingress_enabled);
        assert!(matches!(
            cmds[0].command,
            SwitchCommand::EnableTreeIngress { .. }
        ));
    }
}
