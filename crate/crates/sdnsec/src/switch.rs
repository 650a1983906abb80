//! Data-plane state machines: ingress, core, and egress processing,
//! failover rewriting, multicast replication, and monitoring counters.
//!
//! Edge switches hold per-flow tables (that is where state exhaustion can
//! bite); core switches forward purely from the packet header and keep
//! only per-egress failover paths, per-tree replication lists, and the
//! controller-mandated monitoring table. Per-flow table probes are
//! instrumented so tests can hold the core to zero of them.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::controller::{FailoverPathRecord, FlowKey, IngressInstall, Notification};
use crate::crypto::{
    bootstrap_chain, pvf_init, pvf_step, verify_fe, ChainValue, PvfTweak, SwitchKeys,
};
use crate::topology::{PortPeer, SwitchRole};
use crate::types::{FlowId, SwitchId, TreeId, SEQ_NO_MASK};
use crate::wire::{
    self, FlowInfoBlock, Header, HeaderFixed, MulticastHeader, SdnsecHeader, MAX_LFC,
};

/// Packets queued while the controller resolves a table miss, per flow.
pub const PENDING_QUEUE_CAP: usize = 64;

/// Why a packet was discarded. Honest switches report every drop to the
/// controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    MacVerificationFailed,
    Expired,
    UnknownTree,
    NoFailover,
    DoNotDetour,
    Malformed,
}

/// A packet as a host hands it to its edge switch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostPacket {
    pub eth_src: [u8; 6],
    pub eth_dst: [u8; 6],
    pub ethertype: u16,
    pub ip_src: Ipv4Addr,
    pub ip_dst: Ipv4Addr,
    pub ip_proto: u8,
    pub l4_src: u16,
    pub l4_dst: u16,
    pub payload: Vec<u8>,
}

impl HostPacket {
    pub fn flow_key(&self, in_port: u8) -> FlowKey {
        FlowKey {
            in_port,
            eth_src: self.eth_src,
            eth_dst: self.eth_dst,
            ethertype: self.ethertype,
            ip_src: self.ip_src,
            ip_dst: self.ip_dst,
            ip_proto: self.ip_proto,
            l4_src: self.l4_src,
            l4_dst: self.l4_dst,
        }
    }

    pub fn is_multicast(&self) -> bool {
        self.ip_dst.is_multicast()
    }
}

/// A packet in flight between switches: the encoded header plus the
/// original packet it wraps. The flow key is resolved once at the ingress.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPacket {
    pub header: Vec<u8>,
    pub flow_key: FlowKey,
    pub payload: Vec<u8>,
    /// Harness-level packet identity for tracing.
    pub uid: u64,
}

/// What a switch wants done after processing one packet or command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    /// Send a packet out an interface toward another switch.
    Transmit {
        out_if: u8,
        packet: DataPacket,
    },
    /// Hand a payload to the host on `out_if`, header stripped.
    Deliver {
        out_if: u8,
        payload: Vec<u8>,
        uid: u64,
    },
    Drop {
        reason: DropReason,
        header: Vec<u8>,
        uid: u64,
    },
    /// A failover path was spliced into the packet (which is also
    /// transmitted by a following action).
    Rewrite {
        failover_path_id: FlowId,
        lfc: u8,
        uid: u64,
    },
    /// Report a packet header (with its final PVF) to the controller.
    Report {
        header: Vec<u8>,
        uid: u64,
    },
    Notify(Notification),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SwitchStats {
    /// Probes of per-flow structures (edge flow tables, multicast group
    /// table). Stays zero on the core forwarding path.
    pub flow_table_lookups: u64,
    /// Probes of the controller-mandated monitoring table.
    pub monitor_probes: u64,
    pub forwarded: u64,
    pub delivered: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone)]
struct IngressEntry {
    flow_id: FlowId,
    exp_time: u32,
    egress_id: SwitchId,
    out_if: u8,
    fes: Vec<wire::ForwardingEntry>,
    do_not_detour: bool,
    seq_counter: u32,
    pkt_counter: u64,
}

#[derive(Debug, Clone)]
struct EgressEntry {
    out_if: u8,
    pkt_counter: u64,
}

#[derive(Debug, Clone)]
struct McastIngressEntry {
    tree_id: TreeId,
    exp_time: u32,
    out_ifs: Vec<u8>,
    seq_counter: u32,
}

#[derive(Debug, Clone)]
struct McastEntry {
    exp_time: u32,
    out_ifs: Vec<u8>,
}

#[derive(Debug)]
pub struct Switch {
    pub id: SwitchId,
    pub name: String,
    pub role: SwitchRole,
    pub keys: SwitchKeys,
    /// interface -> peer, mirrored from the topology.
    ports: BTreeMap<u8, PortPeer>,
    link_down: BTreeSet<u8>,
    /// Whether this switch reports delivered packet headers.
    pub report_headers: bool,

    // Edge state.
    ingress: BTreeMap<FlowKey, IngressEntry>,
    egress: BTreeMap<FlowKey, EgressEntry>,
    pending: BTreeMap<FlowKey, VecDeque<(HostPacket, u8, u64)>>,
    mcast_groups: BTreeMap<Ipv4Addr, McastIngressEntry>,
    mcast_pending: BTreeMap<Ipv4Addr, VecDeque<(HostPacket, u64)>>,

    // Core state: no per-flow forwarding entries.
    failover_table: BTreeMap<SwitchId, FailoverPathRecord>,
    multicast_table: BTreeMap<TreeId, McastEntry>,
    monitor_table: BTreeMap<FlowId, u64>,

    pub stats: SwitchStats,
}

impl Switch {
    pub fn new(
        id: SwitchId,
        name: String,
        role: SwitchRole,
        keys: SwitchKeys,
        ports: BTreeMap<u8, PortPeer>,
    ) -> Self {
        Switch {
            id,
            name,
            role,
            keys,
            ports,
            link_down: BTreeSet::new(),
            report_headers: true,
            ingress: BTreeMap::new(),
            egress: BTreeMap::new(),
            pending: BTreeMap::new(),
            mcast_groups: BTreeMap::new(),
            mcast_pending: BTreeMap::new(),
            failover_table: BTreeMap::new(),
            multicast_table: BTreeMap::new(),
            monitor_table: BTreeMap::new(),
            stats: SwitchStats::default(),
        }
    }

    pub fn set_link_state(&mut self, interface: u8, up: bool) {
        if up {
            self.link_down.remove(&interface);
        } else {
            self.link_down.insert(interface);
        }
    }

    pub fn link_is_down(&self, interface: u8) -> bool {
        self.link_down.contains(&interface)
    }

    pub fn peer(&self, interface: u8) -> Option<PortPeer> {
        self.ports.get(&interface).copied()
    }

    /// (failover, multicast, monitoring) table sizes — the entirety of the
    /// core's forwarding-relevant state.
    pub fn core_table_sizes(&self) -> (usize, usize, usize) {
        (
            self.failover_table.len(),
            self.multicast_table.len(),
            self.monitor_table.len(),
        )
    }

    pub fn ingress_table_len(&self) -> usize {
        self.ingress.len()
    }

    pub fn egress_table_len(&self) -> usize {
        self.egress.len()
    }

    pub fn monitor_count(&self, flow_id: FlowId) -> Option<u64> {
        self.monitor_table.get(&flow_id).copied()
    }

    /// Packets this switch forwarded for a flow, from whichever structure
    /// counts it here: the edge flow tables or the monitoring table.
    pub fn flow_packet_count(&self, flow_id: FlowId, flow_key: &FlowKey) -> Option<u64> {
        if let Some(entry) = self.ingress.get(flow_key) {
            if entry.flow_id == flow_id {
                return Some(entry.pkt_counter);
            }
        }
        if let Some(count) = self.monitor_table.get(&flow_id) {
            return Some(*count);
        }
        self.egress.get(flow_key).map(|e| e.pkt_counter)
    }

    // ------------------------------------------------------------------
    // Controller-driven installs.
    // ------------------------------------------------------------------

    /// Installs (or replaces) an ingress rule, then drains any packets that
    /// were waiting on it.
    pub fn install_ingress(
        &mut self,
        flow_key: FlowKey,
        install: IngressInstall,
        now_secs: u32,
    ) -> Vec<Action> {
        self.ingress.insert(
            flow_key,
            IngressEntry {
                flow_id: install.flow_id,
                exp_time: install.exp_time,
                egress_id: install.egress_id,
                out_if: install.out_if,
                fes: install.fes,
                do_not_detour: install.do_not_detour,
                seq_counter: 0,
                pkt_counter: 0,
            },
        );
        let mut actions = Vec::new();
        if let Some(queue) = self.pending.remove(&flow_key) {
            for (pkt, in_if, uid) in queue {
                actions.extend(self.ingress_process(in_if, &pkt, now_secs, uid));
            }
        }
        actions
    }

    pub fn install_egress(&mut self, flow_key: FlowKey, out_if: u8) {
        self.egress.insert(
            flow_key,
            EgressEntry {
                out_if,
                pkt_counter: 0,
            },
        );
    }

    pub fn install_failover(&mut self, record: FailoverPathRecord) {
        self.failover_table.insert(record.egress_id, record);
    }

    /// Installs a multicast tree entry and acknowledges it.
    pub fn install_tree(
        &mut self,
        tree_id: TreeId,
        exp_time: u32,
        out_ifs: Vec<u8>,
    ) -> Vec<Action> {
        self.multicast_table
            .insert(tree_id, McastEntry { exp_time, out_ifs });
        vec![Action::Notify(Notification::TreeInstallAck {
            switch: self.id,
            tree_id,
        })]
    }

    /// Points a group at a tree (the ingress-side switchover) and drains
    /// packets that arrived before the group existed here.
    pub fn enable_tree_ingress(
        &mut self,
        group: Ipv4Addr,
        tree_id: TreeId,
        exp_time: u32,
        out_ifs: Vec<u8>,
        now_secs: u32,
    ) -> Vec<Action> {
        let seq_counter = self
            .mcast_groups
            .get(&group)
            .map(|e| e.seq_counter)
            .unwrap_or(0);
        self.mcast_groups.insert(
            group,
            McastIngressEntry {
                tree_id,
                exp_time,
                out_ifs,
                seq_counter,
            },
        );
        let mut actions = Vec::new();
        if let Some(queue) = self.mcast_pending.remove(&group) {
            for (pkt, uid) in queue {
                actions.extend(self.multicast_ingress_process(&pkt, now_secs, uid));
            }
        }
        actions
    }

    pub fn monitor_flow(&mut self, flow_id: FlowId) {
        self.monitor_table.entry(flow_id).or_insert(0);
    }

    // ------------------------------------------------------------------
    // Host-side entry.
    // ------------------------------------------------------------------

    /// Entry point for packets arriving from an attached host.
    pub fn host_receive(
        &mut self,
        in_if: u8,
        pkt: HostPacket,
        now_secs: u32,
        uid: u64,
    ) -> Vec<Action> {
        if pkt.is_multicast() {
            self.multicast_ingress_receive(pkt, now_secs, uid)
        } else {
            self.ingress_process(in_if, &pkt, now_secs, uid)
        }
    }

    /// Looks up the flow, stamps the header (sequence number, PVF
    /// bootstrap, forwarding entries), and forwards toward the first
    /// on-path switch. A miss queues the packet and asks the controller
    /// exactly once per flow.
    pub fn ingress_process(
        &mut self,
        in_if: u8,
        pkt: &HostPacket,
        now_secs: u32,
        uid: u64,
    ) -> Vec<Action> {
        let flow_key = pkt.flow_key(in_if);
        self.stats.flow_table_lookups += 1;
        let expired = matches!(self.ingress.get(&flow_key), Some(e) if e.exp_time < now_secs);
        if expired {
            self.ingress.remove(&flow_key);
        }
        if !self.ingress.contains_key(&flow_key) {
            return self.queue_pending(flow_key, pkt.clone(), in_if, uid);
        }

        let entry = self.ingress.get_mut(&flow_key).expect("present");
        entry.seq_counter = (entry.seq_counter + 1) & SEQ_NO_MASK;
        entry.pkt_counter += 1;
        let seq_no = entry.seq_counter;
        let flow_id = entry.flow_id;
        let egress_id = entry.egress_id;
        let exp_time = entry.exp_time;
        let out_if = entry.out_if;
        let fes = entry.fes.clone();
        let do_not_detour = entry.do_not_detour;

        let tweak = PvfTweak::for_flow(flow_id, seq_no);
        let header = SdnsecHeader {
            fixed: HeaderFixed {
                do_not_detour,
                lfc: 0,
                fe_ptr: 0,
                exp_time,
            },
            flow_blocks: vec![FlowInfoBlock {
                flow_id,
                seq_no,
                egress_id,
            }],
            pvf: pvf_init(&self.keys, &tweak),
            fes,
        };

        if header.fes.is_empty() {
            // Ingress and egress coincide: deliver through the egress table.
            return self.local_deliver(header, flow_key, pkt.payload.clone(), uid);
        }

        if !self.link_is_down(out_if) {
            self.stats.forwarded += 1;
            return vec![Action::Transmit {
                out_if,
                packet: DataPacket {
                    header: header.encode().expect("ingress header is valid"),
                    flow_key,
                    payload: pkt.payload.clone(),
                    uid,
                },
            }];
        }

        // The first link already failed: detour before the packet ever
        // leaves, bootstrapping the PVF under the failover tweak.
        let mut actions = vec![Action::Notify(Notification::FailureNotice {
            switch: self.id,
            interface: out_if,
        })];
        if do_not_detour {
            actions.extend(self.drop(DropReason::DoNotDetour, header.encode().unwrap(), uid));
            return actions;
        }
        let Some(record) = self.failover_table.get(&egress_id).cloned() else {
            actions.extend(self.drop(DropReason::NoFailover, header.encode().unwrap(), uid));
            return actions;
        };
        let mut header = header;
        let fo_tweak = PvfTweak::for_flow(record.failover_path_id, seq_no);
        header.pvf = pvf_init(&self.keys, &fo_tweak);
        apply_failover_rewrite(&mut header, &record, seq_no, egress_id);
        let first_if = record.fes[0].egress_if;
        if self.link_is_down(first_if) {
            actions.extend(self.drop(DropReason::NoFailover, header.encode().unwrap(), uid));
            return actions;
        }
        self.bump_monitor(record.failover_path_id);
        self.stats.forwarded += 1;
        actions.push(Action::Rewrite {
            failover_path_id: record.failover_path_id,
            lfc: header.fixed.lfc,
            uid,
        });
        actions.push(Action::Transmit {
            out_if: first_if,
            packet: DataPacket {
                header: header.encode().expect("failover header is valid"),
                flow_key,
                payload: pkt.payload.clone(),
                uid,
            },
        });
        actions
    }

    fn queue_pending(
        &mut self,
        flow_key: FlowKey,
        pkt: HostPacket,
        in_if: u8,
        uid: u64,
    ) -> Vec<Action> {
        let queue = self.pending.entry(flow_key).or_default();
        let first = queue.is_empty();
        if queue.len() == PENDING_QUEUE_CAP {
            queue.pop_front();
            self.stats.dropped += 1;
        }
        queue.push_back((pkt, in_if, uid));
        if first {
            vec![Action::Notify(Notification::FlowRequest {
                switch: self.id,
                flow_key,
            })]
        } else {
            Vec::new()
        }
    }

    fn local_deliver(
        &mut self,
        header: SdnsecHeader,
        flow_key: FlowKey,
        payload: Vec<u8>,
        uid: u64,
    ) -> Vec<Action> {
        self.stats.flow_table_lookups += 1;
        let Some(entry) = self.egress.get_mut(&flow_key) else {
            return self.drop(
                DropReason::Malformed,
                header.encode().unwrap_or_default(),
                uid,
            );
        };
        entry.pkt_counter += 1;
        let out_if = entry.out_if;
        self.stats.delivered += 1;
        let mut actions = Vec::new();
        if self.report_headers {
            actions.push(Action::Report {
                header: header.encode().expect("header is valid"),
                uid,
            });
        }
        actions.push(Action::Deliver {
            out_if,
            payload,
            uid,
        });
        actions
    }

    // ------------------------------------------------------------------
    // Switch-side entry.
    // ------------------------------------------------------------------

    /// Entry point for packets arriving from another switch.
    pub fn receive(&mut self, packet: DataPacket, now_secs: u32) -> Vec<Action> {
        let header = match wire::decode(&packet.header) {
            Ok(h) => h,
            Err(_) => {
                let uid = packet.uid;
                return self.drop(DropReason::Malformed, packet.header, uid);
            }
        };
        match header {
            Header::Multicast(mc) => self.multicast_process(mc, packet, now_secs),
            Header::Unicast(h) if h.current_flow_block().egress_id == self.id => {
                self.egress_process(h, packet, now_secs)
            }
            Header::Unicast(h) => self.core_process(h, packet, now_secs),
        }
    }

    /// Chain state feeding the verification of the entry at `fe_ptr`: the
    /// bootstrap for slot zero, the previous slot's MAC otherwise.
    fn prev_chain(header: &SdnsecHeader) -> ChainValue {
        let block = header.current_flow_block();
        if header.fixed.fe_ptr == 0 {
            bootstrap_chain(block.flow_id, header.fixed.exp_time)
        } else {
            ChainValue(header.fes[header.fixed.fe_ptr as usize - 1].mac)
        }
    }

    /// Core forwarding: verify the designated forwarding entry, extend the
    /// PVF, advance the pointer, and transmit — or splice in a failover
    /// path when the outgoing link is down.
    pub fn core_process(
        &mut self,
        mut header: SdnsecHeader,
        packet: DataPacket,
        now_secs: u32,
    ) -> Vec<Action> {
        if header.fixed.exp_time < now_secs {
            return self.drop(DropReason::Expired, packet.header, packet.uid);
        }
        if header.fixed.fe_ptr as usize >= header.fes.len() {
            return self.drop(DropReason::Malformed, packet.header, packet.uid);
        }
        let entry = header.fes[header.fixed.fe_ptr as usize];
        let block = *header.current_flow_block();
        let b = bootstrap_chain(block.flow_id, header.fixed.exp_time);
        let prev = Self::prev_chain(&header);
        if !verify_fe(&self.keys, &entry, &prev, &b) {
            return self.drop(DropReason::MacVerificationFailed, packet.header, packet.uid);
        }

        if !self.link_is_down(entry.egress_if) {
            let tweak = PvfTweak::for_flow(block.flow_id, block.seq_no);
            header.pvf = pvf_step(&self.keys, &header.pvf, &tweak);
            header.fixed.fe_ptr += 1;
            self.bump_monitor(block.flow_id);
            self.stats.forwarded += 1;
            return vec![Action::Transmit {
                out_if: entry.egress_if,
                packet: DataPacket {
                    header: header.encode().expect("verified header re-encodes"),
                    ..packet
                },
            }];
        }

        let mut actions = vec![Action::Notify(Notification::FailureNotice {
            switch: self.id,
            interface: entry.egress_if,
        })];
        actions.extend(self.failover_rewrite(header, packet));
        actions
    }

    /// Replaces the forwarding entries with this switch's pre-computed
    /// detour toward the packet's egress switch: new expiry, appended
    /// failover flow block (same sequence number), incremented link-failure
    /// count, pointer reset past the slot this switch consumes itself, and
    /// a PVF step under the failover tweak.
    pub fn failover_rewrite(
        &mut self,
        mut header: SdnsecHeader,
        packet: DataPacket,
    ) -> Vec<Action> {
        if header.fixed.do_not_detour {
            return self.drop(DropReason::DoNotDetour, packet.header, packet.uid);
        }
        if header.fixed.lfc >= MAX_LFC {
            return self.drop(DropReason::NoFailover, packet.header, packet.uid);
        }
        let block = *header.current_flow_block();
        let Some(record) = self.failover_table.get(&block.egress_id).cloned() else {
            return self.drop(DropReason::NoFailover, packet.header, packet.uid);
        };
        let out_if = record.fes[0].egress_if;
        if self.link_is_down(out_if) {
            return self.drop(DropReason::NoFailover, packet.header, packet.uid);
        }

        let fo_tweak = PvfTweak::for_flow(record.failover_path_id, block.seq_no);
        header.pvf = pvf_step(&self.keys, &header.pvf, &fo_tweak);
        apply_failover_rewrite(&mut header, &record, block.seq_no, block.egress_id);
        self.bump_monitor(record.failover_path_id);
        self.stats.forwarded += 1;
        vec![
            Action::Rewrite {
                failover_path_id: record.failover_path_id,
                lfc: header.fixed.lfc,
                uid: packet.uid,
            },
            Action::Transmit {
                out_if,
                packet: DataPacket {
                    header: header.encode().expect("failover header re-encodes"),
                    ..packet
                },
            },
        ]
    }

    /// Egress behavior: verify this switch's forwarding entry like any core
    /// hop (the encoded interface only authenticates the previous hop; the
    /// flow table decides the output port), apply the final PVF step, strip
    /// the header, deliver, and report if asked to.
    pub fn egress_process(
        &mut self,
        mut header: SdnsecHeader,
        packet: DataPacket,
        now_secs: u32,
    ) -> Vec<Action> {
        if header.fixed.exp_time < now_secs {
            return self.drop(DropReason::Expired, packet.header, packet.uid);
        }
        if header.fixed.fe_ptr as usize >= header.fes.len() {
            return self.drop(DropReason::Malformed, packet.header, packet.uid);
        }
        let entry = header.fes[header.fixed.fe_ptr as usize];
        let block = *header.current_flow_block();
        let b = bootstrap_chain(block.flow_id, header.fixed.exp_time);
        let prev = Self::prev_chain(&header);
        if !verify_fe(&self.keys, &entry, &prev, &b) {
            return self.drop(DropReason::MacVerificationFailed, packet.header, packet.uid);
        }

        let tweak = PvfTweak::for_flow(block.flow_id, block.seq_no);
        header.pvf = pvf_step(&self.keys, &header.pvf, &tweak);
        header.fixed.fe_ptr += 1;
        self.bump_monitor(block.flow_id);
        self.local_deliver(header, packet.flow_key, packet.payload, packet.uid)
    }

    // ------------------------------------------------------------------
    // Multicast.
    // ------------------------------------------------------------------

    fn multicast_ingress_receive(
        &mut self,
        pkt: HostPacket,
        now_secs: u32,
        uid: u64,
    ) -> Vec<Action> {
        let group = pkt.ip_dst;
        self.stats.flow_table_lookups += 1;
        let known = matches!(self.mcast_groups.get(&group), Some(e) if e.exp_time >= now_secs);
        if !known {
            // No usable tree yet: hold the packet until the controller
            // enables one for this group.
            let queue = self.mcast_pending.entry(group).or_default();
            if queue.len() == PENDING_QUEUE_CAP {
                queue.pop_front();
                self.stats.dropped += 1;
            }
            queue.push_back((pkt, uid));
            return Vec::new();
        }
        self.multicast_ingress_process(&pkt, now_secs, uid)
    }

    fn multicast_ingress_process(
        &mut self,
        pkt: &HostPacket,
        _now_secs: u32,
        uid: u64,
    ) -> Vec<Action> {
        let entry = self
            .mcast_groups
            .get_mut(&pkt.ip_dst)
            .expect("caller checked the group");
        entry.seq_counter = (entry.seq_counter + 1) & SEQ_NO_MASK;
        let header = MulticastHeader {
            exp_time: entry.exp_time,
            tree_id: entry.tree_id,
            seq_no: entry.seq_counter,
            pvf: pvf_init(
                &self.keys,
                &PvfTweak::for_tree(entry.tree_id, entry.seq_counter),
            ),
        };
        let out_ifs = entry.out_ifs.clone();
        let flow_key = pkt.flow_key(0);
        self.replicate(header, out_ifs, flow_key, pkt.payload.clone(), uid)
    }

    /// Core multicast: one PVF step, then replicate on every interface the
    /// tree lists here. Unknown or expired trees drop the packet.
    pub fn multicast_process(
        &mut self,
        mut header: MulticastHeader,
        packet: DataPacket,
        now_secs: u32,
    ) -> Vec<Action> {
        let known =
            matches!(self.multicast_table.get(&header.tree_id), Some(e) if e.exp_time >= now_secs);
        if !known {
            return self.drop(DropReason::UnknownTree, packet.header, packet.uid);
        }
        let entry = &self.multicast_table[&header.tree_id];
        let out_ifs = entry.out_ifs.clone();
        let tweak = PvfTweak::for_tree(header.tree_id, header.seq_no);
        header.pvf = pvf_step(&self.keys, &header.pvf, &tweak);
        self.replicate(header, out_ifs, packet.flow_key, packet.payload, packet.uid)
    }

    fn replicate(
        &mut self,
        header: MulticastHeader,
        out_ifs: Vec<u8>,
        flow_key: FlowKey,
        payload: Vec<u8>,
        uid: u64,
    ) -> Vec<Action> {
        let bytes = header.encode().expect("multicast header is valid");
        let mut actions = Vec::new();
        let mut delivered_here = false;
        for out_if in out_ifs {
            if self.link_is_down(out_if) {
                continue;
            }
            match self.ports.get(&out_if) {
                Some(PortPeer::Host(_)) => {
                    self.stats.delivered += 1;
                    delivered_here = true;
                    actions.push(Action::Deliver {
                        out_if,
                        payload: payload.clone(),
                        uid,
                    });
                }
                Some(PortPeer::Switch(..)) => {
                    self.stats.forwarded += 1;
                    actions.push(Action::Transmit {
                        out_if,
                        packet: DataPacket {
                            header: bytes.clone(),
                            flow_key,
                            payload: payload.clone(),
                            uid,
                        },
                    });
                }
                None => {}
            }
        }
        if delivered_here && self.report_headers {
            actions.push(Action::Report { header: bytes, uid });
        }
        actions
    }

    // ------------------------------------------------------------------
    // Shared helpers.
    // ------------------------------------------------------------------

    fn bump_monitor(&mut self, flow_id: FlowId) {
        // The emptiness check keeps the common case free of per-flow
        // probes; the table itself only ever holds controller-mandated ids.
        if self.monitor_table.is_empty() {
            return;
        }
        self.stats.monitor_probes += 1;
        if let Some(count) = self.monitor_table.get_mut(&flow_id) {
            *count += 1;
        }
    }

    fn drop(&mut self, reason: DropReason, header: Vec<u8>, uid: u64) -> Vec<Action> {
        self.stats.dropped += 1;
        vec![
            Action::Notify(Notification::DropNotice {
                switch: self.id,
                reason,
                header: header.clone(),
            }),
            Action::Drop {
                reason,
                header,
                uid,
            },
        ]
    }
}

/// Header surgery shared by the ingress and core failover paths: swap in
/// the detour's forwarding entries and expiry, append its flow block with
/// the packet's original sequence number, bump the failure counter, and
/// leave the pointer past slot zero (the rewriting switch consumes its own
/// entry when it transmits).
fn apply_failover_rewrite(
    header: &mut SdnsecHeader,
    record: &FailoverPathRecord,
    seq_no: u32,
    egress_id: SwitchId,
) {
    header.fes = record.fes.clone();
    header.fixed.exp_time = record.exp_time;
    header.flow_blocks.push(FlowInfoBlock {
        flow_id: record.failover_path_id,
        seq_no,
        egress_id,
    });
    header.fixed.lfc += 1;
    header.fixed.fe_ptr = 1;
}
