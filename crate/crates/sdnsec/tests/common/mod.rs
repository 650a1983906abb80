//! Shared test support: an independent reference implementation of the MAC
//! chains (its own AES, its own folds) and reusable fixture topologies.
//!
//! Nothing here touches the crate's crypto code paths; agreement between
//! the two sides is what the oracle-equivalence tests check.

#![allow(dead_code)]

pub mod refaes;

use sdnsec::simnet::{FlowSpec, Scenario};
use sdnsec::topology::{SwitchRole, Topology};
use sdnsec::types::{HostId, SwitchId};

// ----------------------------------------------------------------------
// Literal chain folds over the reference cipher.
// ----------------------------------------------------------------------

/// Zero-pad to one block, encrypt, truncate.
pub fn oracle_mac(key: &[u8; 16], msg: &[u8], out_len: usize) -> Vec<u8> {
    assert!(msg.len() <= 16, "single-block contract");
    let mut block = [0u8; 16];
    block[..msg.len()].copy_from_slice(msg);
    refaes::encrypt_block(key, &block)[..out_len].to_vec()
}

fn be24(v: u32) -> [u8; 3] {
    let b = v.to_be_bytes();
    [b[1], b[2], b[3]]
}

pub fn oracle_bootstrap(flow_id: u32, exp_time: u32) -> [u8; 7] {
    let mut b = [0u8; 7];
    b[..3].copy_from_slice(&be24(flow_id));
    b[3..].copy_from_slice(&exp_time.to_be_bytes());
    b
}

/// The forwarding-entry recursion, written out step by step: the MAC of
/// hop i covers its egress interface, the previous entry's MAC (the
/// bootstrap for the first hop), and the bootstrap.
pub fn oracle_fe_list(hops: &[([u8; 16], u8)], flow_id: u32, exp_time: u32) -> Vec<(u8, [u8; 7])> {
    let b = oracle_bootstrap(flow_id, exp_time);
    let mut prev = b;
    let mut out = Vec::new();
    for (key, egress_if) in hops {
        let mut msg = Vec::with_capacity(15);
        msg.push(*egress_if);
        msg.extend_from_slice(&prev);
        msg.extend_from_slice(&b);
        assert_eq!(msg.len(), 15);
        let mac: [u8; 7] = oracle_mac(key, &msg, 7).try_into().unwrap();
        out.push((*egress_if, mac));
        prev = mac;
    }
    out
}

/// One PVF segment: the keys of its switches in order plus the tweak
/// identifier and sequence number they all fold in.
pub struct OracleSegment {
    pub keys: Vec<[u8; 16]>,
    pub id: u32,
    pub seq_no: u32,
}

/// The path-validation recursion: the first switch overall MACs the tweak,
/// every later switch MACs its predecessor's value followed by its
/// segment's tweak.
pub fn oracle_pvf(segments: &[OracleSegment]) -> Option<[u8; 8]> {
    let mut pvf: Option<[u8; 8]> = None;
    for segment in segments {
        let mut tweak = Vec::with_capacity(6);
        tweak.extend_from_slice(&be24(segment.id));
        tweak.extend_from_slice(&be24(segment.seq_no));
        for key in &segment.keys {
            pvf = Some(match pvf {
                None => oracle_mac(key, &tweak, 8).try_into().unwrap(),
                Some(prev) => {
                    let mut msg = Vec::with_capacity(14);
                    msg.extend_from_slice(&prev);
                    msg.extend_from_slice(&tweak);
                    assert_eq!(msg.len(), 14);
                    oracle_mac(key, &msg, 8).try_into().unwrap()
                }
            });
        }
    }
    pvf
}

// ----------------------------------------------------------------------
// Fixture topologies.
// ----------------------------------------------------------------------

/// e0 - c1 - ... - c(n-2) - e(n-1), one host at each end.
pub fn line(switches: usize) -> (Topology, HostId, HostId) {
    assert!(switches >= 2);
    let mut t = Topology::new();
    let mut ids = Vec::new();
    for i in 0..switches {
        let role = if i == 0 || i == switches - 1 {
            SwitchRole::Edge
        } else {
            SwitchRole::Core
        };
        let prefix = if role == SwitchRole::Edge { "e" } else { "c" };
        ids.push(t.add_switch(&format!("{prefix}{i}"), role).unwrap());
    }
    for pair in ids.windows(2) {
        t.add_link(pair[0], pair[1]).unwrap();
    }
    let h0 = t.attach_host("h0", ids[0]).unwrap();
    let h1 = t.attach_host("h1", ids[switches - 1]).unwrap();
    (t, h0, h1)
}

/// Every leaf connected to every spine; hosts on the first and last leaf.
pub fn leaf_spine(leaves: usize, spines: usize) -> (Topology, HostId, HostId) {
    let mut t = Topology::new();
    let leaf_ids: Vec<SwitchId> = (0..leaves)
        .map(|i| t.add_switch(&format!("l{i}"), SwitchRole::Edge).unwrap())
        .collect();
    let spine_ids: Vec<SwitchId> = (0..spines)
        .map(|i| t.add_switch(&format!("s{i}"), SwitchRole::Core).unwrap())
        .collect();
    for &leaf in &leaf_ids {
        for &spine in &spine_ids {
            t.add_link(leaf, spine).unwrap();
        }
    }
    let h0 = t.attach_host("h0", leaf_ids[0]).unwrap();
    let h1 = t.attach_host("h1", leaf_ids[leaves - 1]).unwrap();
    (t, h0, h1)
}

/// Two pods of (edge, aggregation) joined by two cores: 5-switch paths.
pub fn three_tier() -> (Topology, HostId, HostId) {
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
    (t, h0, h1)
}

/// Two disjoint two-hop routes between the edges.
pub fn diamond() -> (Topology, HostId, HostId) {
    let mut t = Topology::new();
    let e0 = t.add_switch("e0", SwitchRole::Edge).unwrap();
    let c1 = t.add_switch("c1", SwitchRole::Core).unwrap();
    let c2 = t.add_switch("c2", SwitchRole::Core).unwrap();
    let e3 = t.add_switch("e3", SwitchRole::Edge).unwrap();
    t.add_link(e0, c1).unwrap();
    t.add_link(e0, c2).unwrap();
    t.add_link(c1, e3).unwrap();
    t.add_link(c2, e3).unwrap();
    let h0 = t.attach_host("h0", e0).unwrap();
    let h1 = t.attach_host("h1", e3).unwrap();
    (t, h0, h1)
}

/// One flow, everything else defaulted.
pub fn honest_scenario(topology: Topology, src: HostId, dst: HostId, packets: u32) -> Scenario {
    let mut scenario = Scenario::new(topology);
    scenario.flows.push(FlowSpec::new(src, dst, packets));
    scenario.duration_ms = 1_000 + packets as u64 * 2;
    scenario
}
