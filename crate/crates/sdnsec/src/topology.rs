//! Network model: switches, links, and hosts, plus deterministic
//! shortest-path computation.
//!
//! Interface numbers are one byte, unique per switch, and assigned
//! sequentially from 1 as links and hosts are added. Links are
//! bidirectional; parallel links between the same pair of switches are
//! allowed and are distinguished by their interface numbers.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{HostId, SwitchId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("unknown switch {0:?}")]
    UnknownSwitch(String),

    #[error("unknown host {0:?}")]
    UnknownHost(String),

    #[error("switch name {0:?} already in use")]
    DuplicateSwitchName(String),

    #[error("host name {0:?} already in use")]
    DuplicateHostName(String),

    #[error("interface {interface} already in use on {switch}")]
    InterfaceInUse { switch: SwitchId, interface: u8 },

    #[error("{0} has no free interface numbers left (255 maximum)")]
    InterfacesExhausted(SwitchId),

    #[error("hosts attach to edge switches; {0} is a core switch")]
    HostOnCoreSwitch(SwitchId),

    #[error("no path between {0} and {1}")]
    Unreachable(SwitchId, SwitchId),
}

/// Edge switches terminate hosts and hold flow tables; core switches
/// forward purely from packet headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchRole {
    Edge,
    Core,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchNode {
    pub id: SwitchId,
    pub name: String,
    pub role: SwitchRole,
}

/// A bidirectional link between two switch interfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub a: SwitchId,
    pub if_a: u8,
    pub b: SwitchId,
    pub if_b: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Host {
    pub id: HostId,
    pub name: String,
    pub switch: SwitchId,
    pub switch_if: u8,
    pub mac: [u8; 6],
    pub ip: Ipv4Addr,
}

/// What sits on the far side of a switch interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortPeer {
    /// Another switch: (peer id, peer's interface).
    Switch(SwitchId, u8),
    Host(HostId),
}

#[derive(Debug, Clone, Default)]
pub struct Topology {
    switches: Vec<SwitchNode>,
    links: Vec<Link>,
    hosts: Vec<Host>,
    /// interface -> peer, per switch.
    ports: BTreeMap<SwitchId, BTreeMap<u8, PortPeer>>,
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_switch(&mut self, name: &str, role: SwitchRole) -> Result<SwitchId, TopologyError> {
        if self.switches.iter().any(|s| s.name == name) {
            return Err(TopologyError::DuplicateSwitchName(name.to_string()));
        }
        let id = SwitchId(self.switches.len() as u16);
        self.switches.push(SwitchNode {
            id,
            name: name.to_string(),
            role,
        });
        self.ports.insert(id, BTreeMap::new());
        Ok(id)
    }

    fn next_free_interface(&self, switch: SwitchId) -> Result<u8, TopologyError> {
        let used = &self.ports[&switch];
        (1..=u8::MAX)
            .find(|candidate| !used.contains_key(candidate))
            .ok_or(TopologyError::InterfacesExhausted(switch))
    }

    fn check_switch(&self, id: SwitchId) -> Result<(), TopologyError> {
        if (id.0 as usize) < self.switches.len() {
            Ok(())
        } else {
            Err(TopologyError::UnknownSwitch(format!("{id}")))
        }
    }

    /// Connects two switches, auto-assigning the next free interface on
    /// each side.
    pub fn add_link(&mut self, a: SwitchId, b: SwitchId) -> Result<Link, TopologyError> {
        self.check_switch(a)?;
        self.check_switch(b)?;
        let if_a = self.next_free_interface(a)?;
        let if_b = self.next_free_interface(b)?;
        self.add_link_with_ifs(a, if_a, b, if_b)
    }

    pub fn add_link_with_ifs(
        &mut self,
        a: SwitchId,
        if_a: u8,
        b: SwitchId,
        if_b: u8,
    ) -> Result<Link, TopologyError> {
        self.check_switch(a)?;
        self.check_switch(b)?;
        if self.ports[&a].contains_key(&if_a) {
            return Err(TopologyError::InterfaceInUse {
                switch: a,
                interface: if_a,
            });
        }
        if self.ports[&b].contains_key(&if_b) || (a == b && if_a == if_b) {
            return Err(TopologyError::InterfaceInUse {
                switch: b,
                interface: if_b,
            });
        }
        let link = Link { a, if_a, b, if_b };
        self.links.push(link);
        self.ports
            .get_mut(&a)
            .unwrap()
            .insert(if_a, PortPeer::Switch(b, if_b));
        self.ports
            .get_mut(&b)
            .unwrap()
            .insert(if_b, PortPeer::Switch(a, if_a));
        Ok(link)
    }

    /// Attaches a host to an edge switch on the next free interface. Host
    /// addresses are derived deterministically from the host index.
    pub fn attach_host(&mut self, name: &str, switch: SwitchId) -> Result<HostId, TopologyError> {
        self.check_switch(switch)?;
        if self.hosts.iter().any(|h| h.name == name) {
            return Err(TopologyError::DuplicateHostName(name.to_string()));
        }
        if self.switches[switch.0 as usize].role != SwitchRole::Edge {
            return Err(TopologyError::HostOnCoreSwitch(switch));
        }
        let id = HostId(self.hosts.len() as u16);
        let switch_if = self.next_free_interface(switch)?;
        let idx = id.0;
        let host = Host {
            id,
            name: name.to_string(),
            switch,
            switch_if,
            mac: [0x02, 0, 0, 0, (idx >> 8) as u8, idx as u8],
            ip: Ipv4Addr::new(10, 0, (idx >> 8) as u8, idx as u8),
        };
        self.ports
            .get_mut(&switch)
            .unwrap()
            .insert(switch_if, PortPeer::Host(id));
        self.hosts.push(host);
        Ok(id)
    }

    pub fn switches(&self) -> &[SwitchNode] {
        &self.switches
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn hosts(&self) -> &[Host] {
        &self.hosts
    }

    pub fn switch(&self, id: SwitchId) -> &SwitchNode {
        &self.switches[id.0 as usize]
    }

    pub fn host(&self, id: HostId) -> &Host {
        &self.hosts[id.0 as usize]
    }

    pub fn switch_by_name(&self, name: &str) -> Result<SwitchId, TopologyError> {
        self.switches
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.id)
            .ok_or_else(|| TopologyError::UnknownSwitch(name.to_string()))
    }

    pub fn host_by_name(&self, name: &str) -> Result<HostId, TopologyError> {
        self.hosts
            .iter()
            .find(|h| h.name == name)
            .map(|h| h.id)
            .ok_or_else(|| TopologyError::UnknownHost(name.to_string()))
    }

    pub fn edge_switches(&self) -> impl Iterator<Item = &SwitchNode> {
        self.switches.iter().filter(|s| s.role == SwitchRole::Edge)
    }

    pub fn ports(&self, switch: SwitchId) -> &BTreeMap<u8, PortPeer> {
        &self.ports[&switch]
    }

    pub fn peer(&self, switch: SwitchId, interface: u8) -> Option<PortPeer> {
        self.ports.get(&switch)?.get(&interface).copied()
    }

    /// Smallest-numbered interface on `from` that leads directly to `to`,
    /// optionally skipping one excluded interface (used to pick the
    /// secondary of a parallel-link pair).
    pub fn interface_toward(
        &self,
        from: SwitchId,
        to: SwitchId,
        excluding: Option<u8>,
    ) -> Option<u8> {
        self.ports[&from].iter().find_map(|(&ifc, peer)| {
            if Some(ifc) == excluding {
                return None;
            }
            match peer {
                PortPeer::Switch(peer_id, _) if *peer_id == to => Some(ifc),
                _ => None,
            }
        })
    }

    /// Hop-count shortest path from `from` to `to`, deterministic: among
    /// equal-length paths the lexicographically smallest switch-id sequence
    /// wins. `banned` interfaces (given as (switch, interface) for either
    /// end) are treated as absent links.
    pub fn shortest_path(
        &self,
        from: SwitchId,
        to: SwitchId,
        banned: &BTreeSet<(SwitchId, u8)>,
    ) -> Option<Vec<SwitchId>> {
        let link_allowed = |sw: SwitchId, ifc: u8, peer: SwitchId, peer_if: u8| {
            !banned.contains(&(sw, ifc)) && !banned.contains(&(peer, peer_if))
        };

        // Distance-to-target for every switch.
        let mut dist: BTreeMap<SwitchId, u32> = BTreeMap::new();
        dist.insert(to, 0);
        let mut queue = VecDeque::from([to]);
        while let Some(at) = queue.pop_front() {
            let d = dist[&at];
            for (&ifc, peer) in &self.ports[&at] {
                if let PortPeer::Switch(next, peer_if) = peer {
                    if link_allowed(at, ifc, *next, *peer_if) && !dist.contains_key(next) {
                        dist.insert(*next, d + 1);
                        queue.push_back(*next);
                    }
                }
            }
        }

        let mut remaining = *dist.get(&from)?;
        let mut path = vec![from];
        let mut at = from;
        while remaining > 0 {
            // Greedy: the smallest-id neighbor one step closer to the
            // target extends the lexicographically smallest path.
            let next = self.ports[&at]
                .iter()
                .filter_map(|(&ifc, peer)| match peer {
                    PortPeer::Switch(next, peer_if)
                        if link_allowed(at, ifc, *next, *peer_if)
                            && dist.get(next) == Some(&(remaining - 1)) =>
                    {
                        Some(*next)
                    }
                    _ => None,
                })
                .min()?;
            path.push(next);
            at = next;
            remaining -= 1;
        }
        Some(path)
    }
}
