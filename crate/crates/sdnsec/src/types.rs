//! Identifier types shared across the wire format, the control plane, and
//! the data plane.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Upper bound (inclusive) of the 24-bit identifier space used for flow,
/// failover-path, and multicast-tree identifiers.
pub const MAX_ID_24: u32 = 0x00FF_FFFF;

/// Sequence numbers are 24-bit counters and wrap modulo this mask + 1.
pub const SEQ_NO_MASK: u32 = 0x00FF_FFFF;

/// Identifies a switch. Doubles as the egress-switch identifier carried in
/// packet headers (two bytes on the wire).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct SwitchId(pub u16);

impl fmt::Display for SwitchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sw{}", self.0)
    }
}

/// Identifies a host attached to an edge switch.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct HostId(pub u16);

impl fmt::Display for HostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "host{}", self.0)
    }
}

/// 24-bit flow identifier. Failover-path identifiers are drawn from the top
/// of the same space, so this type covers both.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct FlowId(u32);

impl FlowId {
    /// Wraps a raw value, returning `None` if it does not fit in 24 bits.
    pub const fn new(raw: u32) -> Option<Self> {
        if raw <= MAX_ID_24 {
            Some(FlowId(raw))
        } else {
            None
        }
    }

    pub const fn as_u32(self) -> u32 {
        self.0
    }
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "flow:{:#08x}", self.0)
    }
}

/// 24-bit multicast tree identifier.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct TreeId(u32);

impl TreeId {
    pub const fn new(raw: u32) -> Option<Self> {
        if raw <= MAX_ID_24 {
            Some(TreeId(raw))
        } else {
            None
        }
    }

    pub const fn as_u32(self) -> u32 {
        self.0
    }
}

impl fmt::Display for TreeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tree:{:#08x}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_range_enforced() {
        assert!(FlowId::new(MAX_ID_24).is_some());
        assert!(FlowId::new(MAX_ID_24 + 1).is_none());
        assert!(TreeId::new(0).is_some());
        assert!(TreeId::new(0x0100_0000).is_none());
    }
}
