//! Bit-exact encoding and decoding of the packet headers, plus the byte
//! offset and overhead arithmetic that the data plane relies on.
//!
//! Unicast layout (`PktType = 0`):
//!
//! ```text
//!  0                   1                   2                   3
//!  0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1
//! +-+-+-----------+---------------+-------------------------------+
//! |T|D|   LFC     |    FE Ptr     |         ExpTime (hi)          |
//! +-+-+-----------+---------------+-------------------------------+
//! |         ExpTime (lo)          |  FlowInfo blocks: (LFC+1) x 8 |
//! +-------------------------------+                               |
//! |   each block: FlowID (3) | SeqNo (3) | EgressID (2)           |
//! +---------------------------------------------------------------+
//! |                        PVF (8 bytes)                          |
//! +---------------------------------------------------------------+
//! |  Forwarding entries, 8 bytes each: egress-if (1) | MAC (7)    |
//! +---------------------------------------------------------------+
//! ```
//!
//! `T` is the packet-type flag (set for multicast), `D` the do-not-detour
//! flag. The most recent flow-info block sits at byte offset `6 + LFC*8`;
//! the forwarding entry a switch must examine sits at
//! `6 + (LFC+2)*8 + FEPtr*8`.
//!
//! Multicast layout (`PktType = 1`, fixed 22 bytes):
//!
//! ```text
//! byte  0      1      2..5     6..8    9..11   12..13  14..21
//!      flags  rsvd   ExpTime  TreeID  SeqNo   rsvd    PVF
//! ```
//!
//! All multi-byte integers are big-endian. Reserved bits and bytes encode
//! as zero and their contents are ignored on decode. `WIRE-FORMAT.md` at
//! the repository root is the normative description of these layouts and
//! carries the golden test vectors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{FlowId, SwitchId, TreeId, MAX_ID_24};

/// Size of the fixed region of the unicast header.
pub const FIXED_LEN: usize = 6;
/// Size of one flow-info block.
pub const FLOW_BLOCK_LEN: usize = 8;
/// Size of the path validation field.
pub const PVF_LEN: usize = 8;
/// Size of one forwarding entry.
pub const FE_LEN: usize = 8;
/// Length of the truncated MAC inside a forwarding entry.
pub const FE_MAC_LEN: usize = 7;
/// Smallest valid header: fixed region + one flow-info block + PVF.
pub const MIN_HEADER_LEN: usize = FIXED_LEN + FLOW_BLOCK_LEN + PVF_LEN;
/// Multicast headers are always exactly this long.
pub const MULTICAST_HEADER_LEN: usize = 22;
/// The link-failure counter is six bits wide.
pub const MAX_LFC: u8 = 63;
/// The FE pointer is one byte, so a path can hold at most this many entries.
pub const MAX_FES: usize = 255;

const PKT_TYPE_BIT: u8 = 0x80;
const DO_NOT_DETOUR_BIT: u8 = 0x40;
const LFC_MASK: u8 = 0x3F;

/// Encoding or decoding failure.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("header too short: {actual} bytes, minimum {MIN_HEADER_LEN}")]
    TooShort { actual: usize },

    #[error("unicast header length {actual} is not 6 plus a multiple of 8")]
    Misaligned { actual: usize },

    #[error("unicast header length {actual} cannot hold {lfc} failover blocks")]
    TruncatedFlowInfo { actual: usize, lfc: u8 },

    #[error("multicast header must be exactly {MULTICAST_HEADER_LEN} bytes, got {actual}")]
    MulticastLength { actual: usize },

    #[error("FE pointer {fe_ptr} points beyond the {fes}-entry forwarding region")]
    FePtrOutOfRange { fe_ptr: u8, fes: usize },

    #[error("link-failure count {0} exceeds {MAX_LFC}")]
    LfcTooLarge(u8),

    #[error("{blocks} flow-info blocks present, lfc {lfc} requires exactly {expected}")]
    FlowBlockCount {
        blocks: usize,
        lfc: u8,
        expected: usize,
    },

    #[error("{field} value {value:#x} exceeds 24 bits")]
    ValueTooWide { field: &'static str, value: u32 },

    #[error("forwarding-entry list of {0} entries exceeds {MAX_FES}")]
    TooManyEntries(usize),

    #[error("a path must contain at least one switch")]
    EmptyPath,
}

/// 8-byte path validation field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct Pvf(pub [u8; PVF_LEN]);

impl Pvf {
    pub fn to_hex(self) -> String {
        hex::encode(self.0)
    }
}

/// Fixed region of the unicast header. The packet-type bit is implied by
/// the header variant and always encodes as zero here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct HeaderFixed {
    /// Drop instead of detouring on a link failure.
    pub do_not_detour: bool,
    /// Number of failover rewrites this packet has absorbed (six bits).
    pub lfc: u8,
    /// Index of the forwarding-entry slot the next switch must examine.
    pub fe_ptr: u8,
    /// Absolute expiry, whole seconds.
    pub exp_time: u32,
}

/// Per-path flow information: the original flow first, failover paths
/// appended in detection order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowInfoBlock {
    pub flow_id: FlowId,
    /// 24-bit packet counter inscribed by the ingress switch.
    pub seq_no: u32,
    pub egress_id: SwitchId,
}

/// One hop of the enforcement chain: the egress interface a switch must
/// use and the truncated MAC protecting it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardingEntry {
    pub egress_if: u8,
    pub mac: [u8; FE_MAC_LEN],
}

/// Unicast packet header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdnsecHeader {
    pub fixed: HeaderFixed,
    /// Exactly `lfc + 1` blocks.
    pub flow_blocks: Vec<FlowInfoBlock>,
    pub pvf: Pvf,
    /// One entry per switch after the ingress on the current segment.
    pub fes: Vec<ForwardingEntry>,
}

impl SdnsecHeader {
    /// The most recent flow-info block (the failover block after a rewrite,
    /// the original block otherwise).
    pub fn current_flow_block(&self) -> &FlowInfoBlock {
        self.flow_blocks
            .last()
            .expect("header invariant: lfc + 1 flow blocks")
    }

    /// Convenience wrapper for [`encode`].
    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        encode_unicast(self)
    }

    pub fn encoded_len(&self) -> usize {
        FIXED_LEN + (self.flow_blocks.len() + 1) * FLOW_BLOCK_LEN + self.fes.len() * FE_LEN
    }
}

/// Multicast packet header, fixed 22 bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MulticastHeader {
    pub exp_time: u32,
    pub tree_id: TreeId,
    pub seq_no: u32,
    pub pvf: Pvf,
}

impl MulticastHeader {
    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        encode_multicast(self)
    }
}

/// A decoded packet header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Header {
    Unicast(SdnsecHeader),
    Multicast(MulticastHeader),
}

impl Header {
    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        encode(self)
    }

    pub fn exp_time(&self) -> u32 {
        match self {
            Header::Unicast(h) => h.fixed.exp_time,
            Header::Multicast(h) => h.exp_time,
        }
    }
}

fn check_seq_no(seq_no: u32) -> Result<(), WireError> {
    if seq_no > MAX_ID_24 {
        return Err(WireError::ValueTooWide {
            field: "seq_no",
            value: seq_no,
        });
    }
    Ok(())
}

fn put_u24(out: &mut Vec<u8>, value: u32) {
    out.extend_from_slice(&value.to_be_bytes()[1..]);
}

fn get_u24(bytes: &[u8]) -> u32 {
    u32::from_be_bytes([0, bytes[0], bytes[1], bytes[2]])
}

fn encode_unicast(h: &SdnsecHeader) -> Result<Vec<u8>, WireError> {
    if h.fixed.lfc > MAX_LFC {
        return Err(WireError::LfcTooLarge(h.fixed.lfc));
    }
    let expected_blocks = h.fixed.lfc as usize + 1;
    if h.flow_blocks.len() != expected_blocks {
        return Err(WireError::FlowBlockCount {
            blocks: h.flow_blocks.len(),
            lfc: h.fixed.lfc,
            expected: expected_blocks,
        });
    }
    if h.fes.len() > MAX_FES {
        return Err(WireError::TooManyEntries(h.fes.len()));
    }
    if h.fixed.fe_ptr as usize > h.fes.len() {
        return Err(WireError::FePtrOutOfRange {
            fe_ptr: h.fixed.fe_ptr,
            fes: h.fes.len(),
        });
    }

    let mut out = Vec::with_capacity(h.encoded_len());
    let mut byte0 = h.fixed.lfc & LFC_MASK;
    if h.fixed.do_not_detour {
        byte0 |= DO_NOT_DETOUR_BIT;
    }
    out.push(byte0);
    out.push(h.fixed.fe_ptr);
    out.extend_from_slice(&h.fixed.exp_time.to_be_bytes());
    for block in &h.flow_blocks {
        check_seq_no(block.seq_no)?;
        put_u24(&mut out, block.flow_id.as_u32());
        put_u24(&mut out, block.seq_no);
        out.extend_from_slice(&block.egress_id.0.to_be_bytes());
    }
    out.extend_from_slice(&h.pvf.0);
    for fe in &h.fes {
        out.push(fe.egress_if);
        out.extend_from_slice(&fe.mac);
    }
    debug_assert_eq!(out.len(), h.encoded_len());
    Ok(out)
}

fn encode_multicast(h: &MulticastHeader) -> Result<Vec<u8>, WireError> {
    check_seq_no(h.seq_no)?;
    let mut out = Vec::with_capacity(MULTICAST_HEADER_LEN);
    out.push(PKT_TYPE_BIT);
    out.push(0); // reserved
    out.extend_from_slice(&h.exp_time.to_be_bytes());
    put_u24(&mut out, h.tree_id.as_u32());
    put_u24(&mut out, h.seq_no);
    out.extend_from_slice(&[0, 0]); // reserved
    out.extend_from_slice(&h.pvf.0);
    debug_assert_eq!(out.len(), MULTICAST_HEADER_LEN);
    Ok(out)
}

/// Encodes a header into its on-wire byte representation.
pub fn encode(header: &Header) -> Result<Vec<u8>, WireError> {
    match header {
        Header::Unicast(h) => encode_unicast(h),
        Header::Multicast(h) => encode_multicast(h),
    }
}

/// Decodes an on-wire header. Truncated or malformed input yields a
/// structured [`WireError`]; the parser never reads past the input.
pub fn decode(bytes: &[u8]) -> Result<Header, WireError> {
    if bytes.len() < MIN_HEADER_LEN {
        return Err(WireError::TooShort {
            actual: bytes.len(),
        });
    }
    if bytes[0] & PKT_TYPE_BIT != 0 {
        return decode_multicast(bytes);
    }
    decode_unicast(bytes)
}

fn decode_unicast(bytes: &[u8]) -> Result<Header, WireError> {
    let lfc = bytes[0] & LFC_MASK;
    let do_not_detour = bytes[0] & DO_NOT_DETOUR_BIT != 0;
    let fe_ptr = bytes[1];
    let exp_time = u32::from_be_bytes([bytes[2], bytes[3], bytes[4], bytes[5]]);

    if !(bytes.len() - FIXED_LEN).is_multiple_of(FLOW_BLOCK_LEN) {
        return Err(WireError::Misaligned {
            actual: bytes.len(),
        });
    }
    let slots = (bytes.len() - FIXED_LEN) / FLOW_BLOCK_LEN;
    let blocks = lfc as usize + 1;
    // One slot per flow block plus one for the PVF.
    if slots < blocks + 1 {
        return Err(WireError::TruncatedFlowInfo {
            actual: bytes.len(),
            lfc,
        });
    }
    let n_fes = slots - blocks - 1;
    if fe_ptr as usize > n_fes {
        return Err(WireError::FePtrOutOfRange { fe_ptr, fes: n_fes });
    }

    let mut flow_blocks = Vec::with_capacity(blocks);
    let mut at = FIXED_LEN;
    for _ in 0..blocks {
        let flow_id = FlowId::new(get_u24(&bytes[at..])).expect("24-bit read");
        let seq_no = get_u24(&bytes[at + 3..]);
        let egress_id = SwitchId(u16::from_be_bytes([bytes[at + 6], bytes[at + 7]]));
        flow_blocks.push(FlowInfoBlock {
            flow_id,
            seq_no,
            egress_id,
        });
        at += FLOW_BLOCK_LEN;
    }

    let mut pvf = [0u8; PVF_LEN];
    pvf.copy_from_slice(&bytes[at..at + PVF_LEN]);
    at += PVF_LEN;

    let mut fes = Vec::with_capacity(n_fes);
    for _ in 0..n_fes {
        let egress_if = bytes[at];
        let mut mac = [0u8; FE_MAC_LEN];
        mac.copy_from_slice(&bytes[at + 1..at + FE_LEN]);
        fes.push(ForwardingEntry { egress_if, mac });
        at += FE_LEN;
    }
    debug_assert_eq!(at, bytes.len());

    Ok(Header::Unicast(SdnsecHeader {
        fixed: HeaderFixed {
            do_not_detour,
            lfc,
            fe_ptr,
            exp_time,
        },
        flow_blocks,
        pvf: Pvf(pvf),
        fes,
    }))
}

fn decode_multicast(bytes: &[u8]) -> Result<Header, WireError> {
    if bytes.len() != MULTICAST_HEADER_LEN {
        return Err(WireError::MulticastLength {
            actual: bytes.len(),
        });
    }
    // bytes[1] and bytes[12..14] are reserved and ignored.
    let exp_time = u32::from_be_bytes([bytes[2], bytes[3], bytes[4], bytes[5]]);
    let tree_id = TreeId::new(get_u24(&bytes[6..])).expect("24-bit read");
    let seq_no = get_u24(&bytes[9..]);
    let mut pvf = [0u8; PVF_LEN];
    pvf.copy_from_slice(&bytes[14..22]);
    Ok(Header::Multicast(MulticastHeader {
        exp_time,
        tree_id,
        seq_no,
        pvf: Pvf(pvf),
    }))
}

/// Byte offset of forwarding-entry slot `fe_ptr` from the start of the
/// header: `6 + (LFC+2)*8 + FEPtr*8`.
pub fn fe_slot_offset(lfc: u8, fe_ptr: u8) -> usize {
    debug_assert!(lfc <= MAX_LFC);
    FIXED_LEN + (lfc as usize + 2) * FLOW_BLOCK_LEN + fe_ptr as usize * FE_LEN
}

/// Byte offset of the most recent flow-info block: `6 + LFC*8`.
pub fn current_flow_block_offset(lfc: u8) -> usize {
    debug_assert!(lfc <= MAX_LFC);
    FIXED_LEN + lfc as usize * FLOW_BLOCK_LEN
}

/// Header bytes added to a packet that crosses `path_switches` switches
/// (ingress and egress included): a 22-byte constant plus 8 bytes for every
/// switch after the ingress.
pub fn overhead_bytes(path_switches: usize) -> Result<usize, WireError> {
    if path_switches == 0 {
        return Err(WireError::EmptyPath);
    }
    Ok(MIN_HEADER_LEN + FE_LEN * (path_switches - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_header(lfc: u8, n_fes: usize) -> SdnsecHeader {
        let blocks = (0..=lfc as u32)
            .map(|i| FlowInfoBlock {
                flow_id: FlowId::new(5 + i).unwrap(),
                seq_no: 9 + i,
                egress_id: SwitchId(7),
            })
            .collect();
        let fes = (0..n_fes)
            .map(|i| ForwardingEntry {
                egress_if: (i + 2) as u8,
                mac: [0xB0u8.wrapping_add(i as u8); FE_MAC_LEN],
            })
            .collect();
        SdnsecHeader {
            fixed: HeaderFixed {
                do_not_detour: false,
                lfc,
                fe_ptr: 0,
                exp_time: 100,
            },
            flow_blocks: blocks,
            pvf: Pvf([0xA0, 0xA1, 0xA2, 0xA3, 0xA4, 0xA5, 0xA6, 0xA7]),
            fes,
        }
    }

    #[test]
    fn unicast_lengths() {
        // lfc=0 with two entries: 6 + 2*8 + 2*8 = 38 bytes.
        let h = sample_header(0, 2);
        assert_eq!(h.encode().unwrap().len(), 38);
        // lfc=0, no entries: the 22-byte constant.
        let h = sample_header(0, 0);
        assert_eq!(h.encode().unwrap().len(), 22);
    }

    #[test]
    fn multicast_always_22_bytes() {
        let h = MulticastHeader {
            exp_time: 100,
            tree_id: TreeId::new(3).unwrap(),
            seq_no: 0x11,
            pvf: Pvf([0xD0; 8]),
        };
        let bytes = h.encode().unwrap();
        assert_eq!(bytes.len(), MULTICAST_HEADER_LEN);
        assert_eq!(bytes[0], 0x80);
        assert_eq!(decode(&bytes).unwrap(), Header::Multicast(h));
    }

    #[test]
    fn round_trip_identity() {
        for (lfc, n_fes) in [(0, 0), (0, 2), (1, 3), (3, 0), (63, 255)] {
            let mut h = sample_header(lfc, n_fes);
            h.fixed.fe_ptr = (n_fes / 2) as u8;
            h.fixed.do_not_detour = lfc % 2 == 1;
            let bytes = h.encode().unwrap();
            assert_eq!(decode(&bytes).unwrap(), Header::Unicast(h));
        }
    }

    #[test]
    fn rejects_short_input() {
        assert_eq!(decode(&[0u8; 21]), Err(WireError::TooShort { actual: 21 }));
    }

    #[test]
    fn rejects_misaligned_and_truncated() {
        assert!(matches!(
            decode(&[0u8; 23]),
            Err(WireError::Misaligned { .. })
        ));
        // lfc=2 needs 3 blocks + pvf = 38 bytes minimum.
        let mut bytes = vec![0u8; 30];
        bytes[0] = 2;
        assert!(matches!(
            decode(&bytes),
            Err(WireError::TruncatedFlowInfo { .. })
        ));
    }

    #[test]
    fn rejects_fe_ptr_beyond_region() {
        let mut bytes = sample_header(0, 2).encode().unwrap();
        bytes[1] = 3; // only two slots exist; fe_ptr == 2 is legal (all consumed)
        assert!(matches!(
            decode(&bytes),
            Err(WireError::FePtrOutOfRange { fe_ptr: 3, fes: 2 })
        ));
        bytes[1] = 2;
        assert!(decode(&bytes).is_ok());
    }

    #[test]
    fn multicast_bit_dispatches() {
        let mut bytes = vec![0u8; MULTICAST_HEADER_LEN];
        bytes[0] = 0x80;
        assert!(matches!(decode(&bytes), Ok(Header::Multicast(_))));
        // Multicast-flagged input of any other length is rejected.
        let mut long = vec![0u8; 30];
        long[0] = 0x80;
        assert!(matches!(
            decode(&long),
            Err(WireError::MulticastLength { actual: 30 })
        ));
    }

    #[test]
    fn offsets_match_formulas() {
        assert_eq!(fe_slot_offset(0, 0), 22);
        assert_eq!(fe_slot_offset(1, 1), 38);
        assert_eq!(current_flow_block_offset(0), 6);
        assert_eq!(current_flow_block_offset(1), 14);
        assert_eq!(current_flow_block_offset(2), 22);
        // Slot 0 begins right after the PVF.
        let h = sample_header(0, 1);
        let bytes = h.encode().unwrap();
        assert_eq!(
            &bytes[fe_slot_offset(0, 0)..fe_slot_offset(0, 0) + FE_LEN],
            &[2, 0xB0, 0xB0, 0xB0, 0xB0, 0xB0, 0xB0, 0xB0]
        );
    }

    #[test]
    fn overhead_model() {
        assert_eq!(overhead_bytes(1).unwrap(), 22);
        assert_eq!(overhead_bytes(3).unwrap(), 38);
        assert_eq!(overhead_bytes(5).unwrap(), 54);
        assert_eq!(overhead_bytes(10).unwrap(), 94);
        assert_eq!(overhead_bytes(0), Err(WireError::EmptyPath));
        // The encoded length of an lfc=0 header with n-1 entries matches.
        for n in 1..=12usize {
            let h = sample_header(0, n - 1);
            assert_eq!(h.encode().unwrap().len(), overhead_bytes(n).unwrap());
        }
    }

    #[test]
    fn encode_validates_invariants() {
        let mut h = sample_header(0, 1);
        h.fixed.lfc = 64;
        assert_eq!(h.encode(), Err(WireError::LfcTooLarge(64)));

        let mut h = sample_header(0, 1);
        h.fixed.lfc = 1; // now one block short
        assert!(matches!(h.encode(), Err(WireError::FlowBlockCount { .. })));

        let mut h = sample_header(0, 1);
        h.fixed.fe_ptr = 2;
        assert!(matches!(h.encode(), Err(WireError::FePtrOutOfRange { .. })));

        let mut h = sample_header(0, 0);
        h.flow_blocks[0].seq_no = MAX_ID_24 + 1;
        assert!(matches!(h.encode(), Err(WireError::ValueTooWide { .. })));
    }
}
