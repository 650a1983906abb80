//! Truncated single-block MAC primitives and the chained forwarding-entry
//! and path-validation computations built on them.
//!
//! Every MAC in the system is one AES-128 block encryption of a
//! zero-padded, fixed-length message, truncated to 7 bytes (forwarding
//! entries) or 8 bytes (path validation field). Message lengths are fixed
//! per use: 15 bytes for a forwarding-entry MAC, 14 bytes for a
//! path-validation step, 6 bytes for the path-validation bootstrap. Inputs
//! never exceed one cipher block, which keeps the single-block CBC-MAC
//! construction safe from the length-extension pitfalls of variable-length
//! messages.
//!
//! The forwarding-entry chain for a path `S1..Sn` (the ingress `S0` holds
//! no entry) starts from the 7-byte bootstrap value `B = FlowID || ExpTime`
//! and folds each hop's egress interface into the next MAC:
//!
//! ```text
//! chain(0) = B
//! mac(i)   = MAC_{Kfe(Si)}( egr(Si) || chain(i-1) || B )   // 15 bytes
//! chain(i) = mac(i)
//! ```
//!
//! The path validation field folds a per-packet tweak `C = ID || SeqNo`
//! (flow, failover-path, or tree identifier) across the traversed switches:
//!
//! ```text
//! pvf(0) = MAC_{Kpvf(S0)}( C )                             //  6 bytes
//! pvf(i) = MAC_{Kpvf(Si)}( pvf(i-1) || C )                 // 14 bytes
//! ```

use std::collections::BTreeMap;

use aes::cipher::{generic_array::GenericArray, BlockEncrypt, KeyInit};
use aes::Aes128;
use rand::RngCore;
use thiserror::Error;

use crate::types::{FlowId, SwitchId, TreeId, MAX_ID_24};
use crate::wire::{ForwardingEntry, Pvf, FE_MAC_LEN, PVF_LEN};

/// MAC keys are AES-128 keys.
pub const KEY_LEN: usize = 16;
/// One cipher block; no MAC input may exceed it.
pub const BLOCK_LEN: usize = 16;
/// Length of a chain value (bootstrap or truncated FE MAC).
pub const CHAIN_LEN: usize = FE_MAC_LEN;
/// Encoded length of a PVF tweak.
pub const TWEAK_LEN: usize = 6;
/// A forwarding-entry MAC covers egress-if || chain || bootstrap.
pub const FE_MAC_INPUT_LEN: usize = 1 + CHAIN_LEN + CHAIN_LEN;
/// A PVF step covers the previous PVF || tweak.
pub const PVF_MAC_INPUT_LEN: usize = PVF_LEN + TWEAK_LEN;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("MAC input of {0} bytes exceeds one {BLOCK_LEN}-byte block")]
    MessageTooLong(usize),

    #[error("no keys provisioned for {0}")]
    UnprovisionedSwitch(SwitchId),

    #[error("cannot compute a PVF over zero switches")]
    EmptyPath,
}

/// 16-byte MAC key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacKey(pub [u8; KEY_LEN]);

/// Per-switch secrets shared with the controller. The forwarding-entry key
/// and the path-validation key are always distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchKeys {
    pub switch_id: SwitchId,
    pub k_fe: MacKey,
    pub k_pvf: MacKey,
}

/// 7-byte chain value: the bootstrap `B` or a truncated FE MAC.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainValue(pub [u8; CHAIN_LEN]);

/// Per-packet PVF tweak `C = ID || SeqNo`, both 24-bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PvfTweak {
    id: u32,
    seq_no: u32,
}

impl PvfTweak {
    pub fn for_flow(flow_id: FlowId, seq_no: u32) -> Self {
        debug_assert!(seq_no <= MAX_ID_24);
        PvfTweak {
            id: flow_id.as_u32(),
            seq_no: seq_no & MAX_ID_24,
        }
    }

    pub fn for_tree(tree_id: TreeId, seq_no: u32) -> Self {
        debug_assert!(seq_no <= MAX_ID_24);
        PvfTweak {
            id: tree_id.as_u32(),
            seq_no: seq_no & MAX_ID_24,
        }
    }

    pub fn encode(&self) -> [u8; TWEAK_LEN] {
        let id = self.id.to_be_bytes();
        let seq = self.seq_no.to_be_bytes();
        [id[1], id[2], id[3], seq[1], seq[2], seq[3]]
    }
}

/// Encrypts one zero-padded block. `msg` must fit a single block; callers
/// with type-fixed input sizes rely on this never failing for them.
fn block_mac(key: &MacKey, msg: &[u8]) -> [u8; BLOCK_LEN] {
    debug_assert!(msg.len() <= BLOCK_LEN);
    let cipher = Aes128::new(GenericArray::from_slice(&key.0));
    let mut block = [0u8; BLOCK_LEN];
    block[..msg.len()].copy_from_slice(msg);
    let mut ga = GenericArray::from(block);
    cipher.encrypt_block(&mut ga);
    ga.into()
}

/// Single-block truncated MAC: zero-pads `msg` to one block, encrypts it
/// under `key`, and returns the first `N` bytes.
pub fn mac_trunc<const N: usize>(key: &MacKey, msg: &[u8]) -> Result<[u8; N], CryptoError> {
    const { assert!(N <= BLOCK_LEN) };
    if msg.len() > BLOCK_LEN {
        return Err(CryptoError::MessageTooLong(msg.len()));
    }
    let full = block_mac(key, msg);
    let mut out = [0u8; N];
    out.copy_from_slice(&full[..N]);
    Ok(out)
}

/// Bootstrap chain value `B = FlowID || ExpTime` (3 + 4 bytes).
pub fn bootstrap_chain(flow_id: FlowId, exp_time: u32) -> ChainValue {
    let id = flow_id.as_u32().to_be_bytes();
    let exp = exp_time.to_be_bytes();
    ChainValue([id[1], id[2], id[3], exp[0], exp[1], exp[2], exp[3]])
}

fn fe_mac_input(egress_if: u8, prev: &ChainValue, b: &ChainValue) -> [u8; FE_MAC_INPUT_LEN] {
    let mut msg = [0u8; FE_MAC_INPUT_LEN];
    msg[0] = egress_if;
    msg[1..1 + CHAIN_LEN].copy_from_slice(&prev.0);
    msg[1 + CHAIN_LEN..].copy_from_slice(&b.0);
    msg
}

/// Truncated MAC protecting one hop of the forwarding chain.
pub fn fe_mac(keys: &SwitchKeys, egress_if: u8, prev: &ChainValue, b: &ChainValue) -> ChainValue {
    let msg = fe_mac_input(egress_if, prev, b);
    let mac = block_mac(&keys.k_fe, &msg);
    let mut out = [0u8; CHAIN_LEN];
    out.copy_from_slice(&mac[..CHAIN_LEN]);
    ChainValue(out)
}

/// One hop of a routed path: the switch and the interface it must transmit
/// on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathHop {
    pub switch: SwitchId,
    pub egress_if: u8,
}

/// Builds the forwarding-entry list for the switches after the ingress,
/// folding the chain from the bootstrap value. Entry `i` belongs to the
/// `i+1`-th switch of the path segment.
pub fn build_fe_list(
    hops: &[PathHop],
    keystore: &Keystore,
    flow_id: FlowId,
    exp_time: u32,
) -> Result<Vec<ForwardingEntry>, CryptoError> {
    let b = bootstrap_chain(flow_id, exp_time);
    let mut prev = b;
    let mut fes = Vec::with_capacity(hops.len());
    for hop in hops {
        let keys = keystore.keys(hop.switch)?;
        let mac = fe_mac(keys, hop.egress_if, &prev, &b);
        fes.push(ForwardingEntry {
            egress_if: hop.egress_if,
            mac: mac.0,
        });
        prev = mac;
    }
    Ok(fes)
}

/// Verifies one forwarding entry against the chain state a switch derives
/// from the packet header.
pub fn verify_fe(
    keys: &SwitchKeys,
    entry: &ForwardingEntry,
    prev: &ChainValue,
    b: &ChainValue,
) -> bool {
    fe_mac(keys, entry.egress_if, prev, b).0 == entry.mac
}

/// Path validation bootstrap, computed by the ingress switch.
pub fn pvf_init(keys: &SwitchKeys, tweak: &PvfTweak) -> Pvf {
    let msg = tweak.encode();
    let mac = block_mac(&keys.k_pvf, &msg);
    let mut out = [0u8; PVF_LEN];
    out.copy_from_slice(&mac[..PVF_LEN]);
    Pvf(out)
}

fn pvf_step_input(prev: &Pvf, tweak: &PvfTweak) -> [u8; PVF_MAC_INPUT_LEN] {
    let mut msg = [0u8; PVF_MAC_INPUT_LEN];
    msg[..PVF_LEN].copy_from_slice(&prev.0);
    msg[PVF_LEN..].copy_from_slice(&tweak.encode());
    msg
}

/// One path-validation step, applied by every switch after the ingress.
pub fn pvf_step(keys: &SwitchKeys, prev: &Pvf, tweak: &PvfTweak) -> Pvf {
    let msg = pvf_step_input(prev, tweak);
    let mac = block_mac(&keys.k_pvf, &msg);
    let mut out = [0u8; PVF_LEN];
    out.copy_from_slice(&mac[..PVF_LEN]);
    Pvf(out)
}

/// A stretch of switches that share one PVF tweak: the pre-failure prefix
/// of the original path, one failover detour, or a whole multicast
/// root-to-leaf path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSegment {
    pub switches: Vec<SwitchId>,
    pub tweak: PvfTweak,
}

/// Recomputes the PVF the controller expects for a packet that traversed
/// the given segments in order. The first switch overall contributes the
/// bootstrap; every later switch contributes one step under its segment's
/// tweak. Empty segments (a failover triggered before any prefix hop) are
/// skipped.
pub fn expected_pvf(segments: &[PathSegment], keystore: &Keystore) -> Result<Pvf, CryptoError> {
    let mut pvf: Option<Pvf> = None;
    for segment in segments {
        for &switch in &segment.switches {
            let keys = keystore.keys(switch)?;
            pvf = Some(match pvf {
                None => pvf_init(keys, &segment.tweak),
                Some(prev) => pvf_step(keys, &prev, &segment.tweak),
            });
        }
    }
    pvf.ok_or(CryptoError::EmptyPath)
}

/// Controller-side key registry, one entry per provisioned switch.
#[derive(Debug, Clone, Default)]
pub struct Keystore {
    keys: BTreeMap<SwitchId, SwitchKeys>,
}

impl Keystore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Generates and registers fresh keys for a switch, redrawing until the
    /// two subkeys differ.
    pub fn provision(&mut self, switch_id: SwitchId, rng: &mut impl RngCore) -> &SwitchKeys {
        let mut k_fe = [0u8; KEY_LEN];
        let mut k_pvf = [0u8; KEY_LEN];
        rng.fill_bytes(&mut k_fe);
        loop {
            rng.fill_bytes(&mut k_pvf);
            if k_pvf != k_fe {
                break;
            }
        }
        self.insert(SwitchKeys {
            switch_id,
            k_fe: MacKey(k_fe),
            k_pvf: MacKey(k_pvf),
        })
    }

    /// Registers explicit keys (fixtures and tests).
    pub fn insert(&mut self, keys: SwitchKeys) -> &SwitchKeys {
        let id = keys.switch_id;
        self.keys.insert(id, keys);
        &self.keys[&id]
    }

    pub fn keys(&self, switch_id: SwitchId) -> Result<&SwitchKeys, CryptoError> {
        self.keys
            .get(&switch_id)
            .ok_or(CryptoError::UnprovisionedSwitch(switch_id))
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn patterned_keys(id: u16, base: u8) -> SwitchKeys {
        let mut k_fe = [0u8; KEY_LEN];
        let mut k_pvf = [0u8; KEY_LEN];
        for i in 0..KEY_LEN {
            k_fe[i] = base.wrapping_add(i as u8);
            k_pvf[i] = base.wrapping_add(0x80).wrapping_add(i as u8);
        }
        SwitchKeys {
            switch_id: SwitchId(id),
            k_fe: MacKey(k_fe),
            k_pvf: MacKey(k_pvf),
        }
    }

    #[test]
    fn mac_trunc_is_deterministic_and_prefix_consistent() {
        let key = MacKey([0u8; KEY_LEN]);
        let a: [u8; 8] = mac_trunc(&key, &[]).unwrap();
        let b: [u8; 8] = mac_trunc(&key, &[]).unwrap();
        assert_eq!(a, b);
        // AES-128 of the zero block under the zero key, first 8 bytes.
        assert_eq!(hex::encode(a), "66e94bd4ef8a2c3b");
        let short: [u8; 7] = mac_trunc(&key, &[]).unwrap();
        assert_eq!(short, a[..7]);
    }

    #[test]
    fn mac_trunc_rejects_oversized_messages() {
        let key = MacKey([0u8; KEY_LEN]);
        let msg = [0u8; 17];
        assert_eq!(
            mac_trunc::<8>(&key, &msg),
            Err(CryptoError::MessageTooLong(17))
        );
        let exact = [0u8; 16];
        assert!(mac_trunc::<8>(&key, &exact).is_ok());
    }

    #[test]
    fn bootstrap_layout() {
        assert_eq!(bootstrap_chain(FlowId::new(0).unwrap(), 0).0, [0u8; 7]);
        assert_eq!(
            bootstrap_chain(FlowId::new(1).unwrap(), 2).0,
            [0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x02]
        );
    }

    #[test]
    fn mac_input_lengths_are_fixed() {
        let b = bootstrap_chain(FlowId::new(1).unwrap(), 100);
        assert_eq!(fe_mac_input(1, &b, &b).len(), 15);
        assert_eq!(FE_MAC_INPUT_LEN, 15);
        let tweak = PvfTweak::for_flow(FlowId::new(1).unwrap(), 1);
        assert_eq!(pvf_step_input(&Pvf([0u8; 8]), &tweak).len(), 14);
        assert_eq!(PVF_MAC_INPUT_LEN, 14);
        assert_eq!(tweak.encode().len(), 6);
    }

    #[test]
    fn egress_interface_binds_the_mac() {
        let keys = patterned_keys(1, 0x10);
        let b = bootstrap_chain(FlowId::new(7).unwrap(), 42);
        assert_ne!(fe_mac(&keys, 1, &b, &b), fe_mac(&keys, 2, &b, &b));
    }

    #[test]
    fn empty_and_single_hop_chains() {
        let mut ks = Keystore::new();
        ks.insert(patterned_keys(1, 0x10));
        let flow = FlowId::new(9).unwrap();
        assert!(build_fe_list(&[], &ks, flow, 10).unwrap().is_empty());

        let hops = [PathHop {
            switch: SwitchId(1),
            egress_if: 4,
        }];
        let fes = build_fe_list(&hops, &ks, flow, 10).unwrap();
        let b = bootstrap_chain(flow, 10);
        let expect = fe_mac(ks.keys(SwitchId(1)).unwrap(), 4, &b, &b);
        assert_eq!(fes.len(), 1);
        assert_eq!(fes[0].mac, expect.0);
    }

    #[test]
    fn unknown_switch_is_a_provisioning_error() {
        let ks = Keystore::new();
        let hops = [PathHop {
            switch: SwitchId(3),
            egress_if: 1,
        }];
        assert_eq!(
            build_fe_list(&hops, &ks, FlowId::new(1).unwrap(), 1),
            Err(CryptoError::UnprovisionedSwitch(SwitchId(3)))
        );
    }

    #[test]
    fn pvf_differs_across_sequence_numbers() {
        let keys = patterned_keys(0, 0x30);
        let flow = FlowId::new(11).unwrap();
        let a = pvf_init(&keys, &PvfTweak::for_flow(flow, 1));
        let b = pvf_init(&keys, &PvfTweak::for_flow(flow, 2));
        assert_ne!(a, b);
    }

    #[test]
    fn single_segment_equals_plain_chain() {
        let mut ks = Keystore::new();
        for (i, base) in [(0u16, 0x30u8), (1, 0x40), (2, 0x50)] {
            ks.insert(patterned_keys(i, base));
        }
        let flow = FlowId::new(5).unwrap();
        let tweak = PvfTweak::for_flow(flow, 9);
        let mut pvf = pvf_init(ks.keys(SwitchId(0)).unwrap(), &tweak);
        for id in [SwitchId(1), SwitchId(2)] {
            pvf = pvf_step(ks.keys(id).unwrap(), &pvf, &tweak);
        }
        let seg = PathSegment {
            switches: vec![SwitchId(0), SwitchId(1), SwitchId(2)],
            tweak,
        };
        assert_eq!(expected_pvf(&[seg], &ks).unwrap(), pvf);
    }

    #[test]
    fn segment_boundary_switches_tweak() {
        let mut ks = Keystore::new();
        for (i, base) in [(0u16, 0x30u8), (1, 0x40), (2, 0x50), (3, 0x60)] {
            ks.insert(patterned_keys(i, base));
        }
        let flow_tweak = PvfTweak::for_flow(FlowId::new(5).unwrap(), 9);
        let fo_tweak = PvfTweak::for_flow(FlowId::new(MAX_ID_24).unwrap(), 9);
        let segs = [
            PathSegment {
                switches: vec![SwitchId(0), SwitchId(1)],
                tweak: flow_tweak,
            },
            PathSegment {
                switches: vec![SwitchId(2), SwitchId(3)],
                tweak: fo_tweak,
            },
        ];
        let mut pvf = pvf_init(ks.keys(SwitchId(0)).unwrap(), &flow_tweak);
        pvf = pvf_step(ks.keys(SwitchId(1)).unwrap(), &pvf, &flow_tweak);
        pvf = pvf_step(ks.keys(SwitchId(2)).unwrap(), &pvf, &fo_tweak);
        pvf = pvf_step(ks.keys(SwitchId(3)).unwrap(), &pvf, &fo_tweak);
        assert_eq!(expected_pvf(&segs, &ks).unwrap(), pvf);

        // An empty leading segment contributes nothing; the first switch of
        // the next segment boots the chain under its own tweak.
        let segs = [
            PathSegment {
                switches: vec![],
                tweak: flow_tweak,
            },
            PathSegment {
                switches: vec![SwitchId(0), SwitchId(1)],
                tweak: fo_tweak,
            },
        ];
        let mut pvf = pvf_init(ks.keys(SwitchId(0)).unwrap(), &fo_tweak);
        pvf = pvf_step(ks.keys(SwitchId(1)).unwrap(), &pvf, &fo_tweak);
        assert_eq!(expected_pvf(&segs, &ks).unwrap(), pvf);
    }

    #[test]
    fn provision_generates_distinct_subkeys() {
        let mut ks = Keystore::new();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for i in 0..32 {
            let keys = ks.provision(SwitchId(i), &mut rng);
            assert_ne!(keys.k_fe, keys.k_pvf);
        }
        assert_eq!(ks.len(), 32);
    }
}
