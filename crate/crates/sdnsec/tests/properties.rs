//! Property tests: codec round-trips, layout coherence, and sensitivity of
//! the MAC chains to every input bit.

use proptest::prelude::*;

use sdnsec::crypto::{build_fe_list, Keystore, MacKey, PathHop, SwitchKeys};
use sdnsec::types::{FlowId, SwitchId, MAX_ID_24};
use sdnsec::wire::{
    self, decode, fe_slot_offset, overhead_bytes, FlowInfoBlock, ForwardingEntry, Header,
    HeaderFixed, Pvf, SdnsecHeader,
};

fn arb_flow_block() -> impl Strategy<Value = FlowInfoBlock> {
    (0..=MAX_ID_24, 0..=MAX_ID_24, any::<u16>()).prop_map(|(id, seq, egress)| FlowInfoBlock {
        flow_id: FlowId::new(id).unwrap(),
        seq_no: seq,
        egress_id: SwitchId(egress),
    })
}

fn arb_fe() -> impl Strategy<Value = ForwardingEntry> {
    (any::<u8>(), any::<[u8; 7]>()).prop_map(|(egress_if, mac)| ForwardingEntry { egress_if, mac })
}

prop_compose! {
    fn arb_header()(lfc in 0u8..=63)(
        lfc in Just(lfc),
        do_not_detour in any::<bool>(),
        exp_time in any::<u32>(),
        blocks in prop::collection::vec(arb_flow_block(), lfc as usize + 1),
        pvf in any::<[u8; 8]>(),
        fes in prop::collection::vec(arb_fe(), 0..32),
        ptr_seed in any::<prop::sample::Index>(),
    ) -> SdnsecHeader {
        let fe_ptr = if fes.is_empty() { 0 } else { ptr_seed.index(fes.len() + 1) as u8 };
        SdnsecHeader {
            fixed: HeaderFixed { do_not_detour, lfc, fe_ptr, exp_time },
            flow_blocks: blocks,
            pvf: Pvf(pvf),
            fes,
        }
    }
}

proptest! {
    /// decode . encode is the identity on every valid header.
    #[test]
    fn round_trip(header in arb_header()) {
        let bytes = header.encode().unwrap();
        prop_assert_eq!(decode(&bytes).unwrap(), Header::Unicast(header));
    }

    /// The byte range of entry i in the encoding is exactly the slot the
    /// offset formula names.
    #[test]
    fn offset_coherence(header in arb_header()) {
        let bytes = header.encode().unwrap();
        for (i, fe) in header.fes.iter().enumerate() {
            let at = fe_slot_offset(header.fixed.lfc, i as u8);
            prop_assert_eq!(bytes[at], fe.egress_if);
            prop_assert_eq!(&bytes[at + 1..at + 8], &fe.mac);
        }
        // The newest flow block starts where the formula says.
        let at = wire::current_flow_block_offset(header.fixed.lfc);
        let newest = header.flow_blocks.last().unwrap();
        prop_assert_eq!(
            u32::from_be_bytes([0, bytes[at], bytes[at + 1], bytes[at + 2]]),
            newest.flow_id.as_u32()
        );
    }

    /// A fresh header for an n-switch path weighs exactly the modeled
    /// overhead.
    #[test]
    fn overhead_matches_encoding(n in 1usize..=32, block in arb_flow_block()) {
        let header = SdnsecHeader {
            fixed: HeaderFixed { do_not_detour: false, lfc: 0, fe_ptr: 0, exp_time: 1 },
            flow_blocks: vec![block],
            pvf: Pvf([0; 8]),
            fes: vec![ForwardingEntry { egress_if: 1, mac: [0; 7] }; n - 1],
        };
        prop_assert_eq!(header.encode().unwrap().len(), overhead_bytes(n).unwrap());
    }

    /// Arbitrary bytes never panic the decoder; they parse or they return
    /// a structured error.
    #[test]
    fn decode_total(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode(&bytes);
    }

    /// Any flipped bit anywhere in the chain inputs moves the terminal
    /// chain value (collisions would be ~2^-56 accidents).
    #[test]
    fn chain_sensitivity(
        keys in prop::collection::vec(any::<[u8; 16]>(), 1..5),
        egress in prop::collection::vec(any::<u8>(), 1..5),
        flow in 0..=MAX_ID_24,
        exp_time in any::<u32>(),
        flip_bit in any::<prop::sample::Index>(),
    ) {
        let hops = keys.len().min(egress.len());
        let mut keystore = Keystore::new();
        let mut path = Vec::new();
        for i in 0..hops {
            keystore.insert(SwitchKeys {
                switch_id: SwitchId(i as u16),
                k_fe: MacKey(keys[i]),
                k_pvf: MacKey([0xAA; 16]),
            });
            path.push(PathHop { switch: SwitchId(i as u16), egress_if: egress[i] });
        }
        let flow_id = FlowId::new(flow).unwrap();
        let base = build_fe_list(&path, &keystore, flow_id, exp_time).unwrap();

        // Flip one bit of one mutable input: an egress interface, the flow
        // id, or the expiry.
        let mutable_bits = hops * 8 + 24 + 32;
        let bit = flip_bit.index(mutable_bits);
        let (mut path2, mut flow2, mut exp2) = (path.clone(), flow, exp_time);
        if bit < hops * 8 {
            path2[bit / 8].egress_if ^= 1 << (bit % 8);
        } else if bit < hops * 8 + 24 {
            flow2 ^= 1 << (bit - hops * 8);
        } else {
            exp2 ^= 1 << (bit - hops * 8 - 24);
        }
        let mutated = build_fe_list(&path2, &keystore, FlowId::new(flow2).unwrap(), exp2).unwrap();
        prop_assert_ne!(base.last().unwrap().mac, mutated.last().unwrap().mac);
    }
}
