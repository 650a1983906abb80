//! The packet header on the wire: build one, encode it, walk its layout,
//! and decode it back.
//!
//! ```bash
//! cargo run -p sdnsec --example wire_format
//! ```

use sdnsec::types::{FlowId, SwitchId};
use sdnsec::wire::{
    current_flow_block_offset, decode, fe_slot_offset, overhead_bytes, FlowInfoBlock,
    ForwardingEntry, Header, HeaderFixed, Pvf, SdnsecHeader,
};

fn main() {
    let header = SdnsecHeader {
        fixed: HeaderFixed {
            do_not_detour: false,
            lfc: 0,
            fe_ptr: 0,
            exp_time: 1_700_000_000,
        },
        flow_blocks: vec![FlowInfoBlock {
            flow_id: FlowId::new(0x00_00_2A).unwrap(),
            seq_no: 1,
            egress_id: SwitchId(3),
        }],
        pvf: Pvf([0xAA; 8]),
        fes: vec![
            ForwardingEntry {
                egress_if: 2,
                mac: [0x11; 7],
            },
            ForwardingEntry {
                egress_if: 1,
                mac: [0x22; 7],
            },
        ],
    };

    let bytes = header.encode().expect("valid header");
    println!("encoded ({} bytes): {}", bytes.len(), hex::encode(&bytes));
    println!();
    println!("layout:");
    println!("  [0]      flags/lfc      {:02x}", bytes[0]);
    println!("  [1]      fe_ptr         {:02x}", bytes[1]);
    println!("  [2..6]   exp_time       {}", hex::encode(&bytes[2..6]));
    let fb = current_flow_block_offset(0);
    println!(
        "  [{fb}..{}]  flow block     {}",
        fb + 8,
        hex::encode(&bytes[fb..fb + 8])
    );
    println!("  [14..22] pvf            {}", hex::encode(&bytes[14..22]));
    for slot in 0..header.fes.len() as u8 {
        let at = fe_slot_offset(0, slot);
        println!(
            "  [{at}..{}] fe slot {slot}      {}",
            at + 8,
            hex::encode(&bytes[at..at + 8])
        );
    }
    println!();

    // A path of n switches costs 22 + 8*(n-1) header bytes.
    for switches in [1usize, 3, 5, 10] {
        println!(
            "path of {switches:>2} switches -> {:>3}-byte header",
            overhead_bytes(switches).unwrap()
        );
    }
    println!();

    match decode(&bytes).expect("round-trips") {
        Header::Unicast(decoded) => {
            assert_eq!(decoded, header);
            println!("decode(encode(header)) == header");
        }
        Header::Multicast(_) => unreachable!(),
    }

    // Truncated input is refused, never mis-read.
    let err = decode(&bytes[..21]).unwrap_err();
    println!("decoding 21 bytes fails cleanly: {err}");
}
