//! The forwarding-entry chain: how the controller authorizes a path and
//! how each switch verifies its own hop — and catches tampering.
//!
//! ```bash
//! cargo run -p sdnsec --example fe_chain
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use sdnsec::crypto::{bootstrap_chain, build_fe_list, verify_fe, ChainValue, Keystore, PathHop};
use sdnsec::types::{FlowId, SwitchId};

fn main() {
    // Controller side: per-switch keys and a three-hop path after the
    // ingress (two cores and the egress switch).
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let mut keystore = Keystore::new();
    for id in 0..4u16 {
        keystore.provision(SwitchId(id), &mut rng);
    }
    let path = [
        PathHop {
            switch: SwitchId(1),
            egress_if: 2,
        },
        PathHop {
            switch: SwitchId(2),
            egress_if: 3,
        },
        PathHop {
            switch: SwitchId(3),
            egress_if: 1,
        },
    ];
    let flow_id = FlowId::new(42).unwrap();
    let exp_time = 1_700_000_000;

    let fes = build_fe_list(&path, &keystore, flow_id, exp_time).expect("provisioned");
    println!(
        "bootstrap B = FlowID || ExpTime = {}",
        hex::encode(bootstrap_chain(flow_id, exp_time).0)
    );
    for (hop, fe) in path.iter().zip(&fes) {
        println!(
            "  {}: egress-if {} mac {}",
            hop.switch,
            fe.egress_if,
            hex::encode(fe.mac)
        );
    }

    // Data plane side: every switch re-computes its own entry from what
    // the packet carries — the previous entry's MAC (or the bootstrap) and
    // the flow parameters.
    let b = bootstrap_chain(flow_id, exp_time);
    let mut prev = b;
    for (hop, fe) in path.iter().zip(&fes) {
        let keys = keystore.keys(hop.switch).unwrap();
        assert!(verify_fe(keys, fe, &prev, &b));
        println!("{} verified its entry", hop.switch);
        prev = ChainValue(fe.mac);
    }

    // One flipped bit anywhere in an entry breaks the chain at the next
    // honest verifier.
    let mut tampered = fes.clone();
    tampered[1].egress_if ^= 0x04; // reroute attempt at the second hop
    let keys = keystore.keys(SwitchId(2)).unwrap();
    let prev = ChainValue(tampered[0].mac);
    assert!(!verify_fe(keys, &tampered[1], &prev, &b));
    println!("flipping one egress-interface bit -> verification fails");
}
