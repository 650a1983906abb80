//! The path validation field, hop by hop: bootstrap at the ingress, one
//! step per switch, tweak switch at a detour boundary, and the
//! controller-side recomputation that audits it all.
//!
//! ```bash
//! cargo run -p sdnsec --example path_validation
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use sdnsec::crypto::{expected_pvf, pvf_init, pvf_step, Keystore, PathSegment, PvfTweak};
use sdnsec::types::{FlowId, SwitchId};

fn main() {
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let mut keystore = Keystore::new();
    for id in 0..4u16 {
        keystore.provision(SwitchId(id), &mut rng);
    }

    let flow = FlowId::new(0x000203).unwrap();
    let detour = FlowId::new(0xFFFFF0).unwrap();
    let seq_no = 17;
    let flow_tweak = PvfTweak::for_flow(flow, seq_no);
    let detour_tweak = PvfTweak::for_flow(detour, seq_no);

    // The packet crosses sw0 and sw1 on its original path, then sw1's
    // outgoing link dies and the journey continues on a detour through
    // sw2 to sw3 — all under the detour's tweak.
    println!("per-switch chain:");
    let mut pvf = pvf_init(keystore.keys(SwitchId(0)).unwrap(), &flow_tweak);
    println!("  sw0 (ingress, flow tweak):    {}", pvf.to_hex());
    pvf = pvf_step(keystore.keys(SwitchId(1)).unwrap(), &pvf, &detour_tweak);
    println!("  sw1 (detects, detour tweak):  {}", pvf.to_hex());
    pvf = pvf_step(keystore.keys(SwitchId(2)).unwrap(), &pvf, &detour_tweak);
    println!("  sw2 (detour, detour tweak):   {}", pvf.to_hex());
    pvf = pvf_step(keystore.keys(SwitchId(3)).unwrap(), &pvf, &detour_tweak);
    println!("  sw3 (egress, detour tweak):   {}", pvf.to_hex());

    // Controller side: reconstruct the same journey from its records. The
    // detecting switch belongs to the detour segment.
    let segments = [
        PathSegment {
            switches: vec![SwitchId(0)],
            tweak: flow_tweak,
        },
        PathSegment {
            switches: vec![SwitchId(1), SwitchId(2), SwitchId(3)],
            tweak: detour_tweak,
        },
    ];
    let expected = expected_pvf(&segments, &keystore).unwrap();
    println!();
    println!("controller recomputation:       {}", expected.to_hex());
    assert_eq!(expected, pvf);
    println!("reported and expected values agree -> the path was followed");

    // A packet that skipped sw2 tells a different story.
    let skipped = [
        PathSegment {
            switches: vec![SwitchId(0)],
            tweak: flow_tweak,
        },
        PathSegment {
            switches: vec![SwitchId(1), SwitchId(3)],
            tweak: detour_tweak,
        },
    ];
    let forged = expected_pvf(&skipped, &keystore).unwrap();
    assert_ne!(forged, expected);
    println!(
        "a journey missing sw2 yields    {} -> flagged",
        forged.to_hex()
    );
}
