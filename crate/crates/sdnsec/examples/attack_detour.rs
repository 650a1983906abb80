//! Path enforcement in action: a compromised switch redirects traffic to
//! an off-path neighbor, whose MAC verification kills every packet.
//!
//! ```bash
//! cargo run -p sdnsec --example attack_detour
//! ```

use sdnsec::simnet::{run_scenario, AdversaryBehavior, FlowSpec, Scenario, TraceEvent};
use sdnsec::topology::{SwitchRole, Topology};

fn main() {
    let mut topo = Topology::new();
    let e0 = topo.add_switch("e0", SwitchRole::Edge).unwrap();
    let c1 = topo.add_switch("c1", SwitchRole::Core).unwrap();
    let c2 = topo.add_switch("c2", SwitchRole::Core).unwrap();
    let e3 = topo.add_switch("e3", SwitchRole::Edge).unwrap();
    let v4 = topo.add_switch("v4", SwitchRole::Core).unwrap();
    topo.add_link(e0, c1).unwrap();
    topo.add_link(c1, c2).unwrap();
    topo.add_link(c2, e3).unwrap();
    topo.add_link(c1, v4).unwrap(); // the off-path link the attacker uses
    let h0 = topo.attach_host("h0", e0).unwrap();
    let h1 = topo.attach_host("h1", e3).unwrap();

    let mut scenario = Scenario::new(topo);
    scenario.flows.push(FlowSpec::new(h0, h1, 5));
    scenario
        .attach_adversary(c1, AdversaryBehavior::Detour { via: v4 })
        .unwrap();

    let out = run_scenario(&scenario).expect("valid scenario");
    println!(
        "compromised c1 redirects via v4: delivered {}/{}",
        out.delivered, out.injected
    );
    for record in &out.trace.records {
        if let TraceEvent::Drop { reason, packet } = &record.event {
            println!(
                "t={:>2}ms {} dropped uid {}: {reason:?}",
                record.time_ms, record.switch, packet.uid
            );
        }
    }
    println!();
    println!("v4 holds no entry keyed for itself, so the forwarding chain");
    println!("breaks at the first honest switch off the authorized path.");
}
