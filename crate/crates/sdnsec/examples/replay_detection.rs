//! Replay detection: a switch that stamps stale sequence numbers and PVFs
//! onto fresh packets produces individually valid reports — and a glaring
//! repetition pattern the controller flags.
//!
//! ```bash
//! cargo run -p sdnsec --example replay_detection
//! ```

use sdnsec::simnet::{run_scenario, validate_trace, AdversaryBehavior, FlowSpec, Scenario};
use sdnsec::topology::{SwitchRole, Topology};

fn main() {
    let mut topo = Topology::new();
    let e0 = topo.add_switch("e0", SwitchRole::Edge).unwrap();
    let c1 = topo.add_switch("c1", SwitchRole::Core).unwrap();
    let c2 = topo.add_switch("c2", SwitchRole::Core).unwrap();
    let e3 = topo.add_switch("e3", SwitchRole::Edge).unwrap();
    topo.add_link(e0, c1).unwrap();
    topo.add_link(c1, c2).unwrap();
    topo.add_link(c2, e3).unwrap();
    let h0 = topo.attach_host("h0", e0).unwrap();
    let h1 = topo.attach_host("h1", e3).unwrap();

    let mut scenario = Scenario::new(topo);
    scenario.flows.push(FlowSpec::new(h0, h1, 25));
    // c1 captures the first packet's sequence number and path-validation
    // field and stamps them onto everything after it.
    scenario
        .attach_adversary(c1, AdversaryBehavior::PvfReplay { source_packet: 1 })
        .unwrap();

    let out = run_scenario(&scenario).expect("valid scenario");
    let mut controller = out.controller;
    let verdicts = validate_trace(&mut controller, &out.trace);
    let valid = verdicts.iter().filter(|(_, v)| v.is_valid()).count();
    println!(
        "{valid}/{} reports validate in isolation — the forgery is self-consistent",
        verdicts.len()
    );

    let flow_id = controller.flow_records().next().unwrap().flow_id;
    let verdict = controller.replay_verdict(flow_id).unwrap();
    println!();
    println!("flow-level replay analysis: {:?}", verdict.outcome);
    println!("  {}", verdict.evidence);
}
