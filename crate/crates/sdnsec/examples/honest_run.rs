//! A complete honest run: inject a flow across a small fabric, watch every
//! hop in the trace, and let the controller validate the reported headers.
//!
//! ```bash
//! cargo run -p sdnsec --example honest_run
//! ```

use sdnsec::simnet::{run_scenario, validate_trace, FlowSpec, Scenario, TraceEvent};
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
    scenario.seed = 7;
    scenario.flows.push(FlowSpec::new(h0, h1, 3));

    let out = run_scenario(&scenario).expect("valid scenario");
    println!(
        "injected {} packets, delivered {}",
        out.injected, out.delivered
    );
    println!();
    for record in &out.trace.records {
        match &record.event {
            TraceEvent::Forward { to, packet, .. } => println!(
                "t={:>3}ms {:<3} forwards uid {} to {:<3} ({} header bytes)",
                record.time_ms,
                record.switch,
                packet.uid,
                to,
                packet.header_hex.len() / 2
            ),
            TraceEvent::Deliver { to, uid, .. } => println!(
                "t={:>3}ms {:<3} delivers uid {} to {:<3} (header stripped)",
                record.time_ms, record.switch, uid, to
            ),
            TraceEvent::Report { packet } => println!(
                "t={:>3}ms {:<3} reports uid {} to the controller",
                record.time_ms, record.switch, packet.uid
            ),
            other => println!("t={:>3}ms {:<3} {other:?}", record.time_ms, record.switch),
        }
    }

    println!();
    let mut controller = out.controller;
    for (report, verdict) in validate_trace(&mut controller, &out.trace) {
        println!(
            "validation of uid {} from {}: {:?}",
            report.uid, report.switch, verdict.outcome
        );
    }
}
