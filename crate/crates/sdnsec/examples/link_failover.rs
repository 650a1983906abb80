//! Link failure in the middle of a flow: the detecting switch splices in
//! its pre-computed detour, the packet grows a second flow-info block, and
//! the controller still validates the full journey.
//!
//! ```bash
//! cargo run -p sdnsec --example link_failover
//! ```

use sdnsec::simnet::{
    collect_reports, run_scenario, validate_trace, FlowSpec, Scenario, TraceEvent,
};
use sdnsec::topology::{SwitchRole, Topology};
use sdnsec::wire::{self, Header};

fn main() {
    // A diamond: two disjoint routes between the edges.
    let mut topo = Topology::new();
    let e0 = topo.add_switch("e0", SwitchRole::Edge).unwrap();
    let c1 = topo.add_switch("c1", SwitchRole::Core).unwrap();
    let c2 = topo.add_switch("c2", SwitchRole::Core).unwrap();
    let e3 = topo.add_switch("e3", SwitchRole::Edge).unwrap();
    topo.add_link(e0, c1).unwrap();
    topo.add_link(e0, c2).unwrap();
    topo.add_link(c1, e3).unwrap();
    topo.add_link(c2, e3).unwrap();
    let h0 = topo.attach_host("h0", e0).unwrap();
    let h1 = topo.attach_host("h1", e3).unwrap();

    let mut scenario = Scenario::new(topo);
    scenario.flows.push(FlowSpec {
        gap_ms: 2,
        ..FlowSpec::new(h0, h1, 8)
    });
    // The link carrying the flow dies mid-run.
    scenario.fail_link(7, c1, e3).unwrap();

    let out = run_scenario(&scenario).expect("valid scenario");
    println!("delivered {}/{} packets", out.delivered, out.injected);

    for record in &out.trace.records {
        if let TraceEvent::Rewrite {
            failover_path_id,
            lfc,
            uid,
        } = record.event
        {
            println!(
                "t={:>2}ms {} rewrote uid {uid}: detour path {failover_path_id:#08x}, failure count {lfc}",
                record.time_ms, record.switch
            );
        }
    }

    println!();
    println!("reported headers after delivery:");
    for report in collect_reports(&out.trace).headers {
        let Header::Unicast(h) = wire::decode(&report.header).unwrap() else {
            continue;
        };
        println!(
            "  uid-order seq {:>2}: lfc {} blocks {:?}",
            h.flow_blocks[0].seq_no,
            h.fixed.lfc,
            h.flow_blocks
                .iter()
                .map(|b| b.flow_id.as_u32())
                .collect::<Vec<_>>()
        );
    }

    println!();
    let mut controller = out.controller;
    let verdicts = validate_trace(&mut controller, &out.trace);
    let valid = verdicts.iter().filter(|(_, v)| v.is_valid()).count();
    println!(
        "controller validated {valid}/{} reports (detoured ones included)",
        verdicts.len()
    );
}
