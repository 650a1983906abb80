//! State exhaustion hits the edge and only the edge: a malicious host
//! sprays thousands of novel flows, edge tables balloon, core tables do
//! not move, and the cores never touch a per-flow structure.
//!
//! ```bash
//! cargo run -p sdnsec --example state_exhaustion
//! ```

use sdnsec::simnet::{run_scenario, AdversaryBehavior, Scenario};
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
    let _h1 = topo.attach_host("h1", e3).unwrap();

    let mut scenario = Scenario::new(topo);
    scenario.report_headers = false;
    scenario.duration_ms = 1_000;
    scenario
        .attach_host_adversary(h0, AdversaryBehavior::FloodFlows { rate: 20_000 })
        .unwrap();

    let out = run_scenario(&scenario).expect("valid scenario");
    println!(
        "flood: {} novel flows injected, {} delivered",
        out.injected, out.delivered
    );
    println!();
    println!(
        "{:<8} {:>8} {:>8} {:>9} {:>10} {:>8}  {:>15}",
        "switch", "ingress", "egress", "failover", "multicast", "monitor", "per-flow probes"
    );
    for (name, sizes) in &out.table_sizes {
        let stats = &out.stats[name];
        println!(
            "{name:<8} {:>8} {:>8} {:>9} {:>10} {:>8}  {:>15}",
            sizes.ingress,
            sizes.egress,
            sizes.failover,
            sizes.multicast,
            sizes.monitor,
            stats.flow_table_lookups + stats.monitor_probes
        );
    }
    println!();
    println!("the cores forwarded every packet straight off its header;");
    println!("only the edges paid for the bogus flows.");
}
