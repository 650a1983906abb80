//! Command implementations behind the `sdnsec` binary: scenario runs,
//! overhead tables, the validation-cost estimate, and offline trace
//! validation.
//!
//! Exit codes: 0 on success, 1 when a run's checks fail, 2 on usage,
//! parse, or validation errors.

use std::path::Path;

use crate::controller::ValidationOverheadParams;
use crate::report::{
    analyze_run, estimate_report, overhead_report, render_run_report, ReportFormat,
};
use crate::scenario::ScenarioFile;
use crate::simnet::{run_scenario, validate_trace, EventTrace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Path lengths covering the analyzed data-center and research-network
/// topologies (leaf-spine and 3-tier diameters, average and diameter of
/// the research backbone).
pub const DEFAULT_SWITCH_COUNTS: [usize; 4] = [3, 5, 6, 10];
/// Packet sizes: data-center modes and mean, plus the mean/median sizes of
/// three captured backbone traces.
pub const DEFAULT_PACKET_SIZES: [usize; 9] = [200, 262, 463, 691, 747, 850, 906, 1400, 1420];

/// Runs a scenario file, writes the trace and reports under `out_dir`, and
/// prints the summary. Returns 0 only if the run's checks pass: every
/// header report validates, every flow analysis is clean, and no switch
/// dropped a packet.
pub fn cmd_run(
    scenario_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
    format: ReportFormat,
) -> i32 {
    let file = match ScenarioFile::load(scenario_path) {
        Ok(file) => file,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let mut scenario = match file.build() {
        Ok(scenario) => scenario,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if let Some(seed) = seed_override {
        scenario.seed = seed;
    }

    let mut output = match run_scenario(&scenario) {
        Ok(output) => output,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let report = analyze_run(&mut output);
    let rendered = render_run_report(&report, format);

    if let Err(e) = std::fs::create_dir_all(out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_USAGE;
    }
    let trace_path = out_dir.join("trace.jsonl");
    let report_path = out_dir.join(match format {
        ReportFormat::Table => "report.txt",
        ReportFormat::Csv => "report.csv",
    });
    let verdicts_path = out_dir.join("verdicts.json");
    let write = |path: &Path, data: &str| -> std::io::Result<()> { std::fs::write(path, data) };
    let verdicts_json =
        serde_json::to_string_pretty(&report.header_verdicts).expect("verdicts serialize");
    if let Err(e) = write(&trace_path, &output.trace.to_jsonl())
        .and_then(|_| write(&report_path, &rendered))
        .and_then(|_| write(&verdicts_path, &verdicts_json))
    {
        eprintln!("error: cannot write outputs: {e}");
        return EXIT_USAGE;
    }

    print!("{rendered}");
    println!("trace: {}", trace_path.display());
    if report.honest_checks_pass() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

/// Prints the overhead table for the given path lengths and packet sizes.
pub fn cmd_overhead(switches: &[usize], packet_sizes: &[usize], format: ReportFormat) -> i32 {
    match overhead_report(switches, packet_sizes, format) {
        Ok(table) => {
            print!("{table}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

/// Prints the validation-overhead estimate.
pub fn cmd_estimate(params: &ValidationOverheadParams, format: ReportFormat) -> i32 {
    print!("{}", estimate_report(params, format));
    EXIT_OK
}

/// Re-validates the header reports of a previously written trace against a
/// re-run of its scenario's control plane. Returns 0 only if every report
/// in the trace validates.
pub fn cmd_validate(scenario_path: &Path, trace_path: &Path, format: ReportFormat) -> i32 {
    let trace_text = match std::fs::read_to_string(trace_path) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", trace_path.display());
            return EXIT_USAGE;
        }
    };
    let trace = match EventTrace::from_jsonl(&trace_text) {
        Ok(trace) => trace,
        Err(e) => {
            eprintln!("error: malformed trace: {e}");
            return EXIT_USAGE;
        }
    };
    let scenario = match ScenarioFile::load(scenario_path).and_then(|f| f.build()) {
        Ok(scenario) => scenario,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    // Re-run the scenario to rebuild the controller's flow, failover, and
    // tree records; the deterministic seed reproduces the same state.
    let output = match run_scenario(&scenario) {
        Ok(output) => output,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let mut controller = output.controller;
    let verdicts = validate_trace(&mut controller, &trace);
    let mut all_valid = true;
    match format {
        ReportFormat::Csv => {
            println!("switch,uid,outcome,evidence");
            for (report, verdict) in &verdicts {
                if !verdict.is_valid() {
                    all_valid = false;
                }
                println!(
                    "{},{},{},{:?}",
                    report.switch,
                    report.uid,
                    if verdict.is_valid() {
                        "valid"
                    } else {
                        "suspect"
                    },
                    verdict.evidence
                );
            }
        }
        ReportFormat::Table => {
            for (report, verdict) in &verdicts {
                if !verdict.is_valid() {
                    all_valid = false;
                    println!(
                        "uid {:>6} reported by {:<8} SUSPECT: {}",
                        report.uid, report.switch, verdict.evidence
                    );
                }
            }
            println!(
                "{} report(s), {}",
                verdicts.len(),
                if all_valid {
                    "all valid"
                } else {
                    "suspect findings above"
                }
            );
        }
    }
    if all_valid {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}
