//! Report rendering: the packet-overhead table, the validation-overhead
//! estimate, and post-run verdict summaries, as fixed-width text or CSV.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::controller::{
    estimate_validation_overhead, ValidationOverheadParams, ValidationVerdict, VerdictOutcome,
};
use crate::simnet::{collect_reports, validate_trace, SimOutput, TraceEvent};
use crate::types::FlowId;
use crate::wire::{overhead_bytes, WireError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
}

/// Header overhead as a share of the packet size, rounded to 0.1%.
pub fn overhead_percent(path_switches: usize, packet_bytes: usize) -> Result<f64, WireError> {
    let overhead = overhead_bytes(path_switches)? as f64;
    let percent = overhead * 100.0 / packet_bytes as f64;
    Ok((percent * 10.0).round() / 10.0)
}

/// Overhead percentages for every (path length, packet size) combination.
pub fn overhead_report(
    switch_counts: &[usize],
    packet_sizes: &[usize],
    format: ReportFormat,
) -> Result<String, WireError> {
    match format {
        ReportFormat::Csv => {
            let mut out = String::from("switches,packet_bytes,overhead_bytes,percent\n");
            for &n in switch_counts {
                for &size in packet_sizes {
                    out.push_str(&format!(
                        "{n},{size},{},{:.1}\n",
                        overhead_bytes(n)?,
                        overhead_percent(n, size)?
                    ));
                }
            }
            Ok(out)
        }
        ReportFormat::Table => {
            let mut out = String::from("Header overhead by path length and packet size\n\n");
            out.push_str(&format!("{:>10} {:>6}", "switches", "bytes"));
            for &size in packet_sizes {
                out.push_str(&format!(" {:>7}", format!("{size}B")));
            }
            out.push('\n');
            for &n in switch_counts {
                out.push_str(&format!("{:>10} {:>6}", n, overhead_bytes(n)?));
                for &size in packet_sizes {
                    out.push_str(&format!(" {:>6.1}%", overhead_percent(n, size)?));
                }
                out.push('\n');
            }
            Ok(out)
        }
    }
}

/// Renders the validation-overhead estimate.
pub fn estimate_report(params: &ValidationOverheadParams, format: ReportFormat) -> String {
    let estimate = estimate_validation_overhead(params);
    let mpps = (estimate.packet_rate_pps / 1e6).round();
    let rows: Vec<(&str, String)> = vec![
        ("hosts", params.hosts.to_string()),
        ("access_gbps", format!("{}", params.access_gbps)),
        ("utilization", format!("{}", params.utilization)),
        ("mean_packet_bytes", format!("{}", params.mean_packet_bytes)),
        ("path_len", params.path_len.to_string()),
        ("report_bytes", params.report_bytes.to_string()),
        ("packet_rate_mpps", format!("{mpps}")),
        (
            "total_traffic_gbps",
            format!("{:.1}", estimate.traffic_bps / 1e9),
        ),
        (
            "report_bandwidth_gbps",
            format!("{:.1}", estimate.report_bandwidth_bps / 1e9),
        ),
        (
            "report_traffic_percent",
            format!("{:.1}", estimate.report_ratio * 100.0),
        ),
        (
            "pvc_mac_rate_mps",
            format!("{:.0}", estimate.pvc_mac_rate / 1e6),
        ),
    ];
    match format {
        ReportFormat::Csv => {
            let mut out = String::from("metric,value\n");
            for (k, v) in rows {
                out.push_str(&format!("{k},{v}\n"));
            }
            out
        }
        ReportFormat::Table => {
            let mut out = String::from("Path validation overhead estimate\n\n");
            for (k, v) in rows {
                out.push_str(&format!("{k:<24} {v}\n"));
            }
            out
        }
    }
}

/// One validated header report.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictRow {
    pub switch: String,
    pub uid: u64,
    pub verdict: ValidationVerdict,
}

/// Per-flow offline analyses.
#[derive(Debug, Clone, Serialize)]
pub struct FlowAnalysis {
    pub flow_id: u32,
    pub replay: ValidationVerdict,
    pub counters: Option<ValidationVerdict>,
}

/// Everything `run` reports about a finished scenario.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub injected: u64,
    pub delivered: u64,
    pub drops_by_reason: BTreeMap<String, u64>,
    pub rewrites: u64,
    pub header_verdicts: Vec<VerdictRow>,
    pub flow_analyses: Vec<FlowAnalysis>,
    pub counter_rows: Vec<(String, u32, u64)>,
}

impl RunReport {
    /// The run-level pass criterion: every report validated, every flow
    /// analysis clean, and not a single packet dropped by a switch.
    pub fn honest_checks_pass(&self) -> bool {
        self.drops_by_reason.is_empty()
            && self.header_verdicts.iter().all(|v| v.verdict.is_valid())
            && self
                .flow_analyses
                .iter()
                .all(|f| f.replay.is_valid() && f.counters.as_ref().is_none_or(|c| c.is_valid()))
    }
}

/// Validates a finished run: every header report, per-flow replay
/// analysis, and counter reconciliation where counters were collected.
pub fn analyze_run(output: &mut SimOutput) -> RunReport {
    let mut drops_by_reason: BTreeMap<String, u64> = BTreeMap::new();
    let mut rewrites = 0;
    for record in &output.trace.records {
        match &record.event {
            TraceEvent::Drop { reason, .. } => {
                let key = serde_json::to_string(reason)
                    .expect("reason serializes")
                    .trim_matches('"')
                    .to_string();
                *drops_by_reason.entry(key).or_insert(0) += 1;
            }
            TraceEvent::Rewrite { .. } => rewrites += 1,
            _ => {}
        }
    }

    let header_verdicts: Vec<VerdictRow> = validate_trace(&mut output.controller, &output.trace)
        .into_iter()
        .map(|(report, verdict)| VerdictRow {
            switch: report.switch,
            uid: report.uid,
            verdict,
        })
        .collect();

    // Group collected counters by flow and reconcile along each path.
    let inputs = collect_reports(&output.trace);
    let mut counters_by_flow: BTreeMap<u32, Vec<(String, u64)>> = BTreeMap::new();
    for counter in &inputs.counters {
        counters_by_flow
            .entry(counter.flow_id)
            .or_default()
            .push((counter.switch.clone(), counter.count));
    }

    let mut flow_analyses = Vec::new();
    let flow_ids: Vec<FlowId> = output
        .controller
        .flow_records()
        .map(|r| r.flow_id)
        .collect();
    for flow_id in flow_ids {
        let replay = output
            .controller
            .replay_verdict(flow_id)
            .expect("record exists");
        let counters = counters_by_flow.get(&flow_id.as_u32()).map(|rows| {
            let resolved: Vec<_> = rows
                .iter()
                .filter_map(|(name, count)| {
                    output
                        .controller
                        .topology
                        .switch_by_name(name)
                        .ok()
                        .map(|id| (id, *count))
                })
                .collect();
            output
                .controller
                .reconcile_flow_counters(flow_id, &resolved)
                .unwrap_or_else(|e| ValidationVerdict {
                    outcome: VerdictOutcome::CounterInconsistent,
                    detail: crate::controller::VerdictDetail::None,
                    evidence: format!("reconciliation failed: {e}"),
                })
        });
        // Flows without any reports have nothing to analyze but keeping the
        // row makes the report exhaustive.
        flow_analyses.push(FlowAnalysis {
            flow_id: flow_id.as_u32(),
            replay,
            counters,
        });
    }

    let counter_rows = inputs
        .counters
        .iter()
        .map(|c| (c.switch.clone(), c.flow_id, c.count))
        .collect();

    RunReport {
        injected: output.injected,
        delivered: output.delivered,
        drops_by_reason,
        rewrites,
        header_verdicts,
        flow_analyses,
        counter_rows,
    }
}

fn outcome_name(outcome: VerdictOutcome) -> &'static str {
    match outcome {
        VerdictOutcome::Valid => "valid",
        VerdictOutcome::PvfMismatch => "pvf_mismatch",
        VerdictOutcome::ReplaySuspected => "replay_suspected",
        VerdictOutcome::CounterInconsistent => "counter_inconsistent",
    }
}

pub fn render_run_report(report: &RunReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = String::from("section,key,value\n");
            out.push_str(&format!("summary,injected,{}\n", report.injected));
            out.push_str(&format!("summary,delivered,{}\n", report.delivered));
            out.push_str(&format!("summary,rewrites,{}\n", report.rewrites));
            for (reason, count) in &report.drops_by_reason {
                out.push_str(&format!("drops,{reason},{count}\n"));
            }
            for row in &report.header_verdicts {
                out.push_str(&format!(
                    "report_verdict,{}:{},{}\n",
                    row.switch,
                    row.uid,
                    outcome_name(row.verdict.outcome)
                ));
            }
            for analysis in &report.flow_analyses {
                out.push_str(&format!(
                    "flow_replay,{},{}\n",
                    analysis.flow_id,
                    outcome_name(analysis.replay.outcome)
                ));
                if let Some(counters) = &analysis.counters {
                    out.push_str(&format!(
                        "flow_counters,{},{}\n",
                        analysis.flow_id,
                        outcome_name(counters.outcome)
                    ));
                }
            }
            for (switch, flow_id, count) in &report.counter_rows {
                out.push_str(&format!("counter,{switch}:{flow_id},{count}\n"));
            }
            out.push_str(&format!(
                "summary,honest_checks,{}\n",
                if report.honest_checks_pass() {
                    "pass"
                } else {
                    "fail"
                }
            ));
            out
        }
        ReportFormat::Table => {
            let mut out = String::new();
            out.push_str(&format!("packets injected        {}\n", report.injected));
            out.push_str(&format!("packets delivered       {}\n", report.delivered));
            out.push_str(&format!("failover rewrites       {}\n", report.rewrites));
            if report.drops_by_reason.is_empty() {
                out.push_str("drops                   none\n");
            } else {
                for (reason, count) in &report.drops_by_reason {
                    out.push_str(&format!("drops: {reason:<22} {count}\n"));
                }
            }
            let valid = report
                .header_verdicts
                .iter()
                .filter(|v| v.verdict.is_valid())
                .count();
            out.push_str(&format!(
                "header reports          {} ({} valid, {} suspect)\n",
                report.header_verdicts.len(),
                valid,
                report.header_verdicts.len() - valid
            ));
            for row in report
                .header_verdicts
                .iter()
                .filter(|v| !v.verdict.is_valid())
            {
                out.push_str(&format!(
                    "  suspect: uid {} at {} -> {} ({})\n",
                    row.uid,
                    row.switch,
                    outcome_name(row.verdict.outcome),
                    row.verdict.evidence
                ));
            }
            for analysis in &report.flow_analyses {
                if !analysis.replay.is_valid() {
                    out.push_str(&format!(
                        "  flow {:#08x}: replay suspected ({})\n",
                        analysis.flow_id, analysis.replay.evidence
                    ));
                }
                if let Some(counters) = &analysis.counters {
                    if !counters.is_valid() {
                        out.push_str(&format!(
                            "  flow {:#08x}: counters inconsistent ({})\n",
                            analysis.flow_id, counters.evidence
                        ));
                    }
                }
            }
            if !report.counter_rows.is_empty() {
                out.push_str("per-switch counters:\n");
                for (switch, flow_id, count) in &report.counter_rows {
                    out.push_str(&format!("  {switch:<8} flow {flow_id:#08x}  {count}\n"));
                }
            }
            out.push_str(&format!(
                "honest-run checks       {}\n",
                if report.honest_checks_pass() {
                    "PASS"
                } else {
                    "FAIL"
                }
            ));
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_center_table_values() {
        // Leaf-spine diameter (3 switches) and 3-tier diameter (5).
        assert_eq!(overhead_percent(3, 200).unwrap(), 19.0);
        assert_eq!(overhead_percent(3, 850).unwrap(), 4.5);
        assert_eq!(overhead_percent(3, 1400).unwrap(), 2.7);
        assert_eq!(overhead_percent(5, 200).unwrap(), 27.0);
        assert_eq!(overhead_percent(5, 850).unwrap(), 6.4);
        assert_eq!(overhead_percent(5, 1400).unwrap(), 3.9);
    }

    #[test]
    fn research_network_table_values() {
        // Average path (6 switches) and diameter (10) against the packet
        // sizes of three captured traces.
        assert_eq!(overhead_percent(6, 747).unwrap(), 8.3);
        assert_eq!(overhead_percent(10, 747).unwrap(), 12.6);
        assert_eq!(overhead_percent(6, 463).unwrap(), 13.4);
        assert_eq!(overhead_percent(10, 463).unwrap(), 20.3);
        assert_eq!(overhead_percent(6, 906).unwrap(), 6.8);
        assert_eq!(overhead_percent(10, 906).unwrap(), 10.4);
        assert_eq!(overhead_percent(6, 1420).unwrap(), 4.4);
        assert_eq!(overhead_percent(10, 1420).unwrap(), 6.6);
        assert_eq!(overhead_percent(6, 691).unwrap(), 9.0);
        assert_eq!(overhead_percent(6, 262).unwrap(), 23.7);
        assert_eq!(overhead_percent(10, 262).unwrap(), 35.9);
        // 94/691 computes to 13.6%.
        assert_eq!(overhead_percent(10, 691).unwrap(), 13.6);
    }

    #[test]
    fn reports_are_deterministic() {
        let a = overhead_report(&[3, 5], &[200, 850], ReportFormat::Table).unwrap();
        let b = overhead_report(&[3, 5], &[200, 850], ReportFormat::Table).unwrap();
        assert_eq!(a, b);
        let csv = overhead_report(&[3], &[200], ReportFormat::Csv).unwrap();
        assert!(csv.contains("3,200,38,19.0"));
    }

    #[test]
    fn estimate_formats() {
        let table = estimate_report(&ValidationOverheadParams::default(), ReportFormat::Table);
        assert!(table.contains("packet_rate_mpps         1176"));
        assert!(table.contains("report_traffic_percent   1.6"));
        let csv = estimate_report(&ValidationOverheadParams::default(), ReportFormat::Csv);
        assert!(csv.contains("packet_rate_mpps,1176"));
    }
}
