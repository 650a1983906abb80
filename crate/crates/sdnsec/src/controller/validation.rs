//! Path validation: recompute the expected PVF for reported headers,
//! analyze sequence-number repetition, and reconcile per-switch packet
//! counters.

use serde::{Deserialize, Serialize};

use crate::crypto::{expected_pvf, PathSegment, PvfTweak};
use crate::types::{FlowId, SwitchId};
use crate::wire::{self, Header};

use super::{Controller, ControllerError, FlowRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictOutcome {
    Valid,
    PvfMismatch,
    ReplaySuspected,
    CounterInconsistent,
}

/// What the analysis could localize, if anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictDetail {
    None,
    UnknownPathId(u32),
    /// The deviation happened somewhere on this expected switch sequence.
    SuspectSwitches(Vec<SwitchId>),
    /// Packets vanish between these two adjacent switches; the exact
    /// culprit cannot be narrowed further.
    SuspectLink(SwitchId, SwitchId),
    /// A switch whose own report contradicts its neighbors.
    DishonestSwitch(SwitchId),
    /// Sequence numbers repeating beyond the replay threshold, with counts.
    RepeatedSeqNos(Vec<(u32, u32)>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationVerdict {
    pub outcome: VerdictOutcome,
    pub detail: VerdictDetail,
    pub evidence: String,
}

impl ValidationVerdict {
    pub fn valid() -> Self {
        ValidationVerdict {
            outcome: VerdictOutcome::Valid,
            detail: VerdictDetail::None,
            evidence: String::new(),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.outcome == VerdictOutcome::Valid
    }

    fn mismatch(detail: VerdictDetail, evidence: impl Into<String>) -> Self {
        ValidationVerdict {
            outcome: VerdictOutcome::PvfMismatch,
            detail,
            evidence: evidence.into(),
        }
    }
}

/// Flags a flow whose recent reports repeat some sequence number more than
/// `threshold` times. Under normal operation a value appears at most a few
/// times even across counter wraparound.
pub fn detect_pvf_replay(record: &FlowRecord, threshold: u32) -> ValidationVerdict {
    let repeated = record.seq_window.over_threshold(threshold);
    if repeated.is_empty() {
        return ValidationVerdict::valid();
    }
    let evidence = format!(
        "{} sequence number(s) repeated more than {threshold} times in the last {} reports",
        repeated.len(),
        record.seq_window.len(),
    );
    ValidationVerdict {
        outcome: VerdictOutcome::ReplaySuspected,
        detail: VerdictDetail::RepeatedSeqNos(repeated),
        evidence,
    }
}

/// Reconciles per-switch packet counts for one flow. `reports` must cover a
/// contiguous stretch of `path`, in path order.
pub fn reconcile_counters(
    reports: &[(SwitchId, u64)],
    path: &[SwitchId],
) -> Result<ValidationVerdict, ControllerError> {
    if reports.is_empty() {
        return Ok(ValidationVerdict::valid());
    }
    let start = path
        .iter()
        .position(|&sw| sw == reports[0].0)
        .ok_or(ControllerError::NonContiguousReports)?;
    let contiguous = reports
        .iter()
        .enumerate()
        .all(|(i, (sw, _))| path.get(start + i) == Some(sw));
    if !contiguous {
        return Err(ControllerError::NonContiguousReports);
    }

    let counts: Vec<u64> = reports.iter().map(|(_, c)| *c).collect();
    if counts.windows(2).all(|w| w[0] == w[1]) {
        return Ok(ValidationVerdict::valid());
    }

    // A single low count with equal neighbors contradicts conservation:
    // the switch undercounted, not the traffic.
    for i in 1..counts.len().saturating_sub(1) {
        if counts[i] < counts[i - 1] && counts[i + 1] == counts[i - 1] {
            return Ok(ValidationVerdict {
                outcome: VerdictOutcome::CounterInconsistent,
                detail: VerdictDetail::DishonestSwitch(reports[i].0),
                evidence: format!(
                    "{} reported {} packets while both neighbors saw {}",
                    reports[i].0,
                    counts[i],
                    counts[i - 1]
                ),
            });
        }
    }

    // Otherwise localize the first boundary where the count changes. A
    // decreasing step means packets vanished on that link; the culprit
    // switch cannot be singled out.
    let i = counts
        .windows(2)
        .position(|w| w[0] != w[1])
        .expect("counts differ somewhere");
    let (up, down) = (reports[i].0, reports[i + 1].0);
    let evidence = if counts[i + 1] < counts[i] {
        format!(
            "count falls from {} to {} between {} and {}",
            counts[i],
            counts[i + 1],
            up,
            down
        )
    } else {
        format!(
            "count rises from {} to {} between {} and {}",
            counts[i],
            counts[i + 1],
            up,
            down
        )
    };
    Ok(ValidationVerdict {
        outcome: VerdictOutcome::CounterInconsistent,
        detail: VerdictDetail::SuspectLink(up, down),
        evidence,
    })
}

/// Inputs of the back-of-the-envelope validation overhead model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationOverheadParams {
    pub hosts: u64,
    pub access_gbps: f64,
    /// Fraction of access capacity in use, each direction (0.01 = 1%).
    pub utilization: f64,
    pub mean_packet_bytes: f64,
    /// Switches per path; each validation recomputes one MAC per switch.
    pub path_len: u32,
    /// Bytes reported per packet (path identifier, sequence number, PVF).
    pub report_bytes: u32,
}

impl Default for ValidationOverheadParams {
    fn default() -> Self {
        ValidationOverheadParams {
            hosts: 80_000,
            access_gbps: 10.0,
            utilization: 0.01,
            mean_packet_bytes: 850.0,
            path_len: 5,
            report_bytes: 14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationOverheadReport {
    /// Aggregate packet rate the egress switches report, packets/s.
    pub packet_rate_pps: f64,
    /// Total traffic the hosts offer, bits/s.
    pub traffic_bps: f64,
    /// Report traffic toward the controller, bits/s.
    pub report_bandwidth_bps: f64,
    /// Report bandwidth as a fraction of total traffic.
    pub report_ratio: f64,
    /// MAC recomputations per second the validator must sustain.
    pub pvc_mac_rate: f64,
}

/// Estimates the cost of having every egress switch report every packet
/// header: aggregate packet rate, report bandwidth, and its share of the
/// total traffic.
pub fn estimate_validation_overhead(p: &ValidationOverheadParams) -> ValidationOverheadReport {
    let traffic_bps = p.hosts as f64 * p.access_gbps * 1e9 * p.utilization;
    let packet_rate_pps = traffic_bps / (p.mean_packet_bytes * 8.0);
    let report_bandwidth_bps = packet_rate_pps * p.report_bytes as f64 * 8.0;
    let report_ratio = if traffic_bps > 0.0 {
        report_bandwidth_bps / traffic_bps
    } else {
        0.0
    };
    ValidationOverheadReport {
        packet_rate_pps,
        traffic_bps,
        report_bandwidth_bps,
        report_ratio,
        pvc_mac_rate: packet_rate_pps * p.path_len as f64,
    }
}

impl Controller {
    /// Validates a reported packet header: reconstructs the switch sequence
    /// the packet should have traversed (original path prefix plus each
    /// failover detour, in link-failure order), recomputes the PVF over it,
    /// and compares with the reported value. The report's sequence number
    /// feeds the flow's replay window.
    pub fn validate_header(
        &mut self,
        header_bytes: &[u8],
        reporting_switch: SwitchId,
    ) -> ValidationVerdict {
        let header = match wire::decode(header_bytes) {
            Ok(h) => h,
            Err(e) => {
                return ValidationVerdict::mismatch(
                    VerdictDetail::None,
                    format!("unparseable report: {e}"),
                )
            }
        };
        match header {
            Header::Unicast(h) => self.validate_unicast(&h, reporting_switch),
            Header::Multicast(h) => self.validate_multicast(&h, reporting_switch),
        }
    }

    fn validate_unicast(
        &mut self,
        header: &wire::SdnsecHeader,
        reporting_switch: SwitchId,
    ) -> ValidationVerdict {
        let origin = header.flow_blocks[0];
        let Some(record) = self.records.get(&origin.flow_id) else {
            return ValidationVerdict::mismatch(
                VerdictDetail::UnknownPathId(origin.flow_id.as_u32()),
                format!("unknown path id {}", origin.flow_id),
            );
        };

        let mut segments: Vec<PathSegment> = Vec::with_capacity(header.flow_blocks.len());
        let mut current: Vec<SwitchId> = record.path.switches();
        let mut tweak = PvfTweak::for_flow(origin.flow_id, origin.seq_no);
        for block in &header.flow_blocks[1..] {
            let Some(failover) = self.failover_records.get(&block.flow_id) else {
                return ValidationVerdict::mismatch(
                    VerdictDetail::UnknownPathId(block.flow_id.as_u32()),
                    format!("unknown path id {}", block.flow_id),
                );
            };
            let Some(pos) = current.iter().position(|&sw| sw == failover.head) else {
                return ValidationVerdict::mismatch(
                    VerdictDetail::SuspectSwitches(current.clone()),
                    format!(
                        "failover {} heads at {}, which is not on the expected segment",
                        block.flow_id, failover.head
                    ),
                );
            };
            segments.push(PathSegment {
                switches: current[..pos].to_vec(),
                tweak,
            });
            current = failover.path.switches();
            tweak = PvfTweak::for_flow(block.flow_id, block.seq_no);
        }
        segments.push(PathSegment {
            switches: current,
            tweak,
        });

        let expected = match expected_pvf(&segments, &self.keystore) {
            Ok(pvf) => pvf,
            Err(e) => {
                return ValidationVerdict::mismatch(
                    VerdictDetail::None,
                    format!("cannot recompute PVF: {e}"),
                )
            }
        };

        let record = self.records.get_mut(&origin.flow_id).expect("checked");
        record.seq_window.record(origin.seq_no);

        if expected == header.pvf {
            return ValidationVerdict::valid();
        }
        let suspects: Vec<SwitchId> = segments.iter().flat_map(|s| s.switches.clone()).collect();
        ValidationVerdict::mismatch(
            VerdictDetail::SuspectSwitches(suspects),
            format!(
                "PVF {} reported by {} does not match expected {}",
                header.pvf.to_hex(),
                reporting_switch,
                expected.to_hex()
            ),
        )
    }

    fn validate_multicast(
        &mut self,
        header: &wire::MulticastHeader,
        reporting_switch: SwitchId,
    ) -> ValidationVerdict {
        let Some(record) = self.trees.get(&header.tree_id) else {
            return ValidationVerdict::mismatch(
                VerdictDetail::UnknownPathId(header.tree_id.as_u32()),
                format!("unknown path id {}", header.tree_id),
            );
        };
        let Some(path) = record.path_to(reporting_switch) else {
            return ValidationVerdict::mismatch(
                VerdictDetail::SuspectSwitches(vec![reporting_switch]),
                format!("{reporting_switch} is not on {}", header.tree_id),
            );
        };
        let segment = PathSegment {
            switches: path,
            tweak: PvfTweak::for_tree(header.tree_id, header.seq_no),
        };
        let expected = match expected_pvf(std::slice::from_ref(&segment), &self.keystore) {
            Ok(pvf) => pvf,
            Err(e) => {
                return ValidationVerdict::mismatch(
                    VerdictDetail::None,
                    format!("cannot recompute PVF: {e}"),
                )
            }
        };
        if expected == header.pvf {
            ValidationVerdict::valid()
        } else {
            ValidationVerdict::mismatch(
                VerdictDetail::SuspectSwitches(segment.switches),
                format!(
                    "multicast PVF {} reported by {} does not match expected {}",
                    header.pvf.to_hex(),
                    reporting_switch,
                    expected.to_hex()
                ),
            )
        }
    }

    /// Replay analysis for one flow's report window.
    pub fn replay_verdict(&self, flow_id: FlowId) -> Result<ValidationVerdict, ControllerError> {
        let record = self
            .records
            .get(&flow_id)
            .ok_or(ControllerError::UnknownFlow(flow_id))?;
        Ok(detect_pvf_replay(record, self.config.replay_threshold))
    }

    /// Counter reconciliation for one flow. Reports are reordered along the
    /// recorded path before analysis.
    pub fn reconcile_flow_counters(
        &self,
        flow_id: FlowId,
        reports: &[(SwitchId, u64)],
    ) -> Result<ValidationVerdict, ControllerError> {
        let record = self
            .records
            .get(&flow_id)
            .ok_or(ControllerError::UnknownFlow(flow_id))?;
        let path = record.path.switches();
        let mut ordered: Vec<(usize, SwitchId, u64)> = Vec::with_capacity(reports.len());
        for &(sw, count) in reports {
            let pos = path
                .iter()
                .position(|&p| p == sw)
                .ok_or(ControllerError::NonContiguousReports)?;
            ordered.push((pos, sw, count));
        }
        ordered.sort_by_key(|&(pos, ..)| pos);
        let ordered: Vec<(SwitchId, u64)> = ordered.into_iter().map(|(_, sw, c)| (sw, c)).collect();
        reconcile_counters(&ordered, &path)
    }
}
