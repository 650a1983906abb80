#![forbid(unsafe_code)]

//! Source-routed SDN data plane with cryptographically enforced
//! forwarding, controller-side path validation, link-failure failover, and
//! consistent multicast — together with a deterministic discrete-event
//! simulator and adversary harness for exercising all of it.
//!
//! The pieces:
//!
//! - [`wire`]: the packet header formats, bit-exact, with the offset and
//!   overhead arithmetic (see `WIRE-FORMAT.md`).
//! - [`crypto`]: truncated single-block MACs and the forwarding-entry /
//!   path-validation chains.
//! - [`topology`]: switches, links, hosts, deterministic shortest paths.
//! - [`controller`]: path computation and provisioning, failover
//!   pre-computation, two-phase multicast trees, and the validation side
//!   (PVF recomputation, replay analysis, counter reconciliation).
//! - [`switch`]: the ingress/core/egress state machines.
//! - [`simnet`]: the event loop, scenarios, adversaries, and traces.
//! - [`scenario`]: the on-disk scenario file format.
//! - [`report`]: table/CSV report rendering for the command-line tool.
//!
//! Each major capability has a runnable example under `examples/`; the
//! `sdnsec` binary wraps scenario runs and the analytical reports.

pub mod cli;
pub mod controller;
pub mod crypto;
pub mod report;
pub mod scenario;
pub mod simnet;
pub mod switch;
pub mod topology;
pub mod types;
pub mod wire;
