use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use sdnsec::cli;
use sdnsec::controller::ValidationOverheadParams;
use sdnsec::report::ReportFormat;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Table => ReportFormat::Table,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

/// Scenario runner and report tool for the source-routed secure data
/// plane.
#[derive(Debug, Parser)]
#[command(name = "sdnsec", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file and validate everything it reported.
    Run {
        /// Scenario description (TOML).
        scenario: PathBuf,
        /// Output directory for the trace and reports.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the scenario's random seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Print header overhead for path lengths and packet sizes.
    Overhead {
        /// Path lengths in switches, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        switches: Option<Vec<usize>>,
        /// Packet sizes in bytes, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        packet_sizes: Option<Vec<usize>>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Estimate the controller-side cost of validating all reports.
    Estimate {
        #[arg(long, default_value_t = 80_000)]
        hosts: u64,
        #[arg(long, default_value_t = 10.0)]
        access_gbps: f64,
        /// Fraction of access capacity in use (0.01 = 1%).
        #[arg(long, default_value_t = 0.01)]
        utilization: f64,
        #[arg(long, default_value_t = 850.0)]
        mean_packet_bytes: f64,
        #[arg(long, default_value_t = 5)]
        path_len: u32,
        #[arg(long, default_value_t = 14)]
        report_bytes: u32,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Re-validate the header reports in a previously written trace.
    Validate {
        /// Scenario that produced the trace.
        scenario: PathBuf,
        /// Trace file (JSON lines).
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

fn main() {
    let args = Cli::parse();
    let code = match args.command {
        Command::Run {
            scenario,
            out,
            seed,
            format,
        } => cli::cmd_run(&scenario, &out, seed, format.into()),
        Command::Overhead {
            switches,
            packet_sizes,
            format,
        } => {
            let switches = switches.unwrap_or_else(|| cli::DEFAULT_SWITCH_COUNTS.to_vec());
            let sizes = packet_sizes.unwrap_or_else(|| cli::DEFAULT_PACKET_SIZES.to_vec());
            cli::cmd_overhead(&switches, &sizes, format.into())
        }
        Command::Estimate {
            hosts,
            access_gbps,
            utilization,
            mean_packet_bytes,
            path_len,
            report_bytes,
            format,
        } => cli::cmd_estimate(
            &ValidationOverheadParams {
                hosts,
                access_gbps,
                utilization,
                mean_packet_bytes,
                path_len,
                report_bytes,
            },
            format.into(),
        ),
        Command::Validate {
            scenario,
            trace,
            format,
        } => cli::cmd_validate(&scenario, &trace, format.into()),
    };
    std::process::exit(code);
}
