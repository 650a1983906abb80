//! The analytical reports: per-packet header overhead across deployment
//! shapes, and the bandwidth cost of validating every reported header.
//!
//! ```bash
//! cargo run -p sdnsec --example overhead_report
//! ```

use sdnsec::controller::ValidationOverheadParams;
use sdnsec::report::{estimate_report, overhead_report, ReportFormat};

fn main() {
    let table = overhead_report(
        &[3, 5, 6, 10],
        &[200, 262, 463, 691, 747, 850, 906, 1400, 1420],
        ReportFormat::Table,
    )
    .unwrap();
    println!("{table}");

    println!(
        "{}",
        estimate_report(&ValidationOverheadParams::default(), ReportFormat::Table)
    );
    println!("same data as CSV:");
    println!(
        "{}",
        estimate_report(&ValidationOverheadParams::default(), ReportFormat::Csv)
    );
}
