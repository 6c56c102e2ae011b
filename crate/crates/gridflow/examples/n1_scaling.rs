//! Contingency-screening throughput as the worker count grows, on a
//! generated case large enough for timing to mean something.
//!
//! Results are bit-identical at every worker count: work is split into
//! contiguous chunks whose outputs land in the request's slots, so the
//! parallelism never reorders or perturbs the numbers. Speedup, in
//! contrast, is honest physics — it needs actual CPU cores.
//!
//!     cargo run --release --example n1_scaling

use gridflow::contingency::{all_branch_outages, run_n1};
use gridflow::synthetic::synthetic_case;
use std::time::Instant;

fn main() -> gridflow::Result<()> {
    let buses = 1200;
    let net = synthetic_case(buses, 7)?;
    let specs = all_branch_outages(&net);
    println!(
        "case {}: {} buses, {} branches, {} outages to screen",
        net.id,
        net.buses.len(),
        net.branches.len(),
        specs.len()
    );
    println!(
        "host reports {} core(s) available\n",
        std::thread::available_parallelism().map_or(1, |n| n.get())
    );

    let mut reference: Option<Vec<(bool, usize)>> = None;
    let mut base_time = 0.0;
    for workers in [1usize, 2, 4, 8] {
        let t0 = Instant::now();
        let rows = run_n1(&net, &specs, workers)?;
        let secs = t0.elapsed().as_secs_f64();

        // Reduce each result to a comparable signature to show the output
        // really is identical whatever the worker count.
        let signature: Vec<(bool, usize)> = rows
            .iter()
            .map(|r| {
                let ca = r.as_ref().expect("synthetic outages all screen");
                (ca.islanding, ca.violations.len())
            })
            .collect();
        let identical = match &reference {
            None => {
                base_time = secs;
                reference = Some(signature);
                true
            }
            Some(reference) => *reference == signature,
        };

        println!(
            "workers = {workers}: {:>6.0} outages/s  ({secs:.3} s total, speedup {:.2}x, results identical: {identical})",
            specs.len() as f64 / secs,
            base_time / secs,
        );
    }
    Ok(())
}
