//! N-1 contingency screening of the IEEE 30-bus case with line-outage
//! distribution factors: every single-branch outage is evaluated against
//! one shared DC base solve instead of one full re-solve per outage.
//!
//!     cargo run --example contingency_screen

use gridflow::cdf::read_cdf;
use gridflow::contingency::{all_branch_outages, compute_lodf, dc_power_flow, run_n1};
use std::path::Path;

fn main() -> gridflow::Result<()> {
    let case = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/ieee30.cdf");
    let net = read_cdf(&case)?.network;

    let base = dc_power_flow(&net)?;
    let heaviest = base
        .flows
        .iter()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .unwrap();
    println!(
        "base case: {} branches, heaviest DC flow {:.1} MW on {}",
        base.flows.len(),
        heaviest.1.abs() * net.base_mva,
        heaviest.0
    );

    // How one outage redistributes flow: the distribution factors say how
    // much of the dropped branch's flow lands on each survivor.
    let lodf = compute_lodf(&net, &heaviest.0)?;
    let mut factors: Vec<_> = lodf.factors.iter().collect();
    factors.sort_by(|a, b| b.1.abs().partial_cmp(&a.1.abs()).unwrap());
    println!("\nif {} drops, its flow redistributes mostly onto:", heaviest.0);
    for (branch, factor) in factors.iter().take(5) {
        println!("  {:<8} picks up {:>6.1}% of the lost flow", branch, *factor * 100.0);
    }

    // Full screen, one spec per in-service branch.
    let specs = all_branch_outages(&net);
    let rows = run_n1(&net, &specs, 1)?;

    let mut islanding = Vec::new();
    let mut worst: Option<(String, String, f64)> = None;
    for (spec, row) in specs.iter().zip(&rows) {
        let ca = row.as_ref().expect("all outages screen cleanly here");
        if ca.islanding {
            islanding.push(spec.outaged_branch.clone());
            continue;
        }
        for (branch, flow) in &ca.post_flows {
            let loading = flow.abs();
            if worst.as_ref().map_or(true, |(_, _, w)| loading > *w) {
                worst = Some((spec.outaged_branch.clone(), branch.clone(), loading));
            }
        }
    }

    println!("\nscreened {} outages:", specs.len());
    println!("  islanding outages (radial taps): {islanding:?}");
    if let Some((outage, branch, flow)) = worst {
        println!(
            "  worst post-outage loading: losing {outage} pushes {branch} to {:.1} MW",
            flow * net.base_mva
        );
    }
    Ok(())
}
