//! Newton-Raphson AC loadflow on the bundled IEEE 14-bus case.
//!
//!     cargo run --example loadflow_basic

use gridflow::cdf::read_cdf;
use gridflow::loadflow::{solve_newton_raphson, LoadflowConfig};
use std::path::Path;

fn main() -> gridflow::Result<()> {
    let case = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/ieee14.cdf");
    let mut net = read_cdf(&case)?.network;
    println!(
        "{}: {} buses, {} branches, {} MVA base",
        case.file_name().unwrap().to_string_lossy(),
        net.buses.len(),
        net.branches.len(),
        net.base_mva
    );

    let config = LoadflowConfig::default();
    let result = solve_newton_raphson(&mut net, &config)?;

    println!(
        "\nconverged = {} in {} iterations (tolerance {:.0e})",
        result.converged, result.iterations, config.tolerance
    );
    println!("mismatch per iteration (quadratic once close):");
    for (i, m) in result.mismatch_history.iter().enumerate() {
        println!("  iter {:>2}: {m:.3e}", i + 1);
    }

    println!("\nbus voltages:");
    println!("  {:<6} {:>8} {:>9} {:>9} {:>9}", "bus", "|V| pu", "angle°", "P MW", "Q MVAR");
    for bus in &result.buses {
        println!(
            "  {:<6} {:>8.4} {:>9.3} {:>9.2} {:>9.2}",
            bus.bus,
            bus.v_mag,
            bus.v_ang.to_degrees(),
            bus.p * net.base_mva,
            bus.q * net.base_mva
        );
    }

    for slack in &result.slack {
        println!(
            "\nslack {} supplies {:.2} MW + j{:.2} MVAR",
            slack.bus,
            slack.gen_p * net.base_mva,
            slack.gen_q * net.base_mva
        );
    }

    let loss_mw: f64 = result.branch_flows.iter().map(|f| f.loss().re).sum::<f64>() * net.base_mva;
    println!("series losses: {loss_mw:.2} MW");

    // The solved state is stored back on the model, so follow-up analyses
    // (fault studies, reports, exports) see the operating point.
    let v1 = net.bus("1").unwrap();
    println!("model now carries the solution: bus 1 at {:.4} pu", v1.v_mag);
    Ok(())
}
