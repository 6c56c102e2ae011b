//! Balanced three-phase fault currents on the IEEE 14-bus case: solve a
//! loadflow for the pre-fault state, then probe bolted and impedance
//! faults at several buses.
//!
//!     cargo run --example fault_currents

use gridflow::cdf::read_cdf;
use gridflow::fault::bus_fault_current;
use gridflow::loadflow::{solve_newton_raphson, LoadflowConfig};
use gridflow::model::Layer;
use num_complex::Complex64;
use std::path::Path;

fn main() -> gridflow::Result<()> {
    let case = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/ieee14.cdf");
    // Fault analysis needs the short-circuit layer; the CDF loader stops at
    // the loadflow layer, so promote explicitly.
    let mut net = read_cdf(&case)?.network.extend_layer(Layer::AcShortCircuit)?;

    // Use the solved operating point as the pre-fault voltage profile.
    let lf = solve_newton_raphson(&mut net, &LoadflowConfig::default())?;
    assert!(lf.converged);

    // The slack bus itself cannot be faulted — it stands in for the rest of
    // the interconnection as an ideal source — so probe the network around it.
    println!("bolted faults (z_fault = 0):");
    println!(
        "  {:<5} {:>12} {:>14} {:>12}",
        "bus", "|I_f| pu", "Z_th pu", "|V| at bus 2"
    );
    for bus in ["4", "9", "13", "14"] {
        let fault = bus_fault_current(&net, bus, Complex64::new(0.0, 0.0))?;
        let v2 = fault
            .post_voltages
            .iter()
            .find(|(id, _)| id == "2")
            .map(|(_, v)| v.norm())
            .unwrap();
        println!(
            "  {:<5} {:>12.3} {:>6.4}+j{:<6.4} {:>12.4}",
            bus,
            fault.current.norm(),
            fault.z_thevenin.re,
            fault.z_thevenin.im,
            v2
        );
    }

    // A fault through impedance draws less current and sags voltages less.
    println!("\nfault at bus 9 through increasing impedance:");
    for zf in [0.0, 0.05, 0.10, 0.20] {
        let fault = bus_fault_current(&net, "9", Complex64::new(0.0, zf))?;
        let (_, v9) = fault
            .post_voltages
            .iter()
            .find(|(id, _)| id == "9")
            .unwrap();
        println!(
            "  z_f = j{zf:<5.2} |I_f| = {:>7.3} pu   |V_9| during fault = {:.4} pu",
            fault.current.norm(),
            v9.norm()
        );
    }
    Ok(())
}
