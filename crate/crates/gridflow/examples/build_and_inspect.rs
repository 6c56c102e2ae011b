//! Build a small network from declarative specs, walk the layer system,
//! and see what validation and island analysis report.
//!
//!     cargo run --example build_and_inspect

use gridflow::loadflow::{solve_newton_raphson, LoadflowConfig};
use gridflow::model::{build_network, BranchSpec, BusKind, BusSpec, Layer, NetworkSpec};
use gridflow::topology::find_islands;

fn main() -> gridflow::Result<()> {
    // Declarative construction: only what differs from a plain PQ bus or a
    // plain line needs to be spelled out.
    let spec = NetworkSpec {
        id: "demo".into(),
        buses: vec![
            BusSpec {
                kind: BusKind::Slack,
                v_mag: 1.02,
                ..BusSpec::new("north")
            },
            BusSpec {
                kind: BusKind::PV,
                v_mag: 1.01,
                gen_p: 0.6,
                ..BusSpec::new("plant")
            },
            BusSpec {
                load_p: 0.9,
                load_q: 0.25,
                ..BusSpec::new("city")
            },
            // An out-of-service bus: present in the data, absent electrically.
            BusSpec {
                in_service: false,
                ..BusSpec::new("mothballed")
            },
        ],
        branches: vec![
            BranchSpec::line("north", "plant", 0.08),
            BranchSpec {
                r: 0.01,
                b_total: 0.02,
                ..BranchSpec::line("north", "city", 0.06)
            },
            BranchSpec::line("plant", "city", 0.07),
            BranchSpec::line("city", "mothballed", 0.05),
        ],
        ..NetworkSpec::default()
    };

    let net = build_network(&spec)?;
    println!("built {:?}: {} buses, {} branches, layer {}", net.id, net.buses.len(), net.branches.len(), net.layer);

    // The model starts at the topology layer: connectivity analysis works,
    // numerical analysis is refused until the model is promoted.
    let islands = find_islands(&net);
    println!("\nislands ({} energized):", islands.energized_count());
    for island in &islands.islands {
        println!(
            "  {:?} energized={}",
            island.buses, island.energized
        );
    }

    let mut too_low = net.clone();
    match solve_newton_raphson(&mut too_low, &LoadflowConfig::default()) {
        Err(e) => println!("\nloadflow on a topology-layer model is refused:\n  {e}"),
        Ok(_) => unreachable!("layer gate should refuse this"),
    }

    // Promotion re-validates and never forgets lower-layer data.
    let mut net = net.extend_layer(Layer::AcLoadflow)?;
    let result = solve_newton_raphson(&mut net, &LoadflowConfig::default())?;
    println!(
        "\nafter extend_layer({}): converged={} in {} iterations",
        net.layer, result.converged, result.iterations
    );
    for bus in &result.buses {
        println!(
            "  {:<10} |V| = {:.4} pu  angle = {:7.3} deg",
            bus.bus,
            bus.v_mag,
            bus.v_ang.to_degrees()
        );
    }

    // Validation catches inconsistent data at build time.
    let mut broken = spec.clone();
    broken.branches.push(BranchSpec::line("city", "nowhere", 0.1));
    match build_network(&broken) {
        Err(e) => println!("\na dangling endpoint is rejected at build time:\n  {e}"),
        Ok(_) => unreachable!("validation should refuse this"),
    }
    Ok(())
}
