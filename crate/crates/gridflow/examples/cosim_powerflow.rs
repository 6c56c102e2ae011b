//! Transmission-distribution co-simulation of a steady state: the parent
//! grid and each feeder keep their own models and solvers, meeting only at
//! the boundary buses. Each round the parent sends a feeder its boundary
//! voltage; the feeder solves and reports the power it draws; the parent
//! re-solves with those draws as loads — until nothing moves.
//!
//!     cargo run --example cosim_powerflow

use gridflow::cosim::{flatten_hierarchy, tnd_powerflow, CoSimConfig};
use gridflow::loadflow::{solve_newton_raphson, LoadflowConfig};
use gridflow::model::{build_network, BranchSpec, BusKind, BusSpec, Layer, NetworkModel, NetworkSpec};

fn transmission() -> gridflow::Result<NetworkModel> {
    build_network(&NetworkSpec {
        id: "grid".into(),
        buses: vec![
            BusSpec {
                kind: BusKind::Slack,
                v_mag: 1.02,
                ..BusSpec::new("T1")
            },
            BusSpec {
                kind: BusKind::PV,
                v_mag: 1.01,
                gen_p: 0.5,
                ..BusSpec::new("T2")
            },
            BusSpec {
                load_p: 0.2,
                load_q: 0.05,
                ..BusSpec::new("T3")
            },
        ],
        branches: vec![
            BranchSpec {
                r: 0.01,
                ..BranchSpec::line("T1", "T2", 0.08)
            },
            BranchSpec {
                r: 0.02,
                b_total: 0.04,
                ..BranchSpec::line("T1", "T3", 0.09)
            },
            BranchSpec {
                r: 0.015,
                ..BranchSpec::line("T2", "T3", 0.07)
            },
        ],
        ..NetworkSpec::default()
    })?
    .extend_layer(Layer::AcLoadflow)
}

/// A radial feeder: slack head (the boundary), a trunk, and two laterals.
fn feeder(id: &str, trunk_load: f64) -> gridflow::Result<NetworkModel> {
    build_network(&NetworkSpec {
        id: id.into(),
        buses: vec![
            BusSpec {
                kind: BusKind::Slack,
                ..BusSpec::new("head")
            },
            BusSpec {
                load_p: trunk_load,
                load_q: trunk_load * 0.3,
                ..BusSpec::new("trunk")
            },
            BusSpec {
                load_p: 0.03,
                load_q: 0.008,
                ..BusSpec::new("lat-a")
            },
            BusSpec {
                load_p: 0.02,
                load_q: 0.006,
                ..BusSpec::new("lat-b")
            },
        ],
        branches: vec![
            BranchSpec {
                r: 0.03,
                ..BranchSpec::line("head", "trunk", 0.10)
            },
            BranchSpec {
                r: 0.05,
                ..BranchSpec::line("trunk", "lat-a", 0.12)
            },
            BranchSpec {
                r: 0.05,
                ..BranchSpec::line("trunk", "lat-b", 0.12)
            },
        ],
        ..NetworkSpec::default()
    })?
    .extend_layer(Layer::AcLoadflow)
}

fn main() -> gridflow::Result<()> {
    let mut net = transmission()?;
    net.attach_child("T2", feeder("west", 0.06)?, "head")?;
    net.attach_child("T3", feeder("south", 0.09)?, "head")?;
    net.attach_child("T3", feeder("east", 0.04)?, "head")?;
    println!(
        "hierarchy: {} with {} feeders\n",
        net.id,
        net.child_links.len()
    );

    let report = tnd_powerflow(&mut net, &CoSimConfig::default())?;
    println!(
        "boundary exchange settled: {} after {} rounds (movement {:.2e})",
        report.converged, report.rounds, report.boundary_mismatch
    );

    println!("\nexchange trace (what each feeder drew at each round):");
    for x in &report.exchanges {
        println!(
            "  round {} {:<6} at {:<3} V = {:.5} pu ∠{:6.3}°  draw = {:6.3} MW {:+6.3} MVAR",
            x.round,
            x.child,
            x.parent_bus,
            x.v_mag,
            x.v_ang.to_degrees(),
            x.p_mw,
            x.q_mvar
        );
    }

    // Every network in the hierarchy now holds its part of the coupled
    // operating point.
    println!("\nsolved feeder-head voltages:");
    for link in &net.child_links {
        let head = link.child.bus(&link.child_boundary_bus).unwrap();
        println!(
            "  {:<6} head |V| = {:.5} pu (parent bus {})",
            link.child.id, head.v_mag, link.parent_bus
        );
    }

    // Cross-check: merge everything into one flat network and solve it
    // monolithically; the boundary voltages agree to solver tolerance.
    let mut flat = flatten_hierarchy(&net)?;
    let flat_result = solve_newton_raphson(&mut flat, &LoadflowConfig::default())?;
    assert!(flat_result.converged);
    println!("\nagreement with the monolithic merged solve:");
    for link in &net.child_links {
        let split = net.bus(&link.parent_bus).unwrap().v_mag;
        let merged = flat.bus(&link.parent_bus).unwrap().v_mag;
        println!(
            "  {:<3} split = {:.9}  merged = {:.9}  |Δ| = {:.2e}",
            link.parent_bus,
            split,
            merged,
            (split - merged).abs()
        );
    }
    Ok(())
}
