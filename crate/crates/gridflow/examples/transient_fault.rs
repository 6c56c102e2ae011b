//! Classical transient stability: a machine against a stiff grid rides
//! through a short fault, then the same fault left uncleared drives it out
//! of step. Integration is trapezoidal on the swing equation with the
//! network solved at every step.
//!
//!     cargo run --example transient_fault

use gridflow::dynamics::{run_dynamics, DynConfig, DynEvent, DynEventKind, GeneratorClassical};
use gridflow::loadflow::{solve_newton_raphson, LoadflowConfig};
use gridflow::model::{build_network, BranchSpec, BusKind, BusSpec, Layer, NetworkModel, NetworkSpec};

fn machine_grid() -> gridflow::Result<NetworkModel> {
    build_network(&NetworkSpec {
        id: "one-machine".into(),
        buses: vec![
            BusSpec {
                kind: BusKind::Slack,
                v_mag: 1.0,
                ..BusSpec::new("grid")
            },
            BusSpec {
                kind: BusKind::PV,
                v_mag: 1.03,
                gen_p: 0.9,
                ..BusSpec::new("plant")
            },
            BusSpec {
                load_p: 0.3,
                load_q: 0.1,
                ..BusSpec::new("mid")
            },
        ],
        branches: vec![
            // Double circuit from the plant plus a parallel path via a load.
            BranchSpec {
                id: "plant-grid-1".into(),
                ..BranchSpec::line("plant", "grid", 0.25)
            },
            BranchSpec {
                id: "plant-grid-2".into(),
                ..BranchSpec::line("plant", "grid", 0.25)
            },
            BranchSpec::line("plant", "mid", 0.15),
            BranchSpec::line("mid", "grid", 0.15),
        ],
        ..NetworkSpec::default()
    })?
    .extend_layer(Layer::Dynamics)
}

/// A bolted fault at the plant's terminal bus: while it is on, the machine
/// can push almost no electrical power into the network, so the full
/// mechanical input accelerates the rotor.
fn fault_sequence(clear_after: Option<f64>) -> Vec<DynEvent> {
    let mut events = vec![DynEvent {
        time: 1.0,
        kind: DynEventKind::ApplyBusFault,
        target: "plant".into(),
        z_fault: 0.0,
    }];
    if let Some(dt) = clear_after {
        events.push(DynEvent {
            time: 1.0 + dt,
            kind: DynEventKind::ClearBusFault,
            target: "plant".into(),
            z_fault: 0.0,
        });
    }
    events
}

fn main() -> gridflow::Result<()> {
    let mut net = machine_grid()?;
    // Dynamics integrate away from a solved operating point, so establish
    // one first; the machine's EMF, angle, and mechanical power are then
    // back-computed from its bus's solved dispatch.
    let lf = solve_newton_raphson(&mut net, &LoadflowConfig::default())?;
    assert!(lf.converged);
    let machine = GeneratorClassical::new("plant", 3.5, 2.0, 0.3);
    let config = DynConfig {
        dt: 0.005,
        t_end: 5.0,
        ..DynConfig::default()
    };

    // The fault cleared after 90 ms: inside the critical clearing time.
    let cleared = run_dynamics(&net, &[machine.clone()], &fault_sequence(Some(0.09)), &config)?;
    let swing = &cleared.generators[0];
    let delta0 = swing.delta[0];
    let peak = swing
        .delta
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let last = *swing.delta.last().unwrap();
    println!("fault at t = 1.0 s, cleared at t = 1.09 s:");
    println!("  initial rotor angle {: >7.2} deg", delta0.to_degrees());
    println!("  peak swing          {: >7.2} deg", peak.to_degrees());
    println!("  angle at t_end      {: >7.2} deg", last.to_degrees());
    println!("  stable = {} (separation: {:?})", cleared.stable, cleared.first_separation);

    // The same fault never cleared: the machine accelerates past the point
    // of no return and separates from the grid.
    let uncleared = run_dynamics(&net, &[machine], &fault_sequence(None), &config)?;
    println!("\nsame fault, never cleared:");
    println!(
        "  stable = {}, machines separated at t = {:.3} s",
        uncleared.stable,
        uncleared.first_separation.unwrap()
    );

    // A coarse ASCII strip chart of the cleared case's swing.
    println!("\ncleared-case rotor angle (one '.' per 100 ms):");
    let stride = (0.1 / config.dt) as usize;
    let lo = swing.delta.iter().cloned().fold(f64::INFINITY, f64::min);
    for (i, d) in swing.delta.iter().step_by(stride).enumerate() {
        let t = i as f64 * 0.1;
        let pos = ((d - lo) / (peak - lo) * 60.0) as usize;
        println!("  t={t:>4.1}s |{}*", " ".repeat(pos));
    }
    Ok(())
}
