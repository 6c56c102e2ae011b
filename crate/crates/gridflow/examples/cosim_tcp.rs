//! The transmission–distribution powerflow exchange over real sockets.
//!
//! One thread per feeder acts as a remote participant process speaking the
//! length-prefixed JSON wire protocol over loopback TCP; the main thread
//! coordinates. The punchline: the socket run reproduces the in-process
//! boundary-exchange trace bit for bit — the transport changes nothing.
//!
//!     cargo run --example cosim_tcp

use std::net::TcpListener;
use std::thread;

use gridflow::cosim::{run_coordinator_on, run_participant, tnd_powerflow, CoSimConfig};
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
                load_p: 0.25,
                load_q: 0.08,
                ..BusSpec::new("T3")
            },
        ],
        branches: vec![
            BranchSpec {
                r: 0.01,
                ..BranchSpec::line("T1", "T2", 0.06)
            },
            BranchSpec {
                r: 0.02,
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

fn feeder(id: &str, load_p: f64) -> gridflow::Result<NetworkModel> {
    build_network(&NetworkSpec {
        id: id.into(),
        buses: vec![
            BusSpec {
                kind: BusKind::Slack,
                ..BusSpec::new("F1")
            },
            BusSpec {
                load_p,
                load_q: load_p * 0.3,
                ..BusSpec::new("F2")
            },
            BusSpec {
                load_p: load_p / 2.0,
                load_q: load_p * 0.1,
                ..BusSpec::new("F3")
            },
        ],
        branches: vec![
            BranchSpec {
                r: 0.03,
                ..BranchSpec::line("F1", "F2", 0.12)
            },
            BranchSpec {
                r: 0.04,
                ..BranchSpec::line("F2", "F3", 0.15)
            },
        ],
        ..NetworkSpec::default()
    })?
    .extend_layer(Layer::AcLoadflow)
}

fn main() -> gridflow::Result<()> {
    let mut net = transmission()?;
    net.attach_child("T2", feeder("west", 0.10)?, "F1")?;
    net.attach_child("T3", feeder("south", 0.14)?, "F1")?;
    let config = CoSimConfig::default();

    // Reference: everything in one process.
    let mut local = net.clone();
    let in_process = tnd_powerflow(&mut local, &config)?;
    println!(
        "in-process exchange: converged = {}, {} rounds, {} boundary messages",
        in_process.converged,
        in_process.rounds,
        in_process.exchanges.len()
    );

    // Same study over TCP: the coordinator listens on an ephemeral loopback
    // port; each feeder runs as a participant on its own thread, connecting
    // like a separate process would.
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?.to_string();
    println!("\ncoordinator listening on {addr}");

    let mut handles = Vec::new();
    for link in &net.child_links {
        let mut child = link.child.clone();
        let boundary = link.child_boundary_bus.clone();
        let addr = addr.clone();
        let config = config.clone();
        handles.push(thread::spawn(move || {
            let rounds = run_participant(&mut child, &boundary, &addr, &config)?;
            Ok::<_, gridflow::Error>((child.id.clone(), rounds))
        }));
    }

    let mut coordinated = net.clone();
    let over_tcp = run_coordinator_on(listener, &mut coordinated, &config)?;
    for handle in handles {
        let (id, rounds) = handle.join().expect("participant thread")?;
        println!("participant {id:<6} served {rounds} rounds");
    }
    println!(
        "tcp exchange:        converged = {}, {} rounds, {} boundary messages",
        over_tcp.converged,
        over_tcp.rounds,
        over_tcp.exchanges.len()
    );

    // The traces are not merely close — they are the same bytes.
    let a = serde_json::to_string_pretty(&in_process.exchanges).expect("serialize");
    let b = serde_json::to_string_pretty(&over_tcp.exchanges).expect("serialize");
    println!(
        "\nexchange traces identical across transports: {}",
        if a == b { "yes (bit for bit)" } else { "NO" }
    );

    for x in over_tcp.exchanges.iter().take(4) {
        println!(
            "  round {} {:<6} at {}: |V| = {:.6} pu, P = {:+.3} MW, Q = {:+.3} Mvar",
            x.round, x.child, x.parent_bus, x.v_mag, x.p_mw, x.q_mvar
        );
    }
    Ok(())
}
