//! Deterministic synthetic transmission cases.
//!
//! Real published cases stop at a few hundred buses; scaling and parallelism
//! studies need something bigger with the same texture. The generator builds
//! a ring backbone (so every backbone outage leaves the network connected),
//! adds random chords across the ring (meshing), and hangs leaf spurs off
//! random hosts (radial tails whose outage islands exactly one load bus) —
//! a mix that exercises both the non-islanding and islanding paths of
//! contingency screening.
//!
//! Generation is placed on every eighth ring bus and dispatched to cover the
//! drawn load plus a margin for losses, which keeps branch loadings moderate
//! and the case solvable from a flat start at any size.
//!
//! The same `(buses, seed)` pair always yields the identical model: the RNG
//! is a fixed-algorithm (ChaCha8) stream and every draw happens in a fixed
//! order. Cases are valid at the loadflow layer and unsolved.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{
    build_network, BranchSpec, BusKind, BusSpec, Layer, NetworkModel, NetworkSpec,
};

/// Every eighth ring bus carries a generator.
const GENERATOR_SPACING: usize = 8;
/// Dispatch covers drawn load with this margin; the slack sees the
/// difference between the margin and the true losses.
const DISPATCH_MARGIN: f64 = 1.02;

/// Build a synthetic case with exactly `buses` buses (ring plus leaf spurs,
/// one tenth of the buses are leaves). The result is deterministic in
/// `(buses, seed)`.
pub fn synthetic_case(buses: usize, seed: u64) -> Result<NetworkModel> {
    if buses < 4 {
        return Err(Error::InvalidArgument(format!(
            "a synthetic case needs at least 4 buses, got {buses}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let leaf_count = buses / 10;
    let ring_count = buses - leaf_count;
    let width = buses.to_string().len();

    // Ring buses and their loads. Bus 0 is the slack; every
    // GENERATOR_SPACING-th bus holds a voltage-controlled generator whose
    // dispatch is filled in once total load is known.
    let mut bus_specs: Vec<BusSpec> = Vec::with_capacity(buses);
    let mut generator_rows: Vec<usize> = Vec::new();
    let mut total_load = 0.0;
    for i in 0..ring_count {
        let id = format!("B{i:0width$}");
        let load_p = rng.gen_range(0.10..0.30);
        let load_q = load_p * rng.gen_range(0.20..0.35);
        total_load += load_p;
        let mut spec = BusSpec {
            load_p,
            load_q,
            ..BusSpec::new(&id)
        };
        if i == 0 {
            spec.kind = BusKind::Slack;
            spec.v_mag = 1.02;
        } else if i % GENERATOR_SPACING == 0 {
            spec.kind = BusKind::PV;
            spec.v_mag = 1.01;
            generator_rows.push(i);
        }
        bus_specs.push(spec);
    }

    let mut branch_specs: Vec<BranchSpec> = Vec::with_capacity(buses + ring_count / 5);
    for i in 0..ring_count {
        let x = rng.gen_range(0.010..0.022);
        branch_specs.push(BranchSpec {
            id: format!("L{i:0width$}"),
            from_bus: bus_specs[i].id.clone(),
            to_bus: bus_specs[(i + 1) % ring_count].id.clone(),
            x,
            r: x / 10.0,
            b_total: 0.004,
            rating: 1.5,
            ..BranchSpec::default()
        });
    }

    // Chords: distinct non-adjacent ring pairs. Draws that hit an already
    // used pair are retried; the retry sequence is part of the fixed stream.
    let chord_count = ring_count / 5;
    let mut used_pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut placed = 0;
    let mut attempts = 0;
    while placed < chord_count && attempts < chord_count * 20 {
        attempts += 1;
        let a = rng.gen_range(0..ring_count);
        let span = rng.gen_range(2..=ring_count / 2);
        let b = (a + span) % ring_count;
        let pair = (a.min(b), a.max(b));
        if pair.0 == pair.1 || !used_pairs.insert(pair) {
            continue;
        }
        let x = rng.gen_range(0.030..0.080);
        branch_specs.push(BranchSpec {
            id: format!("C{placed:0width$}"),
            from_bus: bus_specs[pair.0].id.clone(),
            to_bus: bus_specs[pair.1].id.clone(),
            x,
            r: x / 10.0,
            b_total: 0.006,
            rating: 1.5,
            ..BranchSpec::default()
        });
        placed += 1;
    }

    // Leaf spurs: one load bus behind one radial branch.
    for k in 0..leaf_count {
        let host = rng.gen_range(0..ring_count);
        let id = format!("B{:0width$}", ring_count + k);
        let load_p = rng.gen_range(0.03..0.10);
        let load_q = load_p * rng.gen_range(0.20..0.35);
        total_load += load_p;
        bus_specs.push(BusSpec {
            load_p,
            load_q,
            ..BusSpec::new(&id)
        });
        let x = rng.gen_range(0.020..0.050);
        branch_specs.push(BranchSpec {
            id: format!("S{k:0width$}"),
            from_bus: bus_specs[host].id.clone(),
            to_bus: id,
            x,
            r: x / 5.0,
            rating: 0.5,
            ..BranchSpec::default()
        });
    }

    if !generator_rows.is_empty() {
        let dispatch = total_load * DISPATCH_MARGIN / generator_rows.len() as f64;
        for row in generator_rows {
            bus_specs[row].gen_p = dispatch;
        }
    }

    build_network(&NetworkSpec {
        id: format!("synthetic-{buses}-{seed}"),
        buses: bus_specs,
        branches: branch_specs,
        ..NetworkSpec::default()
    })?
    .extend_layer(Layer::AcLoadflow)
}
