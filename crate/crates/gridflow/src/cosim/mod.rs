//! Transmission & distribution co-simulation.
//!
//! A [`NetworkModel`](crate::model::NetworkModel) can carry child networks
//! (feeders) hanging off parent buses. This module solves such hierarchies
//! without ever forming the combined system:
//!
//! * [`tnd_powerflow`] — steady state, by iterative boundary exchange. Each
//!   round the parent solves with every feeder reduced to an equivalent load,
//!   then each feeder re-solves against the parent's boundary voltage and
//!   reports the power it actually draws. Rounds repeat until neither side
//!   moves. Feeders with children of their own recurse.
//! * [`dynamic::tnd_dynamic_sim`] — time domain, where the boundary must be
//!   resolved *exactly* every step. The tie branch is treated as a link
//!   between two independently factorized networks and solved with the
//!   equivalents in [`mate`]; no outer relaxation is needed.
//! * [`wire`] and [`coordinator`] — the same steady-state exchange run over
//!   TCP with length-prefixed JSON frames, for feeders simulated by another
//!   process. The coordinator reuses the exact in-process driver, so the
//!   exchange trace is bit-for-bit identical in both modes.
//!
//! [`flatten_hierarchy`] builds the monolithic single-network reference for
//! any hierarchy; tests compare both solution paths against it.
//!
//! Conventions at the boundary:
//!
//! * The feeder-head bus of a child must be its slack; its generation is the
//!   virtual source standing in for the parent.
//! * Boundary voltage is continuous across the interface in per-unit (the
//!   interface transformer, if any, belongs to one of the two models).
//! * Exchanged powers travel in physical MW/MVAR so neither side needs to
//!   know the other's MVA base.

pub mod coordinator;
pub mod dynamic;
pub mod mate;
pub mod wire;

pub use coordinator::{run_coordinator, run_coordinator_on, run_participant};
pub use dynamic::tnd_dynamic_sim;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loadflow::{solve_newton_raphson, LoadflowConfig, LoadflowResult};
use crate::model::{BusKind, Layer, NetworkModel};

/// Knobs for the steady-state boundary exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoSimConfig {
    /// Cap on exchange rounds.
    pub max_outer: usize,
    /// Convergence threshold on boundary movement between rounds, in parent
    /// per-unit (applies to voltage and exchanged power alike).
    pub boundary_tol: f64,
    /// Settings for every inner Newton solve, parent and feeders alike.
    pub loadflow: LoadflowConfig,
}

impl Default for CoSimConfig {
    fn default() -> Self {
        CoSimConfig {
            max_outer: 20,
            boundary_tol: 1e-6,
            loadflow: LoadflowConfig::default(),
        }
    }
}

/// One child's view of one exchange round, as recorded by the parent side.
/// Voltage is the parent's solved boundary voltage sent to the child
/// (magnitude in pu, angle in radians); power is what the child reported
/// drawing in return, in physical MW/MVAR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryExchange {
    pub round: usize,
    pub child: String,
    pub parent_bus: String,
    pub v_mag: f64,
    pub v_ang: f64,
    pub p_mw: f64,
    pub q_mvar: f64,
}

/// Outcome of a hierarchical steady-state solve.
#[derive(Debug, Clone, PartialEq)]
pub struct TndReport {
    /// Whether the boundary exchange settled within the round cap. Inner
    /// Newton failures are hard errors instead, since the exchange cannot
    /// continue past them.
    pub converged: bool,
    /// Exchange rounds executed (0 for a network without children).
    pub rounds: usize,
    /// Boundary movement at exit; `INFINITY` when fewer than two rounds ran.
    pub boundary_mismatch: f64,
    /// Every exchange, in round order then child order.
    pub exchanges: Vec<BoundaryExchange>,
    /// Final parent solve, consistent with the last reported feeder draws.
    pub loadflow: LoadflowResult,
}

/// Where one child hangs: resolved once, used every round.
#[derive(Debug, Clone)]
pub(crate) struct ChildPort {
    pub child_id: String,
    pub parent_bus: String,
}

/// Solve a hierarchical model in place. The parent and every descendant end
/// up holding their coupled-operating-point voltages; load data is restored
/// to its original values on every exit path.
///
/// A model without children degrades to a plain Newton solve whose
/// convergence flag is passed through. With children, an inner solve that
/// fails to converge is an error, and `Ok` with `converged: false` means the
/// boundary exchange itself ran out of rounds.
pub fn tnd_powerflow(net: &mut NetworkModel, config: &CoSimConfig) -> Result<TndReport> {
    net.validate()?;
    check_hierarchy(net)?;
    exchange_hierarchy(net, config)
}

fn check_hierarchy(net: &NetworkModel) -> Result<()> {
    net.require_layer(Layer::AcLoadflow)?;
    for link in &net.child_links {
        let head = link
            .child
            .bus(&link.child_boundary_bus)
            .expect("validate resolved boundary buses");
        if head.kind != BusKind::Slack {
            return Err(Error::model(format!(
                "child {:?}: boundary bus {:?} must be the feeder-head slack, found {:?}",
                link.child.id, link.child_boundary_bus, head.kind
            )));
        }
        if !head.in_service {
            return Err(Error::model(format!(
                "child {:?}: boundary bus {:?} is out of service",
                link.child.id, link.child_boundary_bus
            )));
        }
        let parent = net
            .bus(&link.parent_bus)
            .expect("validate resolved parent buses");
        if !parent.is_energizable() {
            return Err(Error::model(format!(
                "child {:?} hangs from bus {:?}, which cannot be energized",
                link.child.id, link.parent_bus
            )));
        }
        check_hierarchy(&link.child)?;
    }
    Ok(())
}

fn exchange_hierarchy(net: &mut NetworkModel, config: &CoSimConfig) -> Result<TndReport> {
    // Detach the children so the exchange driver can mutate the parent while
    // the closure mutates the children; reattached on every exit path.
    let mut links = std::mem::take(&mut net.child_links);
    let ports: Vec<ChildPort> = links
        .iter()
        .map(|l| ChildPort {
            child_id: l.child.id.clone(),
            parent_bus: l.parent_bus.clone(),
        })
        .collect();
    let outcome = exchange_with(net, &ports, config, |idx, _round, v| {
        let link = &mut links[idx];
        let head = link
            .child
            .bus_mut(&link.child_boundary_bus)
            .expect("checked above");
        head.v_mag = v.norm();
        head.v_ang = v.arg();
        let report = exchange_hierarchy(&mut link.child, config)?;
        if !report.converged {
            return Err(Error::NotConverged {
                what: format!("boundary exchange under child {:?}", link.child.id),
                iterations: report.rounds,
                residual: report.boundary_mismatch,
            });
        }
        boundary_draw_mw(&report.loadflow, &link.child_boundary_bus, &link.child)
    });
    net.child_links = links;
    outcome
}

/// The power a solved child pulls through its feeder head, in MW/MVAR: the
/// virtual slack generation scaled by the child's own base. Computed the
/// same way by TCP participants, so both modes exchange identical numbers.
pub(crate) fn boundary_draw_mw(
    result: &LoadflowResult,
    boundary_bus: &str,
    child: &NetworkModel,
) -> Result<(f64, f64)> {
    let slack = result
        .slack
        .iter()
        .find(|s| s.bus == boundary_bus)
        .ok_or_else(|| {
            Error::model(format!(
                "child {:?}: boundary bus {:?} did not act as a slack (is its island energized?)",
                child.id, boundary_bus
            ))
        })?;
    Ok((slack.gen_p * child.base_mva, slack.gen_q * child.base_mva))
}

/// The boundary-exchange driver shared by the in-process and TCP paths.
///
/// `solve_child(idx, round, boundary_voltage)` must return the power the
/// child draws in MW/MVAR; in-process it runs the child's solve directly,
/// over TCP it performs one message exchange. Everything else — equivalent
/// placement, parent solves, the convergence metric, trace recording — lives
/// here exactly once, which is what makes the two modes' traces identical.
pub(crate) fn exchange_with(
    parent: &mut NetworkModel,
    ports: &[ChildPort],
    config: &CoSimConfig,
    mut solve_child: impl FnMut(usize, usize, Complex64) -> Result<(f64, f64)>,
) -> Result<TndReport> {
    if ports.is_empty() {
        let result = solve_newton_raphson(parent, &config.loadflow)?;
        return Ok(TndReport {
            converged: result.converged,
            rounds: 0,
            boundary_mismatch: 0.0,
            exchanges: Vec::new(),
            loadflow: result,
        });
    }
    if config.max_outer == 0 {
        return Err(Error::InvalidArgument(
            "max_outer must be at least 1".to_string(),
        ));
    }

    let patch = LoadPatch::new(parent, ports)?;
    let outcome = run_rounds(parent, ports, config, &mut solve_child, &patch);
    patch.restore(parent);
    outcome
}

fn run_rounds(
    parent: &mut NetworkModel,
    ports: &[ChildPort],
    config: &CoSimConfig,
    solve_child: &mut impl FnMut(usize, usize, Complex64) -> Result<(f64, f64)>,
    patch: &LoadPatch,
) -> Result<TndReport> {
    let base = parent.base_mva;
    let mut exchanges = Vec::new();
    let mut draws_mw: Vec<(f64, f64)> = vec![(0.0, 0.0); ports.len()];
    let mut prev: Option<Vec<(Complex64, f64, f64)>> = None;
    let mut mismatch = f64::INFINITY;

    for round in 1..=config.max_outer {
        patch.apply(parent, ports, &draws_mw);
        let result = parent_solve(parent, config, round)?;

        let mut seen = Vec::with_capacity(ports.len());
        for (idx, port) in ports.iter().enumerate() {
            let sol = result
                .buses
                .iter()
                .find(|b| b.bus == port.parent_bus)
                .expect("every bus appears in a loadflow result");
            if sol.v_mag <= 0.0 {
                return Err(Error::model(format!(
                    "parent bus {:?} came out de-energized; cannot feed child {:?}",
                    port.parent_bus, port.child_id
                )));
            }
            let v = Complex64::from_polar(sol.v_mag, sol.v_ang);
            let (p_mw, q_mvar) = solve_child(idx, round, v)?;
            exchanges.push(BoundaryExchange {
                round,
                child: port.child_id.clone(),
                parent_bus: port.parent_bus.clone(),
                v_mag: sol.v_mag,
                v_ang: sol.v_ang,
                p_mw,
                q_mvar,
            });
            draws_mw[idx] = (p_mw, q_mvar);
            seen.push((v, p_mw, q_mvar));
        }

        if let Some(prev) = &prev {
            mismatch = 0.0f64;
            for ((v, p, q), (v0, p0, q0)) in seen.iter().zip(prev) {
                mismatch = mismatch
                    .max((v - v0).norm())
                    .max((p - p0).abs() / base)
                    .max((q - q0).abs() / base);
            }
            if mismatch <= config.boundary_tol {
                // One more parent solve so the recorded state matches the
                // final feeder draws instead of the previous round's.
                patch.apply(parent, ports, &draws_mw);
                let result = parent_solve(parent, config, round)?;
                return Ok(TndReport {
                    converged: true,
                    rounds: round,
                    boundary_mismatch: mismatch,
                    exchanges,
                    loadflow: result,
                });
            }
        }
        prev = Some(seen);
    }

    patch.apply(parent, ports, &draws_mw);
    let result = parent_solve(parent, config, config.max_outer)?;
    Ok(TndReport {
        converged: false,
        rounds: config.max_outer,
        boundary_mismatch: mismatch,
        exchanges,
        loadflow: result,
    })
}

fn parent_solve(
    parent: &mut NetworkModel,
    config: &CoSimConfig,
    round: usize,
) -> Result<LoadflowResult> {
    let result = solve_newton_raphson(parent, &config.loadflow)?;
    if !result.converged {
        return Err(Error::NotConverged {
            what: format!(
                "parent loadflow of {:?} in exchange round {round}",
                parent.id
            ),
            iterations: result.iterations,
            residual: result.max_mismatch,
        });
    }
    Ok(result)
}

/// Original loads at the buses feeders hang from, so equivalents can be
/// applied per round and withdrawn afterwards.
struct LoadPatch {
    /// (position in `net.buses`, original load_p, original load_q)
    originals: Vec<(usize, f64, f64)>,
    /// Port index -> index into `originals`.
    port_target: Vec<usize>,
}

impl LoadPatch {
    fn new(parent: &NetworkModel, ports: &[ChildPort]) -> Result<Self> {
        let mut originals: Vec<(usize, f64, f64)> = Vec::new();
        let mut port_target = Vec::with_capacity(ports.len());
        for port in ports {
            let pos = parent
                .bus_position(&port.parent_bus)
                .ok_or_else(|| Error::UnknownBus(port.parent_bus.clone()))?;
            let target = originals.iter().position(|(p, _, _)| *p == pos);
            let target = target.unwrap_or_else(|| {
                let bus = &parent.buses[pos];
                originals.push((pos, bus.load_p, bus.load_q));
                originals.len() - 1
            });
            port_target.push(target);
        }
        Ok(LoadPatch {
            originals,
            port_target,
        })
    }

    /// Set every boundary bus load to original + the feeders' current draws
    /// (converted to parent per-unit).
    fn apply(&self, parent: &mut NetworkModel, ports: &[ChildPort], draws_mw: &[(f64, f64)]) {
        let base = parent.base_mva;
        for &(pos, p0, q0) in &self.originals {
            parent.buses[pos].load_p = p0;
            parent.buses[pos].load_q = q0;
        }
        for (port_idx, _) in ports.iter().enumerate() {
            let (pos, _, _) = self.originals[self.port_target[port_idx]];
            let (p_mw, q_mvar) = draws_mw[port_idx];
            parent.buses[pos].load_p += p_mw / base;
            parent.buses[pos].load_q += q_mvar / base;
        }
    }

    fn restore(&self, parent: &mut NetworkModel) {
        for &(pos, p0, q0) in &self.originals {
            parent.buses[pos].load_p = p0;
            parent.buses[pos].load_q = q0;
        }
    }
}

/// Collapse a hierarchy into one flat network that is electrically identical
/// to what the co-simulation solves: each child's feeder-head slack is
/// identified with its parent bus (local load and shunt move over, the
/// virtual source disappears), every other child bus and branch is copied in
/// under a `"{child_id}/"` prefix, and all child quantities are rebased to
/// the parent's MVA base. Verification reference for both solution paths.
pub fn flatten_hierarchy(net: &NetworkModel) -> Result<NetworkModel> {
    net.validate()?;
    check_hierarchy(net)?;
    let mut flat = flatten_into(net)?;
    flat.id = format!("{}-flattened", net.id);
    flat.validate()?;
    Ok(flat)
}

fn flatten_into(net: &NetworkModel) -> Result<NetworkModel> {
    let mut flat = net.clone();
    flat.child_links = Vec::new();

    for link in &net.child_links {
        let child = flatten_into(&link.child)?;
        // Power quantities scale by this; impedances by its inverse.
        let ratio = child.base_mva / net.base_mva;
        let head_id = &link.child_boundary_bus;

        for bus in &child.buses {
            if bus.id == *head_id {
                let target = flat
                    .bus_mut(&link.parent_bus)
                    .expect("validate resolved parent buses");
                target.load_p += bus.load_p * ratio;
                target.load_q += bus.load_q * ratio;
                target.shunt_g += bus.shunt_g * ratio;
                target.shunt_b += bus.shunt_b * ratio;
                // The head's generation was the stand-in for the parent
                // network itself; it has no counterpart in the flat model.
                continue;
            }
            let mut merged = bus.clone();
            merged.id = format!("{}/{}", child.id, bus.id);
            merged.load_p *= ratio;
            merged.load_q *= ratio;
            merged.gen_p *= ratio;
            merged.gen_q *= ratio;
            merged.shunt_g *= ratio;
            merged.shunt_b *= ratio;
            merged.q_min = merged.q_min.map(|q| q * ratio);
            merged.q_max = merged.q_max.map(|q| q * ratio);
            if flat.bus(&merged.id).is_some() {
                return Err(Error::model(format!(
                    "flattening collides on bus id {:?}",
                    merged.id
                )));
            }
            flat.buses.push(merged);
        }

        for branch in &child.branches {
            let mut merged = branch.clone();
            merged.id = format!("{}/{}", child.id, branch.id);
            let rename = |bus: &str| {
                if bus == head_id {
                    link.parent_bus.clone()
                } else {
                    format!("{}/{}", child.id, bus)
                }
            };
            merged.from_bus = rename(&merged.from_bus);
            merged.to_bus = rename(&merged.to_bus);
            merged.r /= ratio;
            merged.x /= ratio;
            merged.b_total *= ratio;
            merged.rating *= ratio;
            if flat.branch(&merged.id).is_some() {
                return Err(Error::model(format!(
                    "flattening collides on branch id {:?}",
                    merged.id
                )));
            }
            flat.branches.push(merged);
        }
    }
    Ok(flat)
}

/// Shared hierarchy fixtures for this module family's tests.
#[cfg(test)]
pub(crate) mod testnet {
    use super::CoSimConfig;
    use crate::model::{
        build_network, BranchSpec, BusKind, BusSpec, Layer, NetworkModel, NetworkSpec,
    };

    pub(crate) fn spec_bus(id: &str, kind: BusKind, load_p: f64, load_q: f64) -> BusSpec {
        BusSpec {
            id: id.to_string(),
            kind,
            load_p,
            load_q,
            ..BusSpec::default()
        }
    }

    pub(crate) fn line(from: &str, to: &str, r: f64, x: f64) -> BranchSpec {
        BranchSpec {
            r,
            ..BranchSpec::line(from, to, x)
        }
    }

    /// Small transmission grid: slack T1, generator bus T2, load buses
    /// T3/T4 where feeders can hang.
    pub(crate) fn parent_spec() -> NetworkSpec {
        NetworkSpec {
            id: "grid".to_string(),
            buses: vec![
                BusSpec {
                    v_mag: 1.02,
                    ..spec_bus("T1", BusKind::Slack, 0.0, 0.0)
                },
                BusSpec {
                    v_mag: 1.01,
                    gen_p: 0.4,
                    ..spec_bus("T2", BusKind::PV, 0.0, 0.0)
                },
                spec_bus("T3", BusKind::PQ, 0.25, 0.08),
                spec_bus("T4", BusKind::PQ, 0.15, 0.05),
            ],
            branches: vec![
                line("T1", "T2", 0.01, 0.06),
                line("T1", "T3", 0.02, 0.09),
                line("T2", "T4", 0.015, 0.08),
                line("T3", "T4", 0.02, 0.1),
            ],
            ..NetworkSpec::default()
        }
    }

    /// Radial feeder: head slack F1, then a short chain with loads.
    pub(crate) fn feeder_spec(id: &str, base_mva: f64, scale: f64) -> NetworkSpec {
        NetworkSpec {
            id: id.to_string(),
            base_mva,
            buses: vec![
                spec_bus("F1", BusKind::Slack, 0.02 * scale, 0.005 * scale),
                spec_bus("F2", BusKind::PQ, 0.06 * scale, 0.02 * scale),
                spec_bus("F3", BusKind::PQ, 0.05 * scale, 0.015 * scale),
            ],
            branches: vec![
                line("F1", "F2", 0.03, 0.08),
                line("F2", "F3", 0.04, 0.09),
            ],
            ..NetworkSpec::default()
        }
    }

    pub(crate) fn lifted(spec: &NetworkSpec) -> NetworkModel {
        build_network(spec)
            .unwrap()
            .extend_layer(Layer::AcLoadflow)
            .unwrap()
    }

    pub(crate) fn attach(parent: &mut NetworkModel, bus: &str, child: NetworkModel) {
        parent.attach_child(bus, child, "F1").unwrap();
    }

    pub(crate) fn tight() -> CoSimConfig {
        CoSimConfig {
            boundary_tol: 1e-9,
            ..CoSimConfig::default()
        }
    }
}
