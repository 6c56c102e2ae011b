//! Transient simulation of a transmission/distribution hierarchy by network
//! tearing.
//!
//! The hierarchy is cut at each feeder's tie branch. What remains is one
//! transmission subsystem (the parent plus every feeder-head load) and one
//! subsystem per feeder, each carrying its own machines, loads, and faults,
//! each factorized and solved independently. The ties themselves are not part
//! of any subsystem: every network solve first computes the open-circuit port
//! voltages and driving-point impedances of all subsystems, then solves one
//! dense link system for the tie currents — the multi-port generalization of
//! [`super::mate::mate_link_current`] — and finally re-solves each subsystem
//! with its tie current injected. Because that procedure is an exact block
//! elimination of the assembled network, the torn simulation tracks the
//! monolithic one to numerical rounding; it differs from it in structure, not
//! in result.
//!
//! Conventions:
//! - The operating point comes from the boundary-exchange powerflow
//!   ([`super::tnd_powerflow`]), so the dynamic phase starts from the same
//!   state a co-simulated steady state would hand over.
//! - Buses and branches inside a feeder are addressed as
//!   `"{feeder_id}/{local_id}"`, nested feeders as
//!   `"{feeder_id}/{nested_id}/{local_id}"`, in machine lists, event targets,
//!   and result trajectories alike. A feeder-head bus is the same electrical
//!   node as its parent bus, so names that reach it resolve to the parent bus.
//! - Machine parameters (`h`, `d`, `xd_p`) are per unit on the MVA base of
//!   the network that owns the machine's bus, consistent with every other
//!   quantity in that network's data.
//! - Each feeder joins its parent through exactly one in-service tie branch,
//!   and the tie must be a plain series line (unit tap, no phase shift).
//!   Everything else — interface transformers, parallel paths — belongs
//!   inside one of the subsystems.

use num_complex::Complex64;

use crate::dynamics::{
    init_subsystem, run_dynamics, DynConfig, DynEvent, DynEventKind, DynResult, DynSim,
    GenTrajectory, GeneratorClassical,
};
use crate::error::{Error, Result};
use crate::model::{Layer, NetworkModel};
use crate::sparse::TripletMatrix;

use super::{flatten_hierarchy, tnd_powerflow, CoSimConfig};

/// One torn-off piece of the network with its live simulator.
struct Subsystem {
    sim: DynSim,
    /// For each machine in this subsystem, its index in the caller's list.
    gen_slots: Vec<usize>,
}

/// One tie. Links couple the transmission subsystem (index 0) to feeder
/// subsystem `k + 1`, where `k` is the link's position in the list.
struct TieLink {
    /// Dense position of the parent-side port in subsystem 0.
    parent_port: usize,
    /// Dense position of the feeder-side port in subsystem `k + 1`.
    child_port: usize,
    /// Series impedance of the tie (pu on the root base).
    z_link: Complex64,
}

/// Thévenin impedances of the subsystems as seen from the tie ports, cached
/// between refactorizations.
struct PortImpedances {
    /// `z_parent[k][j]`: voltage at parent port `k` per unit current into
    /// parent port `j`. The transmission subsystem couples its own ports.
    z_parent: Vec<Vec<Complex64>>,
    /// Driving-point impedance at each feeder's port (feeders have one port
    /// each, and distinct feeders only couple through the parent).
    z_child: Vec<Complex64>,
    parent_stale: bool,
    child_stale: Vec<bool>,
}

impl PortImpedances {
    fn new(links: usize) -> Self {
        PortImpedances {
            z_parent: vec![vec![Complex64::new(0.0, 0.0); links]; links],
            z_child: vec![Complex64::new(0.0, 0.0); links],
            parent_stale: true,
            child_stale: vec![true; links],
        }
    }

    fn refresh(&mut self, subs: &[Subsystem], links: &[TieLink]) {
        if self.parent_stale {
            let fact = subs[0].sim.factorization();
            let dim = fact.dim();
            for (j, link) in links.iter().enumerate() {
                let mut unit = vec![Complex64::new(0.0, 0.0); dim];
                unit[link.parent_port] = Complex64::new(1.0, 0.0);
                let col = fact.solve(&unit);
                for (k, row_link) in links.iter().enumerate() {
                    self.z_parent[k][j] = col[row_link.parent_port];
                }
            }
            self.parent_stale = false;
        }
        for (k, link) in links.iter().enumerate() {
            if self.child_stale[k] {
                let fact = subs[k + 1].sim.factorization();
                let mut unit = vec![Complex64::new(0.0, 0.0); fact.dim()];
                unit[link.child_port] = Complex64::new(1.0, 0.0);
                self.z_child[k] = fact.solve(&unit)[link.child_port];
                self.child_stale[k] = false;
            }
        }
    }
}

/// Transient simulation over a bus/feeder hierarchy, torn at the ties.
///
/// `gens` and `events` address buses and branches by their hierarchical
/// names (see the module docs); the result reports machines in input order
/// under their input names. `pf_config` controls the boundary-exchange
/// powerflow that establishes the operating point. A model without feeders
/// degrades to the monolithic [`run_dynamics`].
pub fn tnd_dynamic_sim(
    net: &NetworkModel,
    gens: &[GeneratorClassical],
    events: &[DynEvent],
    config: &DynConfig,
    pf_config: &CoSimConfig,
) -> Result<DynResult> {
    net.validate()?;
    if net.child_links.is_empty() {
        return run_dynamics(net, gens, events, config);
    }
    let mut layer_check = Ok(());
    net.for_each_network(&mut |n| {
        if layer_check.is_ok() && n.layer < Layer::Dynamics {
            layer_check = Err(Error::model(format!(
                "network {:?} is at the {:?} layer; the split simulation needs every network at {:?}",
                n.id, n.layer, Layer::Dynamics
            )));
        }
    });
    layer_check?;
    if gens.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one machine is required".into(),
        ));
    }

    // Operating point by boundary exchange, then one flattened image of the
    // solved hierarchy: common base, hierarchical names, solved voltages.
    let mut work = net.clone();
    let pf = tnd_powerflow(&mut work, pf_config)?;
    if !pf.converged {
        return Err(Error::NotConverged {
            what: "boundary exchange powerflow before dynamics".to_string(),
            iterations: pf.rounds,
            residual: pf.boundary_mismatch,
        });
    }
    let flat = flatten_hierarchy(&work)?;

    let partition = partition_flat(&work, &flat)?;
    let aliases = collect_head_aliases(&work);
    let base_ratios = collect_base_ratios(&work);

    // Machines, rebased to the root base and routed to their subsystems.
    let mut local_gens: Vec<Vec<GeneratorClassical>> =
        vec![Vec::new(); partition.subsystems.len()];
    let mut gen_slots: Vec<Vec<usize>> = vec![Vec::new(); partition.subsystems.len()];
    for (slot, gen) in gens.iter().enumerate() {
        let bus = resolve_alias(&aliases, &gen.bus);
        let sub = partition.subsystem_of_bus(&bus).ok_or_else(|| {
            Error::UnknownBus(gen.bus.clone())
        })?;
        let ratio = base_ratio_for(&base_ratios, &gen.bus);
        let mut local = gen.clone();
        local.bus = bus;
        local.h *= ratio;
        local.d *= ratio;
        local.xd_p /= ratio;
        local_gens[sub].push(local);
        gen_slots[sub].push(slot);
    }

    // Events routed the same way, kept in caller order; ties are not
    // simulated elements.
    let mut routed_events: Vec<(usize, DynEvent)> = Vec::with_capacity(events.len());
    for event in events {
        let mut local = event.clone();
        let sub = match event.kind {
            DynEventKind::ApplyBusFault | DynEventKind::ClearBusFault => {
                local.target = resolve_alias(&aliases, &event.target);
                partition
                    .subsystem_of_bus(&local.target)
                    .ok_or_else(|| Error::UnknownBus(event.target.clone()))?
            }
            DynEventKind::TripBranch => {
                if partition.links.iter().any(|l| l.flat_id == event.target) {
                    return Err(Error::InvalidArgument(format!(
                        "branch {:?} is a tie between subsystems; the split \
                         simulation keeps ties in service — model a sectionalizing \
                         breaker inside one of the subsystems instead",
                        event.target
                    )));
                }
                partition
                    .subsystem_of_branch(&event.target)
                    .ok_or_else(|| Error::UnknownBranch(event.target.clone()))?
            }
        };
        routed_events.push((sub, local));
    }

    // Tie currents at the operating point, needed so each subsystem's load
    // freeze sees its true local draw rather than local draw plus tie flow.
    let tie_i0: Vec<Complex64> = partition
        .links
        .iter()
        .map(|link| {
            let vp = solved_voltage(&partition.subsystems[0], &link.parent_flat_bus())?;
            let vc = solved_voltage(
                &partition.subsystems[link.child_index()],
                &link.child_flat_bus(),
            )?;
            Ok((vp - vc) / link.z_link)
        })
        .collect::<Result<_>>()?;

    let mut subs: Vec<Subsystem> = Vec::with_capacity(partition.subsystems.len());
    for (s, sub_net) in partition.subsystems.iter().enumerate() {
        let boundary: Vec<(String, Complex64)> = partition
            .links
            .iter()
            .zip(&tie_i0)
            .filter_map(|(link, i0)| {
                if s == 0 {
                    Some((link.parent_flat_bus(), *i0))
                } else if link.child_index() == s {
                    Some((link.child_flat_bus(), -*i0))
                } else {
                    None
                }
            })
            .collect();
        let sim = init_subsystem(sub_net, &local_gens[s], config, &boundary)?;
        subs.push(Subsystem {
            sim,
            gen_slots: std::mem::take(&mut gen_slots[s]),
        });
    }

    // Resolve ports to dense positions now that factorizations exist.
    let links: Vec<TieLink> = partition
        .links
        .iter()
        .enumerate()
        .map(|(k, link)| {
            Ok(TieLink {
                parent_port: subs[0].sim.dense_of(&link.parent_flat_bus())?,
                child_port: subs[k + 1].sim.dense_of(&link.child_flat_bus())?,
                z_link: link.z_link,
            })
        })
        .collect::<Result<_>>()?;

    let mut ports = PortImpedances::new(links.len());

    // Balance mechanical power against the *coupled* electrical power so the
    // pre-event state is an exact equilibrium of the torn system.
    let deltas0: Vec<Vec<f64>> = subs.iter().map(|s| s.sim.states().0).collect();
    let pe0 = coupled_power(&mut subs, &links, &mut ports, &deltas0)?;
    for (sub, pe) in subs.iter_mut().zip(&pe0) {
        sub.sim.set_p_mech(pe);
    }

    integrate(subs, links, ports, routed_events, gens, config)
}

/// The flattened model cut along the feeder prefixes.
struct Partition {
    /// Index 0: transmission side; index `k + 1`: the feeder of `links[k]`.
    subsystems: Vec<NetworkModel>,
    links: Vec<PartitionLink>,
}

struct PartitionLink {
    flat_id: String,
    parent_bus: String,
    child_bus: String,
    child_subsystem: usize,
    z_link: Complex64,
}

impl PartitionLink {
    fn parent_flat_bus(&self) -> String {
        self.parent_bus.clone()
    }
    fn child_flat_bus(&self) -> String {
        self.child_bus.clone()
    }
    fn child_index(&self) -> usize {
        self.child_subsystem
    }
}

impl Partition {
    fn subsystem_of_bus(&self, id: &str) -> Option<usize> {
        self.subsystems
            .iter()
            .position(|net| net.bus(id).is_some())
    }

    fn subsystem_of_branch(&self, id: &str) -> Option<usize> {
        self.subsystems
            .iter()
            .position(|net| net.branch(id).is_some())
    }
}

/// Split the flattened network into the parent subsystem and one subsystem
/// per top-level feeder, discovering the ties as the branches that straddle
/// a cut. Tie charging is folded into the adjacent bus shunts so the cut
/// carries only the series impedance.
fn partition_flat(work: &NetworkModel, flat: &NetworkModel) -> Result<Partition> {
    let prefixes: Vec<String> = work
        .child_links
        .iter()
        .map(|l| format!("{}/", l.child.id))
        .collect();
    for (i, p) in prefixes.iter().enumerate() {
        if prefixes[..i].contains(p) {
            return Err(Error::InvalidArgument(format!(
                "feeder network ids must be unique in a split simulation; {:?} appears twice",
                &p[..p.len() - 1]
            )));
        }
        // The feeder prefix must actually be a namespace: a parent-level bus
        // or branch of the same spelling would be routed to the wrong side.
        for bus in &work.buses {
            if bus.id.starts_with(p) {
                return Err(Error::model(format!(
                    "parent bus id {:?} collides with the {:?} feeder namespace",
                    bus.id,
                    &p[..p.len() - 1]
                )));
            }
        }
        for branch in &work.branches {
            if branch.id.starts_with(p) {
                return Err(Error::model(format!(
                    "parent branch id {:?} collides with the {:?} feeder namespace",
                    branch.id,
                    &p[..p.len() - 1]
                )));
            }
        }
    }

    let owner_of = |id: &str| -> usize {
        prefixes
            .iter()
            .position(|p| id.starts_with(p.as_str()))
            .map(|k| k + 1)
            .unwrap_or(0)
    };

    let mut subsystems: Vec<NetworkModel> = Vec::with_capacity(prefixes.len() + 1);
    for s in 0..=prefixes.len() {
        let mut sub = flat.clone();
        sub.id = if s == 0 {
            work.id.clone()
        } else {
            work.child_links[s - 1].child.id.clone()
        };
        sub.buses.retain(|b| owner_of(&b.id) == s);
        sub.branches.clear();
        subsystems.push(sub);
    }

    // Feeders that contribute no buses (a bare head) are pure parent-bus
    // load; they have no subsystem and must have no straddling branch.
    let mut links: Vec<PartitionLink> = Vec::new();
    let mut tie_of_child: Vec<Option<usize>> = vec![None; prefixes.len()];
    for branch in &flat.branches {
        let s_from = owner_of(&branch.from_bus);
        let s_to = owner_of(&branch.to_bus);
        if s_from == s_to {
            subsystems[s_from].branches.push(branch.clone());
            continue;
        }
        // A straddling branch: exactly one end is at parent level, because
        // feeder namespaces only meet the rest of the world at their head.
        let (parent_end, child_end, child_sub) = if s_from == 0 {
            (&branch.from_bus, &branch.to_bus, s_to)
        } else {
            (&branch.to_bus, &branch.from_bus, s_from)
        };
        if !branch.in_service {
            // Out of service and severed: it can never be switched back in
            // (events only trip), so it is not part of any subsystem.
            continue;
        }
        if branch.tap != 1.0 || branch.phase_shift != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tie branch {:?} must be a plain series line (unit tap, no phase \
                 shift); put interface transformers inside the feeder",
                branch.id
            )));
        }
        let child_id = &prefixes[child_sub - 1];
        if let Some(first) = tie_of_child[child_sub - 1] {
            return Err(Error::InvalidArgument(format!(
                "feeder {:?} joins its parent through more than one in-service \
                 branch ({:?} and {:?}); a split simulation needs exactly one tie",
                &child_id[..child_id.len() - 1],
                links[first].flat_id,
                branch.id
            )));
        }
        tie_of_child[child_sub - 1] = Some(links.len());
        // Tie charging stays with the buses; the link is the series part.
        let half_b = branch.b_total / 2.0;
        if half_b != 0.0 {
            add_shunt_b(&mut subsystems[0], parent_end, half_b)?;
            add_shunt_b(&mut subsystems[child_sub], child_end, half_b)?;
        }
        links.push(PartitionLink {
            flat_id: branch.id.clone(),
            parent_bus: parent_end.clone(),
            child_bus: child_end.clone(),
            child_subsystem: child_sub,
            z_link: Complex64::new(branch.r, branch.x),
        });
    }

    for (k, prefix) in prefixes.iter().enumerate() {
        let feeder = &prefix[..prefix.len() - 1];
        let has_buses = !subsystems[k + 1].buses.is_empty();
        match (has_buses, tie_of_child[k]) {
            (true, None) => {
                return Err(Error::model(format!(
                    "feeder {feeder:?} has interior buses but no in-service tie \
                     to its parent"
                )));
            }
            (false, Some(_)) => unreachable!("a tie requires a feeder-side bus"),
            _ => {}
        }
    }

    // Bare-head feeders left an empty subsystem shell behind; drop the
    // shells and renumber the link targets.
    let mut renumber: Vec<usize> = Vec::with_capacity(subsystems.len());
    let mut kept = 0usize;
    for (s, sub) in subsystems.iter().enumerate() {
        renumber.push(kept);
        if s == 0 || !sub.buses.is_empty() {
            kept += 1;
        }
    }
    let mut compact: Vec<NetworkModel> = Vec::with_capacity(kept);
    for (s, sub) in subsystems.into_iter().enumerate() {
        if s == 0 || !sub.buses.is_empty() {
            compact.push(sub);
        }
    }
    for link in &mut links {
        link.child_subsystem = renumber[link.child_subsystem];
    }
    // Links were discovered in flat branch order; subsystems must line up as
    // "link k couples subsystem k + 1". Reorder subsystems to match.
    links.sort_by_key(|l| l.child_subsystem);
    for (k, link) in links.iter_mut().enumerate() {
        debug_assert_eq!(link.child_subsystem, k + 1, "one tie per feeder");
        link.child_subsystem = k + 1;
    }

    for sub in &mut compact {
        sub.child_links.clear();
        sub.validate()?;
    }
    Ok(Partition {
        subsystems: compact,
        links,
    })
}

fn add_shunt_b(net: &mut NetworkModel, bus: &str, b: f64) -> Result<()> {
    net.bus_mut(bus)
        .ok_or_else(|| Error::UnknownBus(bus.to_string()))?
        .shunt_b += b;
    Ok(())
}

/// `"{path}/{head}"` names the same node as the head's parent bus; map all
/// such names (including chains through nested feeders) to the surviving bus.
fn collect_head_aliases(net: &NetworkModel) -> Vec<(String, String)> {
    fn walk(net: &NetworkModel, prefix: &str, out: &mut Vec<(String, String)>) {
        for link in &net.child_links {
            let child_prefix = format!("{prefix}{}/", link.child.id);
            out.push((
                format!("{child_prefix}{}", link.child_boundary_bus),
                format!("{prefix}{}", link.parent_bus),
            ));
            walk(&link.child, &child_prefix, out);
        }
    }
    let mut out = Vec::new();
    walk(net, "", &mut out);
    out
}

fn resolve_alias(aliases: &[(String, String)], id: &str) -> String {
    let mut current = id.to_string();
    // Chains are bounded by nesting depth: each hop strips one level.
    loop {
        match aliases.iter().find(|(from, _)| *from == current) {
            Some((_, to)) => current = to.clone(),
            None => return current,
        }
    }
}

/// Per network in the hierarchy, its hierarchical prefix and the factor that
/// takes its per-unit quantities to the root base (power-like quantities
/// multiply by it; impedance-like divide).
fn collect_base_ratios(net: &NetworkModel) -> Vec<(String, f64)> {
    fn walk(net: &NetworkModel, prefix: &str, root_base: f64, out: &mut Vec<(String, f64)>) {
        for link in &net.child_links {
            let child_prefix = format!("{prefix}{}/", link.child.id);
            out.push((child_prefix.clone(), link.child.base_mva / root_base));
            walk(&link.child, &child_prefix, root_base, out);
        }
    }
    let mut out = Vec::new();
    walk(net, "", net.base_mva, &mut out);
    // Longest prefix first, so nested feeders shadow their parents.
    out.sort_by(|a, b| b.0.len().cmp(&a.0.len()));
    out
}

fn base_ratio_for(ratios: &[(String, f64)], id: &str) -> f64 {
    ratios
        .iter()
        .find(|(prefix, _)| id.starts_with(prefix.as_str()))
        .map(|(_, r)| *r)
        .unwrap_or(1.0)
}

fn solved_voltage(net: &NetworkModel, bus: &str) -> Result<Complex64> {
    let b = net
        .bus(bus)
        .ok_or_else(|| Error::UnknownBus(bus.to_string()))?;
    Ok(Complex64::from_polar(b.v_mag, b.v_ang))
}

/// Electrical power of every machine at the given rotor angles, with the
/// subsystems coupled through the ties: open-circuit solves, one link solve
/// for the tie currents, then a closed solve per subsystem.
fn coupled_power(
    subs: &mut [Subsystem],
    links: &[TieLink],
    ports: &mut PortImpedances,
    deltas: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    ports.refresh(subs, links);

    let parent_open = {
        let inj = subs[0].sim.machine_injections(&deltas[0]);
        subs[0].sim.factorization().solve(&inj)
    };
    let mut rhs = Vec::with_capacity(links.len());
    for (k, link) in links.iter().enumerate() {
        let child = &subs[k + 1].sim;
        let inj = child.machine_injections(&deltas[k + 1]);
        let e_child = child.factorization().solve(&inj)[link.child_port];
        rhs.push(parent_open[link.parent_port] - e_child);
    }

    // [z_parent + diag(z_child + z_link)] · i = e_parent − e_child, the
    // multi-port form of the two-sided Thévenin link equation.
    let m = links.len();
    let mut coupling = TripletMatrix::new(m);
    for k in 0..m {
        for j in 0..m {
            let mut z = ports.z_parent[k][j];
            if k == j {
                z += ports.z_child[k] + links[k].z_link;
            }
            coupling.add(k, j, z);
        }
    }
    let tie_i = coupling.to_csc().factorize()?.solve(&rhs);

    let mut pe = Vec::with_capacity(subs.len());
    let parent_extra: Vec<(usize, Complex64)> = links
        .iter()
        .zip(&tie_i)
        .map(|(link, i)| (link.parent_port, -i))
        .collect();
    pe.push(subs[0].sim.machine_power_with(&deltas[0], &parent_extra));
    for (k, link) in links.iter().enumerate() {
        let extra = [(link.child_port, tie_i[k])];
        pe.push(subs[k + 1].sim.machine_power_with(&deltas[k + 1], &extra));
    }
    Ok(pe)
}

/// The run_dynamics loop, with the coupled step in place of the monolithic
/// one and results stitched back into caller order.
fn integrate(
    mut subs: Vec<Subsystem>,
    links: Vec<TieLink>,
    mut ports: PortImpedances,
    routed_events: Vec<(usize, DynEvent)>,
    gens: &[GeneratorClassical],
    config: &DynConfig,
) -> Result<DynResult> {
    let dt = config.dt;
    let total_steps = (config.t_end / dt).round() as u64;

    // One schedule across subsystems; the stable sort keeps caller order
    // among same-step events, like the monolithic run.
    let mut schedule: Vec<(u64, usize, DynEvent)> = Vec::with_capacity(routed_events.len());
    for (s, event) in routed_events {
        if event.time < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "event at negative time {}",
                event.time
            )));
        }
        schedule.push(((event.time / dt).round() as u64, s, event));
    }
    schedule.sort_by_key(|(step, _, _)| *step);

    let mut time = Vec::with_capacity(total_steps as usize + 1);
    let mut trajectories: Vec<GenTrajectory> = gens
        .iter()
        .map(|g| GenTrajectory {
            bus: g.bus.clone(),
            delta: Vec::with_capacity(total_steps as usize + 1),
            omega_dev: Vec::with_capacity(total_steps as usize + 1),
        })
        .collect();
    let mut first_separation = None;

    let mut next_event = 0;
    for step in 0..=total_steps {
        while next_event < schedule.len() && schedule[next_event].0 <= step {
            let (_, s, ref event) = schedule[next_event];
            subs[s].sim.apply_event(event)?;
            if s == 0 {
                ports.parent_stale = true;
            } else {
                ports.child_stale[s - 1] = true;
            }
            next_event += 1;
        }

        let now = step as f64 * dt;
        time.push(now);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut machines = 0usize;
        for sub in &subs {
            for (gen, slot) in sub.sim.gens().iter().zip(&sub.gen_slots) {
                trajectories[*slot].delta.push(gen.delta);
                trajectories[*slot].omega_dev.push(gen.omega_dev);
                lo = lo.min(gen.delta);
                hi = hi.max(gen.delta);
                machines += 1;
            }
        }
        if first_separation.is_none() && machines > 1 && hi - lo > std::f64::consts::PI {
            first_separation = Some(now);
        }

        if step < total_steps {
            coupled_step(&mut subs, &links, &mut ports, config)?;
        }
    }

    Ok(DynResult {
        time,
        generators: trajectories,
        stable: first_separation.is_none(),
        first_separation,
    })
}

/// One trapezoidal step of all subsystems in lockstep: the predictor and the
/// fixed-point corrector both evaluate electrical power through the coupled
/// network, so the torn step computes the same update the monolithic one
/// would.
fn coupled_step(
    subs: &mut Vec<Subsystem>,
    links: &[TieLink],
    ports: &mut PortImpedances,
    config: &DynConfig,
) -> Result<()> {
    let dt = config.dt;
    let (delta0, omega0): (Vec<Vec<f64>>, Vec<Vec<f64>>) =
        subs.iter().map(|s| s.sim.states()).unzip();

    let pe0 = coupled_power(subs, links, ports, &delta0)?;
    let acc0: Vec<Vec<f64>> = subs
        .iter()
        .zip(&omega0)
        .zip(&pe0)
        .map(|((s, w), pe)| s.sim.accelerations(w, pe))
        .collect();

    let mut delta1: Vec<Vec<f64>> = delta0
        .iter()
        .zip(&omega0)
        .map(|(ds, ws)| ds.iter().zip(ws).map(|(d, w)| d + dt * w).collect())
        .collect();
    let mut omega1: Vec<Vec<f64>> = omega0
        .iter()
        .zip(&acc0)
        .map(|(ws, accs)| ws.iter().zip(accs).map(|(w, a)| w + dt * a).collect())
        .collect();

    let mut converged = false;
    for _ in 0..config.max_interface_iterations {
        let pe1 = coupled_power(subs, links, ports, &delta1)?;
        let mut shift: f64 = 0.0;
        for (s, sub) in subs.iter().enumerate() {
            let acc1 = sub.sim.accelerations(&omega1[s], &pe1[s]);
            for k in 0..delta1[s].len() {
                let d_next = delta0[s][k] + dt / 2.0 * (omega0[s][k] + omega1[s][k]);
                let w_next = omega0[s][k] + dt / 2.0 * (acc0[s][k] + acc1[k]);
                shift = shift.max((d_next - delta1[s][k]).abs());
                shift = shift.max((w_next - omega1[s][k]).abs() * dt);
                delta1[s][k] = d_next;
                omega1[s][k] = w_next;
            }
        }
        if shift <= config.interface_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            what: "coupled trapezoidal interface iteration".to_string(),
            iterations: config.max_interface_iterations,
            residual: config.interface_tol,
        });
    }

    for (s, sub) in subs.iter_mut().enumerate() {
        sub.sim.set_states(&delta1[s], &omega1[s]);
    }
    Ok(())
}
