//! Classical transient stability simulation.
//!
//! Machines are the classical model — a constant EMF magnitude behind the
//! transient reactance, swinging per the rotor equation — and every other
//! injection in the network (loads, generation without a machine record)
//! is frozen as constant admittance at its operating point. That reduces
//! each step to one linear network solve: machine EMFs enter as Norton
//! current injections against an augmented admittance matrix holding the
//! network, load admittances, machine admittances, and any active fault.
//!
//! Integration is trapezoidal with interface iteration: each step
//! re-evaluates electrical power at the trial end-of-step angles and
//! corrects until the state update is self-consistent, so the implicit rule
//! keeps its energy behavior at the configured step size.
//!
//! Events (bus faults, fault clears, branch trips) snap to the nearest step
//! boundary and trigger one refactorization each. The input model is never
//! modified; the simulator works on a private copy.
//!
//! Initialization derives everything from the solved operating point on the
//! model: the machine EMF from the bus voltage and its generation, the
//! mechanical power from the electrical power of the assembled network at
//! time zero (making the pre-event state an exact equilibrium), and load
//! admittances from the actual power drawn at the solved voltages.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Layer, NetworkModel};
use crate::sparse::{Factorization, SparseMatrix};
use crate::topology::{build_ybus, BusIndex};

/// Fault impedances below this floor (including the bolted 0.0) are clamped,
/// which caps the fault admittance at 1e7 pu.
pub const FAULT_Z_FLOOR: f64 = 1e-7;

/// One classical machine. Callers fill the physical parameters; the state
/// fields (`e_mag`, `delta`, `omega_dev`, `p_mech`) are computed by
/// initialization and evolve during simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorClassical {
    /// Bus the machine is connected to.
    pub bus: String,
    /// Inertia constant H (s, machine-seconds on system base).
    pub h: f64,
    /// Damping coefficient (pu power per pu speed deviation).
    pub d: f64,
    /// Transient reactance x'd (pu).
    pub xd_p: f64,
    /// Internal EMF magnitude (pu), constant during simulation.
    #[serde(default)]
    pub e_mag: f64,
    /// Rotor angle (rad).
    #[serde(default)]
    pub delta: f64,
    /// Rotor speed deviation from synchronous (rad/s).
    #[serde(default)]
    pub omega_dev: f64,
    /// Mechanical power (pu), constant during simulation.
    #[serde(default)]
    pub p_mech: f64,
}

impl GeneratorClassical {
    pub fn new(bus: &str, h: f64, d: f64, xd_p: f64) -> Self {
        GeneratorClassical {
            bus: bus.to_string(),
            h,
            d,
            xd_p,
            e_mag: 0.0,
            delta: 0.0,
            omega_dev: 0.0,
            p_mech: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DynEventKind {
    /// Connect a fault admittance from `target` bus to ground.
    ApplyBusFault,
    /// Remove the fault at `target` bus.
    ClearBusFault,
    /// Switch the `target` branch out.
    TripBranch,
}

/// A switching event. `z_fault` matters only for [`DynEventKind::ApplyBusFault`];
/// 0.0 means bolted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynEvent {
    pub time: f64,
    pub kind: DynEventKind,
    pub target: String,
    #[serde(default)]
    pub z_fault: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynConfig {
    /// Integration step (s).
    pub dt: f64,
    /// Simulation horizon (s).
    pub t_end: f64,
    /// Convergence tolerance of the per-step interface iteration.
    pub interface_tol: f64,
    pub max_interface_iterations: usize,
}

impl Default for DynConfig {
    fn default() -> Self {
        DynConfig {
            dt: 0.005,
            t_end: 5.0,
            interface_tol: 1e-10,
            max_interface_iterations: 50,
        }
    }
}

/// Angle/speed trace of one machine, one sample per step boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenTrajectory {
    pub bus: String,
    pub delta: Vec<f64>,
    pub omega_dev: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynResult {
    pub time: Vec<f64>,
    pub generators: Vec<GenTrajectory>,
    /// False when any pair of machines separated by more than π rad.
    pub stable: bool,
    /// First time at which a separation beyond π was observed.
    pub first_separation: Option<f64>,
}

/// Live transient simulation: owns a private network copy, the machine
/// states, and the current augmented factorization.
#[derive(Debug)]
pub struct DynSim {
    net: NetworkModel,
    index: BusIndex,
    gens: Vec<GeneratorClassical>,
    /// Dense index of each machine's bus.
    gen_pos: Vec<usize>,
    /// Machine Norton admittance 1/(j·x'd).
    gen_y: Vec<Complex64>,
    /// Constant load admittance per dense bus position.
    load_y: Vec<Complex64>,
    /// Active faults: dense bus position -> fault admittance.
    faults: BTreeMap<usize, Complex64>,
    fact: Factorization<Complex64>,
    /// Bus voltages of the latest network solve.
    voltages: Vec<Complex64>,
    omega_s: f64,
    time: f64,
    step_index: u64,
    dt: f64,
    interface_tol: f64,
    max_interface_iterations: usize,
}

fn augmented_factorization(
    base: &SparseMatrix<Complex64>,
    extra_diag: impl Iterator<Item = (usize, Complex64)>,
) -> Result<Factorization<Complex64>> {
    let mut triplets = crate::sparse::TripletMatrix::new(base.dim());
    for (row, col, value) in base.iter() {
        triplets.add(row, col, value);
    }
    for (pos, y) in extra_diag {
        triplets.add(pos, pos, y);
    }
    triplets.to_csc().factorize().map_err(|e| match e {
        Error::Singular { pivot, .. } => Error::Singular {
            what: "dynamic admittance matrix",
            pivot,
        },
        other => other,
    })
}

impl DynSim {
    /// Current simulation time (s).
    pub fn time(&self) -> f64 {
        self.time
    }

    /// Machine states at the current time.
    pub fn gens(&self) -> &[GeneratorClassical] {
        &self.gens
    }

    /// Complex voltage of a bus from the latest network solve.
    pub fn bus_voltage(&self, bus_id: &str) -> Result<Complex64> {
        let pos = self
            .index
            .dense_of(bus_id)
            .ok_or_else(|| Error::UnknownBus(bus_id.to_string()))?;
        Ok(self.voltages[pos])
    }

    fn refactorize(&mut self) -> Result<()> {
        let ybus = build_ybus(&self.net)?;
        let n = self.index.dim();
        let mut extra: Vec<(usize, Complex64)> = Vec::with_capacity(n + self.faults.len());
        for (pos, y) in self.load_y.iter().enumerate() {
            extra.push((pos, *y));
        }
        for (gen, pos) in self.gen_y.iter().zip(&self.gen_pos) {
            extra.push((*pos, *gen));
        }
        for (pos, y) in &self.faults {
            extra.push((*pos, *y));
        }
        self.fact = augmented_factorization(&ybus.matrix, extra.into_iter())?;
        Ok(())
    }

    /// Solve the network for the given rotor angles; returns electrical
    /// power per machine and refreshes the stored bus voltages.
    fn electrical_power(&mut self, deltas: &[f64]) -> Vec<f64> {
        self.machine_power_with(deltas, &[])
    }

    /// Like [`Self::electrical_power`], but with additional current
    /// injections at dense bus positions — the hook a link solver uses to
    /// couple this network to another one.
    pub(crate) fn machine_power_with(
        &mut self,
        deltas: &[f64],
        extra: &[(usize, Complex64)],
    ) -> Vec<f64> {
        let mut injections = self.machine_injections(deltas);
        for (pos, i) in extra {
            injections[*pos] += *i;
        }
        self.voltages = self.fact.solve(&injections);
        self.gens
            .iter()
            .enumerate()
            .map(|(k, gen)| {
                let emf = Complex64::from_polar(gen.e_mag, deltas[k]);
                let current = self.gen_y[k] * (emf - self.voltages[self.gen_pos[k]]);
                (emf * current.conj()).re
            })
            .collect()
    }

    /// Norton currents the machines inject at the given rotor angles.
    pub(crate) fn machine_injections(&self, deltas: &[f64]) -> Vec<Complex64> {
        let mut injections = vec![Complex64::new(0.0, 0.0); self.index.dim()];
        for (k, gen) in self.gens.iter().enumerate() {
            let emf = Complex64::from_polar(gen.e_mag, deltas[k]);
            injections[self.gen_pos[k]] += self.gen_y[k] * emf;
        }
        injections
    }

    /// The current augmented factorization (network + loads + machines +
    /// faults).
    pub(crate) fn factorization(&self) -> &Factorization<Complex64> {
        &self.fact
    }

    /// Dense index of a bus, as used by the factorization and
    /// [`Self::machine_power_with`] extras.
    pub(crate) fn dense_of(&self, bus: &str) -> Result<usize> {
        self.index
            .dense_of(bus)
            .ok_or_else(|| Error::UnknownBus(bus.to_string()))
    }

    /// Rotor states as parallel (angles, speed deviations) vectors.
    pub(crate) fn states(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.gens.iter().map(|g| g.delta).collect(),
            self.gens.iter().map(|g| g.omega_dev).collect(),
        )
    }

    pub(crate) fn set_states(&mut self, deltas: &[f64], omegas: &[f64]) {
        for (k, gen) in self.gens.iter_mut().enumerate() {
            gen.delta = deltas[k];
            gen.omega_dev = omegas[k];
        }
    }

    /// Overwrite mechanical powers; a coupled simulation balances them
    /// against the *linked* electrical power instead of the local one.
    pub(crate) fn set_p_mech(&mut self, p_mech: &[f64]) {
        for (gen, p) in self.gens.iter_mut().zip(p_mech) {
            gen.p_mech = *p;
        }
    }

    pub(crate) fn accelerations(&self, omegas: &[f64], p_elec: &[f64]) -> Vec<f64> {
        self.gens
            .iter()
            .enumerate()
            .map(|(k, gen)| {
                let damping = gen.d * omegas[k] / self.omega_s;
                self.omega_s / (2.0 * gen.h) * (gen.p_mech - p_elec[k] - damping)
            })
            .collect()
    }

    /// Apply a switching event at the current time.
    pub fn apply_event(&mut self, event: &DynEvent) -> Result<()> {
        match event.kind {
            DynEventKind::ApplyBusFault => {
                let pos = self.index.dense_of(&event.target).ok_or_else(|| {
                    Error::UnknownBus(event.target.clone())
                })?;
                let y = 1.0 / event.z_fault.max(FAULT_Z_FLOOR);
                self.faults.insert(pos, Complex64::new(y, 0.0));
            }
            DynEventKind::ClearBusFault => {
                let pos = self.index.dense_of(&event.target).ok_or_else(|| {
                    Error::UnknownBus(event.target.clone())
                })?;
                if self.faults.remove(&pos).is_none() {
                    return Err(Error::model(format!(
                        "no active fault at bus {:?} to clear",
                        event.target
                    )));
                }
            }
            DynEventKind::TripBranch => {
                let pos = self
                    .net
                    .branch_position(&event.target)
                    .ok_or_else(|| Error::UnknownBranch(event.target.clone()))?;
                if !self.net.branches[pos].in_service {
                    return Err(Error::model(format!(
                        "branch {:?} is already out of service",
                        event.target
                    )));
                }
                self.net.branches[pos].in_service = false;
            }
        }
        self.refactorize()
    }

    /// Advance one trapezoidal step.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.dt;
        let delta0: Vec<f64> = self.gens.iter().map(|g| g.delta).collect();
        let omega0: Vec<f64> = self.gens.iter().map(|g| g.omega_dev).collect();

        let pe0 = self.electrical_power(&delta0);
        let acc0 = self.accelerations(&omega0, &pe0);

        // Explicit predictor, then fixed-point correction of the
        // trapezoidal update until the interface is self-consistent.
        let mut delta1: Vec<f64> = delta0
            .iter()
            .zip(&omega0)
            .map(|(d, w)| d + dt * w)
            .collect();
        let mut omega1: Vec<f64> = omega0
            .iter()
            .zip(&acc0)
            .map(|(w, a)| w + dt * a)
            .collect();

        let mut converged = false;
        for _ in 0..self.max_interface_iterations {
            let pe1 = self.electrical_power(&delta1);
            let acc1 = self.accelerations(&omega1, &pe1);
            let mut shift: f64 = 0.0;
            for k in 0..self.gens.len() {
                let d_next = delta0[k] + dt / 2.0 * (omega0[k] + omega1[k]);
                let w_next = omega0[k] + dt / 2.0 * (acc0[k] + acc1[k]);
                shift = shift.max((d_next - delta1[k]).abs());
                shift = shift.max((w_next - omega1[k]).abs() * dt);
                delta1[k] = d_next;
                omega1[k] = w_next;
            }
            if shift <= self.interface_tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NotConverged {
                what: "trapezoidal interface iteration".to_string(),
                iterations: self.max_interface_iterations,
                residual: self.interface_tol,
            });
        }

        for (k, gen) in self.gens.iter_mut().enumerate() {
            gen.delta = delta1[k];
            gen.omega_dev = omega1[k];
        }
        self.step_index += 1;
        self.time = self.step_index as f64 * dt;
        Ok(())
    }
}

/// Assemble a transient simulation from a solved model and its machine
/// list. The model must be at the dynamics layer and carry a solved
/// operating point; it is copied, never modified.
pub fn init_dynamics(
    net: &NetworkModel,
    gens: &[GeneratorClassical],
    config: &DynConfig,
) -> Result<DynSim> {
    if gens.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one machine is required".into(),
        ));
    }
    init_subsystem(net, gens, config, &[])
}

/// [`init_dynamics`] for one piece of a partitioned network. `boundary_out`
/// lists, per boundary bus, the current leaving this subsystem over a tie at
/// the operating point: without it, the load freeze would mistake the tie
/// flow for local load. A subsystem may have no machines of its own.
pub(crate) fn init_subsystem(
    net: &NetworkModel,
    gens: &[GeneratorClassical],
    config: &DynConfig,
    boundary_out: &[(String, Complex64)],
) -> Result<DynSim> {
    net.require_layer(Layer::Dynamics)?;
    if !(config.dt > 0.0) || !(config.t_end >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive and t_end non-negative, got dt={}, t_end={}",
            config.dt, config.t_end
        )));
    }

    let ybus = build_ybus(net)?;
    let index = ybus.index.clone();

    let mut gen_pos = Vec::with_capacity(gens.len());
    for gen in gens {
        let bus = net
            .bus(&gen.bus)
            .ok_or_else(|| Error::UnknownBus(gen.bus.clone()))?;
        if !bus.is_energizable() {
            return Err(Error::model(format!(
                "machine bus {:?} is not energized",
                gen.bus
            )));
        }
        if !(gen.h > 0.0) || !(gen.xd_p > 0.0) || gen.d < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "machine at bus {:?} needs h > 0, xd_p > 0, d >= 0",
                gen.bus
            )));
        }
        let pos = index.dense_of(&gen.bus).expect("energizable bus is indexed");
        if gen_pos.contains(&pos) {
            return Err(Error::InvalidArgument(format!(
                "two machines given for bus {:?}",
                gen.bus
            )));
        }
        gen_pos.push(pos);
    }

    // Operating-point voltages and the injection each bus actually makes
    // into the network at that point.
    let n = index.dim();
    let mut v0 = vec![Complex64::new(0.0, 0.0); n];
    for pos in 0..n {
        let bus = &net.buses[index.model_pos(pos)];
        if !(bus.v_mag > 0.0) {
            return Err(Error::model(format!(
                "bus {:?} has no solved voltage; run a loadflow before dynamics",
                bus.id
            )));
        }
        v0[pos] = Complex64::from_polar(bus.v_mag, bus.v_ang);
    }
    let i_net = ybus.matrix.mul_vec(&v0);
    let mut s_net: Vec<Complex64> = v0.iter().zip(&i_net).map(|(v, i)| v * i.conj()).collect();

    // Current exported over a tie is part of the bus's net injection even
    // though the tie branch itself lives outside this network.
    for (bus, i_out) in boundary_out {
        let pos = index
            .dense_of(bus)
            .ok_or_else(|| Error::UnknownBus(bus.clone()))?;
        s_net[pos] += v0[pos] * i_out.conj();
    }

    // Freeze non-machine injections as constant admittance. At machine
    // buses only the local load converts; the machine supplies the rest.
    let mut load_y = vec![Complex64::new(0.0, 0.0); n];
    let mut machine_gen = vec![None; n];
    for (k, pos) in gen_pos.iter().enumerate() {
        machine_gen[*pos] = Some(k);
    }
    let mut s_gen = vec![Complex64::new(0.0, 0.0); gens.len()];
    for pos in 0..n {
        let bus = &net.buses[index.model_pos(pos)];
        let v_sq = v0[pos].norm_sqr();
        match machine_gen[pos] {
            Some(k) => {
                let s_load = Complex64::new(bus.load_p, bus.load_q);
                load_y[pos] = s_load.conj() / v_sq;
                s_gen[k] = s_net[pos] + s_load;
            }
            None => {
                // The whole net draw, loads and machine-less generation
                // alike, becomes admittance.
                load_y[pos] = -s_net[pos].conj() / v_sq;
            }
        }
    }

    let mut gens = gens.to_vec();
    let mut gen_y = Vec::with_capacity(gens.len());
    for (k, gen) in gens.iter_mut().enumerate() {
        let y = 1.0 / Complex64::new(0.0, gen.xd_p);
        gen_y.push(y);
        let v = v0[gen_pos[k]];
        let current = (s_gen[k] / v).conj();
        let emf = v + Complex64::new(0.0, gen.xd_p) * current;
        gen.e_mag = emf.norm();
        gen.delta = emf.arg();
        gen.omega_dev = 0.0;
    }

    let omega_s = 2.0 * std::f64::consts::PI * net.frequency;
    let extra: Vec<(usize, Complex64)> = load_y
        .iter()
        .enumerate()
        .map(|(pos, y)| (pos, *y))
        .chain(gen_y.iter().zip(&gen_pos).map(|(y, pos)| (*pos, *y)))
        .collect();
    let fact = augmented_factorization(&ybus.matrix, extra.into_iter())?;
    let mut sim = DynSim {
        net: net.clone(),
        index,
        gens,
        gen_pos,
        gen_y,
        load_y,
        faults: BTreeMap::new(),
        fact,
        voltages: v0,
        omega_s,
        time: 0.0,
        step_index: 0,
        dt: config.dt,
        interface_tol: config.interface_tol,
        max_interface_iterations: config.max_interface_iterations,
    };

    // Mechanical power balances the assembled network at time zero, so the
    // pre-event trajectory is a true equilibrium.
    let deltas: Vec<f64> = sim.gens.iter().map(|g| g.delta).collect();
    let pe0 = sim.electrical_power(&deltas);
    for (gen, pe) in sim.gens.iter_mut().zip(&pe0) {
        gen.p_mech = *pe;
    }
    Ok(sim)
}

/// Run a full study: initialize, play events (snapped to the nearest step
/// boundary), integrate to the horizon, and judge stability by pairwise
/// rotor separation.
pub fn run_dynamics(
    net: &NetworkModel,
    gens: &[GeneratorClassical],
    events: &[DynEvent],
    config: &DynConfig,
) -> Result<DynResult> {
    let mut sim = init_dynamics(net, gens, config)?;

    let total_steps = (config.t_end / config.dt).round() as u64;
    let mut schedule: Vec<(u64, &DynEvent)> = events
        .iter()
        .map(|e| {
            if e.time < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "event at negative time {}",
                    e.time
                )));
            }
            Ok(((e.time / config.dt).round() as u64, e))
        })
        .collect::<Result<_>>()?;
    schedule.sort_by_key(|(step, _)| *step);

    let mut time = Vec::with_capacity(total_steps as usize + 1);
    let mut trajectories: Vec<GenTrajectory> = sim
        .gens()
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
            sim.apply_event(schedule[next_event].1)?;
            next_event += 1;
        }

        time.push(sim.time());
        let deltas: Vec<f64> = sim.gens().iter().map(|g| g.delta).collect();
        for (traj, gen) in trajectories.iter_mut().zip(sim.gens()) {
            traj.delta.push(gen.delta);
            traj.omega_dev.push(gen.omega_dev);
        }
        if first_separation.is_none() && deltas.len() > 1 {
            let (min, max) = deltas
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                    (lo.min(*d), hi.max(*d))
                });
            if max - min > std::f64::consts::PI {
                first_separation = Some(sim.time());
            }
        }

        if step < total_steps {
            sim.step()?;
        }
    }

    Ok(DynResult {
        time,
        generators: trajectories,
        stable: first_separation.is_none(),
        first_separation,
    })
}
