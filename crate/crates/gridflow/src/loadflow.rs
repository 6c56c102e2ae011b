//! Newton-Raphson AC loadflow.
//!
//! The canonical *mutable* algorithm of the engine: it iteratively adjusts
//! bus voltage magnitudes and angles to drive the power mismatch to zero,
//! and on convergence writes the solution back into the model. On
//! non-convergence the model is left byte-identical to its entry state and
//! the result reports `converged = false` (retries stay safe).
//!
//! Formulation: polar coordinates with the full analytic Jacobian rebuilt
//! every iteration. The mismatch vector is ordered all ΔP (non-slack buses
//! in model order) then all ΔQ (PQ buses in model order); the unknown
//! vector pairs it as all θ then all V. [`mismatch_jacobian`] exposes
//! ∂mismatch/∂unknowns so tests can difference [`compute_mismatch`]
//! directly against it.
//!
//! Buses in energized islands (those holding exactly one in-service slack)
//! are solved simultaneously; buses in unenergized islands keep their input
//! state and appear in results with zero injection. The slack angle is
//! fixed at its input value, not forced to zero.
//!
//! Reactive limits: with [`LoadflowConfig::enforce_q_limits`] on, PV buses
//! whose solved reactive generation leaves `[q_min, q_max]` are switched to
//! PQ at the violated limit after each converged pass, and the solve
//! repeats warm-started until no switch occurs. Switching is one-way within
//! a single call.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BusKind, Layer, NetworkModel};
use crate::sparse::{SparseMatrix, TripletMatrix};
use crate::topology::{branch_stamps, build_ybus_filtered, find_islands, AdmittanceMatrix};

/// Solver configuration. Defaults: tolerance 1e-8 pu, 50 iterations, flat
/// start, Q-limits not enforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadflowConfig {
    /// Convergence threshold on the worst mismatch entry (pu).
    pub tolerance: f64,
    /// Newton iteration cap per solve pass.
    pub max_iterations: usize,
    /// Start from 1.0 pu / slack angle instead of the model's current state.
    pub flat_start: bool,
    /// Enforce PV-bus reactive limits by PV→PQ switching.
    pub enforce_q_limits: bool,
}

impl Default for LoadflowConfig {
    fn default() -> Self {
        LoadflowConfig {
            tolerance: 1e-8,
            max_iterations: 50,
            flat_start: true,
            enforce_q_limits: false,
        }
    }
}

/// Solved state of one bus (all buses appear, in model order).
#[derive(Debug, Clone, PartialEq)]
pub struct BusSolution {
    pub bus: String,
    pub v_mag: f64,
    pub v_ang: f64,
    /// Net calculated active injection (pu); zero for unsolved buses.
    pub p: f64,
    /// Net calculated reactive injection (pu); zero for unsolved buses.
    pub q: f64,
}

/// Generation absorbed by an island's slack bus.
#[derive(Debug, Clone, PartialEq)]
pub struct SlackInjection {
    pub bus: String,
    pub gen_p: f64,
    pub gen_q: f64,
}

/// Complex power entering one branch from each terminal (pu).
#[derive(Debug, Clone, PartialEq)]
pub struct BranchFlow {
    pub branch: String,
    pub s_from: Complex64,
    pub s_to: Complex64,
}

impl BranchFlow {
    /// Complex power dissipated in the branch (positive real part = loss).
    pub fn loss(&self) -> Complex64 {
        self.s_from + self.s_to
    }
}

/// Outcome of a Newton-Raphson solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadflowResult {
    pub converged: bool,
    /// Newton steps taken (summed over Q-limit passes).
    pub iterations: usize,
    /// Worst mismatch entry at exit (pu).
    pub max_mismatch: f64,
    /// Worst mismatch after each iteration, oldest first.
    pub mismatch_history: Vec<f64>,
    /// Every bus in model order.
    pub buses: Vec<BusSolution>,
    /// Slack generation per energized island, in bus order.
    pub slack: Vec<SlackInjection>,
    /// Every branch in model order.
    pub branch_flows: Vec<BranchFlow>,
    /// PV buses switched to PQ by Q-limit enforcement.
    pub q_limited: Vec<String>,
}

/// Which unknown sits at which position: first angles (non-slack buses in
/// model order), then magnitudes (PQ buses in model order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLayout {
    pub angles: Vec<String>,
    pub magnitudes: Vec<String>,
}

/// Solver context over the participating (energized-island) buses.
struct Context {
    y: AdmittanceMatrix,
    diag: Vec<Complex64>,
    kind: Vec<BusKind>,
    p_spec: Vec<f64>,
    q_spec: Vec<f64>,
    load_p: Vec<f64>,
    load_q: Vec<f64>,
    q_lim: Vec<(Option<f64>, Option<f64>)>,
    /// Magnitude setpoint (input v_mag) per dense bus.
    v_sched: Vec<f64>,
    /// Input angle of the island's slack bus, per dense bus.
    ang_ref: Vec<f64>,
    ang_pos: Vec<Option<usize>>,
    vm_pos: Vec<Option<usize>>,
    n_ang: usize,
    n_vm: usize,
}

impl Context {
    fn dim(&self) -> usize {
        self.y.dim()
    }

    fn recompute_layout(&mut self) {
        self.ang_pos = vec![None; self.dim()];
        self.vm_pos = vec![None; self.dim()];
        let mut na = 0;
        let mut nv = 0;
        for i in 0..self.dim() {
            if self.kind[i] != BusKind::Slack {
                self.ang_pos[i] = Some(na);
                na += 1;
            }
            if self.kind[i] == BusKind::PQ {
                self.vm_pos[i] = Some(nv);
                nv += 1;
            }
        }
        self.n_ang = na;
        self.n_vm = nv;
    }
}

fn build_context(net: &NetworkModel) -> Result<Context> {
    net.require_layer(Layer::AcLoadflow)?;
    let islands = find_islands(net);
    if islands.energized_count() == 0 {
        return Err(Error::model(format!(
            "network {:?} has no energized island: a loadflow needs an in-service slack bus",
            net.id
        )));
    }
    // Exactly one slack per energized island.
    for island in islands.islands.iter().filter(|i| i.energized) {
        let slacks: Vec<&String> = island
            .buses
            .iter()
            .filter(|id| net.bus(id).unwrap().kind == BusKind::Slack)
            .collect();
        if slacks.len() > 1 {
            return Err(Error::model(format!(
                "island containing bus {:?} has {} slack buses; exactly one is required",
                island.buses[0],
                slacks.len()
            )));
        }
    }

    // Participating buses: members of energized islands. Also capture each
    // island's slack angle as the flat-start angle reference.
    let mut slack_angle_of = std::collections::HashMap::new();
    for island in islands.islands.iter().filter(|i| i.energized) {
        let slack = island
            .buses
            .iter()
            .find(|id| net.bus(id).unwrap().kind == BusKind::Slack)
            .unwrap();
        let ang = net.bus(slack).unwrap().v_ang;
        for id in &island.buses {
            slack_angle_of.insert(id.clone(), ang);
        }
    }

    let y = build_ybus_filtered(net, |b| slack_angle_of.contains_key(&b.id))?;
    let n = y.dim();
    let mut diag = vec![Complex64::new(0.0, 0.0); n];
    for (row, col, v) in y.matrix.iter() {
        if row == col {
            diag[row] += v;
        }
    }

    let mut ctx = Context {
        diag,
        kind: Vec::with_capacity(n),
        p_spec: Vec::with_capacity(n),
        q_spec: Vec::with_capacity(n),
        load_p: Vec::with_capacity(n),
        load_q: Vec::with_capacity(n),
        q_lim: Vec::with_capacity(n),
        v_sched: Vec::with_capacity(n),
        ang_ref: Vec::with_capacity(n),
        ang_pos: Vec::new(),
        vm_pos: Vec::new(),
        n_ang: 0,
        n_vm: 0,
        y,
    };
    for k in 0..n {
        let bus = &net.buses[ctx.y.index.model_pos(k)];
        ctx.kind.push(bus.kind);
        let (p, q) = bus.injection();
        ctx.p_spec.push(p);
        ctx.q_spec.push(q);
        ctx.load_p.push(bus.load_p);
        ctx.load_q.push(bus.load_q);
        ctx.q_lim.push((bus.q_min, bus.q_max));
        ctx.v_sched.push(bus.v_mag);
        ctx.ang_ref.push(slack_angle_of[&bus.id]);
    }
    ctx.recompute_layout();
    Ok(ctx)
}

/// Calculated P and Q injections at every participating bus for the given
/// voltage state.
fn calc_injections(ctx: &Context, vm: &[f64], va: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = ctx.dim();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for (i, k, y) in ctx.y.matrix.iter() {
        let theta = va[i] - va[k];
        let (s, c) = theta.sin_cos();
        let vv = vm[i] * vm[k];
        p[i] += vv * (y.re * c + y.im * s);
        q[i] += vv * (y.re * s - y.im * c);
    }
    (p, q)
}

fn mismatch_vector(ctx: &Context, p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; ctx.n_ang + ctx.n_vm];
    for i in 0..ctx.dim() {
        if let Some(row) = ctx.ang_pos[i] {
            m[row] = ctx.p_spec[i] - p[i];
        }
        if let Some(row) = ctx.vm_pos[i] {
            m[ctx.n_ang + row] = ctx.q_spec[i] - q[i];
        }
    }
    m
}

/// ∂mismatch/∂unknowns at the given state. Since mismatch = spec − calc,
/// every stamp is the negated injection sensitivity.
fn jacobian_matrix(ctx: &Context, vm: &[f64], va: &[f64], p: &[f64], q: &[f64]) -> SparseMatrix<f64> {
    let n_unknown = ctx.n_ang + ctx.n_vm;
    let mut j = TripletMatrix::new(n_unknown);
    for (i, k, y) in ctx.y.matrix.iter() {
        if i == k {
            continue;
        }
        let theta = va[i] - va[k];
        let (s, c) = theta.sin_cos();
        let gc_bs = y.re * c + y.im * s;
        let gs_bc = y.re * s - y.im * c;
        // P_i row
        if let Some(row) = ctx.ang_pos[i] {
            if let Some(col) = ctx.ang_pos[k] {
                j.add(row, col, -(vm[i] * vm[k] * gs_bc));
            }
            if let Some(col) = ctx.vm_pos[k] {
                j.add(row, ctx.n_ang + col, -(vm[i] * gc_bs));
            }
        }
        // Q_i row
        if let Some(row) = ctx.vm_pos[i] {
            if let Some(col) = ctx.ang_pos[k] {
                j.add(ctx.n_ang + row, col, vm[i] * vm[k] * gc_bs);
            }
            if let Some(col) = ctx.vm_pos[k] {
                j.add(ctx.n_ang + row, ctx.n_ang + col, -(vm[i] * gs_bc));
            }
        }
    }
    for i in 0..ctx.dim() {
        let gii = ctx.diag[i].re;
        let bii = ctx.diag[i].im;
        if let Some(row) = ctx.ang_pos[i] {
            if let Some(col) = ctx.ang_pos[i] {
                j.add(row, col, -(-q[i] - bii * vm[i] * vm[i]));
            }
            if let Some(col) = ctx.vm_pos[i] {
                j.add(row, ctx.n_ang + col, -(p[i] / vm[i] + gii * vm[i]));
            }
        }
        if let Some(row) = ctx.vm_pos[i] {
            if let Some(col) = ctx.ang_pos[i] {
                j.add(ctx.n_ang + row, col, -(p[i] - gii * vm[i] * vm[i]));
            }
            if let Some(col) = ctx.vm_pos[i] {
                j.add(ctx.n_ang + row, ctx.n_ang + col, -(q[i] / vm[i] - bii * vm[i]));
            }
        }
    }
    j.to_csc()
}

/// Power mismatch of the model's current voltage state: all ΔP for
/// non-slack buses in model order, then all ΔQ for PQ buses in model order
/// (pu). Positive means scheduled injection exceeds what the network
/// absorbs at this state.
pub fn compute_mismatch(net: &NetworkModel) -> Result<Vec<f64>> {
    let ctx = build_context(net)?;
    let (vm, va) = state_from_model(net, &ctx);
    let (p, q) = calc_injections(&ctx, &vm, &va);
    Ok(mismatch_vector(&ctx, &p, &q))
}

/// The analytic Jacobian ∂mismatch/∂unknowns at the model's current state,
/// with unknowns ordered per [`unknown_layout`].
pub fn mismatch_jacobian(net: &NetworkModel) -> Result<SparseMatrix<f64>> {
    let ctx = build_context(net)?;
    let (vm, va) = state_from_model(net, &ctx);
    let (p, q) = calc_injections(&ctx, &vm, &va);
    Ok(jacobian_matrix(&ctx, &vm, &va, &p, &q))
}

/// Which bus's angle/magnitude each unknown position belongs to.
pub fn unknown_layout(net: &NetworkModel) -> Result<UnknownLayout> {
    let ctx = build_context(net)?;
    let mut angles = Vec::new();
    let mut magnitudes = Vec::new();
    for i in 0..ctx.dim() {
        if ctx.ang_pos[i].is_some() {
            angles.push(ctx.y.index.id_of(i).to_string());
        }
        if ctx.vm_pos[i].is_some() {
            magnitudes.push(ctx.y.index.id_of(i).to_string());
        }
    }
    Ok(UnknownLayout { angles, magnitudes })
}

fn state_from_model(net: &NetworkModel, ctx: &Context) -> (Vec<f64>, Vec<f64>) {
    let n = ctx.dim();
    let mut vm = Vec::with_capacity(n);
    let mut va = Vec::with_capacity(n);
    for k in 0..n {
        let bus = &net.buses[ctx.y.index.model_pos(k)];
        vm.push(bus.v_mag);
        va.push(bus.v_ang);
    }
    (vm, va)
}

/// One Newton pass: iterate until the mismatch drops below tolerance or the
/// iteration budget is spent. Returns (converged, steps, final mismatch).
fn newton_pass(
    ctx: &Context,
    cfg: &LoadflowConfig,
    vm: &mut [f64],
    va: &mut [f64],
    history: &mut Vec<f64>,
) -> Result<(bool, usize, f64)> {
    let mut steps = 0;
    loop {
        let (p, q) = calc_injections(ctx, vm, va);
        let m = mismatch_vector(ctx, &p, &q);
        let max_mm = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        history.push(max_mm);
        if max_mm <= cfg.tolerance {
            return Ok((true, steps, max_mm));
        }
        if steps >= cfg.max_iterations {
            return Ok((false, steps, max_mm));
        }
        let j = jacobian_matrix(ctx, vm, va, &p, &q);
        let fact = j.factorize().map_err(|e| match e {
            Error::Singular { pivot, .. } => Error::Singular {
                what: "Jacobian",
                pivot,
            },
            other => other,
        })?;
        let d = fact.solve(&m);
        for i in 0..ctx.dim() {
            if let Some(col) = ctx.ang_pos[i] {
                va[i] -= d[col];
            }
            if let Some(col) = ctx.vm_pos[i] {
                vm[i] -= d[ctx.n_ang + col];
            }
        }
        steps += 1;
    }
}

/// Full Newton-Raphson solve. On convergence the solved voltages are
/// written back into `net` (the mutable-algorithm contract); on
/// non-convergence `net` is untouched and the result's entry-state echo has
/// `converged = false`. Singular Jacobians and missing slacks are errors,
/// reported distinctly from plain non-convergence.
pub fn solve_newton_raphson(
    net: &mut NetworkModel,
    cfg: &LoadflowConfig,
) -> Result<LoadflowResult> {
    let mut ctx = build_context(net)?;
    let n = ctx.dim();

    let (mut vm, mut va) = if cfg.flat_start {
        let mut vm = Vec::with_capacity(n);
        let mut va = Vec::with_capacity(n);
        for i in 0..n {
            vm.push(if ctx.kind[i] == BusKind::PQ {
                1.0
            } else {
                ctx.v_sched[i]
            });
            va.push(ctx.ang_ref[i]);
        }
        (vm, va)
    } else {
        state_from_model(net, &ctx)
    };

    let mut history = Vec::new();
    let mut total_steps = 0;
    let mut q_limited: Vec<String> = Vec::new();
    let max_passes = 1 + ctx.kind.iter().filter(|k| **k == BusKind::PV).count();
    let mut converged = false;
    let mut final_mm = f64::INFINITY;

    for _pass in 0..max_passes {
        let (ok, steps, mm) = newton_pass(&ctx, cfg, &mut vm, &mut va, &mut history)?;
        total_steps += steps;
        final_mm = mm;
        if !ok {
            converged = false;
            break;
        }
        converged = true;
        if !cfg.enforce_q_limits {
            break;
        }
        // Check PV reactive output against limits; switch violators to PQ
        // pinned at the violated limit.
        let (_, q_calc) = calc_injections(&ctx, &vm, &va);
        let mut switched = false;
        for i in 0..n {
            if ctx.kind[i] != BusKind::PV {
                continue;
            }
            let gen_q = q_calc[i] + ctx.load_q[i];
            let (lo, hi) = ctx.q_lim[i];
            let pinned = match (lo, hi) {
                (_, Some(hi)) if gen_q > hi => Some(hi),
                (Some(lo), _) if gen_q < lo => Some(lo),
                _ => None,
            };
            if let Some(limit) = pinned {
                ctx.kind[i] = BusKind::PQ;
                ctx.q_spec[i] = limit - ctx.load_q[i];
                q_limited.push(ctx.y.index.id_of(i).to_string());
                switched = true;
            }
        }
        if !switched {
            break;
        }
        ctx.recompute_layout();
    }

    if converged {
        for i in 0..n {
            let pos = ctx.y.index.model_pos(i);
            net.buses[pos].v_mag = vm[i];
            net.buses[pos].v_ang = va[i];
        }
    }

    let (p_calc, q_calc) = if converged {
        calc_injections(&ctx, &vm, &va)
    } else {
        // Echo the untouched entry state.
        let (evm, eva) = state_from_model(net, &ctx);
        calc_injections(&ctx, &evm, &eva)
    };

    let mut buses = Vec::with_capacity(net.buses.len());
    for bus in &net.buses {
        match ctx.y.index.dense_of(&bus.id) {
            Some(i) => buses.push(BusSolution {
                bus: bus.id.clone(),
                v_mag: if converged { vm[i] } else { bus.v_mag },
                v_ang: if converged { va[i] } else { bus.v_ang },
                p: p_calc[i],
                q: q_calc[i],
            }),
            None => buses.push(BusSolution {
                bus: bus.id.clone(),
                v_mag: bus.v_mag,
                v_ang: bus.v_ang,
                p: 0.0,
                q: 0.0,
            }),
        }
    }

    let mut slack = Vec::new();
    for i in 0..n {
        if ctx.kind[i] == BusKind::Slack {
            slack.push(SlackInjection {
                bus: ctx.y.index.id_of(i).to_string(),
                gen_p: p_calc[i] + ctx.load_p[i],
                gen_q: q_calc[i] + ctx.load_q[i],
            });
        }
    }

    Ok(LoadflowResult {
        converged,
        iterations: total_steps,
        max_mismatch: final_mm,
        mismatch_history: history,
        branch_flows: branch_flows(net),
        buses,
        slack,
        q_limited,
    })
}

/// Complex power entering every branch from each terminal, using the same
/// stamps as the Y-bus so flows and injections can never disagree. Branches
/// that are out of service or touch a de-energized bus carry zero.
pub fn branch_flows(net: &NetworkModel) -> Vec<BranchFlow> {
    let islands = find_islands(net);
    let mut energized: std::collections::HashSet<&str> = std::collections::HashSet::new();
    for island in islands.islands.iter().filter(|i| i.energized) {
        for id in &island.buses {
            energized.insert(id);
        }
    }
    net.branches
        .iter()
        .map(|br| {
            let live = br.in_service
                && energized.contains(br.from_bus.as_str())
                && energized.contains(br.to_bus.as_str());
            if !live {
                return BranchFlow {
                    branch: br.id.clone(),
                    s_from: Complex64::new(0.0, 0.0),
                    s_to: Complex64::new(0.0, 0.0),
                };
            }
            let vf = {
                let b = net.bus(&br.from_bus).unwrap();
                Complex64::from_polar(b.v_mag, b.v_ang)
            };
            let vt = {
                let b = net.bus(&br.to_bus).unwrap();
                Complex64::from_polar(b.v_mag, b.v_ang)
            };
            let (yff, yft, ytf, ytt) =
                branch_stamps(br.r, br.x, br.b_total, br.tap, br.phase_shift);
            BranchFlow {
                branch: br.id.clone(),
                s_from: vf * (yff * vf + yft * vt).conj(),
                s_to: vt * (ytf * vf + ytt * vt).conj(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_network, BranchSpec, BusSpec, NetworkSpec};

    fn two_bus(load_p: f64, load_q: f64) -> NetworkModel {
        build_network(&NetworkSpec {
            id: "pair".into(),
            buses: vec![
                BusSpec {
                    kind: BusKind::Slack,
                    ..BusSpec::new("1")
                },
                BusSpec {
                    load_p,
                    load_q,
                    ..BusSpec::new("2")
                },
            ],
            branches: vec![BranchSpec::line("1", "2", 0.1)],
            ..NetworkSpec::default()
        })
        .unwrap()
        .extend_layer(Layer::AcLoadflow)
        .unwrap()
    }

    #[test]
    fn flat_start_mismatch_equals_negative_schedule() {
        let net = two_bus(1.0, 0.5);
        let m = compute_mismatch(&net).unwrap();
        assert_eq!(m.len(), 2);
        assert!((m[0] - (-1.0)).abs() < 1e-14);
        assert!((m[1] - (-0.5)).abs() < 1e-14);
    }

    #[test]
    fn pv_bus_contributes_p_row_only() {
        let mut net = two_bus(1.0, 0.5);
        net.bus_mut("2").unwrap().kind = BusKind::PV;
        let layout = unknown_layout(&net).unwrap();
        assert_eq!(layout.angles, ["2"]);
        assert!(layout.magnitudes.is_empty());
        assert_eq!(compute_mismatch(&net).unwrap().len(), 1);
    }

    #[test]
    fn zero_load_flat_start_converges_without_stepping() {
        let mut net = two_bus(0.0, 0.0);
        let res = solve_newton_raphson(&mut net, &LoadflowConfig::default()).unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 1);
        let b2 = net.bus("2").unwrap();
        assert!((b2.v_mag - 1.0).abs() < 1e-14);
        assert!(b2.v_ang.abs() < 1e-14);
    }

    #[test]
    fn two_bus_matches_closed_form() {
        // With V₂ = cos θ₂ forced by Q₂ = 0, the P equation reduces to
        // ½·sin 2θ₂ = −P·x, i.e. θ₂ = ½·asin(−0.1) ≈ −0.0500837 rad.
        let mut net = two_bus(0.5, 0.0);
        let res = solve_newton_raphson(&mut net, &LoadflowConfig::default()).unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 6);
        let theta = 0.5 * (-0.1f64).asin();
        let b2 = net.bus("2").unwrap();
        assert!((b2.v_ang - theta).abs() < 1e-9, "v_ang {}", b2.v_ang);
        assert!((b2.v_mag - theta.cos()).abs() < 1e-9, "v_mag {}", b2.v_mag);
        // Convenience spot values quoted to 6 decimals.
        assert!((b2.v_ang - (-0.050084)).abs() < 1e-6);
        assert!((b2.v_mag - 0.998746).abs() < 1e-6);
    }

    #[test]
    fn lossless_line_flow_and_reactive_loss() {
        let mut net = two_bus(0.5, 0.0);
        solve_newton_raphson(&mut net, &LoadflowConfig::default()).unwrap();
        let flows = branch_flows(&net);
        let f = &flows[0];
        assert!((f.s_from.re - 0.5).abs() < 1e-8, "P_from {}", f.s_from.re);
        // r = 0: active power is conserved end to end.
        assert!((f.s_from.re + f.s_to.re).abs() < 1e-10);
        // Reactive line loss X·|I|² with |I|² = 0.25/V₂².
        let v2 = net.bus("2").unwrap().v_mag;
        let q_loss_expected = 0.1 * 0.25 / (v2 * v2);
        assert!((f.loss().im - q_loss_expected).abs() < 1e-9);
        assert!((f.s_from.im - 0.025063).abs() < 1e-5);
    }

    #[test]
    fn slack_picks_up_load_and_line_reactive() {
        let mut net = two_bus(0.5, 0.0);
        let res = solve_newton_raphson(&mut net, &LoadflowConfig::default()).unwrap();
        assert_eq!(res.slack.len(), 1);
        assert_eq!(res.slack[0].bus, "1");
        assert!((res.slack[0].gen_p - 0.5).abs() < 1e-8);
        assert!((res.slack[0].gen_q - 0.025063).abs() < 1e-5);
    }

    #[test]
    fn solved_case_has_mismatch_below_tolerance() {
        let mut net = two_bus(0.5, 0.2);
        let cfg = LoadflowConfig::default();
        let res = solve_newton_raphson(&mut net, &cfg).unwrap();
        assert!(res.converged);
        let m = compute_mismatch(&net).unwrap();
        assert!(m.iter().all(|v| v.abs() <= cfg.tolerance));
    }

    #[test]
    fn warm_start_from_solution_takes_no_steps() {
        let mut net = two_bus(0.5, 0.2);
        solve_newton_raphson(&mut net, &LoadflowConfig::default()).unwrap();
        let res = solve_newton_raphson(
            &mut net,
            &LoadflowConfig {
                flat_start: false,
                ..LoadflowConfig::default()
            },
        )
        .unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn load_beyond_transfer_limit_fails_and_restores_model() {
        // The closed-form curve P = −10·cosθ·sinθ peaks at 5 pu; 6 pu has
        // no solution.
        let mut net = two_bus(6.0, 0.0);
        let before = net.clone();
        let cfg = LoadflowConfig {
            max_iterations: 30,
            ..LoadflowConfig::default()
        };
        let res = solve_newton_raphson(&mut net, &cfg).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 30);
        assert_eq!(net, before, "failed solve must leave the model untouched");
    }

    #[test]
    fn cancelling_parallel_branches_make_jacobian_singular() {
        let mut spec = NetworkSpec {
            id: "cancel".into(),
            buses: vec![
                BusSpec {
                    kind: BusKind::Slack,
                    ..BusSpec::new("1")
                },
                BusSpec {
                    load_p: 0.1,
                    ..BusSpec::new("2")
                },
            ],
            branches: vec![
                BranchSpec::line("1", "2", 0.1),
                BranchSpec::line("1", "2", -0.1),
            ],
            ..NetworkSpec::default()
        };
        spec.branches[1].id = "anti".into();
        let mut net = build_network(&spec)
            .unwrap()
            .extend_layer(Layer::AcLoadflow)
            .unwrap();
        match solve_newton_raphson(&mut net, &LoadflowConfig::default()) {
            Err(Error::Singular { what, .. }) => assert_eq!(what, "Jacobian"),
            other => panic!("expected singular Jacobian, got {other:?}"),
        }
    }

    #[test]
    fn missing_slack_is_an_error() {
        let mut net = two_bus(0.5, 0.0);
        net.bus_mut("1").unwrap().kind = BusKind::PQ;
        let err = solve_newton_raphson(&mut net, &LoadflowConfig::default()).unwrap_err();
        assert!(err.to_string().contains("slack"), "got: {err}");
    }

    #[test]
    fn two_slacks_in_one_island_are_rejected() {
        let mut net = two_bus(0.5, 0.0);
        net.bus_mut("2").unwrap().kind = BusKind::Slack;
        let err = solve_newton_raphson(&mut net, &LoadflowConfig::default()).unwrap_err();
        assert!(err.to_string().contains("exactly one"), "got: {err}");
    }

    #[test]
    fn disjoint_energized_islands_solve_together() {
        let mut net = build_network(&NetworkSpec {
            id: "twin".into(),
            buses: vec![
                BusSpec {
                    kind: BusKind::Slack,
                    ..BusSpec::new("a1")
                },
                BusSpec {
                    load_p: 0.5,
                    ..BusSpec::new("a2")
                },
                BusSpec {
                    kind: BusKind::Slack,
                    v_ang: 0.3,
                    ..BusSpec::new("b1")
                },
                BusSpec {
                    load_p: 0.2,
                    ..BusSpec::new("b2")
                },
                BusSpec {
                    v_mag: 0.77,
                    ..BusSpec::new("dead")
                },
            ],
            branches: vec![
                BranchSpec::line("a1", "a2", 0.1),
                BranchSpec::line("b1", "b2", 0.1),
            ],
            ..NetworkSpec::default()
        })
        .unwrap()
        .extend_layer(Layer::AcLoadflow)
        .unwrap();
        let res = solve_newton_raphson(&mut net, &LoadflowConfig::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.slack.len(), 2);
        // Island B keeps its own slack angle as reference.
        let b2 = net.bus("b2").unwrap();
        assert!(b2.v_ang < 0.3 && b2.v_ang > 0.2, "angle {}", b2.v_ang);
        // The bus outside any energized island is untouched and unsolved.
        assert_eq!(net.bus("dead").unwrap().v_mag, 0.77);
        let dead = res.buses.iter().find(|b| b.bus == "dead").unwrap();
        assert_eq!((dead.p, dead.q), (0.0, 0.0));
    }

    #[test]
    fn mismatch_shrinks_monotonically_near_the_solution() {
        let mut net = two_bus(2.0, 1.0);
        let res = solve_newton_raphson(&mut net, &LoadflowConfig::default()).unwrap();
        assert!(res.converged);
        let h = &res.mismatch_history;
        assert!(h.len() >= 3, "want at least 3 recorded mismatches");
        for w in h[h.len() - 3..].windows(2) {
            assert!(w[1] < w[0], "history not decreasing at the tail: {h:?}");
        }
    }

    #[test]
    fn power_balance_at_convergence() {
        let mut net = build_network(&NetworkSpec {
            id: "ring".into(),
            buses: vec![
                BusSpec {
                    kind: BusKind::Slack,
                    ..BusSpec::new("1")
                },
                BusSpec {
                    load_p: 0.9,
                    load_q: 0.3,
                    ..BusSpec::new("2")
                },
                BusSpec {
                    kind: BusKind::PV,
                    gen_p: 0.4,
                    v_mag: 1.02,
                    ..BusSpec::new("3")
                },
                BusSpec {
                    load_p: 0.35,
                    load_q: 0.1,
                    ..BusSpec::new("4")
                },
            ],
            branches: vec![
                BranchSpec {
                    r: 0.02,
                    ..BranchSpec::line("1", "2", 0.08)
                },
                BranchSpec {
                    r: 0.03,
                    ..BranchSpec::line("2", "3", 0.1)
                },
                BranchSpec {
                    r: 0.01,
                    ..BranchSpec::line("3", "4", 0.06)
                },
                BranchSpec {
                    r: 0.02,
                    ..BranchSpec::line("4", "1", 0.09)
                },
            ],
            ..NetworkSpec::default()
        })
        .unwrap()
        .extend_layer(Layer::AcLoadflow)
        .unwrap();
        let cfg = LoadflowConfig::default();
        let res = solve_newton_raphson(&mut net, &cfg).unwrap();
        assert!(res.converged);
        let gen_p: f64 =
            res.slack[0].gen_p + 0.4; // slack + the PV machine
        let load_p = 0.9 + 0.35;
        let loss_p: f64 = res.branch_flows.iter().map(|f| f.loss().re).sum();
        assert!(
            (gen_p - load_p - loss_p).abs() <= 10.0 * cfg.tolerance,
            "P balance off by {}",
            gen_p - load_p - loss_p
        );
        // Reactive balance: slack + PV reactive output vs load + line loss.
        let pv = res.buses.iter().find(|b| b.bus == "3").unwrap();
        let gen_q = res.slack[0].gen_q + pv.q; // PV bus has no load
        let load_q = 0.3 + 0.1;
        let loss_q: f64 = res.branch_flows.iter().map(|f| f.loss().im).sum();
        assert!(
            (gen_q - load_q - loss_q).abs() <= 10.0 * cfg.tolerance,
            "Q balance off by {}",
            gen_q - load_q - loss_q
        );
    }

    #[test]
    fn injection_sum_equals_losses_even_with_shunts() {
        let mut net = two_bus(0.5, 0.2);
        net.bus_mut("2").unwrap().shunt_b = 0.19;
        let res = solve_newton_raphson(&mut net, &LoadflowConfig::default()).unwrap();
        assert!(res.converged);
        // Net injections cover branch losses plus shunt draw.
        let inj: Complex64 = res
            .buses
            .iter()
            .map(|b| Complex64::new(b.p, b.q))
            .sum();
        let branch_loss: Complex64 = res.branch_flows.iter().map(|f| f.loss()).sum();
        let v2 = net.bus("2").unwrap().v_mag;
        let shunt_draw = Complex64::new(0.0, -(0.19 * v2 * v2));
        assert!((inj - branch_loss - shunt_draw).norm() < 1e-9);
    }

    #[test]
    fn q_limits_switch_pv_to_pq_at_the_ceiling() {
        let spec = NetworkSpec {
            id: "qlim".into(),
            buses: vec![
                BusSpec {
                    kind: BusKind::Slack,
                    ..BusSpec::new("1")
                },
                BusSpec {
                    kind: BusKind::PV,
                    gen_p: 0.3,
                    v_mag: 1.08,
                    q_min: Some(-0.05),
                    q_max: Some(0.05),
                    ..BusSpec::new("2")
                },
                BusSpec {
                    load_p: 0.8,
                    load_q: 0.4,
                    ..BusSpec::new("3")
                },
            ],
            branches: vec![
                BranchSpec {
                    r: 0.02,
                    ..BranchSpec::line("1", "2", 0.1)
                },
                BranchSpec {
                    r: 0.02,
                    ..BranchSpec::line("2", "3", 0.1)
                },
            ],
            ..NetworkSpec::default()
        };
        // Unenforced: the PV bus holds its setpoint and overproduces.
        let mut free = build_network(&spec)
            .unwrap()
            .extend_layer(Layer::AcLoadflow)
            .unwrap();
        let res_free = solve_newton_raphson(&mut free, &LoadflowConfig::default()).unwrap();
        assert!(res_free.converged);
        let pv_free = res_free.buses.iter().find(|b| b.bus == "2").unwrap();
        assert!(pv_free.q > 0.05, "test needs a binding limit, q = {}", pv_free.q);
        assert_eq!(free.bus("2").unwrap().v_mag, 1.08);

        // Enforced: switched to PQ pinned at q_max; the magnitude sags.
        let mut lim = build_network(&spec)
            .unwrap()
            .extend_layer(Layer::AcLoadflow)
            .unwrap();
        let res_lim = solve_newton_raphson(
            &mut lim,
            &LoadflowConfig {
                enforce_q_limits: true,
                ..LoadflowConfig::default()
            },
        )
        .unwrap();
        assert!(res_lim.converged);
        assert_eq!(res_lim.q_limited, ["2"]);
        let pv_lim = res_lim.buses.iter().find(|b| b.bus == "2").unwrap();
        assert!((pv_lim.q - 0.05).abs() < 1e-8, "pinned q = {}", pv_lim.q);
        assert!(lim.bus("2").unwrap().v_mag < 1.08);
    }

    #[test]
    fn out_of_service_branch_carries_zero_flow() {
        let mut net = two_bus(0.0, 0.0);
        net.branches[0].in_service = false;
        let flows = branch_flows(&net);
        assert_eq!(flows[0].s_from, Complex64::new(0.0, 0.0));
        assert_eq!(flows[0].s_to, Complex64::new(0.0, 0.0));
    }
}
