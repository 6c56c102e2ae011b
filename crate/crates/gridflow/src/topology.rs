//! Topology processing and network matrix assembly.
//!
//! Three building blocks every electrical analysis shares:
//!
//! * [`find_islands`] — connected components over in-service buses and
//!   branches, with each island marked energized when it contains an
//!   in-service slack bus;
//! * [`build_ybus`] — the complex node-admittance matrix, I = Y·V;
//! * [`build_bprime`] — the real susceptance matrix of the DC power-flow
//!   linearization (pure 1/x, taps and resistance ignored).
//!
//! # Branch stamping convention
//!
//! For a branch with series admittance y = 1/(r + jx), total charging
//! b_total, from-side tap t and phase shift θ:
//!
//! ```text
//! Yff += (y + j·b_total/2)/t²      Yft += −y/(t·e^{−jθ})
//! Ytt +=  y + j·b_total/2          Ytf += −y/(t·e^{+jθ})
//! ```
//!
//! Bus shunts add g + jb to their diagonal. Out-of-service elements (and
//! everything touching a de-energized bus) contribute nothing. Taps and
//! shifts act on the from side only.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Bus, BusKind, Layer, NetworkModel, Z_MIN};
use crate::sparse::{SparseMatrix, TripletMatrix};

/// Mapping between bus ids and the dense row/column indices of a network
/// matrix. Dense order follows model insertion order of the retained buses.
#[derive(Debug, Clone)]
pub struct BusIndex {
    ids: Vec<String>,
    /// Dense index -> position in `net.buses`.
    model_pos: Vec<usize>,
    map: HashMap<String, usize>,
}

impl BusIndex {
    /// Index over the buses `pred` retains, in model order.
    pub fn filtered(net: &NetworkModel, pred: impl Fn(&Bus) -> bool) -> BusIndex {
        let mut ids = Vec::new();
        let mut model_pos = Vec::new();
        let mut map = HashMap::new();
        for (pos, bus) in net.buses.iter().enumerate() {
            if pred(bus) {
                map.insert(bus.id.clone(), ids.len());
                ids.push(bus.id.clone());
                model_pos.push(pos);
            }
        }
        BusIndex {
            ids,
            model_pos,
            map,
        }
    }

    /// Index over all electrically present buses.
    pub fn energizable(net: &NetworkModel) -> BusIndex {
        Self::filtered(net, Bus::is_energizable)
    }

    pub fn dim(&self) -> usize {
        self.ids.len()
    }

    /// Dense index of a bus id, if retained.
    pub fn dense_of(&self, id: &str) -> Option<usize> {
        self.map.get(id).copied()
    }

    /// Bus id at a dense index.
    pub fn id_of(&self, dense: usize) -> &str {
        &self.ids[dense]
    }

    /// Position in `net.buses` of the bus at a dense index.
    pub fn model_pos(&self, dense: usize) -> usize {
        self.model_pos[dense]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// One connected component of the in-service network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Island {
    /// Member bus ids in model insertion order.
    pub buses: Vec<String>,
    /// Whether the island contains an in-service slack bus.
    pub energized: bool,
}

/// Partition of the electrically present buses into connected components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IslandPartition {
    /// Islands ordered by their smallest contained bus id.
    pub islands: Vec<Island>,
}

impl IslandPartition {
    /// The island containing `bus_id`, if any.
    pub fn island_containing(&self, bus_id: &str) -> Option<&Island> {
        self.islands
            .iter()
            .find(|i| i.buses.iter().any(|b| b == bus_id))
    }

    /// Number of energized islands.
    pub fn energized_count(&self) -> usize {
        self.islands.iter().filter(|i| i.energized).count()
    }
}

/// Connected components over in-service buses and in-service branches.
/// Branches touching a de-energized bus connect nothing.
pub fn find_islands(net: &NetworkModel) -> IslandPartition {
    let index = BusIndex::energizable(net);
    let n = index.dim();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for branch in net.branches.iter().filter(|b| b.in_service) {
        if let (Some(f), Some(t)) = (
            index.dense_of(&branch.from_bus),
            index.dense_of(&branch.to_bus),
        ) {
            adjacency[f].push(t);
            adjacency[t].push(f);
        }
    }

    let mut component = vec![usize::MAX; n];
    let mut islands: Vec<Island> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let island_no = islands.len();
        let mut members = Vec::new();
        component[start] = island_no;
        stack.push(start);
        while let Some(node) = stack.pop() {
            members.push(node);
            for &next in &adjacency[node] {
                if component[next] == usize::MAX {
                    component[next] = island_no;
                    stack.push(next);
                }
            }
        }
        members.sort_unstable(); // dense order == model insertion order
        let energized = members.iter().any(|&k| {
            let bus = &net.buses[index.model_pos(k)];
            bus.kind == BusKind::Slack
        });
        islands.push(Island {
            buses: members.iter().map(|&k| index.id_of(k).to_string()).collect(),
            energized,
        });
    }
    islands.sort_by(|a, b| a.buses.iter().min().cmp(&b.buses.iter().min()));
    IslandPartition { islands }
}

/// The complex node-admittance matrix over electrically present buses.
#[derive(Debug, Clone)]
pub struct AdmittanceMatrix {
    pub matrix: SparseMatrix<Complex64>,
    pub index: BusIndex,
}

impl AdmittanceMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Entry by bus ids (zero when absent or either bus is not retained).
    pub fn get(&self, from: &str, to: &str) -> Complex64 {
        match (self.index.dense_of(from), self.index.dense_of(to)) {
            (Some(i), Some(j)) => self.matrix.get(i, j),
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// Coordinate-format text dump (`row col re im` per line, column-major
    /// order) for debugging.
    pub fn dump_coordinates(&self) -> String {
        let mut out = String::new();
        for (row, col, v) in self.matrix.iter() {
            out.push_str(&format!("{} {} {} {}\n", row, col, v.re, v.im));
        }
        out
    }
}

/// The four stamps one branch contributes to the admittance matrix, under
/// the convention in the module docs. Shared by Y-bus assembly and branch
/// flow extraction so the two can never drift apart.
pub fn branch_stamps(
    r: f64,
    x: f64,
    b_total: f64,
    tap: f64,
    phase_shift: f64,
) -> (Complex64, Complex64, Complex64, Complex64) {
    let y = Complex64::new(1.0, 0.0) / Complex64::new(r, x);
    let ysh = Complex64::new(0.0, b_total / 2.0);
    let shift = Complex64::from_polar(1.0, phase_shift);
    let yff = (y + ysh) / (tap * tap);
    let ytt = y + ysh;
    let yft = -y / (tap * shift.conj());
    let ytf = -y / (tap * shift);
    (yff, yft, ytf, ytt)
}

/// Assemble the node-admittance matrix over all electrically present buses.
pub fn build_ybus(net: &NetworkModel) -> Result<AdmittanceMatrix> {
    net.require_layer(Layer::AcLoadflow)?;
    build_ybus_filtered(net, Bus::is_energizable)
}

/// Y-bus over the buses `keep` retains. Branch diagonal stamps at a kept
/// endpoint survive even when the other endpoint is dropped — dropping a
/// bus grounds it, which is exactly what fault analysis wants when it
/// removes slack buses.
pub(crate) fn build_ybus_filtered(
    net: &NetworkModel,
    keep: impl Fn(&Bus) -> bool,
) -> Result<AdmittanceMatrix> {
    let index = BusIndex::filtered(net, |b| b.is_energizable() && keep(b));
    let energizable = BusIndex::energizable(net);
    let mut triplets = TripletMatrix::new(index.dim());

    for branch in net.branches.iter().filter(|b| b.in_service) {
        // A branch to a de-energized bus carries nothing at all; a branch to
        // a dropped-but-energizable bus still loads its kept endpoint.
        if energizable.dense_of(&branch.from_bus).is_none()
            || energizable.dense_of(&branch.to_bus).is_none()
        {
            continue;
        }
        if branch.z_mag() < Z_MIN {
            return Err(Error::model(format!(
                "branch {:?} series impedance is below the {Z_MIN:e} pu minimum",
                branch.id
            )));
        }
        let (yff, yft, ytf, ytt) =
            branch_stamps(branch.r, branch.x, branch.b_total, branch.tap, branch.phase_shift);
        let f = index.dense_of(&branch.from_bus);
        let t = index.dense_of(&branch.to_bus);
        if let Some(f) = f {
            triplets.add(f, f, yff);
        }
        if let Some(t) = t {
            triplets.add(t, t, ytt);
        }
        if let (Some(f), Some(t)) = (f, t) {
            triplets.add(f, t, yft);
            triplets.add(t, f, ytf);
        }
    }
    for k in 0..index.dim() {
        let bus = &net.buses[index.model_pos(k)];
        if bus.shunt_g != 0.0 || bus.shunt_b != 0.0 {
            triplets.add(k, k, Complex64::new(bus.shunt_g, bus.shunt_b));
        }
    }
    Ok(AdmittanceMatrix {
        matrix: triplets.to_csc(),
        index,
    })
}

/// The real B′ matrix of the DC linearization over electrically present
/// buses, optionally with slack rows/columns removed.
#[derive(Debug, Clone)]
pub struct BPrimeMatrix {
    pub matrix: SparseMatrix<f64>,
    pub index: BusIndex,
}

/// Assemble B′: off-diagonal −1/x per in-service branch, diagonals the sum
/// of incident 1/x; resistance, charging, and taps are ignored. With
/// `slack_removed` the rows/columns of slack buses are absent (the usual
/// form for solving B′·θ = P with θ_slack = 0).
pub fn build_bprime(net: &NetworkModel, slack_removed: bool) -> Result<BPrimeMatrix> {
    build_bprime_filtered(net, |b| !(slack_removed && b.kind == BusKind::Slack))
}

/// B′ over the buses `keep` retains (see [`build_bprime`]). Contingency
/// screening keeps only energized-island non-slack buses so the matrix is
/// nonsingular even when the model carries de-energized islands.
pub(crate) fn build_bprime_filtered(
    net: &NetworkModel,
    keep: impl Fn(&Bus) -> bool,
) -> Result<BPrimeMatrix> {
    net.require_layer(Layer::AcLoadflow)?;
    let index = BusIndex::filtered(net, |b| b.is_energizable() && keep(b));
    let energizable = BusIndex::energizable(net);
    let mut triplets = TripletMatrix::new(index.dim());
    for branch in net.branches.iter().filter(|b| b.in_service) {
        if energizable.dense_of(&branch.from_bus).is_none()
            || energizable.dense_of(&branch.to_bus).is_none()
        {
            continue;
        }
        if branch.x == 0.0 {
            return Err(Error::model(format!(
                "branch {:?} has zero reactance; the DC model needs x != 0",
                branch.id
            )));
        }
        let y = 1.0 / branch.x;
        let f = index.dense_of(&branch.from_bus);
        let t = index.dense_of(&branch.to_bus);
        if let Some(f) = f {
            triplets.add(f, f, y);
        }
        if let Some(t) = t {
            triplets.add(t, t, y);
        }
        if let (Some(f), Some(t)) = (f, t) {
            triplets.add(f, t, -y);
            triplets.add(t, f, -y);
        }
    }
    Ok(BPrimeMatrix {
        matrix: triplets.to_csc(),
        index,
    })
}
