//! The layered bus/branch object model.
//!
//! A [`NetworkModel`] owns ordered collections of [`Bus`] and [`Branch`]
//! objects plus zero or more nested child networks ([`ChildLink`]), and every
//! analysis in the crate works against this one type. Models are built from a
//! declarative [`NetworkSpec`] via [`build_network`], loaded by the adapters
//! in [`crate::cdf`] / [`crate::interchange`], or generated by
//! [`crate::synthetic`].
//!
//! # Layers
//!
//! A model carries a [`Layer`] tag ordered `Topology < AcLoadflow <
//! AcShortCircuit < Dynamics`. All field groups exist on the types at every
//! layer; the tag records how much of the data is meaningful and gates which
//! analyses may run (loadflow refuses a `Topology`-layer model, for
//! instance). [`NetworkModel::extend_layer`] raises the tag while preserving
//! every lower-layer field untouched, so data prepared once is reused by
//! every analysis above it.
//!
//! # Mutable vs. immutable analyses
//!
//! Analyses declare one of two contracts. *Mutable* ones (the Newton-Raphson
//! loadflow) take `&mut NetworkModel`, write their solution back into the
//! model, and restore the entry state on failure. *Immutable* ones
//! (contingency screening) take `&NetworkModel` and are safe to share the
//! model across worker threads by reference. The type system enforces the
//! split: at most one writer, any number of concurrent readers.
//!
//! # Service status
//!
//! `in_service` is the switching flag on both buses and branches. A bus of
//! kind [`BusKind::Isolated`] is treated exactly like an out-of-service bus
//! by every analysis: it contributes nothing to the admittance matrix, joins
//! no island, and receives no loadflow equations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum series impedance magnitude (pu) for an in-service branch.
/// Branches below this are rejected at validation rather than silently
/// merged into their endpoints.
pub const Z_MIN: f64 = 1e-8;

/// Model layer tag, ordered by how much per-element data is meaningful.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub enum Layer {
    /// Connectivity only: ids, endpoints, service status.
    #[default]
    Topology,
    /// Adds impedances, injections, and a voltage solution slot.
    AcLoadflow,
    /// Adds balanced fault analysis readiness (same data, stricter intent).
    AcShortCircuit,
    /// Adds time-domain simulation readiness.
    Dynamics,
}

impl std::fmt::Display for Layer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Layer::Topology => "Topology",
            Layer::AcLoadflow => "AcLoadflow",
            Layer::AcShortCircuit => "AcShortCircuit",
            Layer::Dynamics => "Dynamics",
        };
        f.write_str(name)
    }
}

/// Loadflow classification of a bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum BusKind {
    /// Angle and magnitude reference; absorbs the island power imbalance.
    Slack,
    /// Fixed active injection and voltage magnitude.
    #[allow(clippy::upper_case_acronyms)]
    PV,
    /// Fixed active and reactive injection.
    #[default]
    #[allow(clippy::upper_case_acronyms)]
    PQ,
    /// Electrically absent; treated like an out-of-service bus everywhere.
    Isolated,
}

/// A network node. Power quantities are in per-unit on the system MVA base;
/// angles are radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: String,
    pub name: String,
    /// Nominal voltage in kV; 0.0 when the source data does not carry one.
    pub base_kv: f64,
    pub kind: BusKind,
    /// Voltage magnitude (pu). Holds the solved value after a loadflow.
    pub v_mag: f64,
    /// Voltage angle (rad). Holds the solved value after a loadflow.
    pub v_ang: f64,
    pub gen_p: f64,
    pub gen_q: f64,
    pub load_p: f64,
    pub load_q: f64,
    /// Shunt admittance to ground (pu on system base), stamped on the
    /// Y-bus diagonal.
    pub shunt_g: f64,
    pub shunt_b: f64,
    pub area: i32,
    pub in_service: bool,
    /// Reactive limits (pu) used only when Q-limit enforcement is switched
    /// on in the loadflow config. `None` means unlimited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_max: Option<f64>,
}

impl Bus {
    /// Whether the bus takes part in electrical analysis: in service and not
    /// of kind [`BusKind::Isolated`].
    pub fn is_energizable(&self) -> bool {
        self.in_service && self.kind != BusKind::Isolated
    }

    /// Net scheduled complex injection (generation minus load), pu.
    pub fn injection(&self) -> (f64, f64) {
        (self.gen_p - self.load_p, self.gen_q - self.load_q)
    }
}

/// Series element classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum BranchKind {
    /// Plain line: tap fixed at 1.0, no phase shift.
    #[default]
    Line,
    /// Two-winding transformer; tap and phase shift act on the from side.
    Transformer,
}

/// A series element between two buses. Impedances in pu on the system base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub kind: BranchKind,
    pub r: f64,
    pub x: f64,
    /// Total line-charging susceptance (pu); half is stamped at each end.
    pub b_total: f64,
    /// Off-nominal turns ratio on the from side (pu); 1.0 for lines.
    pub tap: f64,
    /// Phase shift on the from side (rad); 0.0 for lines.
    pub phase_shift: f64,
    /// Thermal rating (pu apparent power); 0.0 means unlimited.
    pub rating: f64,
    pub in_service: bool,
}

impl Branch {
    /// Series impedance magnitude (pu).
    pub fn z_mag(&self) -> f64 {
        self.r.hypot(self.x)
    }
}

/// Attachment of a child (distribution) network under a parent bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChildLink {
    /// Bus in the parent network the child hangs from.
    pub parent_bus: String,
    /// Feeder-head bus inside the child network.
    pub child_boundary_bus: String,
    pub child: NetworkModel,
}

/// The central layered network container. See the module docs for the layer
/// and mutability contracts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkModel {
    pub id: String,
    /// System MVA base all per-unit quantities refer to.
    pub base_mva: f64,
    /// Nominal frequency in Hz.
    pub frequency: f64,
    pub layer: Layer,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub child_links: Vec<ChildLink>,
}

impl NetworkModel {
    /// Position of a bus id in insertion order.
    pub fn bus_position(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    /// Position of a branch id in insertion order.
    pub fn branch_position(&self, id: &str) -> Option<usize> {
        self.branches.iter().position(|b| b.id == id)
    }

    pub fn bus(&self, id: &str) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    pub fn bus_mut(&mut self, id: &str) -> Option<&mut Bus> {
        self.buses.iter_mut().find(|b| b.id == id)
    }

    pub fn branch(&self, id: &str) -> Option<&Branch> {
        self.branches.iter().find(|b| b.id == id)
    }

    /// Error unless the model layer is at or above `required`.
    pub fn require_layer(&self, required: Layer) -> Result<()> {
        if self.layer >= required {
            Ok(())
        } else {
            Err(Error::LayerRequired {
                required: required.to_string(),
                current: self.layer.to_string(),
            })
        }
    }

    /// Raise the model to `target`, reusing all lower-layer data unchanged.
    /// Requesting the current layer is the identity; requesting a lower
    /// layer is an error (layers only extend, they never forget).
    pub fn extend_layer(mut self, target: Layer) -> Result<NetworkModel> {
        if target < self.layer {
            return Err(Error::model(format!(
                "cannot downgrade network {:?} from layer {} to {}",
                self.id, self.layer, target
            )));
        }
        self.layer = target;
        Ok(self)
    }

    /// Attach `child` under `bus_id` of this network, with `child_boundary`
    /// naming the feeder-head bus inside the child. Multiple children may
    /// share one parent bus. Fails if the attachment would nest a network
    /// inside itself (detected by network id along the descendant chain).
    pub fn attach_child(
        &mut self,
        bus_id: &str,
        child: NetworkModel,
        child_boundary: &str,
    ) -> Result<&ChildLink> {
        if self.bus_position(bus_id).is_none() {
            return Err(Error::UnknownBus(bus_id.to_string()));
        }
        if child.bus_position(child_boundary).is_none() {
            return Err(Error::UnknownBus(child_boundary.to_string()));
        }
        if child.contains_network_id(&self.id) {
            return Err(Error::model(format!(
                "attaching network {:?} under {:?} would nest a network inside itself",
                child.id, self.id
            )));
        }
        self.child_links.push(ChildLink {
            parent_bus: bus_id.to_string(),
            child_boundary_bus: child_boundary.to_string(),
            child,
        });
        Ok(self.child_links.last().unwrap())
    }

    /// Whether `id` names this network or any of its descendants.
    pub fn contains_network_id(&self, id: &str) -> bool {
        self.id == id
            || self
                .child_links
                .iter()
                .any(|l| l.child.contains_network_id(id))
    }

    /// Depth-first walk over this network and all descendants.
    pub fn for_each_network<'a>(&'a self, f: &mut impl FnMut(&'a NetworkModel)) {
        f(self);
        for link in &self.child_links {
            link.child.for_each_network(f);
        }
    }

    /// Check every structural invariant of this network and its descendants:
    /// unique ids, resolvable endpoints, positive bases, branch impedance
    /// above [`Z_MIN`], line tap/shift fixed, acyclic nesting, and positive
    /// voltage magnitudes once the model carries a voltage solution.
    pub fn validate(&self) -> Result<()> {
        self.validate_inner(&mut Vec::new())
    }

    fn validate_inner<'a>(&'a self, ancestors: &mut Vec<&'a str>) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::model("network id must not be empty"));
        }
        if !(self.base_mva > 0.0) {
            return Err(Error::model(format!(
                "network {:?}: base_mva must be positive, got {}",
                self.id, self.base_mva
            )));
        }
        if !(self.frequency > 0.0) {
            return Err(Error::model(format!(
                "network {:?}: frequency must be positive, got {}",
                self.id, self.frequency
            )));
        }
        if ancestors.contains(&self.id.as_str()) {
            return Err(Error::model(format!(
                "network {:?} appears among its own descendants",
                self.id
            )));
        }

        let mut bus_ids = std::collections::HashSet::with_capacity(self.buses.len());
        for bus in &self.buses {
            if bus.id.is_empty() {
                return Err(Error::model(format!(
                    "network {:?}: bus id must not be empty",
                    self.id
                )));
            }
            if !bus_ids.insert(bus.id.as_str()) {
                return Err(Error::model(format!(
                    "network {:?}: duplicate bus id {:?}",
                    self.id, bus.id
                )));
            }
            if self.layer >= Layer::AcLoadflow && bus.is_energizable() && !(bus.v_mag > 0.0) {
                return Err(Error::model(format!(
                    "network {:?}: bus {:?} carries nonpositive voltage magnitude {}",
                    self.id, bus.id, bus.v_mag
                )));
            }
        }

        let mut branch_ids = std::collections::HashSet::with_capacity(self.branches.len());
        for branch in &self.branches {
            if branch.id.is_empty() {
                return Err(Error::model(format!(
                    "network {:?}: branch id must not be empty",
                    self.id
                )));
            }
            if !branch_ids.insert(branch.id.as_str()) {
                return Err(Error::model(format!(
                    "network {:?}: duplicate branch id {:?}",
                    self.id, branch.id
                )));
            }
            for endpoint in [&branch.from_bus, &branch.to_bus] {
                if !bus_ids.contains(endpoint.as_str()) {
                    return Err(Error::model(format!(
                        "network {:?}: branch {:?} references unknown bus {:?}",
                        self.id, branch.id, endpoint
                    )));
                }
            }
            if branch.from_bus == branch.to_bus {
                return Err(Error::model(format!(
                    "network {:?}: branch {:?} connects bus {:?} to itself",
                    self.id, branch.id, branch.from_bus
                )));
            }
            if !(branch.tap > 0.0) {
                return Err(Error::model(format!(
                    "network {:?}: branch {:?} has nonpositive tap {}",
                    self.id, branch.id, branch.tap
                )));
            }
            if branch.kind == BranchKind::Line
                && (branch.tap != 1.0 || branch.phase_shift != 0.0)
            {
                return Err(Error::model(format!(
                    "network {:?}: line {:?} must have tap 1.0 and zero phase shift \
                     (got tap {}, shift {})",
                    self.id, branch.id, branch.tap, branch.phase_shift
                )));
            }
            if branch.in_service && branch.z_mag() < Z_MIN {
                return Err(Error::model(format!(
                    "network {:?}: branch {:?} series impedance {:.3e} pu is below \
                     the {:.0e} pu minimum",
                    self.id,
                    branch.id,
                    branch.z_mag(),
                    Z_MIN
                )));
            }
        }

        ancestors.push(self.id.as_str());
        for link in &self.child_links {
            if !bus_ids.contains(link.parent_bus.as_str()) {
                return Err(Error::model(format!(
                    "network {:?}: child link references unknown parent bus {:?}",
                    self.id, link.parent_bus
                )));
            }
            if link.child.bus_position(&link.child_boundary_bus).is_none() {
                return Err(Error::model(format!(
                    "network {:?}: child {:?} has no boundary bus {:?}",
                    self.id, link.child.id, link.child_boundary_bus
                )));
            }
            link.child.validate_inner(ancestors)?;
        }
        ancestors.pop();
        Ok(())
    }
}

/// Declarative description of a bus for [`build_network`]. Only `id` is
/// required; everything else defaults to a disconnected-feeling blank (PQ
/// bus at 1.0 pu flat, in service, no injections).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BusSpec {
    pub id: String,
    /// Defaults to the id when left empty.
    pub name: String,
    pub base_kv: f64,
    pub kind: BusKind,
    pub v_mag: f64,
    pub v_ang: f64,
    pub gen_p: f64,
    pub gen_q: f64,
    pub load_p: f64,
    pub load_q: f64,
    pub shunt_g: f64,
    pub shunt_b: f64,
    pub area: i32,
    pub in_service: bool,
    pub q_min: Option<f64>,
    pub q_max: Option<f64>,
}

impl Default for BusSpec {
    fn default() -> Self {
        BusSpec {
            id: String::new(),
            name: String::new(),
            base_kv: 0.0,
            kind: BusKind::PQ,
            v_mag: 1.0,
            v_ang: 0.0,
            gen_p: 0.0,
            gen_q: 0.0,
            load_p: 0.0,
            load_q: 0.0,
            shunt_g: 0.0,
            shunt_b: 0.0,
            area: 1,
            in_service: true,
            q_min: None,
            q_max: None,
        }
    }
}

impl BusSpec {
    /// A blank in-service PQ bus named `id`.
    pub fn new(id: impl Into<String>) -> Self {
        BusSpec {
            id: id.into(),
            ..BusSpec::default()
        }
    }
}

/// Declarative description of a branch for [`build_network`]. An empty `id`
/// is auto-assigned `from-to` (with `#2`, `#3`, ... suffixes for parallels).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BranchSpec {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub kind: BranchKind,
    pub r: f64,
    pub x: f64,
    pub b_total: f64,
    pub tap: f64,
    pub phase_shift: f64,
    pub rating: f64,
    pub in_service: bool,
}

impl Default for BranchSpec {
    fn default() -> Self {
        BranchSpec {
            id: String::new(),
            from_bus: String::new(),
            to_bus: String::new(),
            kind: BranchKind::Line,
            r: 0.0,
            x: 0.0,
            b_total: 0.0,
            tap: 1.0,
            phase_shift: 0.0,
            rating: 0.0,
            in_service: true,
        }
    }
}

impl BranchSpec {
    /// A pure-reactance line between two buses.
    pub fn line(from: impl Into<String>, to: impl Into<String>, x: f64) -> Self {
        BranchSpec {
            from_bus: from.into(),
            to_bus: to.into(),
            x,
            ..BranchSpec::default()
        }
    }
}

/// Declarative child attachment for [`build_network`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChildSpec {
    /// Bus in the parent the child hangs from.
    pub parent_bus: String,
    /// Feeder-head bus inside the child.
    pub boundary_bus: String,
    pub network: NetworkSpec,
}

/// Declarative description of a whole network, nestable for T&D studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSpec {
    pub id: String,
    pub base_mva: f64,
    pub frequency: f64,
    pub buses: Vec<BusSpec>,
    pub branches: Vec<BranchSpec>,
    pub children: Vec<ChildSpec>,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            id: "net".to_string(),
            base_mva: 100.0,
            frequency: 60.0,
            buses: Vec::new(),
            branches: Vec::new(),
            children: Vec::new(),
        }
    }
}

/// Build a validated [`NetworkModel`] from a declarative spec. Bus and
/// branch order in the result equals spec order; the result sits at the
/// [`Layer::Topology`] layer (call [`NetworkModel::extend_layer`] before
/// running electrical analyses).
pub fn build_network(spec: &NetworkSpec) -> Result<NetworkModel> {
    let buses: Vec<Bus> = spec
        .buses
        .iter()
        .map(|b| Bus {
            id: b.id.clone(),
            name: if b.name.is_empty() {
                b.id.clone()
            } else {
                b.name.clone()
            },
            base_kv: b.base_kv,
            kind: b.kind,
            v_mag: b.v_mag,
            v_ang: b.v_ang,
            gen_p: b.gen_p,
            gen_q: b.gen_q,
            load_p: b.load_p,
            load_q: b.load_q,
            shunt_g: b.shunt_g,
            shunt_b: b.shunt_b,
            area: b.area,
            in_service: b.in_service,
            q_min: b.q_min,
            q_max: b.q_max,
        })
        .collect();

    let mut used_ids: std::collections::HashSet<String> =
        spec.branches.iter().map(|b| b.id.clone()).collect();
    let mut branches = Vec::with_capacity(spec.branches.len());
    for b in &spec.branches {
        let id = if b.id.is_empty() {
            let base = format!("{}-{}", b.from_bus, b.to_bus);
            let mut candidate = base.clone();
            let mut n = 1;
            while !used_ids.insert(candidate.clone()) {
                n += 1;
                candidate = format!("{base}#{n}");
            }
            candidate
        } else {
            b.id.clone()
        };
        branches.push(Branch {
            id,
            from_bus: b.from_bus.clone(),
            to_bus: b.to_bus.clone(),
            kind: b.kind,
            r: b.r,
            x: b.x,
            b_total: b.b_total,
            tap: b.tap,
            phase_shift: b.phase_shift,
            rating: b.rating,
            in_service: b.in_service,
        });
    }

    let mut net = NetworkModel {
        id: spec.id.clone(),
        base_mva: spec.base_mva,
        frequency: spec.frequency,
        layer: Layer::Topology,
        buses,
        branches,
        child_links: Vec::new(),
    };
    // Validate this level before recursing so error messages point at the
    // outermost inconsistency first.
    net.validate()?;
    for child_spec in &spec.children {
        let child = build_network(&child_spec.network)?;
        net.attach_child(&child_spec.parent_bus, child, &child_spec.boundary_bus)?;
    }
    net.validate()?;
    Ok(net)
}
