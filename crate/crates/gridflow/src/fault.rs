//! Balanced three-phase fault calculation.
//!
//! A balanced fault is exactly representable in the positive-sequence
//! frame, so the calculation works on the same bus/branch data as the
//! loadflow. Slack buses are treated as ideal voltage sources: for the
//! Thévenin impedance they are grounded, which removes their rows and
//! columns from the admittance matrix while their branch contributions
//! stay on the neighbouring diagonals.
//!
//! With Z the inverse of that reduced matrix and `i` the faulted bus:
//!
//! ```text
//! Z_th = Z[i][i]                    (one solve with a unit vector)
//! I_f  = V_pre,i / (Z_th + z_fault)
//! V_k  = V_pre,k − Z[k][i] · I_f    (slack buses keep V_pre)
//! ```

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{BusKind, Layer, NetworkModel};
use crate::sparse::Scalar;
use crate::topology::{build_ybus_filtered, find_islands};

/// Result of a single balanced bus fault.
#[derive(Debug, Clone)]
pub struct FaultResult {
    pub bus: String,
    /// Driving-point Thévenin impedance at the faulted bus (pu).
    pub z_thevenin: Complex64,
    /// Fault current through z_fault (pu on the system base).
    pub current: Complex64,
    /// Post-fault voltage phasor per electrically present bus, model order.
    pub post_voltages: Vec<(String, Complex64)>,
}

/// Compute the fault current and post-fault voltage profile for a balanced
/// three-phase fault through `z_fault` at `bus_id`. Pre-fault voltages are
/// taken from the model (a flat 1∠0 profile is fine). `z_fault = 0` is a
/// bolted fault.
pub fn bus_fault_current(
    net: &NetworkModel,
    bus_id: &str,
    z_fault: Complex64,
) -> Result<FaultResult> {
    net.require_layer(Layer::AcShortCircuit)?;
    let bus = net
        .bus(bus_id)
        .ok_or_else(|| Error::UnknownBus(bus_id.to_string()))?;
    if !bus.is_energizable() {
        return Err(Error::model(format!(
            "bus {bus_id:?} is out of service; cannot fault an isolated bus"
        )));
    }
    let islands = find_islands(net);
    let energized = islands
        .island_containing(bus_id)
        .map(|i| i.energized)
        .unwrap_or(false);
    if !energized {
        return Err(Error::model(format!(
            "bus {bus_id:?} is not in an energized island; fault current is undefined"
        )));
    }
    if bus.kind == BusKind::Slack {
        return Err(Error::model(format!(
            "bus {bus_id:?} is a slack bus modeled as an ideal source; \
             faulting it directly is not supported"
        )));
    }

    // Grounded-slack admittance matrix: slack rows/columns removed.
    let y = build_ybus_filtered(net, |b| b.kind != BusKind::Slack)?;
    let i_dense = y
        .index
        .dense_of(bus_id)
        .expect("energizable non-slack bus must be retained");

    let mut unit = vec![Complex64::zero(); y.dim()];
    unit[i_dense] = Complex64::one();
    let fact = y.matrix.factorize().map_err(|e| match e {
        Error::Singular { pivot, .. } => Error::Singular {
            what: "admittance matrix",
            pivot,
        },
        other => other,
    })?;
    let z_column = fact.solve(&unit);
    let z_th = z_column[i_dense];

    let v_pre_at = |id: &str| -> Complex64 {
        let b = net.bus(id).unwrap();
        Complex64::from_polar(b.v_mag, b.v_ang)
    };
    let current = v_pre_at(bus_id) / (z_th + z_fault);

    let mut post_voltages = Vec::new();
    for b in net.buses.iter().filter(|b| b.is_energizable()) {
        let v_pre = v_pre_at(&b.id);
        let v_post = match y.index.dense_of(&b.id) {
            // Slack buses hold their voltage; everything else sags by the
            // voltage drop the fault current causes across Z[k][i].
            None => v_pre,
            Some(k) => v_pre - z_column[k] * current,
        };
        post_voltages.push((b.id.clone(), v_post));
    }

    Ok(FaultResult {
        bus: bus_id.to_string(),
        z_thevenin: z_th,
        current,
        post_voltages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_network, BranchSpec, BusSpec, NetworkSpec};

    fn source_and_load() -> NetworkModel {
        build_network(&NetworkSpec {
            id: "pair".into(),
            buses: vec![
                BusSpec {
                    kind: BusKind::Slack,
                    ..BusSpec::new("1")
                },
                BusSpec::new("2"),
            ],
            branches: vec![BranchSpec::line("1", "2", 0.1)],
            ..NetworkSpec::default()
        })
        .unwrap()
        .extend_layer(Layer::AcShortCircuit)
        .unwrap()
    }

    fn triangle() -> NetworkModel {
        build_network(&NetworkSpec {
            id: "triangle".into(),
            buses: vec![
                BusSpec::new("1"),
                BusSpec::new("2"),
                BusSpec {
                    kind: BusKind::Slack,
                    ..BusSpec::new("3")
                },
            ],
            branches: vec![
                BranchSpec::line("1", "2", 0.1),
                BranchSpec::line("2", "3", 0.1),
                BranchSpec::line("1", "3", 0.1),
            ],
            ..NetworkSpec::default()
        })
        .unwrap()
        .extend_layer(Layer::AcShortCircuit)
        .unwrap()
    }

    #[test]
    fn bolted_fault_behind_single_reactance() {
        let res = bus_fault_current(&source_and_load(), "2", Complex64::zero()).unwrap();
        assert!((res.z_thevenin - Complex64::new(0.0, 0.1)).norm() < 1e-12);
        assert!((res.current.norm() - 10.0).abs() < 1e-12);
        // The faulted bus collapses to zero volts; the source holds 1∠0.
        let v2 = res.post_voltages.iter().find(|(id, _)| id == "2").unwrap().1;
        assert!(v2.norm() < 1e-12);
        let v1 = res.post_voltages.iter().find(|(id, _)| id == "1").unwrap().1;
        assert!((v1 - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn fault_impedance_halves_the_current() {
        let res =
            bus_fault_current(&source_and_load(), "2", Complex64::new(0.0, 0.1)).unwrap();
        assert!((res.current.norm() - 5.0).abs() < 1e-12);
        // Half the source voltage drops across the fault impedance.
        let v2 = res.post_voltages.iter().find(|(id, _)| id == "2").unwrap().1;
        assert!((v2.norm() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn triangle_fault_splits_hand_checked_voltages() {
        // Fault at bus 1; reduced Y over {1,2} inverts to
        // [[j/15, j/30], [j/30, j/15]], so |I_f| = 15 and bus 2 sits at 0.5.
        let res = bus_fault_current(&triangle(), "1", Complex64::zero()).unwrap();
        assert!((res.z_thevenin - Complex64::new(0.0, 1.0 / 15.0)).norm() < 1e-12);
        assert!((res.current.norm() - 15.0).abs() < 1e-10);
        let v2 = res.post_voltages.iter().find(|(id, _)| id == "2").unwrap().1;
        assert!((v2 - Complex64::new(0.5, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn prefault_profile_scales_the_current() {
        let mut net = source_and_load();
        net.bus_mut("2").unwrap().v_mag = 1.05;
        let res = bus_fault_current(&net, "2", Complex64::zero()).unwrap();
        assert!((res.current.norm() - 10.5).abs() < 1e-12);
    }

    #[test]
    fn unknown_bus_is_reported() {
        let err = bus_fault_current(&source_and_load(), "9", Complex64::zero()).unwrap_err();
        assert!(matches!(err, Error::UnknownBus(ref b) if b == "9"));
    }

    #[test]
    fn out_of_service_bus_is_rejected() {
        let mut net = source_and_load();
        net.bus_mut("2").unwrap().in_service = false;
        let err = bus_fault_current(&net, "2", Complex64::zero()).unwrap_err();
        assert!(err.to_string().contains("isolated"), "got: {err}");
    }

    #[test]
    fn unenergized_island_is_rejected() {
        let mut net = triangle();
        net.branches[1].in_service = false; // 2-3
        net.branches[2].in_service = false; // 1-3
        let err = bus_fault_current(&net, "1", Complex64::zero()).unwrap_err();
        assert!(err.to_string().contains("energized"), "got: {err}");
    }

    #[test]
    fn topology_layer_is_too_low_for_faults() {
        let net = build_network(&NetworkSpec {
            id: "bare".into(),
            buses: vec![BusSpec::new("1")],
            ..NetworkSpec::default()
        })
        .unwrap();
        assert!(bus_fault_current(&net, "1", Complex64::zero()).is_err());
    }
}
