//! Parallel N-1 contingency analysis.
//!
//! The flagship *immutable* algorithm: the pre-contingency B′ matrix is
//! factorized once, and every branch outage is screened against that shared
//! factorization with line-outage distribution factors — no per-outage
//! refactorization, no model mutation, so outages distribute across worker
//! threads that share the model and factorization by reference.
//!
//! For an outage `o` and monitored branch `m`, with θ̂ the angle response to
//! a unit injection pair at `o`'s terminals:
//!
//! ```text
//! PTDF_m,o = (θ̂_from(m) − θ̂_to(m)) / x_m
//! LODF_m,o = PTDF_m,o / (1 − PTDF_o,o)
//! post_flow_m = flow_m + LODF_m,o · flow_o
//! ```
//!
//! When `1 − PTDF_o,o ≤ 1e-6` the outage disconnects part of the network;
//! the result is flagged islanding and carries no flows.
//!
//! Work distribution is a static block partition of the contingency list:
//! results land in spec order and are bit-identical for any worker count.

use crate::error::{Error, Result};
use crate::model::{BusKind, NetworkModel};
use crate::sparse::Factorization;
use crate::topology::{build_bprime_filtered, find_islands};

/// Threshold on 1 − PTDF_o,o below which an outage is declared islanding.
pub const ISLANDING_THRESHOLD: f64 = 1e-6;

/// One branch outage to screen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencySpec {
    pub id: String,
    pub outaged_branch: String,
}

/// The standard full screening list: one outage per in-service branch, in
/// model order, each labelled `outage:<branch id>`.
pub fn all_branch_outages(net: &NetworkModel) -> Vec<ContingencySpec> {
    net.branches
        .iter()
        .filter(|b| b.in_service)
        .map(|b| ContingencySpec {
            id: format!("outage:{}", b.id),
            outaged_branch: b.id.clone(),
        })
        .collect()
}

/// A post-contingency limit violation.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub branch: String,
    /// Post-outage flow magnitude (pu).
    pub flow: f64,
    pub rating: f64,
}

/// Screening outcome for one contingency.
#[derive(Debug, Clone, PartialEq)]
pub struct CaResult {
    pub contingency: String,
    pub outaged_branch: String,
    /// The outage splits the network; no flows are reported.
    pub islanding: bool,
    /// Post-outage real power per monitored branch (every live branch except
    /// the outage), model order. Empty when islanding.
    pub post_flows: Vec<(String, f64)>,
    /// Monitored branches whose |post flow| exceeds a positive rating.
    pub violations: Vec<Violation>,
}

/// Line-outage distribution factors of one outage over all monitored
/// branches.
#[derive(Debug, Clone, PartialEq)]
pub struct LodfTable {
    pub outage: String,
    pub islanding: bool,
    /// (monitored branch, LODF), model order. Empty when islanding.
    pub factors: Vec<(String, f64)>,
}

/// DC power-flow solution.
#[derive(Debug, Clone, PartialEq)]
pub struct DcFlow {
    /// Bus angle (rad) per energized-island bus, model order; slack buses
    /// sit at exactly 0.
    pub angles: Vec<(String, f64)>,
    /// Real power flow (pu) per branch, model order; branches that are out
    /// of service or de-energized carry 0.
    pub flows: Vec<(String, f64)>,
}

/// Everything one screening pass needs, built once and shared read-only by
/// all workers: the B′ factorization, base-case flows, and the per-branch
/// index/reactance table.
struct DcContext {
    fact: Factorization<f64>,
    branches: Vec<BranchEntry>,
}

struct BranchEntry {
    id: String,
    /// In service with both terminals inside an energized island.
    live: bool,
    /// Reduced B′ index per terminal; `None` inside a live branch means the
    /// terminal is a slack bus (angle pinned to 0).
    from: Option<usize>,
    to: Option<usize>,
    x: f64,
    rating: f64,
    base_flow: f64,
}

impl DcContext {
    fn build(net: &NetworkModel) -> Result<(DcContext, DcFlow)> {
        let islands = find_islands(net);
        if islands.energized_count() == 0 {
            return Err(Error::model(format!(
                "network {:?} has no energized island: the DC model needs a slack bus",
                net.id
            )));
        }
        let mut energized = std::collections::HashSet::new();
        for island in islands.islands.iter().filter(|i| i.energized) {
            for id in &island.buses {
                energized.insert(id.clone());
            }
        }

        let bprime = build_bprime_filtered(net, |b| {
            energized.contains(&b.id) && b.kind != BusKind::Slack
        })?;
        let fact = bprime.matrix.factorize().map_err(|e| match e {
            Error::Singular { pivot, .. } => Error::Singular {
                what: "B' matrix",
                pivot,
            },
            other => other,
        })?;

        let mut injections = vec![0.0; bprime.index.dim()];
        for k in 0..bprime.index.dim() {
            let bus = &net.buses[bprime.index.model_pos(k)];
            injections[k] = bus.gen_p - bus.load_p;
        }
        let theta = fact.solve(&injections);

        let angle_of = |id: &str| -> f64 {
            match bprime.index.dense_of(id) {
                Some(k) => theta[k],
                None => 0.0, // slack reference
            }
        };

        let mut angles = Vec::new();
        for bus in &net.buses {
            if energized.contains(&bus.id) {
                angles.push((bus.id.clone(), angle_of(&bus.id)));
            }
        }

        let mut branches = Vec::with_capacity(net.branches.len());
        let mut flows = Vec::with_capacity(net.branches.len());
        for br in &net.branches {
            let live = br.in_service
                && energized.contains(&br.from_bus)
                && energized.contains(&br.to_bus);
            let flow = if live {
                (angle_of(&br.from_bus) - angle_of(&br.to_bus)) / br.x
            } else {
                0.0
            };
            flows.push((br.id.clone(), flow));
            branches.push(BranchEntry {
                id: br.id.clone(),
                live,
                from: bprime.index.dense_of(&br.from_bus),
                to: bprime.index.dense_of(&br.to_bus),
                x: br.x,
                rating: br.rating,
                base_flow: flow,
            });
        }

        Ok((DcContext { fact, branches }, DcFlow { angles, flows }))
    }

    /// Angle response θ̂ to the unit injection pair at the outage terminals,
    /// or an error when the outage cannot be screened.
    fn outage_response(&self, outage: &str) -> Result<(usize, Vec<f64>, f64)> {
        let pos = self
            .branches
            .iter()
            .position(|b| b.id == outage)
            .ok_or_else(|| Error::UnknownBranch(outage.to_string()))?;
        let entry = &self.branches[pos];
        if !entry.live {
            return Err(Error::model(format!(
                "branch {outage:?} is not in service in the base case; nothing to outage"
            )));
        }
        let mut rhs = vec![0.0; self.fact.dim()];
        if let Some(f) = entry.from {
            rhs[f] = 1.0;
        }
        if let Some(t) = entry.to {
            rhs[t] -= 1.0;
        }
        let theta_hat = self.fact.solve(&rhs);
        let at = |idx: Option<usize>| idx.map_or(0.0, |k| theta_hat[k]);
        let ptdf_oo = (at(entry.from) - at(entry.to)) / entry.x;
        Ok((pos, theta_hat, ptdf_oo))
    }

    fn lodf(&self, outage: &str) -> Result<LodfTable> {
        let (pos, theta_hat, ptdf_oo) = self.outage_response(outage)?;
        let denom = 1.0 - ptdf_oo;
        if denom <= ISLANDING_THRESHOLD {
            return Ok(LodfTable {
                outage: outage.to_string(),
                islanding: true,
                factors: Vec::new(),
            });
        }
        let at = |idx: Option<usize>| idx.map_or(0.0, |k: usize| theta_hat[k]);
        let factors = self
            .branches
            .iter()
            .enumerate()
            .filter(|(m, b)| *m != pos && b.live)
            .map(|(_, b)| {
                let ptdf_mo = (at(b.from) - at(b.to)) / b.x;
                (b.id.clone(), ptdf_mo / denom)
            })
            .collect();
        Ok(LodfTable {
            outage: outage.to_string(),
            islanding: false,
            factors,
        })
    }

    fn screen(&self, spec: &ContingencySpec) -> Result<CaResult> {
        let (pos, theta_hat, ptdf_oo) = self.outage_response(&spec.outaged_branch)?;
        let denom = 1.0 - ptdf_oo;
        if denom <= ISLANDING_THRESHOLD {
            return Ok(CaResult {
                contingency: spec.id.clone(),
                outaged_branch: spec.outaged_branch.clone(),
                islanding: true,
                post_flows: Vec::new(),
                violations: Vec::new(),
            });
        }
        let outage_flow = self.branches[pos].base_flow;
        let at = |idx: Option<usize>| idx.map_or(0.0, |k: usize| theta_hat[k]);
        let mut post_flows = Vec::new();
        let mut violations = Vec::new();
        for (m, b) in self.branches.iter().enumerate() {
            if m == pos || !b.live {
                continue;
            }
            let ptdf_mo = (at(b.from) - at(b.to)) / b.x;
            let post = b.base_flow + (ptdf_mo / denom) * outage_flow;
            post_flows.push((b.id.clone(), post));
            if b.rating > 0.0 && post.abs() > b.rating {
                violations.push(Violation {
                    branch: b.id.clone(),
                    flow: post.abs(),
                    rating: b.rating,
                });
            }
        }
        Ok(CaResult {
            contingency: spec.id.clone(),
            outaged_branch: spec.outaged_branch.clone(),
            islanding: false,
            post_flows,
            violations,
        })
    }
}

/// Linear DC power flow: solve B′·θ = P with slack angles pinned at zero,
/// then flow = Δθ/x per branch. Covers every energized island; de-energized
/// buses and branches are skipped with zero flow.
pub fn dc_power_flow(net: &NetworkModel) -> Result<DcFlow> {
    let (_, flow) = DcContext::build(net)?;
    Ok(flow)
}

/// Line-outage distribution factors for a single outage against the shared
/// base-case factorization. Errors if the branch does not exist or is not
/// in service.
pub fn compute_lodf(net: &NetworkModel, outage: &str) -> Result<LodfTable> {
    let (ctx, _) = DcContext::build(net)?;
    ctx.lodf(outage)
}

/// Screen a list of contingencies, distributing them over `workers`
/// threads. The model is read-only throughout; per-spec failures (unknown
/// or out-of-service branches) land in that spec's slot while the rest of
/// the study completes. Results are in spec order and are identical for
/// every worker count.
pub fn run_n1(
    net: &NetworkModel,
    specs: &[ContingencySpec],
    workers: usize,
) -> Result<Vec<Result<CaResult>>> {
    if workers == 0 {
        return Err(Error::InvalidArgument(
            "worker count must be at least 1".into(),
        ));
    }
    let (ctx, _) = DcContext::build(net)?;

    let mut slots: Vec<Option<Result<CaResult>>> = Vec::new();
    slots.resize_with(specs.len(), || None);

    if workers == 1 || specs.len() <= 1 {
        for (slot, spec) in slots.iter_mut().zip(specs) {
            *slot = Some(ctx.screen(spec));
        }
    } else {
        let per = specs.len() / workers;
        let extra = specs.len() % workers;
        std::thread::scope(|scope| {
            let mut out_rest: &mut [Option<Result<CaResult>>] = &mut slots;
            let mut in_rest: &[ContingencySpec] = specs;
            for w in 0..workers {
                let take = per + usize::from(w < extra);
                if take == 0 {
                    continue;
                }
                let (out_chunk, out_next) = out_rest.split_at_mut(take);
                let (in_chunk, in_next) = in_rest.split_at(take);
                out_rest = out_next;
                in_rest = in_next;
                let ctx = &ctx;
                scope.spawn(move || {
                    for (slot, spec) in out_chunk.iter_mut().zip(in_chunk) {
                        *slot = Some(ctx.screen(spec));
                    }
                });
            }
        });
    }

    Ok(slots.into_iter().map(|s| s.expect("slot filled")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_network, BranchSpec, BusSpec, Layer, NetworkSpec};

    /// Triangle with unit injection at bus 1 and slack at bus 3; every
    /// derived number below is a hand solve of [[20,−10],[−10,20]]θ=[1,0].
    fn triangle() -> NetworkModel {
        build_network(&NetworkSpec {
            id: "triangle".into(),
            buses: vec![
                BusSpec {
                    gen_p: 1.0,
                    ..BusSpec::new("1")
                },
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
        .extend_layer(Layer::AcLoadflow)
        .unwrap()
    }

    fn flow_of(dc: &DcFlow, id: &str) -> f64 {
        dc.flows.iter().find(|(b, _)| b == id).unwrap().1
    }

    #[test]
    fn triangle_dc_flows_match_hand_solution() {
        let dc = dc_power_flow(&triangle()).unwrap();
        assert!((flow_of(&dc, "1-3") - 2.0 / 3.0).abs() < 1e-12);
        assert!((flow_of(&dc, "1-2") - 1.0 / 3.0).abs() < 1e-12);
        assert!((flow_of(&dc, "2-3") - 1.0 / 3.0).abs() < 1e-12);
        let ang1 = dc.angles.iter().find(|(b, _)| b == "1").unwrap().1;
        let ang3 = dc.angles.iter().find(|(b, _)| b == "3").unwrap().1;
        assert!((ang1 - 1.0 / 15.0).abs() < 1e-12);
        assert_eq!(ang3, 0.0);
    }

    #[test]
    fn zero_injection_means_zero_flow() {
        let mut net = triangle();
        net.bus_mut("1").unwrap().gen_p = 0.0;
        let dc = dc_power_flow(&net).unwrap();
        assert!(dc.flows.iter().all(|(_, f)| f.abs() < 1e-14));
    }

    #[test]
    fn radial_injection_is_conserved() {
        let net = build_network(&NetworkSpec {
            id: "radial".into(),
            buses: vec![
                BusSpec {
                    kind: BusKind::Slack,
                    ..BusSpec::new("s")
                },
                BusSpec {
                    gen_p: 1.0,
                    ..BusSpec::new("g")
                },
            ],
            branches: vec![BranchSpec::line("g", "s", 0.2)],
            ..NetworkSpec::default()
        })
        .unwrap()
        .extend_layer(Layer::AcLoadflow)
        .unwrap();
        let dc = dc_power_flow(&net).unwrap();
        assert!((flow_of(&dc, "g-s") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lodf_of_triangle_outage_is_unity() {
        let table = compute_lodf(&triangle(), "1-3").unwrap();
        assert!(!table.islanding);
        let lodf_12 = table.factors.iter().find(|(b, _)| b == "1-2").unwrap().1;
        assert!((lodf_12 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bridge_outage_signals_islanding() {
        let net = build_network(&NetworkSpec {
            id: "radial".into(),
            buses: vec![
                BusSpec {
                    kind: BusKind::Slack,
                    ..BusSpec::new("s")
                },
                BusSpec {
                    load_p: 0.4,
                    ..BusSpec::new("l")
                },
            ],
            branches: vec![BranchSpec::line("s", "l", 0.2)],
            ..NetworkSpec::default()
        })
        .unwrap()
        .extend_layer(Layer::AcLoadflow)
        .unwrap();
        let table = compute_lodf(&net, "s-l").unwrap();
        assert!(table.islanding);
        assert!(table.factors.is_empty());
    }

    #[test]
    fn zero_base_flow_outage_changes_nothing() {
        let mut net = triangle();
        net.bus_mut("1").unwrap().gen_p = 0.0; // all base flows zero
        let results = run_n1(
            &net,
            &[ContingencySpec {
                id: "c1".into(),
                outaged_branch: "1-2".into(),
            }],
            1,
        )
        .unwrap();
        let res = results[0].as_ref().unwrap();
        assert!(!res.islanding);
        assert!(res.post_flows.iter().all(|(_, f)| f.abs() < 1e-14));
    }

    #[test]
    fn triangle_outage_violates_tight_ratings() {
        let mut net = triangle();
        for br in &mut net.branches {
            br.rating = 0.9;
        }
        let specs: Vec<ContingencySpec> = ["1-2", "2-3", "1-3"]
            .iter()
            .map(|b| ContingencySpec {
                id: format!("out {b}"),
                outaged_branch: (*b).into(),
            })
            .collect();
        let results = run_n1(&net, &specs, 1).unwrap();
        let out13 = results[2].as_ref().unwrap();
        assert!(!out13.islanding);
        // Losing 1-3 reroutes the whole unit through 1-2 and 2-3: both hit
        // 1.0 pu against a 0.9 rating.
        assert_eq!(out13.violations.len(), 2);
        assert!(out13
            .violations
            .iter()
            .any(|v| v.branch == "1-2" && (v.flow - 1.0).abs() < 1e-12 && v.rating == 0.9));
    }

    #[test]
    fn empty_spec_list_gives_empty_results() {
        assert!(run_n1(&triangle(), &[], 4).unwrap().is_empty());
    }

    #[test]
    fn unknown_branch_fails_per_spec_without_stopping_the_study() {
        let specs = vec![
            ContingencySpec {
                id: "good".into(),
                outaged_branch: "1-2".into(),
            },
            ContingencySpec {
                id: "bad".into(),
                outaged_branch: "ghost".into(),
            },
            ContingencySpec {
                id: "also good".into(),
                outaged_branch: "2-3".into(),
            },
        ];
        let results = run_n1(&triangle(), &specs, 2).unwrap();
        assert!(results[0].is_ok());
        assert!(matches!(
            results[1].as_ref().unwrap_err(),
            Error::UnknownBranch(b) if b == "ghost"
        ));
        assert!(results[2].is_ok());
    }

    #[test]
    fn out_of_service_outage_is_rejected_per_spec() {
        let mut net = triangle();
        net.branches[0].in_service = false;
        let results = run_n1(
            &net,
            &[ContingencySpec {
                id: "c".into(),
                outaged_branch: "1-2".into(),
            }],
            1,
        )
        .unwrap();
        let err = results[0].as_ref().unwrap_err();
        assert!(err.to_string().contains("not in service"), "got: {err}");
    }

    #[test]
    fn worker_counts_do_not_change_results() {
        let mut net = triangle();
        for br in &mut net.branches {
            br.rating = 0.9;
        }
        let specs: Vec<ContingencySpec> = ["1-2", "2-3", "1-3", "ghost", "1-2"]
            .iter()
            .enumerate()
            .map(|(i, b)| ContingencySpec {
                id: format!("c{i}"),
                outaged_branch: (*b).into(),
            })
            .collect();
        let reference = run_n1(&net, &specs, 1).unwrap();
        for workers in [2, 4, 8] {
            let run = run_n1(&net, &specs, workers).unwrap();
            assert_eq!(run.len(), reference.len());
            for (a, b) in reference.iter().zip(&run) {
                match (a, b) {
                    (Ok(x), Ok(y)) => assert_eq!(x, y),
                    (Err(x), Err(y)) => assert_eq!(x.to_string(), y.to_string()),
                    _ => panic!("outcome kind diverged between worker counts"),
                }
            }
        }
    }

    #[test]
    fn the_model_is_untouched_by_screening() {
        let net = triangle();
        let before = net.clone();
        let specs: Vec<ContingencySpec> = ["1-2", "2-3", "1-3"]
            .iter()
            .map(|b| ContingencySpec {
                id: (*b).into(),
                outaged_branch: (*b).into(),
            })
            .collect();
        run_n1(&net, &specs, 4).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn lodf_post_flows_match_full_resolve() {
        // Five-bus mesh with distinct reactances and a spread of injections;
        // every non-islanding outage is cross-checked against a DC re-solve
        // of the modified network.
        let net = build_network(&NetworkSpec {
            id: "mesh".into(),
            buses: vec![
                BusSpec {
                    kind: BusKind::Slack,
                    ..BusSpec::new("1")
                },
                BusSpec {
                    gen_p: 1.2,
                    ..BusSpec::new("2")
                },
                BusSpec {
                    load_p: 0.8,
                    ..BusSpec::new("3")
                },
                BusSpec {
                    load_p: 0.5,
                    ..BusSpec::new("4")
                },
                BusSpec {
                    gen_p: 0.3,
                    ..BusSpec::new("5")
                },
            ],
            branches: vec![
                BranchSpec::line("1", "2", 0.12),
                BranchSpec::line("1", "3", 0.23),
                BranchSpec::line("2", "3", 0.07),
                BranchSpec::line("2", "4", 0.15),
                BranchSpec::line("3", "4", 0.11),
                BranchSpec::line("4", "5", 0.09),
                BranchSpec::line("5", "1", 0.31),
            ],
            ..NetworkSpec::default()
        })
        .unwrap()
        .extend_layer(Layer::AcLoadflow)
        .unwrap();

        let specs: Vec<ContingencySpec> = net
            .branches
            .iter()
            .map(|b| ContingencySpec {
                id: b.id.clone(),
                outaged_branch: b.id.clone(),
            })
            .collect();
        let screened = run_n1(&net, &specs, 1).unwrap();

        for (spec, outcome) in specs.iter().zip(&screened) {
            let res = outcome.as_ref().unwrap();
            let mut outaged = net.clone();
            let pos = outaged.branch_position(&spec.outaged_branch).unwrap();
            outaged.branches[pos].in_service = false;

            let energized_before: usize =
                find_islands(&net).islands.iter().filter(|i| i.energized).map(|i| i.buses.len()).sum();
            let energized_after: usize = find_islands(&outaged)
                .islands
                .iter()
                .filter(|i| i.energized)
                .map(|i| i.buses.len())
                .sum();
            let islanded = energized_after < energized_before;
            assert_eq!(res.islanding, islanded, "outage {}", spec.outaged_branch);
            if islanded {
                continue;
            }
            let oracle = dc_power_flow(&outaged).unwrap();
            for (branch, post) in &res.post_flows {
                let full = oracle.flows.iter().find(|(b, _)| b == branch).unwrap().1;
                assert!(
                    (post - full).abs() <= 1e-8,
                    "outage {}, branch {branch}: lodf {post} vs resolve {full}",
                    spec.outaged_branch
                );
            }
        }
    }
}
