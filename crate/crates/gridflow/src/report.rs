//! Tabular (CSV) exports of study results.
//!
//! Every function renders one result type into one self-describing table:
//! a header row, then one data row per object, numbers in Rust's shortest
//! round-trippable form so nothing is lost to formatting and identical
//! results always produce identical bytes. Angles leave the engine in
//! radians but are reported in degrees, and per-unit powers are scaled to
//! MW/MVAR on the system base — the units people read tables in.

use crate::contingency::{CaResult, ContingencySpec};
use crate::cosim::BoundaryExchange;
use crate::dynamics::DynResult;
use crate::error::{Error, Result};
use crate::loadflow::{BranchFlow, LoadflowResult};
use crate::model::NetworkModel;

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::model(format!("finishing csv table: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::model(format!("csv table not utf-8: {e}")))
}

fn write_row(writer: &mut csv::Writer<Vec<u8>>, row: &[String]) -> Result<()> {
    writer
        .write_record(row)
        .map_err(|e| Error::model(format!("writing csv row: {e}")))
}

fn deg(rad: f64) -> f64 {
    rad.to_degrees()
}

/// Solved bus table: voltage and net computed injection per bus, in the
/// model's bus order. `result` must come from a loadflow on `net`.
pub fn bus_table_csv(net: &NetworkModel, result: &LoadflowResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_row(
        &mut w,
        &[
            "bus".into(),
            "kind".into(),
            "v_mag_pu".into(),
            "v_ang_deg".into(),
            "p_mw".into(),
            "q_mvar".into(),
        ],
    )?;
    for sol in &result.buses {
        let kind = net
            .bus(&sol.bus)
            .map(|b| format!("{:?}", b.kind))
            .unwrap_or_default();
        write_row(
            &mut w,
            &[
                sol.bus.clone(),
                kind,
                sol.v_mag.to_string(),
                deg(sol.v_ang).to_string(),
                (sol.p * net.base_mva).to_string(),
                (sol.q * net.base_mva).to_string(),
            ],
        )?;
    }
    finish(w)
}

/// Branch flow table: sending/receiving power, series loss, and percentage
/// loading for rated branches.
pub fn branch_table_csv(net: &NetworkModel, flows: &[BranchFlow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_row(
        &mut w,
        &[
            "branch".into(),
            "from_bus".into(),
            "to_bus".into(),
            "p_from_mw".into(),
            "q_from_mvar".into(),
            "p_to_mw".into(),
            "q_to_mvar".into(),
            "loss_mw".into(),
            "loading_pct".into(),
        ],
    )?;
    for flow in flows {
        let branch = net
            .branch(&flow.branch)
            .ok_or_else(|| Error::UnknownBranch(flow.branch.clone()))?;
        let loading = if branch.rating > 0.0 {
            let worst = flow.s_from.norm().max(flow.s_to.norm());
            (100.0 * worst / branch.rating).to_string()
        } else {
            String::new()
        };
        write_row(
            &mut w,
            &[
                flow.branch.clone(),
                branch.from_bus.clone(),
                branch.to_bus.clone(),
                (flow.s_from.re * net.base_mva).to_string(),
                (flow.s_from.im * net.base_mva).to_string(),
                (flow.s_to.re * net.base_mva).to_string(),
                (flow.s_to.im * net.base_mva).to_string(),
                (flow.loss().re * net.base_mva).to_string(),
                loading,
            ],
        )?;
    }
    finish(w)
}

/// Contingency screening table, one row per requested contingency in
/// request order. `status` is `ok`, `islanding`, or `error`; the worst
/// violation (largest flow-to-rating ratio) is broken out into columns and
/// error text goes in `note`.
pub fn contingency_table_csv(
    specs: &[ContingencySpec],
    rows: &[std::result::Result<CaResult, Error>],
) -> Result<String> {
    if specs.len() != rows.len() {
        return Err(Error::InvalidArgument(format!(
            "{} contingency specs but {} results",
            specs.len(),
            rows.len()
        )));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    write_row(
        &mut w,
        &[
            "contingency".into(),
            "outaged_branch".into(),
            "status".into(),
            "violations".into(),
            "worst_branch".into(),
            "worst_flow_pu".into(),
            "worst_rating_pu".into(),
            "note".into(),
        ],
    )?;
    for (spec, row) in specs.iter().zip(rows) {
        let record = match row {
            Ok(ca) => {
                let status = if ca.islanding { "islanding" } else { "ok" };
                let worst = ca.violations.iter().max_by(|a, b| {
                    let ra = a.flow.abs() / a.rating;
                    let rb = b.flow.abs() / b.rating;
                    ra.partial_cmp(&rb).expect("ratings are positive")
                });
                let (wb, wf, wr) = match worst {
                    Some(v) => (v.branch.clone(), v.flow.to_string(), v.rating.to_string()),
                    None => (String::new(), String::new(), String::new()),
                };
                [
                    spec.id.clone(),
                    spec.outaged_branch.clone(),
                    status.into(),
                    ca.violations.len().to_string(),
                    wb,
                    wf,
                    wr,
                    String::new(),
                ]
            }
            Err(e) => [
                spec.id.clone(),
                spec.outaged_branch.clone(),
                "error".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                e.to_string(),
            ],
        };
        write_row(&mut w, &record)?;
    }
    finish(w)
}

/// Boundary exchange trace of a co-simulation: what the parent sent each
/// child (voltage) and what the child reported back (power), per round.
pub fn exchange_table_csv(exchanges: &[BoundaryExchange]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_row(
        &mut w,
        &[
            "round".into(),
            "child".into(),
            "parent_bus".into(),
            "v_mag_pu".into(),
            "v_ang_deg".into(),
            "p_mw".into(),
            "q_mvar".into(),
        ],
    )?;
    for x in exchanges {
        write_row(
            &mut w,
            &[
                x.round.to_string(),
                x.child.clone(),
                x.parent_bus.clone(),
                x.v_mag.to_string(),
                deg(x.v_ang).to_string(),
                x.p_mw.to_string(),
                x.q_mvar.to_string(),
            ],
        )?;
    }
    finish(w)
}

/// Machine trajectory table: one row per time sample, one angle column
/// (degrees) and one speed-deviation column (rad/s) per machine, named
/// after the machine's bus.
pub fn trajectory_table_csv(result: &DynResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["time_s".to_string()];
    for gen in &result.generators {
        header.push(format!("delta_deg:{}", gen.bus));
        header.push(format!("omega_dev:{}", gen.bus));
    }
    write_row(&mut w, &header)?;
    for (i, t) in result.time.iter().enumerate() {
        let mut row = vec![t.to_string()];
        for gen in &result.generators {
            row.push(deg(gen.delta[i]).to_string());
            row.push(gen.omega_dev[i].to_string());
        }
        write_row(&mut w, &row)?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contingency::{run_n1, ContingencySpec};
    use crate::dynamics::GenTrajectory;
    use crate::loadflow::{branch_flows, solve_newton_raphson, LoadflowConfig};
    use crate::model::{build_network, BranchSpec, BusKind, BusSpec, Layer, NetworkSpec};

    fn solved_three_bus() -> (NetworkModel, LoadflowResult) {
        let mut net = build_network(&NetworkSpec {
            id: "rpt".into(),
            buses: vec![
                BusSpec {
                    kind: BusKind::Slack,
                    v_mag: 1.02,
                    ..BusSpec::new("A")
                },
                BusSpec {
                    load_p: 0.4,
                    load_q: 0.1,
                    ..BusSpec::new("B")
                },
                BusSpec {
                    load_p: 0.2,
                    load_q: 0.05,
                    ..BusSpec::new("C")
                },
            ],
            branches: vec![
                BranchSpec {
                    rating: 1.0,
                    ..BranchSpec::line("A", "B", 0.1)
                },
                BranchSpec::line("B", "C", 0.08),
                BranchSpec::line("A", "C", 0.12),
            ],
            ..NetworkSpec::default()
        })
        .unwrap()
        .extend_layer(Layer::AcLoadflow)
        .unwrap();
        let result = solve_newton_raphson(&mut net, &LoadflowConfig::default()).unwrap();
        assert!(result.converged);
        (net, result)
    }

    #[test]
    fn bus_table_has_one_row_per_bus_and_parses_back() {
        let (net, result) = solved_three_bus();
        let table = bus_table_csv(&net, &result).unwrap();
        let mut lines = table.lines();
        assert_eq!(
            lines.next().unwrap(),
            "bus,kind,v_mag_pu,v_ang_deg,p_mw,q_mvar"
        );
        let data: Vec<&str> = lines.collect();
        assert_eq!(data.len(), 3);
        let first: Vec<&str> = data[0].split(',').collect();
        assert_eq!(first[0], "A");
        assert_eq!(first[1], "Slack");
        let v: f64 = first[2].parse().unwrap();
        assert_eq!(v, 1.02);
    }

    #[test]
    fn branch_table_reports_loading_only_for_rated_branches() {
        let (net, _) = solved_three_bus();
        let flows = branch_flows(&net);
        let table = branch_table_csv(&net, &flows).unwrap();
        let data: Vec<&str> = table.lines().skip(1).collect();
        assert_eq!(data.len(), 3);
        let rated: Vec<&str> = data[0].split(',').collect();
        assert!(!rated[8].is_empty(), "rated branch shows loading");
        let unrated: Vec<&str> = data[1].split(',').collect();
        assert!(unrated[8].is_empty(), "unrated branch leaves loading blank");
    }

    #[test]
    fn contingency_table_covers_ok_and_error_rows() {
        let (net, _) = solved_three_bus();
        let specs = vec![
            ContingencySpec {
                id: "loses-AB".into(),
                outaged_branch: "A-B".into(),
            },
            ContingencySpec {
                id: "loses-nothing".into(),
                outaged_branch: "no-such-branch".into(),
            },
        ];
        let rows = run_n1(&net, &specs, 1).unwrap();
        let table = contingency_table_csv(&specs, &rows).unwrap();
        let data: Vec<&str> = table.lines().skip(1).collect();
        assert_eq!(data.len(), 2);
        assert!(data[0].starts_with("loses-AB,A-B,"));
        assert!(data[1].contains(",error,"));
        assert!(data[1].contains("no-such-branch"));
    }

    #[test]
    fn contingency_table_rejects_mismatched_lengths() {
        let err = contingency_table_csv(&[], &[Err(Error::UnknownBranch("x".into()))]);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn trajectory_table_pairs_columns_per_machine() {
        let result = DynResult {
            time: vec![0.0, 0.005],
            generators: vec![
                GenTrajectory {
                    bus: "G1".into(),
                    delta: vec![0.1, 0.2],
                    omega_dev: vec![0.0, 0.01],
                },
                GenTrajectory {
                    bus: "G2".into(),
                    delta: vec![-0.1, -0.2],
                    omega_dev: vec![0.0, -0.01],
                },
            ],
            stable: true,
            first_separation: None,
        };
        let table = trajectory_table_csv(&result).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(
            lines[0],
            "time_s,delta_deg:G1,omega_dev:G1,delta_deg:G2,omega_dev:G2"
        );
        assert_eq!(lines.len(), 3);
        let last: Vec<&str> = lines[2].split(',').collect();
        let d: f64 = last[1].parse().unwrap();
        assert!((d - 0.2f64.to_degrees()).abs() < 1e-12);
    }

    #[test]
    fn exchange_table_renders_rounds_in_order() {
        let exchanges = vec![
            BoundaryExchange {
                round: 1,
                child: "f1".into(),
                parent_bus: "T3".into(),
                v_mag: 1.01,
                v_ang: 0.02,
                p_mw: 12.5,
                q_mvar: 3.0,
            },
            BoundaryExchange {
                round: 2,
                child: "f1".into(),
                parent_bus: "T3".into(),
                v_mag: 1.008,
                v_ang: 0.019,
                p_mw: 12.6,
                q_mvar: 3.1,
            },
        ];
        let table = exchange_table_csv(&exchanges).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1,f1,T3,1.01,"));
        assert!(lines[2].starts_with("2,f1,T3,1.008,"));
    }
}
