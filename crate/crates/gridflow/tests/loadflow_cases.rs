//! Solves the bundled 14- and 30-bus CDF cases from a flat start and checks
//! the result against the solved voltages recorded in the files.

use std::path::Path;

use gridflow::cdf::read_cdf;
use gridflow::loadflow::{solve_newton_raphson, LoadflowConfig};
use gridflow::model::NetworkModel;

fn load(name: &str) -> NetworkModel {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name);
    read_cdf(&path).unwrap().network
}

fn solve_and_compare(name: &str) -> (usize, f64, f64) {
    let reference = load(name);
    let mut net = reference.clone();
    let result = solve_newton_raphson(&mut net, &LoadflowConfig::default()).unwrap();
    assert!(result.converged, "{name} did not converge");

    let mut max_dv: f64 = 0.0;
    let mut max_da_deg: f64 = 0.0;
    for (solved, published) in net.buses.iter().zip(&reference.buses) {
        max_dv = max_dv.max((solved.v_mag - published.v_mag).abs());
        max_da_deg =
            max_da_deg.max((solved.v_ang - published.v_ang).abs().to_degrees());
    }
    (result.iterations, max_dv, max_da_deg)
}

#[test]
fn ieee14_matches_recorded_solution() {
    let (iterations, dv, da) = solve_and_compare("ieee14.cdf");
    assert!(iterations <= 10, "took {iterations} iterations");
    assert!(dv <= 2e-3, "max voltage deviation {dv} pu");
    assert!(da <= 0.2, "max angle deviation {da} deg");
}

#[test]
fn ieee30_matches_recorded_solution() {
    let (iterations, dv, da) = solve_and_compare("ieee30.cdf");
    assert!(iterations <= 10, "took {iterations} iterations");
    assert!(dv <= 2e-3, "max voltage deviation {dv} pu");
    assert!(da <= 0.2, "max angle deviation {da} deg");
}

#[test]
fn ieee14_slack_covers_losses() {
    let mut net = load("ieee14.cdf");
    let result = solve_newton_raphson(&mut net, &LoadflowConfig::default()).unwrap();
    let slack = &result.slack[0];
    assert_eq!(slack.bus, "1");
    // Published dispatch: 232.4 MW on a 100 MVA base.
    assert!(
        (slack.gen_p - 2.324).abs() < 5e-3,
        "slack P {} pu",
        slack.gen_p
    );
    let total_loss: f64 = result.branch_flows.iter().map(|f| f.loss().re).sum();
    assert!(total_loss > 0.0, "losses must be positive, got {total_loss}");
    // Generation minus load must equal the network losses.
    let gen: f64 = net.buses.iter().map(|b| b.gen_p).sum::<f64>()
        - net.bus("1").unwrap().gen_p
        + slack.gen_p;
    let load: f64 = net.buses.iter().map(|b| b.load_p).sum();
    assert!(
        (gen - load - total_loss).abs() < 1e-6,
        "P balance violated: gen {gen}, load {load}, loss {total_loss}"
    );
}

#[test]
fn q_limit_enforcement_pins_bus2_on_the_30_bus_case() {
    // The 30-bus case solves with bus 2 slightly above its 0.5 pu reactive
    // ceiling when limits are ignored; enforcing limits converts it to PQ
    // at the ceiling and drags its voltage below the setpoint.
    let mut free = load("ieee30.cdf");
    let unlimited = solve_newton_raphson(&mut free, &LoadflowConfig::default()).unwrap();
    assert!(unlimited.q_limited.is_empty());

    let mut limited = load("ieee30.cdf");
    let config = LoadflowConfig {
        enforce_q_limits: true,
        ..LoadflowConfig::default()
    };
    let enforced = solve_newton_raphson(&mut limited, &config).unwrap();
    assert!(enforced.converged);
    assert_eq!(enforced.q_limited, vec!["2".to_string()]);
    let setpoint = free.bus("2").unwrap().v_mag;
    assert!(
        limited.bus("2").unwrap().v_mag < setpoint,
        "pinned bus should sag below its setpoint"
    );
    let q2 = enforced
        .buses
        .iter()
        .find(|b| b.bus == "2")
        .map(|b| b.q + limited.bus("2").unwrap().load_q)
        .unwrap();
    assert!((q2 - 0.5).abs() < 1e-8, "gen Q should sit at the ceiling, got {q2}");
}
