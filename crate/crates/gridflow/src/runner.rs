//! Command-line front end: argument parsing, study dispatch, and file
//! output for the `gridflow` binary.
//!
//! [`run_command`] is the whole engine — the binary's `main` only forwards
//! `std::env::args_os()` and exits with the returned status, so every
//! behaviour here is testable in-process.
//!
//! # Contract
//!
//! - **Exit status**: `0` on success, `1` when the study itself fails
//!   (non-convergence, singular system, protocol breakdown, violations
//!   under `--fail-on-violation`), `2` for usage and input errors (unknown
//!   flags, missing or unparseable files, bad `--set` keys).
//! - **Streams**: diagnostics go to stderr; results go to files in the
//!   `--out` directory (default: the current directory). Stdout carries
//!   nothing but `--help`/`--version` text.
//! - **Atomicity**: every file is written to a temporary name in its final
//!   directory and renamed into place, so a crash never leaves a partial
//!   file under a result name.
//! - **Determinism**: identical argv and identical input files produce
//!   byte-identical result tables, whatever the worker count. The run
//!   summary is deterministic except for its measured `timing_ms` values.
//! - Input files are never written to.
//!
//! # Case arguments
//!
//! A `<case>` is a path ending in `.cdf` (fixed-column exchange text) or
//! `.json` (this crate's interchange document), or `synthetic:<buses>` for
//! a generated benchmark case — the only place `--seed` has any effect.
//!
//! # Feeder files
//!
//! `cosim --feeder` files and the participant-mode positional are JSON
//! attachment documents with three fields: `parent_bus` (where the feeder
//! hangs in the transmission model), `child_boundary_bus` (the feeder-head
//! slack inside the feeder), and `child` (the feeder network itself, in
//! the same form as the `network` field of an interchange document).

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::cdf::{parse_cdf, CdfDocument};
use crate::contingency::{all_branch_outages, run_n1};
use crate::cosim::coordinator::{run_coordinator, run_participant};
use crate::cosim::{tnd_dynamic_sim, tnd_powerflow, CoSimConfig, TndReport};
use crate::dynamics::{run_dynamics, DynConfig, DynEvent, GeneratorClassical};
use crate::error::{Error, Result};
use crate::interchange::{read_interchange, write_interchange};
use crate::loadflow::{solve_newton_raphson, LoadflowConfig};
use crate::model::{ChildLink, Layer, NetworkModel};
use crate::report;
use crate::synthetic::synthetic_case;

/// Parsed command line of one run.
#[derive(Parser, Debug)]
#[command(
    name = "gridflow",
    version,
    about = "Power-system studies: loadflow, contingency screening, transient dynamics, \
             and transmission-distribution co-simulation"
)]
pub struct RunManifest {
    #[command(subcommand)]
    pub command: StudyCommand,
}

#[derive(Subcommand, Debug)]
pub enum StudyCommand {
    /// Solve an AC loadflow and export the solved state.
    Loadflow {
        /// Case file (.cdf or .json), or synthetic:<buses>.
        case: String,
        /// Directory for result tables and the run summary.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override a solver setting, e.g. --set tolerance=1e-10.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Seed for synthetic:<buses> cases; no effect on file cases.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Screen every single-branch outage with linear outage factors.
    Nminus1 {
        /// Case file (.cdf or .json), or synthetic:<buses>.
        case: String,
        /// Worker threads for the screening loop.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Exit with status 1 if any violation (or failed case) is found.
        #[arg(long)]
        fail_on_violation: bool,
        /// Directory for result tables and the run summary.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Seed for synthetic:<buses> cases; no effect on file cases.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Co-simulate a transmission model with attached distribution feeders.
    Cosim {
        /// Transmission case file (.cdf or .json) — or, with --tcp, the
        /// feeder attachment document this participant serves.
        transmission: PathBuf,
        /// Feeder attachment document(s) to hang on the transmission model.
        #[arg(long = "feeder", value_name = "FILE")]
        feeders: Vec<PathBuf>,
        /// Join a remote coordinator at HOST:PORT as the participant
        /// serving the positional feeder document.
        #[arg(long, value_name = "HOST:PORT", conflicts_with_all = ["listen", "feeders"])]
        tcp: Option<String>,
        /// Coordinate over TCP on this port, waiting for one remote
        /// participant per feeder instead of solving feeders in-process.
        #[arg(long, value_name = "PORT")]
        listen: Option<u16>,
        /// Directory for result tables and the run summary.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override an exchange setting, e.g. --set boundary_tol=1e-8 or
        /// --set loadflow.tolerance=1e-10.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Simulate machine transients through a switching sequence.
    Dynsim {
        /// Case file (.cdf or .json); hierarchical cases run as a split
        /// simulation coupled through their tie lines.
        case: String,
        /// JSON list of switching events (fault on/off, branch trip).
        #[arg(long, value_name = "FILE")]
        events: PathBuf,
        /// JSON list of classical machines (bus, h, d, xd_p).
        #[arg(long, value_name = "FILE")]
        machines: PathBuf,
        /// Directory for result tables and the run summary.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override a simulation setting, e.g. --set dt=0.002; prefix with
        /// powerflow. to reach the hierarchical operating-point exchange,
        /// e.g. --set powerflow.boundary_tol=1e-8.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Convert a case between formats, inferred from the extensions
    /// (.cdf, .json).
    Convert {
        input: PathBuf,
        output: PathBuf,
    },
}

/// What one invocation did: the process exit status and every result file
/// that was fully written (renamed into place).
#[derive(Debug)]
pub struct RunOutcome {
    pub status: i32,
    pub files_written: Vec<PathBuf>,
}

/// Run one command line end to end. `argv` includes the program name, as
/// `std::env::args_os()` provides it.
pub fn run_command<I, S>(argv: I) -> RunOutcome
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let manifest = match RunManifest::try_parse_from(argv) {
        Ok(m) => m,
        Err(e) => {
            // clap treats --help/--version as "errors" with status 0; real
            // usage errors carry status 2. Either way it knows the stream.
            let status = e.exit_code();
            let _ = e.print();
            return RunOutcome {
                status,
                files_written: Vec::new(),
            };
        }
    };
    match dispatch(manifest.command) {
        Ok((status, files_written)) => RunOutcome {
            status,
            files_written,
        },
        Err(e) => {
            eprintln!("error: {e}");
            RunOutcome {
                status: failure_status(&e),
                files_written: Vec::new(),
            }
        }
    }
}

/// Exit status for an error that escaped the study: 1 when the analysis
/// itself broke down, 2 when the inputs or usage were wrong.
fn failure_status(e: &Error) -> i32 {
    match e {
        Error::NotConverged { .. }
        | Error::Singular { .. }
        | Error::Protocol(_)
        | Error::PeerAbort(_) => 1,
        _ => 2,
    }
}

fn dispatch(command: StudyCommand) -> Result<(i32, Vec<PathBuf>)> {
    match command {
        StudyCommand::Loadflow {
            case,
            out,
            set,
            seed,
        } => cmd_loadflow(&case, &out, &set, seed),
        StudyCommand::Nminus1 {
            case,
            workers,
            fail_on_violation,
            out,
            seed,
        } => cmd_nminus1(&case, workers, fail_on_violation, &out, seed),
        StudyCommand::Cosim {
            transmission,
            feeders,
            tcp,
            listen,
            out,
            set,
        } => cmd_cosim(&transmission, &feeders, tcp.as_deref(), listen, &out, &set),
        StudyCommand::Dynsim {
            case,
            events,
            machines,
            out,
            set,
        } => cmd_dynsim(&case, &events, &machines, &out, &set),
        StudyCommand::Convert { input, output } => cmd_convert(&input, &output),
    }
}

// ---------------------------------------------------------------------
// Input loading

enum CaseFormat {
    Cdf,
    Json,
}

fn format_of(path: &Path) -> Result<CaseFormat> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("cdf") => Ok(CaseFormat::Cdf),
        Some("json") => Ok(CaseFormat::Json),
        _ => Err(Error::InvalidArgument(format!(
            "cannot infer the format of {}: expected a .cdf or .json extension",
            path.display()
        ))),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

/// Resolve a `<case>` argument: `synthetic:<buses>` generates, anything
/// else loads a file by extension.
fn load_case(spec: &str, seed: Option<u64>) -> Result<NetworkModel> {
    if let Some(rest) = spec.strip_prefix("synthetic:") {
        let buses: usize = rest.parse().map_err(|_| {
            Error::InvalidArgument(format!(
                "synthetic case spec must be synthetic:<buses>, got {spec:?}"
            ))
        })?;
        return synthetic_case(buses, seed.unwrap_or(0));
    }
    if seed.is_some() {
        eprintln!("note: --seed only affects synthetic:<buses> cases; {spec} is a file");
    }
    let path = Path::new(spec);
    let text = read_text(path)?;
    match format_of(path)? {
        CaseFormat::Cdf => Ok(parse_cdf(&text)?.network),
        CaseFormat::Json => read_interchange(&text),
    }
}

/// Parse a JSON value with field-path error locations prefixed by the
/// file's name.
fn parse_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        Error::parse(
            format!("{}: /{}", path.display(), e.path()),
            e.inner().to_string(),
        )
    })
}

/// Raise a whole hierarchy to `layer` (the layer system is per network and
/// extending is explicit, so each level is lifted in turn).
fn extend_hierarchy(mut net: NetworkModel, layer: Layer) -> Result<NetworkModel> {
    let links: Vec<ChildLink> = net.child_links.drain(..).collect();
    let mut net = net.extend_layer(layer)?;
    for mut link in links {
        link.child = extend_hierarchy(link.child, layer)?;
        net.child_links.push(link);
    }
    Ok(net)
}

// ---------------------------------------------------------------------
// Config overrides

/// Apply `--set key=value` items onto a config's JSON image. Dots descend
/// into nested sections (`loadflow.tolerance=1e-10`); values parse as JSON
/// scalars with a fallback to plain strings. Unknown keys and mistyped
/// values are usage errors.
fn apply_overrides<T>(base: &T, sets: &[String]) -> Result<T>
where
    T: Serialize + DeserializeOwned,
{
    let mut value =
        serde_json::to_value(base).map_err(|e| Error::model(format!("serializing defaults: {e}")))?;
    for item in sets {
        let (key, raw) = item.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("--set expects KEY=VALUE, got {item:?}"))
        })?;
        let new: Value =
            serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut cursor = &mut value;
        let parts: Vec<&str> = key.split('.').collect();
        for (depth, part) in parts.iter().enumerate() {
            if cursor.get(*part).is_none() {
                let known = cursor
                    .as_object()
                    .map(|o| o.keys().cloned().collect::<Vec<_>>().join(", "))
                    .unwrap_or_default();
                return Err(Error::InvalidArgument(format!(
                    "unknown setting {key:?}; available here: {known}"
                )));
            }
            if depth + 1 == parts.len() {
                cursor[*part] = new;
                break;
            }
            cursor = cursor.get_mut(*part).expect("presence checked above");
        }
    }
    serde_json::from_value(value)
        .map_err(|e| Error::InvalidArgument(format!("--set produced an invalid configuration: {e}")))
}

// ---------------------------------------------------------------------
// Output writing

/// Collects result files for one run, writing each atomically.
struct OutputDir {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl OutputDir {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| {
            Error::InvalidArgument(format!(
                "cannot create output directory {}: {e}",
                dir.display()
            ))
        })?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, content)?;
        self.files.push(path);
        Ok(())
    }
}

/// Write through a dot-prefixed temporary in the same directory and rename
/// into place, so no reader ever sees a partial file under `path`.
fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::InvalidArgument(format!("not a writable file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let describe =
        |what: &str, e: std::io::Error| Error::InvalidArgument(format!("cannot {what} {}: {e}", path.display()));
    std::fs::write(&tmp, content).map_err(|e| describe("write", e))?;
    std::fs::rename(&tmp, path).map_err(|e| describe("finalize", e))?;
    Ok(())
}

fn pretty(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("json values always render");
    text.push('\n');
    text
}

fn elapsed_ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

// ---------------------------------------------------------------------
// Subcommands

fn cmd_loadflow(
    case: &str,
    out: &Path,
    sets: &[String],
    seed: Option<u64>,
) -> Result<(i32, Vec<PathBuf>)> {
    let config: LoadflowConfig = apply_overrides(&LoadflowConfig::default(), sets)?;
    let t_load = Instant::now();
    let mut net = load_case(case, seed)?;
    let load_ms = elapsed_ms(t_load);

    let t_solve = Instant::now();
    let result = solve_newton_raphson(&mut net, &config)?;
    let solve_ms = elapsed_ms(t_solve);

    let mut dir = OutputDir::new(out)?;
    dir.write("buses.csv", &report::bus_table_csv(&net, &result)?)?;
    dir.write(
        "branches.csv",
        &report::branch_table_csv(&net, &result.branch_flows)?,
    )?;
    dir.write("solved.json", &write_interchange(&net)?)?;
    let summary = json!({
        "command": "loadflow",
        "case": case,
        "converged": result.converged,
        "iterations": result.iterations,
        "max_mismatch": result.max_mismatch,
        "q_limited_buses": result.q_limited,
        "outputs": ["buses.csv", "branches.csv", "solved.json"],
        "timing_ms": { "load": load_ms, "solve": solve_ms },
    });
    dir.write("summary.json", &pretty(&summary))?;

    if !result.converged {
        eprintln!(
            "loadflow did not converge within {} iterations (worst mismatch {:.3e}); results in {}",
            result.iterations,
            result.max_mismatch,
            dir.dir.display()
        );
        return Ok((1, dir.files));
    }
    eprintln!(
        "loadflow converged in {} iterations; results in {}",
        result.iterations,
        dir.dir.display()
    );
    Ok((0, dir.files))
}

fn cmd_nminus1(
    case: &str,
    workers: usize,
    fail_on_violation: bool,
    out: &Path,
    seed: Option<u64>,
) -> Result<(i32, Vec<PathBuf>)> {
    let t_load = Instant::now();
    let net = load_case(case, seed)?;
    let load_ms = elapsed_ms(t_load);

    let specs = all_branch_outages(&net);
    let t_screen = Instant::now();
    let rows = run_n1(&net, &specs, workers)?;
    let screen_ms = elapsed_ms(t_screen);

    let mut islanding = 0usize;
    let mut errors = 0usize;
    let mut violations = 0usize;
    for row in &rows {
        match row {
            Ok(ca) => {
                if ca.islanding {
                    islanding += 1;
                }
                violations += ca.violations.len();
            }
            Err(_) => errors += 1,
        }
    }

    let mut dir = OutputDir::new(out)?;
    dir.write(
        "contingencies.csv",
        &report::contingency_table_csv(&specs, &rows)?,
    )?;
    let summary = json!({
        "command": "nminus1",
        "case": case,
        "workers": workers,
        "contingencies": specs.len(),
        "islanding": islanding,
        "errors": errors,
        "violations": violations,
        "outputs": ["contingencies.csv"],
        "timing_ms": { "load": load_ms, "screen": screen_ms },
    });
    dir.write("summary.json", &pretty(&summary))?;

    eprintln!(
        "screened {} outages ({} islanding, {} violations, {} errors); results in {}",
        specs.len(),
        islanding,
        violations,
        errors,
        dir.dir.display()
    );
    if fail_on_violation && (violations > 0 || errors > 0) {
        return Ok((1, dir.files));
    }
    Ok((0, dir.files))
}

fn cmd_cosim(
    transmission: &Path,
    feeders: &[PathBuf],
    tcp: Option<&str>,
    listen: Option<u16>,
    out: &Path,
    sets: &[String],
) -> Result<(i32, Vec<PathBuf>)> {
    let config: CoSimConfig = apply_overrides(&CoSimConfig::default(), sets)?;

    // Participant mode: serve one feeder to a remote coordinator.
    if let Some(addr) = tcp {
        let attachment: ChildLink = parse_json_file(transmission)?;
        let mut child = attachment.child;
        let t_run = Instant::now();
        let rounds = run_participant(&mut child, &attachment.child_boundary_bus, addr, &config)?;
        let run_ms = elapsed_ms(t_run);

        let mut dir = OutputDir::new(out)?;
        let summary = json!({
            "command": "cosim",
            "mode": "participant",
            "network": child.id,
            "coordinator": addr,
            "rounds": rounds,
            "outputs": [],
            "timing_ms": { "run": run_ms },
        });
        dir.write("summary.json", &pretty(&summary))?;
        eprintln!("served feeder {:?} for {rounds} rounds", child.id);
        return Ok((0, dir.files));
    }

    let t_load = Instant::now();
    let mut net = load_case(
        transmission
            .to_str()
            .ok_or_else(|| Error::InvalidArgument("transmission path is not valid UTF-8".into()))?,
        None,
    )?;
    for feeder in feeders {
        let attachment: ChildLink = parse_json_file(feeder)?;
        net.attach_child(
            &attachment.parent_bus,
            attachment.child,
            &attachment.child_boundary_bus,
        )?;
    }
    if net.child_links.is_empty() {
        return Err(Error::InvalidArgument(
            "the transmission model has no feeders: pass --feeder files or embed children in the case".into(),
        ));
    }
    let load_ms = elapsed_ms(t_load);
    let feeder_ids: Vec<String> = net.child_links.iter().map(|l| l.child.id.clone()).collect();

    let t_run = Instant::now();
    let (mode, outcome): (&str, TndReport) = match listen {
        Some(port) => (
            "coordinator",
            run_coordinator(&mut net, &format!("0.0.0.0:{port}"), &config)?,
        ),
        None => ("in-process", tnd_powerflow(&mut net, &config)?),
    };
    let run_ms = elapsed_ms(t_run);

    let mut dir = OutputDir::new(out)?;
    dir.write(
        "exchanges.csv",
        &report::exchange_table_csv(&outcome.exchanges)?,
    )?;
    dir.write("buses.csv", &report::bus_table_csv(&net, &outcome.loadflow)?)?;
    dir.write("solved.json", &write_interchange(&net)?)?;
    let summary = json!({
        "command": "cosim",
        "mode": mode,
        "transmission": transmission.display().to_string(),
        "feeders": feeder_ids,
        "converged": outcome.converged,
        "rounds": outcome.rounds,
        "boundary_mismatch": outcome.boundary_mismatch,
        "outputs": ["exchanges.csv", "buses.csv", "solved.json"],
        "timing_ms": { "load": load_ms, "run": run_ms },
    });
    dir.write("summary.json", &pretty(&summary))?;

    if !outcome.converged {
        eprintln!(
            "boundary exchange did not settle within {} rounds (movement {:.3e}); results in {}",
            outcome.rounds,
            outcome.boundary_mismatch,
            dir.dir.display()
        );
        return Ok((1, dir.files));
    }
    eprintln!(
        "boundary exchange settled after {} rounds; results in {}",
        outcome.rounds,
        dir.dir.display()
    );
    Ok((0, dir.files))
}

fn cmd_dynsim(
    case: &str,
    events_path: &Path,
    machines_path: &Path,
    out: &Path,
    sets: &[String],
) -> Result<(i32, Vec<PathBuf>)> {
    // Bare keys tune the integrator; powerflow.* keys tune the boundary
    // exchange that fixes the operating point of hierarchical cases.
    let mut dyn_sets: Vec<String> = Vec::new();
    let mut pf_sets: Vec<String> = Vec::new();
    for item in sets {
        match item.strip_prefix("powerflow.") {
            Some(rest) => pf_sets.push(rest.to_string()),
            None => dyn_sets.push(item.clone()),
        }
    }
    let dyn_config: DynConfig = apply_overrides(&DynConfig::default(), &dyn_sets)?;
    let pf_config: CoSimConfig = apply_overrides(&CoSimConfig::default(), &pf_sets)?;

    let t_load = Instant::now();
    let mut net = extend_hierarchy(load_case(case, None)?, Layer::Dynamics)?;
    let machines: Vec<GeneratorClassical> = parse_json_file(machines_path)?;
    let events: Vec<DynEvent> = parse_json_file(events_path)?;
    let load_ms = elapsed_ms(t_load);

    let t_sim = Instant::now();
    let result = if net.child_links.is_empty() {
        // Dynamics start from a solved operating point; for hierarchical
        // cases tnd_dynamic_sim establishes it internally, for flat cases
        // we must solve here.
        let lf = solve_newton_raphson(&mut net, &pf_config.loadflow)?;
        if !lf.converged {
            return Err(Error::NotConverged {
                what: format!("pre-disturbance loadflow for {case}"),
                iterations: lf.iterations,
                residual: lf.max_mismatch,
            });
        }
        run_dynamics(&net, &machines, &events, &dyn_config)?
    } else {
        tnd_dynamic_sim(&net, &machines, &events, &dyn_config, &pf_config)?
    };
    let sim_ms = elapsed_ms(t_sim);

    let mut dir = OutputDir::new(out)?;
    dir.write("trajectory.csv", &report::trajectory_table_csv(&result)?)?;
    let machine_buses: Vec<&str> = result.generators.iter().map(|g| g.bus.as_str()).collect();
    let summary = json!({
        "command": "dynsim",
        "case": case,
        "machines": machine_buses,
        "events": events.len(),
        "samples": result.time.len(),
        "dt": dyn_config.dt,
        "t_end": dyn_config.t_end,
        "stable": result.stable,
        "first_separation_s": result.first_separation,
        "outputs": ["trajectory.csv"],
        "timing_ms": { "load": load_ms, "simulate": sim_ms },
    });
    dir.write("summary.json", &pretty(&summary))?;

    match result.first_separation {
        Some(t) => eprintln!(
            "machines separated at t = {t:.3} s; trajectory in {}",
            dir.dir.display()
        ),
        None => eprintln!(
            "simulated {:.3} s, all machines in step; trajectory in {}",
            dyn_config.t_end,
            dir.dir.display()
        ),
    }
    Ok((0, dir.files))
}

fn cmd_convert(input: &Path, output: &Path) -> Result<(i32, Vec<PathBuf>)> {
    let text = read_text(input)?;
    let net = match format_of(input)? {
        CaseFormat::Cdf => parse_cdf(&text)?.network,
        CaseFormat::Json => read_interchange(&text)?,
    };
    let rendered = match format_of(output)? {
        CaseFormat::Cdf => write_cdf_document(&net)?,
        CaseFormat::Json => write_interchange(&net)?,
    };
    write_atomic(output, &rendered)?;
    eprintln!("wrote {}", output.display());
    Ok((0, vec![output.to_path_buf()]))
}

fn write_cdf_document(net: &NetworkModel) -> Result<String> {
    if !net.child_links.is_empty() {
        return Err(Error::InvalidArgument(
            "hierarchical models cannot be written as CDF; convert to .json instead".into(),
        ));
    }
    crate::cdf::write_cdf(&CdfDocument::from_network(net.clone()))
}
