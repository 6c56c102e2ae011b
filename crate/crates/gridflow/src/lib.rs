//! Power system simulation engine.
//!
//! `gridflow` models electric networks as layered bus/branch objects and runs
//! the classic steady-state and dynamic studies on top of that one model:
//! AC loadflow, balanced fault currents, N-1 contingency screening, classical
//! transient stability, and transmission/distribution co-simulation where
//! distribution feeders are solved as child networks of a transmission case —
//! in-process or over a TCP socket.
//!
//! The crate is organized as a library with runnable examples; each major
//! capability has one:
//!
//! ```text
//! cargo run --example build_and_inspect    # object model, layers, validation
//! cargo run --example loadflow_basic       # Newton-Raphson AC loadflow
//! cargo run --example fault_currents       # balanced three-phase fault calc
//! cargo run --example contingency_screen   # N-1 with LODF pre-screening
//! cargo run --example n1_scaling           # contingency throughput vs workers
//! cargo run --example transient_fault      # classical swing simulation
//! cargo run --example cosim_powerflow      # T&D boundary-exchange powerflow
//! cargo run --example cosim_dynamic        # T&D dynamics via network tearing
//! cargo run --example cosim_tcp            # the same exchange over a socket
//! cargo run --example convert_formats      # IEEE CDF <-> interchange JSON
//! ```
//!
//! A thin `gridflow` binary wraps the same entry points as subcommands
//! (`loadflow`, `nminus1`, `dynsim`, `cosim`, `convert`) for scripted use.
//!
//! # Model layers
//!
//! A [`model::NetworkModel`] carries an ordered layer marker
//! ([`model::Layer`]) naming the richest analysis its data has been vetted
//! for: topology only, AC loadflow, short circuit, dynamics. Layers only
//! extend — [`model::NetworkModel::extend_layer`] re-validates and never
//! forgets — and every analysis checks the layer it needs before touching
//! numbers, so a connectivity-only model can never wander into a Newton
//! solve. Distribution feeders attach as child networks
//! ([`model::NetworkModel::attach_child`]) to form one nested model, and
//! machine data for dynamics travels alongside the network rather than
//! inside it. Analyses that treat the model as read-only (loadflow,
//! contingency screening) are safe to share across worker threads by
//! reference.

pub mod cdf;
pub mod contingency;
pub mod cosim;
pub mod dynamics;
pub mod error;
pub mod fault;
pub mod interchange;
pub mod loadflow;
pub mod model;
pub mod report;
pub mod runner;
pub mod sparse;
pub mod synthetic;
pub mod topology;

pub use error::{Error, Result};
