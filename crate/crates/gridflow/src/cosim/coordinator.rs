//! The steady-state boundary exchange run across TCP.
//!
//! The coordinator side owns the parent network; each child network is
//! simulated by a participant, typically in another process. Sessions use
//! the framed messages of [`wire`](super::wire) and follow exactly the
//! in-process exchange driver — the coordinator literally calls the same
//! [`exchange_with`](super::exchange_with) loop and merely routes the
//! child-solve callback through a socket. Given identical models and
//! configuration on both ends, the resulting [`TndReport`] (trace included)
//! is therefore bit-for-bit the one [`tnd_powerflow`](super::tnd_powerflow)
//! produces in a single process.
//!
//! Session rules:
//!
//! * Participants connect and open with `HELLO`; the coordinator matches
//!   `network_id` against the parent's child links, in any arrival order.
//! * Any malformed frame, unknown message type, protocol-version mismatch,
//!   unknown network id, or silent peer ends the whole session: the side
//!   that noticed sends `ABORT` (best effort) and returns an error. There
//!   is no renegotiation.
//! * A completed exchange ends with `CONVERGED`; an exchange that runs out
//!   of rounds ends with `ABORT`, and the coordinator reports
//!   `converged: false` just as the in-process solver does.

use std::io::Write as _;
use std::net::{TcpListener, TcpStream};
use std::time::{Duration, Instant};

use super::wire::{
    balanced_abc, positive_sequence, read_frame, write_frame, Role, WireMessage,
    PROTOCOL_VERSION, WIRE_READ_TIMEOUT,
};
use super::{boundary_draw_mw, exchange_hierarchy, ChildPort, CoSimConfig, TndReport};
use crate::error::{Error, Result};
use crate::model::{BusKind, NetworkModel};

/// How long the coordinator waits for the full roster of participants.
pub const ACCEPT_TIMEOUT: Duration = Duration::from_secs(10);

/// Bind `addr` and run one coordination session over it.
pub fn run_coordinator(
    parent: &mut NetworkModel,
    addr: &str,
    config: &CoSimConfig,
) -> Result<TndReport> {
    let listener = TcpListener::bind(addr)?;
    run_coordinator_on(listener, parent, config)
}

/// Run one coordination session on an already-bound listener (callers that
/// need the ephemeral port, like tests, bind first and pass it in).
pub fn run_coordinator_on(
    listener: TcpListener,
    parent: &mut NetworkModel,
    config: &CoSimConfig,
) -> Result<TndReport> {
    parent.validate()?;
    super::check_hierarchy(parent)?;
    if parent.child_links.is_empty() {
        return Err(Error::InvalidArgument(
            "the model has no children to coordinate; solve it directly".to_string(),
        ));
    }

    let ports: Vec<ChildPort> = parent
        .child_links
        .iter()
        .map(|l| ChildPort {
            child_id: l.child.id.clone(),
            parent_bus: l.parent_bus.clone(),
        })
        .collect();
    let boundary_ids: Vec<String> = parent
        .child_links
        .iter()
        .map(|l| l.child_boundary_bus.clone())
        .collect();

    let mut streams = accept_participants(&listener, &ports)?;

    let outcome = super::exchange_with(parent, &ports, config, |idx, round, v| {
        let stream = &mut streams[idx];
        write_frame(
            stream,
            &WireMessage::BoundaryV {
                round: round as u32,
                bus: boundary_ids[idx].clone(),
                v_abc: balanced_abc(v),
            },
        )?;
        match read_frame(stream) {
            Ok(WireMessage::Equiv {
                round: r,
                bus,
                s_plus,
                ..
            }) => {
                if r as usize != round || bus != boundary_ids[idx] {
                    let reason = format!(
                        "EQUIV for round {r} bus {bus:?} arrived during round {round} for bus {:?}",
                        boundary_ids[idx]
                    );
                    let _ = write_frame(stream, &WireMessage::Abort { reason: reason.clone() });
                    return Err(Error::Protocol(reason));
                }
                Ok((s_plus[0], s_plus[1]))
            }
            Ok(WireMessage::Abort { reason }) => Err(Error::PeerAbort(reason)),
            Ok(other) => {
                let reason = format!("expected EQUIV, got {}", other.type_name());
                let _ = write_frame(stream, &WireMessage::Abort { reason: reason.clone() });
                Err(Error::Protocol(reason))
            }
            Err(e) => {
                let _ = write_frame(
                    stream,
                    &WireMessage::Abort {
                        reason: e.to_string(),
                    },
                );
                Err(e)
            }
        }
    });

    match &outcome {
        Ok(report) if report.converged => {
            let done = WireMessage::Converged {
                rounds: report.rounds as u32,
            };
            for stream in &mut streams {
                write_frame(stream, &done)?;
            }
        }
        Ok(report) => {
            broadcast_abort(
                &mut streams,
                &format!(
                    "boundary exchange did not converge within {} rounds",
                    report.rounds
                ),
            );
        }
        Err(e) => {
            broadcast_abort(&mut streams, &e.to_string());
        }
    }
    outcome
}

fn broadcast_abort(streams: &mut [TcpStream], reason: &str) {
    let msg = WireMessage::Abort {
        reason: reason.to_string(),
    };
    for stream in streams {
        let _ = write_frame(stream, &msg);
        let _ = stream.flush();
    }
}

/// Accept and handshake one connection per child, in any arrival order.
fn accept_participants(listener: &TcpListener, ports: &[ChildPort]) -> Result<Vec<TcpStream>> {
    listener.set_nonblocking(true)?;
    let deadline = Instant::now() + ACCEPT_TIMEOUT;
    let mut slots: Vec<Option<TcpStream>> = ports.iter().map(|_| None).collect();
    let mut connected = 0usize;

    while connected < ports.len() {
        let (stream, _) = match listener.accept() {
            Ok(pair) => pair,
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    return Err(Error::Protocol(format!(
                        "timed out waiting for participants ({connected} of {} connected)",
                        ports.len()
                    )));
                }
                std::thread::sleep(Duration::from_millis(5));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let mut stream = prepare(stream)?;
        match handshake(&mut stream, ports, &slots) {
            Ok(idx) => {
                slots[idx] = Some(stream);
                connected += 1;
            }
            Err(e) => {
                // One bad handshake ends the session: every already-accepted
                // participant is told why.
                let mut accepted: Vec<TcpStream> =
                    slots.into_iter().flatten().collect();
                broadcast_abort(&mut accepted, &e.to_string());
                return Err(e);
            }
        }
    }
    Ok(slots.into_iter().map(|s| s.expect("all connected")).collect())
}

fn prepare(stream: TcpStream) -> Result<TcpStream> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(WIRE_READ_TIMEOUT))?;
    Ok(stream)
}

/// Validate a `HELLO` and answer it. Returns the child slot it claims.
fn handshake(
    stream: &mut TcpStream,
    ports: &[ChildPort],
    slots: &[Option<TcpStream>],
) -> Result<usize> {
    let hello = read_frame(stream).map_err(|e| {
        let _ = write_frame(
            stream,
            &WireMessage::Abort {
                reason: e.to_string(),
            },
        );
        e
    })?;
    let (version, role, network_id) = match hello {
        WireMessage::Hello {
            protocol_version,
            role,
            network_id,
        } => (protocol_version, role, network_id),
        other => {
            return Err(abort_with(
                stream,
                format!("expected HELLO, got {}", other.type_name()),
            ))
        }
    };
    if version != PROTOCOL_VERSION {
        return Err(abort_with(
            stream,
            format!(
                "protocol version {version} is not supported (this side speaks {PROTOCOL_VERSION})"
            ),
        ));
    }
    if role != Role::Participant {
        return Err(abort_with(
            stream,
            "a coordinator cannot serve another coordinator".to_string(),
        ));
    }
    let Some(idx) = ports.iter().position(|p| p.child_id == network_id) else {
        return Err(abort_with(
            stream,
            format!("unknown network id {network_id:?}"),
        ));
    };
    if slots[idx].is_some() {
        return Err(abort_with(
            stream,
            format!("network id {network_id:?} already connected"),
        ));
    }
    write_frame(
        stream,
        &WireMessage::HelloAck {
            protocol_version: PROTOCOL_VERSION,
            network_id,
        },
    )?;
    Ok(idx)
}

fn abort_with(stream: &mut TcpStream, reason: String) -> Error {
    let _ = write_frame(
        stream,
        &WireMessage::Abort {
            reason: reason.clone(),
        },
    );
    Error::Protocol(reason)
}

/// Serve one child network to a coordinator at `addr`. Returns the number
/// of exchange rounds once the coordinator announces convergence; the child
/// model is left holding its coupled-operating-point solution.
///
/// The child may have children of its own; they are solved in-process here,
/// invisibly to the coordinator.
pub fn run_participant(
    child: &mut NetworkModel,
    boundary_bus: &str,
    addr: &str,
    config: &CoSimConfig,
) -> Result<usize> {
    child.validate()?;
    super::check_hierarchy(child)?;
    let head = child
        .bus(boundary_bus)
        .ok_or_else(|| Error::UnknownBus(boundary_bus.to_string()))?;
    if head.kind != BusKind::Slack {
        return Err(Error::model(format!(
            "boundary bus {boundary_bus:?} must be this network's slack, found {:?}",
            head.kind
        )));
    }

    let stream = TcpStream::connect(addr)?;
    let mut stream = prepare(stream)?;
    write_frame(
        &mut stream,
        &WireMessage::Hello {
            protocol_version: PROTOCOL_VERSION,
            role: Role::Participant,
            network_id: child.id.clone(),
        },
    )?;
    match read_frame(&mut stream)? {
        WireMessage::HelloAck {
            protocol_version,
            network_id,
        } => {
            if protocol_version != PROTOCOL_VERSION {
                return Err(abort_with(
                    &mut stream,
                    format!(
                        "coordinator speaks protocol version {protocol_version}, \
                         this side speaks {PROTOCOL_VERSION}"
                    ),
                ));
            }
            if network_id != child.id {
                return Err(abort_with(
                    &mut stream,
                    format!(
                        "coordinator acknowledged network {network_id:?}, expected {:?}",
                        child.id
                    ),
                ));
            }
        }
        WireMessage::Abort { reason } => return Err(Error::PeerAbort(reason)),
        other => {
            return Err(abort_with(
                &mut stream,
                format!("expected HELLO_ACK, got {}", other.type_name()),
            ))
        }
    }

    serve_rounds(child, boundary_bus, &mut stream, config)
}

fn serve_rounds(
    child: &mut NetworkModel,
    boundary_bus: &str,
    stream: &mut TcpStream,
    config: &CoSimConfig,
) -> Result<usize> {
    loop {
        match read_frame(stream) {
            Ok(WireMessage::BoundaryV { round, bus, v_abc }) => {
                if bus != boundary_bus {
                    return Err(abort_with(
                        stream,
                        format!("BOUNDARY_V names bus {bus:?}, this side serves {boundary_bus:?}"),
                    ));
                }
                let v = positive_sequence(&v_abc);
                let head = child.bus_mut(boundary_bus).expect("checked on entry");
                head.v_mag = v.norm();
                head.v_ang = v.arg();
                let report = match exchange_hierarchy(child, config) {
                    Ok(report) if report.converged => report,
                    Ok(report) => {
                        return Err(abort_with(
                            stream,
                            format!(
                                "feeder-side exchange stalled at residual {:.3e}",
                                report.boundary_mismatch
                            ),
                        ))
                    }
                    Err(e) => return Err(abort_with(stream, e.to_string())),
                };
                let (p_mw, q_mvar) = match boundary_draw_mw(&report.loadflow, boundary_bus, child)
                {
                    Ok(draw) => draw,
                    Err(e) => return Err(abort_with(stream, e.to_string())),
                };
                write_frame(
                    stream,
                    &WireMessage::Equiv {
                        round,
                        bus,
                        s_plus: [p_mw, q_mvar],
                        i_neg: [0.0, 0.0],
                        i_zero: [0.0, 0.0],
                    },
                )?;
            }
            Ok(WireMessage::Converged { rounds }) => return Ok(rounds as usize),
            Ok(WireMessage::Abort { reason }) => return Err(Error::PeerAbort(reason)),
            Ok(WireMessage::Step { .. }) => {
                return Err(abort_with(
                    stream,
                    "time-domain stepping is not offered over the wire; \
                     run the dynamic co-simulation in-process"
                        .to_string(),
                ))
            }
            Ok(other) => {
                return Err(abort_with(
                    stream,
                    format!("unexpected {} mid-session", other.type_name()),
                ))
            }
            Err(e) => {
                let _ = write_frame(
                    stream,
                    &WireMessage::Abort {
                        reason: e.to_string(),
                    },
                );
                return Err(e);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::testnet::*;
    use super::super::tnd_powerflow;
    use super::*;
    use std::thread;
    use std::time::Instant;

    fn hierarchy() -> NetworkModel {
        let mut net = lifted(&parent_spec());
        attach(&mut net, "T3", lifted(&feeder_spec("f1", 100.0, 1.0)));
        attach(&mut net, "T4", lifted(&feeder_spec("f2", 40.0, 1.3)));
        net
    }

    #[test]
    fn tcp_session_reproduces_the_in_process_exchange_bit_for_bit() {
        let mut reference = hierarchy();
        let ref_report = tnd_powerflow(&mut reference, &tight()).unwrap();
        assert!(ref_report.converged);

        let mut coordinated = hierarchy();
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();

        // Each participant owns its child model, as it would in its own
        // process; connect order is scrambled on purpose.
        let children: Vec<NetworkModel> = coordinated
            .child_links
            .iter()
            .map(|l| l.child.clone())
            .collect();
        let handles: Vec<_> = children
            .into_iter()
            .rev()
            .map(|mut child| {
                let addr = addr.to_string();
                thread::spawn(move || {
                    let rounds =
                        run_participant(&mut child, "F1", &addr, &tight()).unwrap();
                    (rounds, child)
                })
            })
            .collect();

        let report = run_coordinator_on(listener, &mut coordinated, &tight()).unwrap();

        assert!(report.converged);
        assert_eq!(report.exchanges, ref_report.exchanges);
        assert_eq!(report.rounds, ref_report.rounds);
        assert_eq!(report.loadflow.buses, ref_report.loadflow.buses);
        assert_eq!(report.boundary_mismatch, ref_report.boundary_mismatch);

        // Participants solved their copies to exactly the in-process state.
        for handle in handles {
            let (rounds, child) = handle.join().unwrap();
            assert_eq!(rounds, report.rounds);
            let in_process = reference
                .child_links
                .iter()
                .find(|l| l.child.id == child.id)
                .unwrap();
            assert_eq!(child, in_process.child);
        }
        // Parent buses too (loads restored, voltages coupled).
        assert_eq!(coordinated.buses, reference.buses);
    }

    #[test]
    fn participant_rejects_a_version_mismatch() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        let fake = thread::spawn(move || {
            let (mut s, _) = listener.accept().unwrap();
            s.set_read_timeout(Some(WIRE_READ_TIMEOUT)).unwrap();
            let hello = read_frame(&mut s).unwrap();
            assert_eq!(hello.type_name(), "HELLO");
            write_frame(
                &mut s,
                &WireMessage::HelloAck {
                    protocol_version: 99,
                    network_id: "f1".to_string(),
                },
            )
            .unwrap();
            // The participant answers with an ABORT that names both versions.
            match read_frame(&mut s).unwrap() {
                WireMessage::Abort { reason } => {
                    assert!(reason.contains("99"), "{reason}");
                }
                other => panic!("expected ABORT, got {}", other.type_name()),
            }
        });
        let mut child = lifted(&feeder_spec("f1", 100.0, 1.0));
        let err = run_participant(&mut child, "F1", &addr, &tight()).unwrap_err();
        assert!(err.to_string().contains("version 99"), "{err}");
        fake.join().unwrap();
    }

    #[test]
    fn coordinator_aborts_an_unknown_network_id() {
        let started = Instant::now();
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        let fake = thread::spawn(move || {
            let mut s = TcpStream::connect(&addr).unwrap();
            s.set_read_timeout(Some(WIRE_READ_TIMEOUT)).unwrap();
            write_frame(
                &mut s,
                &WireMessage::Hello {
                    protocol_version: PROTOCOL_VERSION,
                    role: Role::Participant,
                    network_id: "zebra".to_string(),
                },
            )
            .unwrap();
            match read_frame(&mut s).unwrap() {
                WireMessage::Abort { reason } => {
                    assert!(reason.contains("unknown network id"), "{reason}");
                }
                other => panic!("expected ABORT, got {}", other.type_name()),
            }
        });
        let mut net = hierarchy();
        let err = run_coordinator_on(listener, &mut net, &tight()).unwrap_err();
        assert!(err.to_string().contains("unknown network id"), "{err}");
        fake.join().unwrap();
        assert!(started.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn coordinator_survives_garbage_and_hostile_lengths() {
        for payload in [
            &b"\x00\x00\x00\x05hello"[..],   // not JSON
            &u32::MAX.to_be_bytes()[..],     // absurd length header
            &b"\x00\x00\x00\x1b{\"type\":\"FLOOD\",\"level\":11}"[..], // unknown type
        ] {
            let started = Instant::now();
            let listener = TcpListener::bind("127.0.0.1:0").unwrap();
            let addr = listener.local_addr().unwrap().to_string();
            let payload = payload.to_vec();
            let fake = thread::spawn(move || {
                let mut s = TcpStream::connect(&addr).unwrap();
                s.write_all(&payload).unwrap();
                // Leave the socket open; the coordinator must not wait on us.
                s
            });
            let mut net = hierarchy();
            let err = run_coordinator_on(listener, &mut net, &tight()).unwrap_err();
            assert!(matches!(err, Error::Protocol(_)), "{err}");
            drop(fake.join().unwrap());
            assert!(
                started.elapsed() < Duration::from_secs(5),
                "handling took {:?}",
                started.elapsed()
            );
        }
    }

    #[test]
    fn coordinator_times_out_on_a_silent_participant() {
        let started = Instant::now();
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        let fake = thread::spawn(move || {
            let s = TcpStream::connect(&addr).unwrap();
            // Say nothing; hold the socket open until the coordinator quits.
            std::thread::sleep(Duration::from_millis(3500));
            drop(s);
        });
        let mut net = hierarchy();
        let err = run_coordinator_on(listener, &mut net, &tight()).unwrap_err();
        assert!(err.to_string().contains("timed out"), "{err}");
        fake.join().unwrap();
        assert!(
            started.elapsed() < Duration::from_secs(5),
            "handling took {:?}",
            started.elapsed()
        );
    }

    #[test]
    fn participant_declines_time_domain_stepping() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        let fake = thread::spawn(move || {
            let (mut s, _) = listener.accept().unwrap();
            s.set_read_timeout(Some(WIRE_READ_TIMEOUT)).unwrap();
            let _hello = read_frame(&mut s).unwrap();
            write_frame(
                &mut s,
                &WireMessage::HelloAck {
                    protocol_version: PROTOCOL_VERSION,
                    network_id: "f1".to_string(),
                },
            )
            .unwrap();
            write_frame(&mut s, &WireMessage::Step { time: 0.005 }).unwrap();
            match read_frame(&mut s).unwrap() {
                WireMessage::Abort { reason } => {
                    assert!(reason.contains("in-process"), "{reason}");
                }
                other => panic!("expected ABORT, got {}", other.type_name()),
            }
        });
        let mut child = lifted(&feeder_spec("f1", 100.0, 1.0));
        let err = run_participant(&mut child, "F1", &addr, &tight()).unwrap_err();
        assert!(err.to_string().contains("not offered over the wire"), "{err}");
        fake.join().unwrap();
    }

    #[test]
    fn participant_reports_a_vanished_coordinator() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        let fake = thread::spawn(move || {
            let (mut s, _) = listener.accept().unwrap();
            s.set_read_timeout(Some(WIRE_READ_TIMEOUT)).unwrap();
            let _hello = read_frame(&mut s).unwrap();
            write_frame(
                &mut s,
                &WireMessage::HelloAck {
                    protocol_version: PROTOCOL_VERSION,
                    network_id: "f1".to_string(),
                },
            )
            .unwrap();
            // Vanish mid-session.
            drop(s);
        });
        let mut child = lifted(&feeder_spec("f1", 100.0, 1.0));
        let err = run_participant(&mut child, "F1", &addr, &tight()).unwrap_err();
        assert!(err.to_string().contains("connection closed"), "{err}");
        fake.join().unwrap();
    }
}
