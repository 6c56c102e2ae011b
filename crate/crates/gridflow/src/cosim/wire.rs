//! Framed JSON messages for co-simulation across process boundaries.
//!
//! Every frame is a 4-byte big-endian byte length followed by exactly that
//! many bytes of UTF-8 JSON: one object with a `"type"` discriminator.
//! Frames are small and self-delimiting; nothing is streamed.
//!
//! Session shape (steady-state exchange):
//!
//! ```text
//! participant → HELLO        { protocol_version, role, network_id }
//! coordinator → HELLO_ACK    { protocol_version, network_id }
//! per round:
//!   coordinator → BOUNDARY_V { round, bus, v_abc }
//!   participant → EQUIV      { round, bus, s_plus, i_neg, i_zero }
//! coordinator → CONVERGED    { rounds }       (or ABORT { reason })
//! ```
//!
//! `STEP` is part of the vocabulary for time-domain lockstep but is not
//! offered by this engine's coordinator; a participant receiving it answers
//! with an ABORT rather than a decode failure.
//!
//! Voltages travel as three phase phasors (`[re, im]` pairs, phase order
//! a/b/c) so an unbalanced distribution solver can plug in; this engine is
//! balanced, so it sends a positive-sequence set and reads phase a back.
//! For the same reason `EQUIV` carries negative- and zero-sequence currents
//! that are always zero here. Exchanged power is physical MW/MVAR, keeping
//! the frames meaningful whatever per-unit base each side uses.
//!
//! Anything unexpected — unparseable frame, unknown type, absurd length,
//! a closed socket — surfaces as [`Error::Protocol`]; session code replies
//! with an ABORT frame where the transport still allows one.

use std::io::{Read, Write};
use std::time::Duration;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version spoken by this implementation. A `HELLO`/`HELLO_ACK` carrying
/// anything else ends the session.
pub const PROTOCOL_VERSION: u32 = 1;

/// Hard ceiling on a frame's byte length, checked before any allocation.
pub const MAX_FRAME_BYTES: u32 = 16 * 1024 * 1024;

/// Socket read patience. A peer that stays silent longer than this is
/// treated as gone, which also bounds how long malformed-peer handling
/// can stall a session.
pub const WIRE_READ_TIMEOUT: Duration = Duration::from_secs(2);

/// Which end of the session a `HELLO` announces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Coordinator,
    Participant,
}

/// Every message that may cross the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WireMessage {
    /// Session opener, sent by the connecting side.
    Hello {
        protocol_version: u32,
        role: Role,
        network_id: String,
    },
    /// Coordinator's acceptance of a `HELLO`.
    HelloAck {
        protocol_version: u32,
        network_id: String,
    },
    /// Boundary voltage for one exchange round: phase phasors a/b/c as
    /// `[re, im]` in per-unit.
    BoundaryV {
        round: u32,
        bus: String,
        v_abc: [[f64; 2]; 3],
    },
    /// The power a feeder draws at its head under the last `BOUNDARY_V`:
    /// positive-sequence `[MW, MVAR]`, plus negative-/zero-sequence currents
    /// for unbalanced participants (zero from this engine).
    Equiv {
        round: u32,
        bus: String,
        s_plus: [f64; 2],
        i_neg: [f64; 2],
        i_zero: [f64; 2],
    },
    /// Advance lockstep time-domain simulation to `time` seconds. Parsed,
    /// but not offered by this coordinator.
    Step { time: f64 },
    /// The exchange settled after `rounds` rounds; session over.
    Converged { rounds: u32 },
    /// Unrecoverable end of session, with the reason.
    Abort { reason: String },
}

impl WireMessage {
    /// The on-wire discriminator, for log and error text.
    pub fn type_name(&self) -> &'static str {
        match self {
            WireMessage::Hello { .. } => "HELLO",
            WireMessage::HelloAck { .. } => "HELLO_ACK",
            WireMessage::BoundaryV { .. } => "BOUNDARY_V",
            WireMessage::Equiv { .. } => "EQUIV",
            WireMessage::Step { .. } => "STEP",
            WireMessage::Converged { .. } => "CONVERGED",
            WireMessage::Abort { .. } => "ABORT",
        }
    }
}

/// Serialize `msg` as one frame: header and body in a single buffer so the
/// transport sees one write per message.
pub fn encode_frame(msg: &WireMessage) -> Result<Vec<u8>> {
    let body = serde_json::to_vec(msg)
        .map_err(|e| Error::Protocol(format!("could not encode {}: {e}", msg.type_name())))?;
    if body.len() > MAX_FRAME_BYTES as usize {
        return Err(Error::Protocol(format!(
            "{} frame of {} bytes exceeds the {} byte limit",
            msg.type_name(),
            body.len(),
            MAX_FRAME_BYTES
        )));
    }
    let mut frame = Vec::with_capacity(4 + body.len());
    frame.extend_from_slice(&(body.len() as u32).to_be_bytes());
    frame.extend_from_slice(&body);
    Ok(frame)
}

/// Write one frame.
pub fn write_frame(w: &mut impl Write, msg: &WireMessage) -> Result<()> {
    let frame = encode_frame(msg)?;
    w.write_all(&frame).map_err(map_io)?;
    w.flush().map_err(map_io)
}

/// Read one frame. Length is validated before the body is touched, so a
/// hostile header cannot make this allocate without bound.
pub fn read_frame(r: &mut impl Read) -> Result<WireMessage> {
    let mut header = [0u8; 4];
    r.read_exact(&mut header).map_err(|e| map_read_eof(e, "frame header"))?;
    let len = u32::from_be_bytes(header);
    if len > MAX_FRAME_BYTES {
        return Err(Error::Protocol(format!(
            "frame length {len} exceeds the {MAX_FRAME_BYTES} byte limit"
        )));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body).map_err(|e| map_read_eof(e, "frame body"))?;
    decode_body(&body)
}

fn decode_body(body: &[u8]) -> Result<WireMessage> {
    // Decode in two stages so an unknown "type" is reported by name instead
    // of as a serde enum error.
    let value: serde_json::Value = serde_json::from_slice(body)
        .map_err(|e| Error::Protocol(format!("frame is not valid JSON: {e}")))?;
    let kind: String = {
        let Some(obj) = value.as_object() else {
            return Err(Error::Protocol("frame is not a JSON object".to_string()));
        };
        let Some(kind) = obj.get("type") else {
            return Err(Error::Protocol(
                "message has no \"type\" field".to_string(),
            ));
        };
        let Some(kind) = kind.as_str() else {
            return Err(Error::Protocol(
                "message \"type\" field is not a string".to_string(),
            ));
        };
        // Tagged-enum deserialization tolerates extra fields; this protocol
        // does not, so the field set is checked against the schema here.
        let allowed: &[&str] = match kind {
            "HELLO" => &["type", "protocol_version", "role", "network_id"],
            "HELLO_ACK" => &["type", "protocol_version", "network_id"],
            "BOUNDARY_V" => &["type", "round", "bus", "v_abc"],
            "EQUIV" => &["type", "round", "bus", "s_plus", "i_neg", "i_zero"],
            "STEP" => &["type", "time"],
            "CONVERGED" => &["type", "rounds"],
            "ABORT" => &["type", "reason"],
            other => {
                return Err(Error::Protocol(format!(
                    "unrecognized message type {other:?}"
                )))
            }
        };
        if let Some(extra) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Protocol(format!(
                "malformed {kind} message: unexpected field {extra:?}"
            )));
        }
        kind.to_string()
    };
    serde_json::from_value(value)
        .map_err(|e| Error::Protocol(format!("malformed {kind} message: {e}")))
}

fn map_io(e: std::io::Error) -> Error {
    match e.kind() {
        std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut => {
            Error::Protocol("timed out waiting for the peer".to_string())
        }
        _ => Error::Io(e),
    }
}

fn map_read_eof(e: std::io::Error, what: &str) -> Error {
    match e.kind() {
        std::io::ErrorKind::UnexpectedEof => {
            Error::Protocol(format!("connection closed while reading a {what}"))
        }
        _ => map_io(e),
    }
}

/// A balanced three-phase set for a positive-sequence phasor: phase a is
/// the phasor itself, b and c lag and lead by 120°.
pub fn balanced_abc(v: Complex64) -> [[f64; 2]; 3] {
    let turn = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let b = v / turn;
    let c = v * turn;
    [[v.re, v.im], [b.re, b.im], [c.re, c.im]]
}

/// Positive-sequence phasor of a balanced set: phase a, exactly as sent.
pub fn positive_sequence(v_abc: &[[f64; 2]; 3]) -> Complex64 {
    Complex64::new(v_abc[0][0], v_abc[0][1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn roundtrip(msg: WireMessage) {
        let mut buf = Vec::new();
        write_frame(&mut buf, &msg).unwrap();
        let got = read_frame(&mut Cursor::new(&buf)).unwrap();
        assert_eq!(got, msg);
    }

    #[test]
    fn every_message_kind_roundtrips_exactly() {
        roundtrip(WireMessage::Hello {
            protocol_version: PROTOCOL_VERSION,
            role: Role::Participant,
            network_id: "feeder-7".to_string(),
        });
        roundtrip(WireMessage::HelloAck {
            protocol_version: PROTOCOL_VERSION,
            network_id: "feeder-7".to_string(),
        });
        roundtrip(WireMessage::BoundaryV {
            round: 3,
            bus: "F1".to_string(),
            // Awkward fractions must survive bit-for-bit.
            v_abc: balanced_abc(Complex64::new(1.019_723_846_111_3, -0.031_415_926_535_9)),
        });
        roundtrip(WireMessage::Equiv {
            round: 3,
            bus: "F1".to_string(),
            s_plus: [13.000000000000053, 4.199999999999991],
            i_neg: [0.0, 0.0],
            i_zero: [0.0, 0.0],
        });
        roundtrip(WireMessage::Step { time: 0.005 });
        roundtrip(WireMessage::Converged { rounds: 6 });
        roundtrip(WireMessage::Abort {
            reason: "called it a day".to_string(),
        });
    }

    #[test]
    fn frames_queue_back_to_back() {
        let msgs = [
            WireMessage::Step { time: 0.0 },
            WireMessage::Converged { rounds: 1 },
            WireMessage::Abort {
                reason: "x".to_string(),
            },
        ];
        let mut buf = Vec::new();
        for m in &msgs {
            write_frame(&mut buf, m).unwrap();
        }
        let mut cursor = Cursor::new(&buf);
        for m in &msgs {
            assert_eq!(read_frame(&mut cursor).unwrap(), *m);
        }
        // The stream is exactly consumed.
        let err = read_frame(&mut cursor).unwrap_err();
        assert!(err.to_string().contains("connection closed"), "{err}");
    }

    fn fake_frame(body: &[u8]) -> Vec<u8> {
        let mut frame = (body.len() as u32).to_be_bytes().to_vec();
        frame.extend_from_slice(body);
        frame
    }

    #[test]
    fn unknown_type_is_named_in_the_error() {
        let frame = fake_frame(br#"{"type":"SURPRISE","round":1}"#);
        let err = read_frame(&mut Cursor::new(&frame)).unwrap_err();
        assert!(matches!(err, Error::Protocol(_)));
        assert!(
            err.to_string().contains("unrecognized message type \"SURPRISE\""),
            "{err}"
        );
    }

    #[test]
    fn missing_or_non_string_type_is_rejected() {
        for body in [&br#"{"round":1}"#[..], &br#"{"type":7}"#[..], &b"[1,2]"[..]] {
            let frame = fake_frame(body);
            let err = read_frame(&mut Cursor::new(&frame)).unwrap_err();
            assert!(matches!(err, Error::Protocol(_)), "{err}");
        }
    }

    #[test]
    fn garbage_and_truncation_are_protocol_errors() {
        // Not JSON at all.
        let err = read_frame(&mut Cursor::new(&fake_frame(b"hello there"))).unwrap_err();
        assert!(err.to_string().contains("not valid JSON"), "{err}");
        // Header promises more than the stream holds.
        let mut frame = 64u32.to_be_bytes().to_vec();
        frame.extend_from_slice(b"{}");
        let err = read_frame(&mut Cursor::new(&frame)).unwrap_err();
        assert!(
            err.to_string().contains("connection closed while reading a frame body"),
            "{err}"
        );
        // Header itself cut short.
        let err = read_frame(&mut Cursor::new(&[0u8, 0u8])).unwrap_err();
        assert!(
            err.to_string().contains("connection closed while reading a frame header"),
            "{err}"
        );
    }

    #[test]
    fn absurd_length_header_is_rejected_before_allocation() {
        let frame = u32::MAX.to_be_bytes();
        let err = read_frame(&mut Cursor::new(&frame)).unwrap_err();
        assert!(err.to_string().contains("exceeds"), "{err}");
    }

    #[test]
    fn unexpected_fields_are_rejected() {
        let frame = fake_frame(br#"{"type":"CONVERGED","rounds":2,"bonus":true}"#);
        let err = read_frame(&mut Cursor::new(&frame)).unwrap_err();
        assert!(err.to_string().contains("malformed CONVERGED"), "{err}");
    }

    #[test]
    fn missing_fields_are_rejected() {
        let frame = fake_frame(br#"{"type":"EQUIV","round":1,"bus":"F1"}"#);
        let err = read_frame(&mut Cursor::new(&frame)).unwrap_err();
        assert!(err.to_string().contains("malformed EQUIV"), "{err}");
    }

    #[test]
    fn phase_a_carries_the_phasor_bit_for_bit() {
        let v = Complex64::new(0.987_654_321_123_456_7, -0.123_456_789_987_654_32);
        let abc = balanced_abc(v);
        assert_eq!(positive_sequence(&abc), v);
        // The set really is balanced: the three phasors sum to ~zero.
        let sum = (0..3).fold(Complex64::new(0.0, 0.0), |acc, k| {
            acc + Complex64::new(abc[k][0], abc[k][1])
        });
        assert!(sum.norm() < 1e-15);
    }
}
