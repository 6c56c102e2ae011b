//! JSON interchange format: a lossless, canonical serialization of the
//! network model.
//!
//! The document is `{"schema_version": "1", "network": {...}}` with the
//! model serialized field-for-field. Two properties make it suitable for
//! fingerprinting and diff-friendly storage:
//!
//! * **Lossless**: numbers are written with the shortest decimal form that
//!   round-trips the exact binary value, so `read(write(m)) == m` down to
//!   the last bit.
//! * **Canonical**: object keys are sorted and the layout is deterministic,
//!   so equal models produce byte-identical documents.
//!
//! [`model_fingerprint`] hashes the canonical bytes with SHA-256; analyses
//! treat the model as immutable, so a fingerprint taken before a screening
//! run still matches afterwards.
//!
//! Read errors point into the document (`/network/buses/3/v_mag`) and the
//! deserialized model is validated before it is handed out.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::NetworkModel;

/// Version tag expected in every document.
pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InterchangeDocument {
    schema_version: String,
    network: NetworkModel,
}

/// Convert a `serde_path_to_error` path to a JSON pointer such as
/// `/network/buses/3/v_mag`.
fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for segment in path.iter() {
        match segment {
            Segment::Map { key } => {
                out.push('/');
                out.push_str(key);
            }
            Segment::Seq { index } => {
                out.push('/');
                out.push_str(&index.to_string());
            }
            Segment::Enum { variant } => {
                out.push('/');
                out.push_str(variant);
            }
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Parse an interchange document and validate the model inside it.
pub fn read_interchange(text: &str) -> Result<NetworkModel> {
    let mut deserializer = serde_json::Deserializer::from_str(text);
    let doc: InterchangeDocument = serde_path_to_error::deserialize(&mut deserializer)
        .map_err(|e| {
            let message = e.inner().to_string();
            // serde_json appends its own location; the pointer is clearer.
            let message = match message.split(" at line ").next() {
                Some(m) => m.to_string(),
                None => message,
            };
            Error::parse(pointer(e.path()), message)
        })?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::parse(
            "/schema_version",
            format!(
                "unsupported schema version {:?} (this build reads {SCHEMA_VERSION:?})",
                doc.schema_version
            ),
        ));
    }
    doc.network.validate()?;
    Ok(doc.network)
}

/// `null` can only appear in serialized model output as the image of a
/// non-finite float, which would not survive a read.
fn reject_nulls(value: &serde_json::Value, path: &mut String) -> Result<()> {
    match value {
        serde_json::Value::Null => Err(Error::model(format!(
            "cannot export non-finite number at {path}"
        ))),
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let len = path.len();
                path.push('/');
                path.push_str(k);
                reject_nulls(v, path)?;
                path.truncate(len);
            }
            Ok(())
        }
        serde_json::Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                let len = path.len();
                path.push('/');
                path.push_str(&i.to_string());
                reject_nulls(v, path)?;
                path.truncate(len);
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Render the canonical interchange document (sorted keys, shortest
/// round-trip numbers, trailing newline).
pub fn write_interchange(network: &NetworkModel) -> Result<String> {
    network.validate()?;
    let doc = InterchangeDocument {
        schema_version: SCHEMA_VERSION.to_string(),
        network: network.clone(),
    };
    // Passing through Value sorts object keys, making the bytes canonical.
    let value = serde_json::to_value(&doc)
        .map_err(|e| Error::model(format!("serialization failed: {e}")))?;
    reject_nulls(&value, &mut String::new())?;
    let mut text = serde_json::to_string_pretty(&value)
        .map_err(|e| Error::model(format!("serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// SHA-256 of the canonical interchange bytes, hex-encoded. Equal models
/// have equal fingerprints; any observable change to the model changes it.
pub fn model_fingerprint(network: &NetworkModel) -> Result<String> {
    let text = write_interchange(network)?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
