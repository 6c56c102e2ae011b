//! Central error type.
//!
//! Every fallible public entry point in the crate returns [`Result`]. The
//! variants are grouped by where the failure originates: input data, model
//! consistency, numerics, and the co-simulation wire protocol.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Underlying I/O failure (file open, socket read, ...).
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A data file could not be parsed. `path` is a human-readable locator:
    /// `line 12, cols 28-33` for fixed-column text, a JSON-pointer-style
    /// path like `/network/buses/3/v_mag` for interchange documents.
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    /// The data describes an inconsistent network (dangling branch endpoint,
    /// duplicate id, nonpositive base, branch below the minimum impedance).
    #[error("model error: {0}")]
    Model(String),

    /// A bus id that does not exist in the network being addressed.
    #[error("unknown bus {0:?}")]
    UnknownBus(String),

    /// A branch id that does not exist in the network being addressed.
    #[error("unknown branch {0:?}")]
    UnknownBranch(String),

    /// An analysis was asked to run below the model layer it needs.
    #[error("analysis requires the {required} layer but the model is at {current}")]
    LayerRequired { required: String, current: String },

    /// The named linear system lost rank at the given elimination step. For
    /// the loadflow Jacobian this is reported distinctly from plain
    /// non-convergence; for network matrices it usually means an isolated
    /// subnetwork with no voltage source.
    #[error("singular {what}: zero pivot at elimination step {pivot}")]
    Singular { what: &'static str, pivot: usize },

    /// An iterative method exhausted its iteration budget. `residual` is the
    /// worst mismatch when the budget ran out.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        what: String,
        iterations: usize,
        residual: f64,
    },

    /// Co-simulation wire protocol violation (malformed frame, unexpected
    /// message type, version mismatch). The session is not recoverable.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// The peer ended the co-simulation session with an ABORT message.
    #[error("peer aborted: {0}")]
    PeerAbort(String),

    /// Invalid configuration or CLI usage (bad `--set` key, conflicting
    /// flags, missing input file). Maps to exit code 2 in the binary.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Shorthand for a parse error with a location.
    pub fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Shorthand for a model-consistency error.
    pub fn model(message: impl Into<String>) -> Self {
        Error::Model(message.into())
    }
}
