//! Error type shared by every module, with the CLI exit-code contract.

use thiserror::Error;

/// Everything that can go wrong across the library.
///
/// Errors split into two families with distinct exit codes on the CLI:
/// usage/input problems (exit 1) and *mathematical events* (exit 2).
/// A mathematical event is a would-be counterexample or an exhausted
/// search: something a researcher wants surfaced, not a bug.
#[derive(Debug, Error)]
pub enum Error {
    #[error("singular matrix: determinant is zero")]
    SingularMatrix,

    #[error("invalid level N = {0}: must be an odd integer >= 3")]
    InvalidLevel(i64),

    #[error("invalid epsilon {0}: must be +1 or -1")]
    InvalidEpsilon(i64),

    #[error("matrix is not in Gamma_0({level}): {reason}")]
    NotGamma0 { level: i64, reason: String },

    #[error("matrix {key} is not an L element of level N = {level}: {reason}")]
    NotLElement {
        level: i64,
        key: String,
        reason: String,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "pairing uniqueness violated at parent {parent}: first integral = {first_integral}, \
         second integral = {second_integral}"
    )]
    UniquenessViolation {
        parent: String,
        first_integral: bool,
        second_integral: bool,
    },

    #[error("coverage gap: {} admissible descriptors unreached, first missing {}", missing.len(), missing.first().map(String::as_str).unwrap_or("?"))]
    CoverageGap { missing: Vec<String> },

    #[error("missing prerequisite certificate {key}: {reason}")]
    MissingPrerequisite { key: String, reason: String },

    #[error("missing certificate for {key}; enumerate or certify to a sufficient level first")]
    MissingCertificate { key: String },

    #[error("search exhausted: {what} within {bounds}")]
    SearchExhausted { what: String, bounds: String },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("unknown certificate key {0}")]
    UnknownKey(String),

    #[error("verification failed for {key}: {reason}")]
    VerificationFailed { key: String, reason: String },

    #[error("internal consistency failure: {0}")]
    InternalIdentity(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for would-be research events: counterexamples to the paper's
    /// assumptions, coverage gaps, failed verifications, exhausted searches.
    pub fn is_research_event(&self) -> bool {
        matches!(
            self,
            Error::UniquenessViolation { .. }
                | Error::CoverageGap { .. }
                | Error::SearchExhausted { .. }
                | Error::VerificationFailed { .. }
        )
    }

    /// Stable CLI exit code: 1 usage/input error, 2 mathematical event.
    pub fn exit_code(&self) -> i32 {
        if self.is_research_event() {
            2
        } else {
            1
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
