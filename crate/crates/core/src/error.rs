use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("lead count: expected 12 leads, found {0}")]
    LeadCount(usize),

    #[error("unknown lead name {0:?}")]
    UnknownLead(String),

    #[error("duplicate lead {0}")]
    DuplicateLead(String),

    #[error("ragged leads: lead {lead} has {found} samples, expected {expected}")]
    RaggedLeads {
        lead: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite sample in lead {lead} at index {index}")]
    NonFinite { lead: String, index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("signal too short: need at least {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("codebook version mismatch: expected {expected:?}, found {found:?}")]
    CodebookVersion { expected: String, found: String },

    #[error("invalid codebook: {0}")]
    InvalidCodebook(String),

    #[error("malformed ECG language at position {position}: {reason}")]
    MalformedLanguage { position: usize, reason: String },

    #[error("character {0:?} is outside the alphabet")]
    OutsideAlphabet(char),

    #[error("trend filter did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("attention dump mismatch: {0}")]
    DumpMismatch(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier, used by the CLI for single-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse(_) => "parse",
            Error::LeadCount(_) => "lead_count",
            Error::UnknownLead(_) => "unknown_lead",
            Error::DuplicateLead(_) => "duplicate_lead",
            Error::RaggedLeads { .. } => "ragged_leads",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::SignalTooShort { .. } => "signal_too_short",
            Error::Degenerate(_) => "degenerate",
            Error::CodebookVersion { .. } => "codebook_version",
            Error::InvalidCodebook(_) => "invalid_codebook",
            Error::MalformedLanguage { .. } => "malformed_language",
            Error::OutsideAlphabet(_) => "outside_alphabet",
            Error::NonConvergence { .. } => "non_convergence",
            Error::DumpMismatch(_) => "dump_mismatch",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
