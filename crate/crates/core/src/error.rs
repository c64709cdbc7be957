use std::path::PathBuf;

use crate::stats::LmmFit;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("duplicate essay_id {id:?} on lines {first} and {second}")]
    DuplicateEssay {
        id: String,
        first: usize,
        second: usize,
    },

    #[error("unknown proficiency: {0}")]
    UnknownProficiency(String),

    #[error("scores line {line}: {message}")]
    Exchange { line: usize, message: String },

    #[error("essay {essay_id}: {message}")]
    InvalidRecord { essay_id: String, message: String },

    #[error("model file: {0}")]
    Model(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("order must be ≥ 1")]
    InvalidOrder,

    #[error("interpolation weights must have one entry per order, be non-negative and sum to 1 (got sum {sum})")]
    InvalidWeights { sum: f64 },

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("need ≥ 2 groups, found {0}")]
    TooFewGroups(usize),

    #[error("group {group:?} has {count} observation(s); need ≥ 2")]
    SmallGroup { group: String, count: usize },

    #[error("degenerate data: no variance within or between groups")]
    DegenerateData,

    #[error("rank-deficient design: {} collinear with preceding columns", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("REML did not converge after {} iterations", best.iterations)]
    NonConvergence { best: Box<LmmFit> },

    #[error("{0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(essay_id: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidRecord {
            essay_id: essay_id.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 2 for input and configuration problems, 3 for data that
    /// violates a record or statistical invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidRecord { .. }
            | Error::DegenerateData
            | Error::RankDeficient { .. }
            | Error::NonConvergence { .. } => 3,
            _ => 2,
        }
    }
}
