use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsolvable triple {rates:?}: differences {high_gap} and {low_gap} share the factor {common}")]
    UnsolvableTriple {
        rates: [u64; 3],
        high_gap: u64,
        low_gap: u64,
        common: u64,
    },

    #[error("schedule inconsistency at k={k}, l={l}: {reason}")]
    ScheduleInconsistency { k: u64, l: u64, reason: String },

    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),

    #[error("stream at rate {rate} has no sample at index {index}")]
    IncompleteStream { rate: u64, index: u64 },

    #[error("degenerate source set: sources ({i}, {u}, {v}) cancel the snapshot average")]
    Degenerate { i: usize, u: usize, v: usize },

    #[error("degenerate spectrum: {found} local maxima, {wanted} requested")]
    DegenerateSpectrum { found: usize, wanted: usize },

    #[error("lag {0} is not covered by the array")]
    NotCovered(i64),

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
