use std::path::PathBuf;

use thiserror::Error;

use crate::lattice::Position;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("relative position {0} appears more than once")]
    DuplicatePosition(Position),

    #[error("relative positions {0} and its opposite are both present")]
    OpposingPair(Position),

    #[error("relative position (0,0) is not allowed")]
    ZeroPosition,

    #[error("position sets differ between potentials and counts/RPS")]
    PositionMismatch,

    #[error("label alphabets differ: {0} vs {1} labels")]
    LabelMismatch(usize, usize),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid potential vector: {0}")]
    InvalidPotential(String),

    #[error("site ({0},{1}) is outside the {2}x{3} lattice")]
    SiteOutOfBounds(usize, usize, usize, usize),

    #[error("lattice too large for exact enumeration ({0} labels, {1} sites)")]
    LatticeTooLarge(usize, usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("random walk move needs a non-empty RPS")]
    EmptyRps,

    #[error("{0} move is not valid for the current RPS")]
    InvalidRpsForMove(&'static str),

    #[error("no chain records left after burn-in/thinning")]
    EmptyChainAfterFiltering,

    #[error("fields have mismatched dimensions or alphabets")]
    DimensionMismatch,

    #[error("sample set is empty")]
    EmptySampleSet,

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(path: &std::path::Path, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
