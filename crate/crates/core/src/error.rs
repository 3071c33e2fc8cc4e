use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("probability matrix is empty")]
    Empty,
    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("row {row} has no possible label (all entries are -inf)")]
    NoPossibleLabel { row: usize },
    #[error("row {row}, label {label}: NaN log-probability")]
    NaN { row: usize, label: usize },
    #[error("row {row}, label {label}: log-probability must not be +inf")]
    PositiveInfinity { row: usize, label: usize },
    #[error("{0} labels exceed the supported maximum of 65535")]
    TooManyLabels(usize),
    #[error("rank vector has length {got}, table has {expected} positions")]
    LengthMismatch { got: usize, expected: usize },
    #[error("rank {rank} at position {position} is out of range for {labels} labels")]
    RankOutOfRange { position: usize, rank: usize, labels: usize },
    #[error("vocabulary has {got} labels, table has {expected}")]
    VocabMismatch { got: usize, expected: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("state is not in the frontier")]
    UnknownState,
    #[error("state space of {0} sequences exceeds the enumeration guard")]
    StateSpaceTooLarge(f64),
    #[error("label {0:?} does not follow the B-/I-/O naming scheme")]
    NotBio(String),
    #[error("no BIO-valid sequence with finite cost exists")]
    NoValidSequence,
}
