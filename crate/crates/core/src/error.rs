use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("candidate {index}: probability {value} is outside [0, 1]")]
    InvalidProbability { index: usize, value: f64 },

    #[error("candidate {index}: group index {group} out of range for {groups} groups")]
    InvalidGroup {
        index: usize,
        group: usize,
        groups: usize,
    },

    #[error("duplicate candidate id {0:?}")]
    DuplicateId(String),

    #[error("labels must be given for every candidate or for none")]
    PartialLabels,

    #[error("group {group:?} has no candidates")]
    EmptyGroup { group: String },

    #[error("group {group:?} has expected relevance {n_rel:e}, at or below the 1e-9 floor")]
    DegenerateRelevance { group: String, n_rel: f64 },

    #[error("operation needs {expected} groups, pool has {found}")]
    WrongGroupCount { expected: String, found: usize },

    #[error("invalid ranking: {0}")]
    InvalidRanking(String),

    #[error("prefix {k} exceeds ranking length {len}")]
    PrefixOutOfRange { k: usize, len: usize },

    #[error("invalid Beta prior ({a}, {b}) or counts ({successes}/{trials})")]
    InvalidPrior {
        a: f64,
        b: f64,
        successes: u64,
        trials: u64,
    },

    #[error("pool has no labels")]
    MissingLabels,

    #[error("policy {0} is deterministic; use its ranking directly")]
    NotStochastic(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("problem is infeasible")]
    Infeasible,

    #[error("problem size {n} exceeds the limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("could not match group relevance after {retries} redraws")]
    MatchFailure { retries: usize },

    #[error("calibration needs both positive and negative labels")]
    SingleClass,

    #[error("calibration scores are constant; slope is not identifiable")]
    DegenerateScores,
}

impl Error {
    /// Errors caused by the shape or content of the input rather than by
    /// a constraint of the requested computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidProbability { .. }
                | Error::InvalidGroup { .. }
                | Error::DuplicateId(_)
                | Error::PartialLabels
                | Error::InvalidRanking(_)
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalFailure(_))
    }
}
