use thiserror::Error;

#[derive(Debug, Error)]
pub enum HawkesError {
    #[error("time {t} outside observation window [0, {horizon}]")]
    TimeOutOfWindow { t: f64, horizon: f64 },

    #[error("unknown user id: {0}")]
    UnknownUser(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid cascade: {0}")]
    InvalidCascade(String),

    #[error("reach (n_j) not cached for event {0}; resolve influence first")]
    ReachNotCached(String),

    #[error("nonpositive intensity {value} at event {id} (t={t}); corrupt input or degenerate parameters")]
    NonpositiveIntensity { id: String, t: f64, value: f64 },

    #[error("degenerate responsibilities at event {0}: all attribution terms are zero")]
    DegenerateResponsibility(String),

    #[error(
        "scale score equation not bracketable: weighted mean arrival time {mean} \
         must lie below T/2 = {half_t} for a finite truncated-exponential MLE"
    )]
    ScaleNotBracketable { mean: f64, half_t: f64 },

    #[error("EM aborted: {0}")]
    EmAborted(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("graph generation: {0}")]
    Graph(String),

    #[error("{0}")]
    Usage(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HawkesError>;
