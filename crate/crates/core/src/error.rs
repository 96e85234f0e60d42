use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("negative time argument {0}")]
    NegativeTime(f64),

    #[error("undersampled transform: {values} collocation values cannot resolve {modes} modes (need at least {required})")]
    Undersampled {
        values: usize,
        modes: usize,
        required: usize,
    },

    #[error("invalid mark model: {0}")]
    InvalidModel(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("partition node t={0} is not a node of the micro-grid")]
    NotRefined(f64),

    #[error("simultaneous jumps at t={0}")]
    SimultaneousJumps(f64),

    #[error("step noise does not match the step: {0}")]
    BundleMismatch(String),

    #[error("zero mark passed to jump update")]
    ZeroMark,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("order fit rejected: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
