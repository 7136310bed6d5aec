use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid grid case: {0}")]
    Validation(String),
    #[error("infeasible loading: {required:.3} MW of load exceeds {capacity:.3} MW of generation capacity")]
    Infeasible { required: f64, capacity: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("singular island system (island slack bus {0})")]
    Singular(usize),
    #[error("branch {0} is not in service")]
    NotInService(usize),
    #[error("action {0} is not available in the current state")]
    InvalidAction(usize),
    #[error("no available action")]
    NoAvailableAction,
    #[error("episode has ended")]
    EpisodeOver,
    #[error("experience buffer holds {have} episodes, {need} required")]
    InsufficientBuffer { have: usize, need: usize },
    #[error("chain {0:?} is not part of the enumerated chain space")]
    UnreplayableChain(Vec<usize>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
