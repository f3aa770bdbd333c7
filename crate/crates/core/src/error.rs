use thiserror::Error;

/// Errors raised by the reward-learning library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("episode of length {len} is shorter than the fragment length {fragment_length}")]
    EpisodeTooShort { len: usize, fragment_length: usize },
    #[error("segment buffer holds {len} segments; at least 2 are needed to form a pair")]
    BufferTooSmall { len: usize },
    #[error("soft value iteration did not converge after {sweeps} sweeps (residual {residual:e})")]
    NonConvergence { sweeps: usize, residual: f64 },
    #[error("degenerate reward: canonicalized reward has zero variance under the coverage distribution")]
    DegenerateReward,
    #[error("non-finite reward value encountered: {0}")]
    NonFiniteReward(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed {what}: {msg}")]
    Format { what: &'static str, msg: String },
    #[error(transparent)]
    Config(#[from] crate::harness::config::ConfigError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
