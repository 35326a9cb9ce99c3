use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The user channel is (numerically) collinear with the target steering
    /// vector, so the second basis direction is undefined.
    #[error("user channel is collinear with the steering vector (residual {residual:e})")]
    DegenerateChannel { residual: f64 },

    #[error("ergodic CRB is infinite: {0}")]
    InfiniteErgodicCrb(&'static str),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
