use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("band limit {0} is outside the open interval (0, pi)")]
    InvalidBand(f64),

    #[error("invalid samples: {0}")]
    InvalidSamples(String),

    #[error("invalid price series: {0}")]
    InvalidPrices(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The truncated spectral solve could not reproduce the data to the
    /// requested residual.
    #[error(
        "singular Gram system: effective rank {rank} of {size}, residual {residual:e} exceeds {tolerance:e}"
    )]
    SingularSystem {
        rank: usize,
        size: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("return {value} at t = {t} is outside (-1, 1)")]
    ReturnOutOfRange { t: i64, value: f64 },

    #[error(
        "no band limit on the grid reaches epsilon {epsilon}; best error {best_error} at omega {best_omega}"
    )]
    NotWithinEpsilon {
        epsilon: f64,
        best_error: f64,
        best_omega: f64,
        sup_price_error: f64,
        sup_return_error: f64,
    },

    #[error("magnitude {value} at t = {t} is outside (0, 1)")]
    InvalidMagnitude { t: i64, value: f64 },

    #[error("up and down prices coincide at t = {t}")]
    DegenerateSpread { t: i64 },

    #[error("tree depth {depth} exceeds the configured maximum {max}")]
    DepthTooLarge { depth: usize, max: usize },

    #[error("price at t = {t} rounds to {value} with tick {tick}")]
    RoundedToZero { t: i64, value: f64, tick: f64 },
}
