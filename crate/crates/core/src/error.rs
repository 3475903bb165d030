use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid beam parameters: {0}")]
    InvalidParams(String),

    #[error("modal weight is not symmetric nonnegative definite: {0}")]
    InvalidWeight(String),

    #[error("mode index must be >= 1")]
    InvalidMode,

    #[error(
        "mode {n}: negative argument {value:e} under the square root of the {which} closed form"
    )]
    NegativeDiscriminant {
        n: u32,
        which: &'static str,
        value: f64,
    },

    #[error("mode {n}: beta = 0 with a nonzero weight leaves the mode uncontrollable")]
    BetaZero { n: u32 },

    #[error(
        "no stable invariant subspace of dimension {expected} (found {found} stable eigenvalues)"
    )]
    NotStabilizable { expected: usize, found: usize },

    #[error("stable subspace basis is numerically singular (rcond {rcond:e})")]
    IllConditioned { rcond: f64 },

    #[error("invalid weight profile: {0}")]
    InvalidProfile(String),

    #[error("solution list is missing mode {0}")]
    MissingModes(u32),

    #[error("quadrature self-estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    GridTooCoarse { estimate: f64, tolerance: f64 },

    #[error(
        "initial displacement does not vanish at the boundary (f1(0)={left:e}, f1(1)={right:e})"
    )]
    BoundaryMismatch { left: f64, right: f64 },

    #[error("state has not decayed by the end of the horizon: ratio {ratio:e} > {tolerance:e}")]
    NotDecayed { ratio: f64, tolerance: f64 },

    #[error("matrix exponential over the requested horizon is not reliable (norm {norm:e})")]
    HorizonTooLong { norm: f64 },

    #[error("invalid simulation setup: {0}")]
    InvalidSim(String),
}
