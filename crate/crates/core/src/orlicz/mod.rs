//! Log-MGF calculus and exponential-moment norms.
//!
//! The chain built here is `phi -> chi -> chi* -> (Y, Y^-1)`, plus the two
//! norms used to measure random variables: the `B(chi)` norm (smallest scale
//! at which the MGF is dominated by `exp(chi(lambda tau))`) and the Luxemburg
//! gauge of a Young-Orlicz generator.

mod conjugate;
mod generator;
mod law;
mod log_mgf;
mod norm;
mod phi;

pub use conjugate::{legendre, Conjugate, ConjugateValue, YoungPair};
pub use generator::OrliczGenerator;
pub use law::ScalarLaw;
pub use log_mgf::{
    chi_function, chi_of, envelope_constants, symmetric_grid, ChiArgmax, ChiValue, LogMgfFunction,
    LogMgfKind, DEFAULT_GRID_HALF_WIDTH, DEFAULT_GRID_POINTS, DEFAULT_N_CAP,
};
pub use phi::{phi_of, PhiSource};
pub use norm::{
    bchi_norm, check_centered, luxemburg_norm, luxemburg_norm_law, NormOptions, NormSource,
    RandomSample,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrliczError {
    #[error("empirical MGF overflows at lambda = {lambda} (point {point}); lambda grid too wide for the tail")]
    MgfDiverged { point: usize, lambda: f64 },
    #[error("MGF is infinite for this law")]
    InfiniteMgf,
    #[error("sample is not centered: mean {mean} exceeds 5 standard errors ({stderr})")]
    NonCentered { mean: f64, stderr: f64 },
    #[error("envelope lower constant vanishes (C1 = {0}); the log-MGF is degenerate")]
    EnvelopeViolated(f64),
    #[error("no grid points with 0 < |lambda| <= 1")]
    NoSmallLambda,
    #[error("interpolation error {error:e} at lambda = {lambda} exceeds 1e-6; refine the grid")]
    GridTooCoarse { lambda: f64, error: f64 },
    #[error("lambda = {0} lies outside the tabulated grid")]
    OutOfGrid(f64),
    #[error("conjugate sup reached the grid boundary; {value} is only a lower bound")]
    SlopeOutOfRange { value: f64 },
    #[error("conjugate is not strictly increasing near z = {0}")]
    NotMonotone(f64),
    #[error("no feasible scale up to tau_max = {0}; tails too heavy for this norm")]
    Infeasible(f64),
    #[error("argument {0} exceeds the range of the Young function")]
    OutOfRange(f64),
    #[error("invalid log-MGF table: {0}")]
    InvalidFunction(String),
    #[error("invalid Orlicz generator: {0}")]
    InvalidGenerator(String),
    #[error("sample must be nonempty with finite entries")]
    BadSample,
}
