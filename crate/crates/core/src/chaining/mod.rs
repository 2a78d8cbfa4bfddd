//! Natural distances, the entropy integral, the chaining modulus and the
//! exponential tail bounds for normed sums.

mod bounds;
mod distance;
mod entropy;
mod uniform;

use thiserror::Error;

use crate::field::FieldError;
use crate::metric_space::SpaceError;
use crate::orlicz::OrliczError;

pub use bounds::{calibrate_c, tail_bound, Calibration, CalibrationOptions, TailBound, TailObservation};
pub use distance::{natural_distance, sigma_of, IncrementSource, NormKind};
pub use entropy::{
    chaining_modulus, entropy_integral, entropy_steps, refinement_check, EntropyIntegral, EntropyStep, Refinement,
    RefinementVerdict,
};
pub use uniform::{increment_ratio_constant, uniform_norm_check, UniformNormReport, UniformNormRow};

#[derive(Debug, Error)]
pub enum ChainingError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Orlicz(#[from] OrliczError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("norm of xi({t}) - xi({s}) failed: {source}")]
    Pair { t: usize, s: usize, source: OrliczError },
    #[error("norm of xi({t}) failed: {source}")]
    Point { t: usize, source: OrliczError },
    #[error("sigma must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("empty tail table")]
    EmptyTable,
}
