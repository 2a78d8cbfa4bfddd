//! Exponential-tightness toolkit for normed sums of i.i.d. random fields.
//!
//! The pipeline runs from a finite index space and a field model, through
//! log-MGF calculus and Orlicz norms, to chaining and majorizing-measure
//! moduli, and ends with Monte Carlo checks of the resulting tail bounds.

pub mod chaining;
pub mod field;
pub mod holder;
pub mod majorizing;
pub mod metric_space;
pub mod numeric;
pub mod orlicz;
pub mod report;
pub mod scenario;

pub use field::{Ensemble, FieldError, RandomFieldModel};
pub use holder::{HolderModulus, HolderNorm, ModulusSource};
pub use majorizing::PointMeasure;
pub use metric_space::{Ball, CoverMode, MetricSpace, SpaceError};
pub use orlicz::{LogMgfFunction, OrliczGenerator, RandomSample};
pub use report::{run_scenario, BoundReport, RunOutput, Status};
pub use scenario::{Route, Scenario};
