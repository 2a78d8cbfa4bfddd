use serde::Serialize;

use super::ChainingError;
use crate::field::{zeta_replications, RandomFieldModel};
use crate::metric_space::MetricSpace;
use crate::orlicz::{bchi_norm, LogMgfFunction, NormOptions, NormSource, RandomSample};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformNormRow {
    pub n: usize,
    /// `max_t` of the empirical `||zeta_n(t)||_B(chi)`.
    pub max_norm: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformNormReport {
    pub sigma: f64,
    pub tolerance: f64,
    pub reps: usize,
    pub seed: u64,
    pub rows: Vec<UniformNormRow>,
}

/// Checks `sup_n sup_t ||zeta_n(t)||_B(chi) <= sigma (1 + tolerance)` on
/// `reps` replications of `zeta_n` for each `n`.
pub fn uniform_norm_check(
    model: &RandomFieldModel,
    chi: &LogMgfFunction,
    sigma: f64,
    ns: &[usize],
    reps: usize,
    seed: u64,
    tolerance: f64,
    opts: &NormOptions,
) -> Result<UniformNormReport, ChainingError> {
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let z = zeta_replications(model, n, reps, seed)?;
        let mut max_norm = 0.0f64;
        for t in 0..z.points() {
            let s = RandomSample::new(z.column(t), Some(seed))?;
            let v = bchi_norm(NormSource::Sample(&s), chi, opts).map_err(|source| ChainingError::Point { t, source })?;
            max_norm = max_norm.max(v);
        }
        rows.push(UniformNormRow { n, max_norm, within: max_norm <= sigma * (1.0 + tolerance) });
    }
    Ok(UniformNormReport { sigma, tolerance, reps, seed, rows })
}

/// `C3 = max_n max_{d(t,s) > 0}` of the empirical
/// `||(zeta_n(t) - zeta_n(s)) / d(t, s)||_B(chi)`.
pub fn increment_ratio_constant(
    model: &RandomFieldModel,
    chi: &LogMgfFunction,
    d: &MetricSpace,
    ns: &[usize],
    reps: usize,
    seed: u64,
    opts: &NormOptions,
) -> Result<f64, ChainingError> {
    let mut c3 = 0.0f64;
    for &n in ns {
        let z = zeta_replications(model, n, reps, seed)?;
        for t in 0..d.len() {
            for s in t + 1..d.len() {
                let w = d.d(t, s);
                if w <= 0.0 {
                    continue;
                }
                let values = z.paths().map(|p| (p[t] - p[s]) / w).collect();
                let sample = RandomSample::new(values, Some(seed))?;
                let v = bchi_norm(NormSource::Sample(&sample), chi, opts)
                    .map_err(|source| ChainingError::Pair { t, s, source })?;
                c3 = c3.max(v);
            }
        }
    }
    Ok(c3)
}
