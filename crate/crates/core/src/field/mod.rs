//! Random field models, seeded ensembles of i.i.d. copies, normed sums and
//! the Monte Carlo side of every bound.
//!
//! Streams: path `i` of an ensemble and replication `r` of a Monte Carlo
//! table draw from `ChaCha8Rng::seed_from_u64(seed)` switched to stream `i`
//! (resp. `r`). Every draw is therefore a pure function of `(seed, index)`,
//! and parallel runs reproduce sequential ones bit for bit.

mod cramer;
mod mc;
mod model;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub use cramer::{cramer_check, CramerMethod, CramerReport, CramerRow};
pub use mc::{
    etc_rate_estimate, exp_moment_check, mc_tail_table, zeta_replications, KSpec, MomentCell, MomentReport,
    MomentStatistic, RateCell, RateRow, RateTable, RateTrend, RateValue, TailCell, TailTable, DEFAULT_REPS, MIN_REPS,
};
pub use model::{FieldKind, RandomFieldModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("covariance is not positive semidefinite (smallest eigenvalue {0})")]
    CovarianceNotPsd(f64),
    #[error("need {need} paths, ensemble has {have}")]
    NotEnoughPaths { need: usize, have: usize },
    #[error("zero semi-distance between points {0} and {1} but nonzero observed increment")]
    ZeroRho(usize, usize),
    #[error("need at least {min} replications, got {got}")]
    TooFewReps { min: usize, got: usize },
    #[error("dimension mismatch: model has {model} points, {what} has {other}")]
    DimensionMismatch { model: usize, what: &'static str, other: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("empty grid: {0}")]
    EmptyGrid(&'static str),
    #[error("n must be positive")]
    ZeroN,
    #[error("csv: {0}")]
    Csv(String),
}

/// Independent generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `count` sampled paths (row-major, one row per path).
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    values: Vec<f64>,
    count: usize,
    points: usize,
    seed: u64,
}

impl Ensemble {
    pub fn from_paths(paths: Vec<Vec<f64>>, seed: u64) -> Result<Self, FieldError> {
        let count = paths.len();
        let points = paths.first().map_or(0, Vec::len);
        if count == 0 || points == 0 {
            return Err(FieldError::NotEnoughPaths { need: 1, have: count });
        }
        if let Some(bad) = paths.iter().find(|p| p.len() != points) {
            return Err(FieldError::DimensionMismatch { model: points, what: "path", other: bad.len() });
        }
        Ok(Ensemble { values: paths.into_iter().flatten().collect(), count, points, seed })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self, i: usize) -> &[f64] {
        &self.values[i * self.points..(i + 1) * self.points]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.points)
    }

    /// Values at point `t` across all paths.
    pub fn column(&self, t: usize) -> Vec<f64> {
        self.paths().map(|p| p[t]).collect()
    }

    pub fn scaled(&self, c: f64) -> Ensemble {
        Ensemble { values: self.values.iter().map(|v| c * v).collect(), ..self.clone() }
    }

    /// CSV with one path per row, preceded by a header of point labels.
    pub fn write_csv<W: Write>(&self, writer: W, labels: &[String]) -> Result<(), FieldError> {
        let csv_err = |e: csv::Error| FieldError::Csv(e.to_string());
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(labels).map_err(csv_err)?;
        for p in self.paths() {
            w.write_record(p.iter().map(|v| v.to_string())).map_err(csv_err)?;
        }
        w.flush().map_err(|e| FieldError::Csv(e.to_string()))
    }
}

/// `count` i.i.d. paths; path `i` uses stream `i` of the master seed.
pub fn sample_ensemble(model: &RandomFieldModel, count: usize, seed: u64) -> Result<Ensemble, FieldError> {
    if count == 0 {
        return Err(FieldError::NotEnoughPaths { need: 1, have: 0 });
    }
    let points = model.len();
    let mut values = vec![0.0; count * points];
    values.par_chunks_mut(points).enumerate().for_each(|(i, row)| {
        let mut rng = stream_rng(seed, i as u64);
        model.sample_path(&mut rng, row);
    });
    Ok(Ensemble { values, count, points, seed })
}

/// `S_n = n^-1 sum_{i<n} xi_i`, the average of the first `n` paths.
pub fn normed_sum(e: &Ensemble, n: usize) -> Result<Vec<f64>, FieldError> {
    if n == 0 {
        return Err(FieldError::ZeroN);
    }
    if n > e.count {
        return Err(FieldError::NotEnoughPaths { need: n, have: e.count });
    }
    let mut acc = vec![0.0; e.points];
    for p in e.paths().take(n) {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    let nf = n as f64;
    Ok(acc.into_iter().map(|a| a / nf).collect())
}

/// `zeta_n = sqrt(n) S_n`.
pub fn zeta_n(e: &Ensemble, n: usize) -> Result<Vec<f64>, FieldError> {
    let root = (n as f64).sqrt();
    Ok(normed_sum(e, n)?.into_iter().map(|v| v * root).collect())
}
