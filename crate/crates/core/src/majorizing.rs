//! Ball masses, the w-distance of a point measure, measure classification and
//! the mesh-level factorization `|xi(t1) - xi(t2)| <= theta w(t1, t2)`.

use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::field::{Ensemble, RandomFieldModel};
use crate::holder::HolderModulus;
use crate::metric_space::{MetricSpace, SpaceError};
use crate::orlicz::{luxemburg_norm_law, OrliczError, OrliczGenerator, RandomSample};

#[derive(Debug, Error)]
pub enum MajorizingError {
    #[error("weights must be nonnegative and sum to 1 (sum = {0})")]
    BadWeights(f64),
    #[error("measure has {measure} weights but the space has {space} points")]
    SizeMismatch { measure: usize, space: usize },
    #[error("label {0:?} in the measure file is not a point of the space")]
    UnknownLabel(String),
    #[error("w({0}, {1}) is infinite: a ball of positive radius range carries no mass")]
    InfiniteW(usize, usize),
    #[error("V must be positive, got {0}")]
    BadV(f64),
    #[error("every per-point Orlicz norm is infinite")]
    AllInfinite,
    #[error("w({0}, {1}) = 0 but the observed increment is nonzero")]
    ZeroW(usize, usize),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Orlicz(#[from] OrliczError),
    #[error("csv: {0}")]
    Csv(String),
}

/// Probability weights on the points of a space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointMeasure {
    weights: Vec<f64>,
}

impl PointMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self, MajorizingError> {
        let sum: f64 = weights.iter().sum();
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(MajorizingError::BadWeights(sum));
        }
        Ok(PointMeasure { weights })
    }

    pub fn uniform(points: usize) -> Self {
        PointMeasure { weights: vec![1.0 / points as f64; points] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Two-column `label,weight` CSV (with header), matched to `space` by label.
    pub fn read_csv<R: Read>(reader: R, space: &MetricSpace) -> Result<Self, MajorizingError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut weights = vec![0.0; space.len()];
        let mut seen = vec![false; space.len()];
        for rec in rdr.records() {
            let rec = rec.map_err(|e| MajorizingError::Csv(e.to_string()))?;
            let label = rec.get(0).unwrap_or("").trim().to_string();
            let w: f64 = rec
                .get(1)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| MajorizingError::Csv(format!("bad weight for {label:?}")))?;
            let i = space.labels().iter().position(|l| *l == label).ok_or(MajorizingError::UnknownLabel(label))?;
            weights[i] = w;
            seen[i] = true;
        }
        if seen.iter().filter(|s| **s).count() != space.len() {
            return Err(MajorizingError::SizeMismatch { measure: seen.iter().filter(|s| **s).count(), space: space.len() });
        }
        Self::new(weights)
    }

    pub fn load_csv(path: impl AsRef<Path>, space: &MetricSpace) -> Result<Self, MajorizingError> {
        let f = std::fs::File::open(path).map_err(|e| MajorizingError::Csv(e.to_string()))?;
        Self::read_csv(f, space)
    }

    fn check(&self, sm: &MetricSpace) -> Result<(), MajorizingError> {
        if self.weights.len() != sm.len() {
            return Err(MajorizingError::SizeMismatch { measure: self.weights.len(), space: sm.len() });
        }
        Ok(())
    }
}

/// `m(B_d(x, r))` for the closed ball.
pub fn ball_mass(m: &PointMeasure, sm: &MetricSpace, x: usize, r: f64) -> f64 {
    sm.row(x).iter().zip(&m.weights).filter(|(d, _)| **d <= r).map(|(_, w)| w).sum()
}

/// `w(x1, x2; V) = 6 int_0^d(x1,x2) [Phi^-1(4V / m(B(r, x1))^2) + Phi^-1(4V / m(B(r, x2))^2)] dr`,
/// exact on the pieces where both ball masses are constant.
pub fn w_distance(
    x1: usize,
    x2: usize,
    v: f64,
    m: &PointMeasure,
    phi: &OrliczGenerator,
    sm: &MetricSpace,
) -> Result<f64, MajorizingError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(MajorizingError::BadV(v));
    }
    m.check(sm)?;
    let span = sm.d(x1, x2);
    if span == 0.0 {
        return Ok(0.0);
    }
    let mut breaks: Vec<f64> =
        sm.row(x1).iter().chain(sm.row(x2)).copied().filter(|&r| r > 0.0 && r < span).collect();
    breaks.push(0.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut total = 0.0;
    for (k, &a) in breaks.iter().enumerate() {
        let b = breaks.get(k + 1).copied().unwrap_or(span);
        let (m1, m2) = (ball_mass(m, sm, x1, a), ball_mass(m, sm, x2, a));
        if m1 == 0.0 || m2 == 0.0 {
            return Err(MajorizingError::InfiniteW(x1.min(x2), x1.max(x2)));
        }
        let f = phi.inverse(4.0 * v / (m1 * m1))? + phi.inverse(4.0 * v / (m2 * m2))?;
        total += (b - a) * f;
    }
    Ok(6.0 * total)
}

/// All pairwise w-distances as a space (so it can serve as a Hölder modulus).
pub fn w_matrix(m: &PointMeasure, sm: &MetricSpace, phi: &OrliczGenerator, v: f64) -> Result<MetricSpace, MajorizingError> {
    let n = sm.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values: Vec<Result<f64, MajorizingError>> =
        pairs.par_iter().map(|&(i, j)| w_distance(i, j, v, m, phi, sm)).collect();
    let mut dist = vec![vec![0.0; n]; n];
    for (&(i, j), w) in pairs.iter().zip(values) {
        let w = w?;
        dist[i][j] = w;
        dist[j][i] = w;
    }
    let top = dist.iter().flatten().copied().fold(0.0, f64::max);
    Ok(MetricSpace::new(sm.labels().to_vec(), dist, 1e-9 * top.max(1.0))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureClass {
    Majorizing,
    Minorizing,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub class: MeasureClass,
    pub minorizing: bool,
    pub majorizing: bool,
    /// `max_{x, y} w(x, y; D)` when finite.
    pub sup_w: Option<f64>,
    pub v_grid: Vec<f64>,
    /// Pairs with an infinite w-distance (first V where it happened).
    pub infinite_pairs: Vec<(usize, usize)>,
}

/// `{D/4, D/2, D, 2D}` with `D` the diameter.
pub fn default_v_grid(sm: &MetricSpace) -> Vec<f64> {
    let d = sm.diameter();
    vec![0.25 * d, 0.5 * d, d, 2.0 * d]
}

/// Minorizing: every `w(x, y; V)` finite over `V_grid`; majorizing: in
/// addition `sup_{x,y} w(x, y; D) < inf`.
pub fn classify_measure(
    m: &PointMeasure,
    sm: &MetricSpace,
    phi: &OrliczGenerator,
    v_grid: Option<&[f64]>,
) -> Result<Classification, MajorizingError> {
    m.check(sm)?;
    let d = sm.diameter();
    let v_grid: Vec<f64> = v_grid.map(<[f64]>::to_vec).unwrap_or_else(|| default_v_grid(sm));
    if d == 0.0 {
        return Ok(Classification {
            class: MeasureClass::Majorizing,
            minorizing: true,
            majorizing: true,
            sup_w: Some(0.0),
            v_grid,
            infinite_pairs: vec![],
        });
    }
    let n = sm.len();
    let mut infinite_pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for &v in &v_grid {
                match w_distance(i, j, v, m, phi, sm) {
                    Ok(_) => {}
                    Err(MajorizingError::InfiniteW(a, b)) => {
                        infinite_pairs.push((a, b));
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    let minorizing = infinite_pairs.is_empty();
    let sup_w = if minorizing {
        let mut sup = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                sup = sup.max(w_distance(i, j, d, m, phi, sm)?);
            }
        }
        Some(sup)
    } else {
        None
    };
    let majorizing = sup_w.is_some_and(f64::is_finite);
    let class = match (minorizing, majorizing) {
        (_, true) => MeasureClass::Majorizing,
        (true, false) => MeasureClass::Minorizing,
        _ => MeasureClass::Neither,
    };
    Ok(Classification { class, minorizing, majorizing, sup_w, v_grid, infinite_pairs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasePoint {
    pub t0: usize,
    pub norm: f64,
}

/// `argmin_t |||xi(t)|||_L(Phi)`, lowest index on ties.
pub fn base_point_check(model: &RandomFieldModel, phi: &OrliczGenerator) -> Result<BasePoint, MajorizingError> {
    let mut best: Option<BasePoint> = None;
    for t in 0..model.len() {
        match luxemburg_norm_law(model.marginal(t), phi, 1e-9) {
            Ok(norm) => {
                if best.is_none_or(|b| norm < b.norm) {
                    best = Some(BasePoint { t0: t, norm });
                }
            }
            Err(OrliczError::Infeasible(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    best.ok_or(MajorizingError::AllInfinite)
}

/// Per path, the smallest `theta` with `|xi(t1) - xi(t2)| <= theta w(t1, t2)` on the mesh.
pub fn theta_factorization(ensemble: &Ensemble, w: &MetricSpace) -> Result<RandomSample, MajorizingError> {
    if ensemble.points() != w.len() {
        return Err(MajorizingError::SizeMismatch { measure: ensemble.points(), space: w.len() });
    }
    let hm = HolderModulus::new(w.clone(), 0)?;
    let mut thetas = Vec::with_capacity(ensemble.count());
    for p in ensemble.paths() {
        match hm.max_ratio(p) {
            Some(r) => thetas.push(r),
            None => {
                let (i, j) = hm.zero_pair_violation(p).expect("violation exists");
                return Err(MajorizingError::ZeroW(i, j));
            }
        }
    }
    Ok(RandomSample::new(thetas, Some(ensemble.seed()))?)
}
