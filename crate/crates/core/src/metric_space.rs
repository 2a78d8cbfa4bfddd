//! Finite semi-metric spaces: the discretized index set of a random field.
//!
//! A [`MetricSpace`] is a labelled point cloud with a validated distance
//! matrix. Distances may vanish off the diagonal (semi-distances), which is
//! what natural distances of random fields routinely do. Covering numbers use
//! closed balls centered at points of the cloud.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

/// Default slack for the floating-point triangle inequality check.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Largest point count accepted by exact covering.
pub const DEFAULT_EXACT_CAP: usize = 20;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("a metric space needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("distance matrix is not square: {rows} rows, row {row} has {len} entries")]
    NotSquare { rows: usize, row: usize, len: usize },
    #[error("label count {labels} does not match matrix size {size}")]
    LabelMismatch { labels: usize, size: usize },
    #[error("entry ({i}, {j}) = {value} is negative or not finite")]
    BadEntry { i: usize, j: usize, value: f64 },
    #[error("diagonal entry ({0}, {0}) is nonzero")]
    NonzeroDiagonal(usize),
    #[error("matrix is not symmetric at ({i}, {j})")]
    Asymmetric { i: usize, j: usize },
    #[error("triangle inequality fails for ({i}, {j}, {k}) by {excess:e}")]
    Triangle { i: usize, j: usize, k: usize, excess: f64 },
    #[error("exact covering requested for {points} points, cap is {cap}; use greedy")]
    ExactTooLarge { points: usize, cap: usize },
    #[error("covering radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("point index {0} out of range")]
    BadIndex(usize),
    #[error("matrix file: {0}")]
    Io(#[from] std::io::Error),
    #[error("matrix file: {0}")]
    Csv(#[from] csv::Error),
    #[error("matrix file: cannot parse {0:?} as a number")]
    Parse(String),
}

/// Covering algorithm selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverMode {
    /// Minimum set cover by branch and bound; refuses spaces above `cap` points.
    Exact { cap: usize },
    /// Largest-uncovered-gain greedy, lowest index wins ties.
    Greedy,
    /// Exact up to `cap` points, greedy beyond.
    Auto { cap: usize },
}

impl CoverMode {
    pub fn exact() -> Self {
        CoverMode::Exact { cap: DEFAULT_EXACT_CAP }
    }

    pub fn auto() -> Self {
        CoverMode::Auto { cap: DEFAULT_EXACT_CAP }
    }
}

impl Default for CoverMode {
    fn default() -> Self {
        Self::auto()
    }
}

/// A closed ball `{ j : d(center, j) <= radius }`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpace {
    labels: Vec<String>,
    coords: Option<Vec<Vec<f64>>>,
    dist: Vec<f64>,
    size: usize,
    tol: f64,
}

impl MetricSpace {
    /// Builds and validates a space from a row-major matrix.
    pub fn new(labels: Vec<String>, dist: Vec<Vec<f64>>, tol: f64) -> Result<Self, SpaceError> {
        let size = dist.len();
        for (row, r) in dist.iter().enumerate() {
            if r.len() != size {
                return Err(SpaceError::NotSquare { rows: size, row, len: r.len() });
            }
        }
        let flat = dist.into_iter().flatten().collect();
        Self::from_flat(labels, flat, size, tol)
    }

    /// Like [`MetricSpace::new`] with numeric labels `0..n`.
    pub fn from_matrix(dist: Vec<Vec<f64>>) -> Result<Self, SpaceError> {
        let labels = (0..dist.len()).map(|i| i.to_string()).collect();
        Self::new(labels, dist, DEFAULT_TOL)
    }

    pub(crate) fn from_flat(
        labels: Vec<String>,
        dist: Vec<f64>,
        size: usize,
        tol: f64,
    ) -> Result<Self, SpaceError> {
        if size < 2 {
            return Err(SpaceError::TooFewPoints(size));
        }
        if labels.len() != size {
            return Err(SpaceError::LabelMismatch { labels: labels.len(), size });
        }
        let space = MetricSpace { labels, coords: None, dist, size, tol };
        space.validate()?;
        Ok(space)
    }

    fn validate(&self) -> Result<(), SpaceError> {
        let n = self.size;
        for i in 0..n {
            for j in 0..n {
                let v = self.d(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(SpaceError::BadEntry { i, j, value: v });
                }
                if v != self.d(j, i) {
                    return Err(SpaceError::Asymmetric { i, j });
                }
            }
            if self.d(i, i) != 0.0 {
                return Err(SpaceError::NonzeroDiagonal(i));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let dij = self.d(i, j);
                for k in 0..n {
                    let excess = self.d(i, k) - dij - self.d(j, k);
                    if excess > self.tol {
                        return Err(SpaceError::Triangle { i, j, k, excess });
                    }
                }
            }
        }
        Ok(())
    }

    /// Attaches generator coordinates (kept for models that need them).
    pub fn with_coords(mut self, coords: Vec<Vec<f64>>) -> Self {
        assert_eq!(coords.len(), self.size, "one coordinate vector per point");
        self.coords = Some(coords);
        self
    }

    /// `points` evenly spaced points `k/(points-1)` on `[0, 1]`, distance `|t - s|`.
    pub fn interval_grid(points: usize) -> Result<Self, SpaceError> {
        // |k/m - l/m| rather than |k - l|/m, so f(t) = t has increment ratios exactly 1
        Self::grid_with(points, |i, j, m| (i as f64 / m - j as f64 / m).abs())
    }

    /// Same grid as [`MetricSpace::interval_grid`] under the Brownian metric `sqrt|t - s|`.
    pub fn brownian_grid(points: usize) -> Result<Self, SpaceError> {
        Self::grid_with(points, |i, j, m| (i.abs_diff(j) as f64 / m).sqrt())
    }

    fn grid_with(points: usize, metric: impl Fn(usize, usize, f64) -> f64) -> Result<Self, SpaceError> {
        if points < 2 {
            return Err(SpaceError::TooFewPoints(points));
        }
        let m = (points - 1) as f64;
        let mut dist = vec![0.0; points * points];
        for i in 0..points {
            for j in 0..points {
                dist[i * points + j] = metric(i, j, m);
            }
        }
        let coords = (0..points).map(|k| vec![k as f64 / m]).collect();
        let labels = (0..points).map(|k| format!("{}", k as f64 / m)).collect();
        Ok(Self::from_flat(labels, dist, points, DEFAULT_TOL)?.with_coords(coords))
    }

    /// `side^dims` grid on the flat unit torus with wrap-around Euclidean distance.
    pub fn torus_grid(side: usize, dims: usize) -> Result<Self, SpaceError> {
        let dims = dims.max(1);
        let total = side.pow(dims as u32);
        let coords: Vec<Vec<f64>> = (0..total)
            .map(|mut idx| {
                (0..dims)
                    .map(|_| {
                        let k = idx % side;
                        idx /= side;
                        k as f64 / side as f64
                    })
                    .collect()
            })
            .collect();
        let mut dist = vec![0.0; total * total];
        for i in 0..total {
            for j in 0..total {
                let sq: f64 = coords[i]
                    .iter()
                    .zip(&coords[j])
                    .map(|(a, b)| {
                        let d = (a - b).abs();
                        d.min(1.0 - d).powi(2)
                    })
                    .sum();
                dist[i * total + j] = sq.sqrt();
            }
        }
        // wrap-around makes d(i,j) and d(j,i) round identically only after symmetrizing
        for i in 0..total {
            for j in 0..i {
                dist[j * total + i] = dist[i * total + j];
            }
        }
        let labels = coords
            .iter()
            .map(|c| c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(":"))
            .collect();
        Ok(Self::from_flat(labels, dist, total, DEFAULT_TOL)?.with_coords(coords))
    }

    /// Product of two spaces under the max metric.
    pub fn product(a: &MetricSpace, b: &MetricSpace) -> Result<Self, SpaceError> {
        let n = a.len() * b.len();
        let mut dist = vec![0.0; n * n];
        let mut labels = Vec::with_capacity(n);
        let mut coords = Vec::with_capacity(n);
        for i in 0..a.len() {
            for j in 0..b.len() {
                labels.push(format!("{}x{}", a.labels[i], b.labels[j]));
                let mut c = a.coords.as_ref().map(|cs| cs[i].clone()).unwrap_or_default();
                c.extend(b.coords.as_ref().map(|cs| cs[j].clone()).unwrap_or_default());
                coords.push(c);
            }
        }
        for p in 0..n {
            for q in 0..n {
                let (i1, j1) = (p / b.len(), p % b.len());
                let (i2, j2) = (q / b.len(), q % b.len());
                dist[p * n + q] = a.d(i1, i2).max(b.d(j1, j2));
            }
        }
        let tol = a.tol.max(b.tol);
        Ok(Self::from_flat(labels, dist, n, tol)?.with_coords(coords))
    }

    /// Reads a CSV matrix: a header row of labels, then one row per point.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, SpaceError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let labels: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| SpaceError::Parse(s.to_owned())))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::new(labels, rows, DEFAULT_TOL)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, SpaceError> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SpaceError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.labels)?;
        for i in 0..self.size {
            w.write_record(self.row(i).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Distance between points `i` and `j`.
    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.size..(i + 1) * self.size]
    }

    /// Relabels points: point `k` of the result is point `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.size;
        assert_eq!(perm.len(), n);
        let mut dist = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                dist[a * n + b] = self.d(perm[a], perm[b]);
            }
        }
        MetricSpace {
            labels: perm.iter().map(|&p| self.labels[p].clone()).collect(),
            coords: self.coords.as_ref().map(|c| perm.iter().map(|&p| c[p].clone()).collect()),
            dist,
            size: n,
            tol: self.tol,
        }
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Sorted distinct strictly positive distances (the jump radii of `N(eps)`).
    pub fn distinct_distances(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.dist.iter().copied().filter(|&x| x > 0.0).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn ball(&self, center: usize, radius: f64) -> Result<Ball, SpaceError> {
        if center >= self.size {
            return Err(SpaceError::BadIndex(center));
        }
        let members = (0..self.size).filter(|&j| self.d(center, j) <= radius).collect();
        Ok(Ball { center, radius, members })
    }

    /// Minimum number of closed `eps`-balls centered in the cloud covering it.
    pub fn covering_number(&self, eps: f64, mode: CoverMode) -> Result<usize, SpaceError> {
        if !(eps > 0.0) {
            return Err(SpaceError::BadRadius(eps));
        }
        self.cover_radius(eps, mode)
    }

    /// `ln N(eps)`.
    pub fn metric_entropy(&self, eps: f64, mode: CoverMode) -> Result<f64, SpaceError> {
        Ok((self.covering_number(eps, mode)? as f64).ln())
    }

    /// Covering number for any radius `>= 0`; radius 0 covers by zero-distance classes.
    pub(crate) fn cover_radius(&self, radius: f64, mode: CoverMode) -> Result<usize, SpaceError> {
        if radius >= self.diameter() {
            return Ok(1);
        }
        match mode {
            CoverMode::Greedy => Ok(self.greedy_cover(radius)),
            CoverMode::Exact { cap } => {
                let cap = cap.min(64);
                if self.size > cap {
                    return Err(SpaceError::ExactTooLarge { points: self.size, cap });
                }
                Ok(self.exact_cover(radius))
            }
            CoverMode::Auto { cap } => {
                if self.size <= cap.min(64) {
                    Ok(self.exact_cover(radius))
                } else {
                    Ok(self.greedy_cover(radius))
                }
            }
        }
    }

    fn greedy_cover(&self, radius: f64) -> usize {
        let n = self.size;
        let words = n.div_ceil(64);
        let balls: Vec<Vec<u64>> = (0..n)
            .map(|c| {
                let mut bits = vec![0u64; words];
                for j in 0..n {
                    if self.d(c, j) <= radius {
                        bits[j / 64] |= 1 << (j % 64);
                    }
                }
                bits
            })
            .collect();
        let mut uncovered = vec![u64::MAX; words];
        if !n.is_multiple_of(64) {
            uncovered[words - 1] = (1u64 << (n % 64)) - 1;
        }
        let mut remaining = n;
        let mut count = 0;
        while remaining > 0 {
            let (best, gain) = balls
                .iter()
                .enumerate()
                .map(|(c, b)| {
                    let g: u32 = b.iter().zip(&uncovered).map(|(x, u)| (x & u).count_ones()).sum();
                    (c, g)
                })
                // strict comparison keeps the lowest index on ties
                .fold((0, 0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            debug_assert!(gain > 0);
            for (u, b) in uncovered.iter_mut().zip(&balls[best]) {
                *u &= !b;
            }
            remaining -= gain as usize;
            count += 1;
        }
        count
    }

    fn exact_cover(&self, radius: f64) -> usize {
        let n = self.size;
        let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut balls: Vec<u64> = (0..n)
            .map(|c| (0..n).filter(|&j| self.d(c, j) <= radius).fold(0u64, |m, j| m | 1 << j))
            .collect();
        // drop duplicates and balls contained in another ball
        balls.sort_by_key(|b| std::cmp::Reverse(b.count_ones()));
        let mut kept: Vec<u64> = Vec::new();
        for b in balls {
            if !kept.iter().any(|k| k & b == b) {
                kept.push(b);
            }
        }
        let max_gain = kept.iter().map(|b| b.count_ones()).max().unwrap_or(1);
        let mut best = self.greedy_cover(radius);
        search(&kept, full, 0, 0, max_gain, &mut best);
        best
    }
}

fn search(balls: &[u64], full: u64, covered: u64, depth: usize, max_gain: u32, best: &mut usize) {
    if covered == full {
        *best = (*best).min(depth);
        return;
    }
    let uncovered = full & !covered;
    let lower = (uncovered.count_ones()).div_ceil(max_gain) as usize;
    if depth + lower >= *best {
        return;
    }
    let pivot = uncovered.trailing_zeros();
    let mut options: Vec<u64> = balls.iter().copied().filter(|b| b >> pivot & 1 == 1).collect();
    options.sort_by_key(|b| std::cmp::Reverse((b & uncovered).count_ones()));
    for b in options {
        search(balls, full, covered | b, depth + 1, max_gain, best);
    }
}

impl fmt::Display for MetricSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MetricSpace({} points, diameter {})", self.size, self.diameter())
    }
}
