use serde::{Deserialize, Serialize};

use super::OrliczError;

pub const DEFAULT_GRID_HALF_WIDTH: f64 = 4.0;
pub const DEFAULT_GRID_POINTS: usize = 201;
/// Largest `n` scanned by [`chi_of`] before the quadratic limit takes over.
pub const DEFAULT_N_CAP: u64 = 1_000_000;

const INTERP_TOL: f64 = 1e-6;

/// `points` (odd) equally spaced values on `[-half_width, half_width]`,
/// exactly symmetric around 0.
pub fn symmetric_grid(half_width: f64, points: usize) -> Vec<f64> {
    let points = points.max(3) | 1;
    let m = (points - 1) / 2;
    let h = half_width / m as f64;
    (0..points).map(|k| (k as f64 - m as f64) * h).collect()
}

/// Closed-form even convex functions vanishing at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LogMgfKind {
    /// `c * lambda^2` (Gaussian with variance `2c`).
    Quadratic { c: f64 },
    /// `log cosh(scale * lambda)` (Rademacher).
    LogCosh { scale: f64 },
    /// `log I0(scale * lambda)` (random-phase cosine).
    LogBesselI0 { scale: f64 },
}

impl LogMgfKind {
    pub fn eval(&self, lambda: f64) -> f64 {
        match *self {
            LogMgfKind::Quadratic { c } => c * lambda * lambda,
            LogMgfKind::LogCosh { scale } => log_cosh(scale * lambda),
            LogMgfKind::LogBesselI0 { scale } => log_bessel_i0(scale * lambda),
        }
    }

    /// `lim f(lambda)/lambda^2` at 0.
    pub fn curvature(&self) -> f64 {
        match *self {
            LogMgfKind::Quadratic { c } => c,
            LogMgfKind::LogCosh { scale } => 0.5 * scale * scale,
            LogMgfKind::LogBesselI0 { scale } => 0.25 * scale * scale,
        }
    }
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        // cosh a - 1 = 2 sinh(a/2)^2 keeps full precision near 0
        let s = (0.5 * a).sinh();
        return (2.0 * s * s).ln_1p();
    }
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

fn log_bessel_i0(x: f64) -> f64 {
    let a = x.abs();
    if a < 2.0 {
        // ln(1 + sum_{k>=1} (a^2/4)^k / (k!)^2)
        let q = 0.25 * a * a;
        let (mut term, mut sum) = (1.0, 0.0);
        for k in 1..40 {
            term *= q / (k * k) as f64;
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        return sum.ln_1p();
    }
    // log-sum-exp over the power series sum_k (a/2)^(2k) / (k!)^2
    let l = 2.0 * (0.5 * a).ln();
    let peak = 0.5 * a;
    let mut terms = Vec::new();
    let mut log_fact = 0.0;
    let mut k = 0usize;
    loop {
        if k > 0 {
            log_fact += (k as f64).ln();
        }
        let t = k as f64 * l - 2.0 * log_fact;
        terms.push(t);
        if k as f64 > peak + 10.0 && t < terms.iter().copied().fold(f64::MIN, f64::max) - 40.0 {
            break;
        }
        k += 1;
    }
    let max = terms.iter().copied().fold(f64::MIN, f64::max);
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// An even convex function `f` with `f(0) = 0` on a symmetric lambda grid:
/// either a closed form (tabulated for reporting) or a pure table.
///
/// Tables are interpolated through `g(lambda) = f(lambda)/lambda^2` with
/// piecewise Lagrange stencils, which keeps `n f(lambda/sqrt n)` well behaved as
/// `lambda/sqrt n -> 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMgfFunction {
    analytic: Option<LogMgfKind>,
    grid: Vec<f64>,
    values: Vec<f64>,
    // mirrored positive nodes and g-values, tables only
    nodes: Vec<f64>,
    gvals: Vec<f64>,
}

impl LogMgfFunction {
    pub fn analytic(kind: LogMgfKind, grid: Vec<f64>) -> Result<Self, OrliczError> {
        let values = grid.iter().map(|&l| kind.eval(l)).collect();
        let f = LogMgfFunction { analytic: Some(kind), grid, values, nodes: vec![], gvals: vec![] };
        f.validate()?;
        Ok(f)
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self, OrliczError> {
        if grid.len() != values.len() {
            return Err(OrliczError::InvalidFunction(format!(
                "{} grid points but {} values",
                grid.len(),
                values.len()
            )));
        }
        let mut f = LogMgfFunction { analytic: None, grid, values, nodes: vec![], gvals: vec![] };
        f.validate()?;
        let mid = f.grid.len() / 2;
        let pos: Vec<(f64, f64)> = (mid + 1..f.grid.len())
            .map(|i| (f.grid[i], f.values[i] / (f.grid[i] * f.grid[i])))
            .collect();
        f.nodes = pos.iter().rev().map(|p| -p.0).chain(pos.iter().map(|p| p.0)).collect();
        f.gvals = pos.iter().rev().map(|p| p.1).chain(pos.iter().map(|p| p.1)).collect();
        Ok(f)
    }

    /// `lambda^2 / 2` on the default grid.
    pub fn standard_gaussian() -> Self {
        Self::analytic(
            LogMgfKind::Quadratic { c: 0.5 },
            symmetric_grid(DEFAULT_GRID_HALF_WIDTH, DEFAULT_GRID_POINTS),
        )
        .expect("default grid is valid")
    }

    fn validate(&self) -> Result<(), OrliczError> {
        let bad = |m: String| Err(OrliczError::InvalidFunction(m));
        let n = self.grid.len();
        if n < 3 || n.is_multiple_of(2) {
            return bad(format!("grid needs an odd number (>= 3) of points, got {n}"));
        }
        let half = self.grid[n - 1];
        for i in 0..n {
            if !self.grid[i].is_finite() || (i > 0 && self.grid[i] <= self.grid[i - 1]) {
                return bad("grid must be finite and strictly increasing".into());
            }
            if (self.grid[i] + self.grid[n - 1 - i]).abs() > 1e-12 * half {
                return bad(format!("grid is not symmetric at index {i}"));
            }
            let v = self.values[i];
            if !v.is_finite() || v < -1e-12 {
                return bad(format!("value {v} at lambda = {} is negative or not finite", self.grid[i]));
            }
            if (v - self.values[n - 1 - i]).abs() > 1e-12 * (1.0 + v.abs()) {
                return bad(format!("function is not even at lambda = {}", self.grid[i]));
            }
        }
        if self.grid[n / 2] != 0.0 || self.values[n / 2].abs() > 1e-12 {
            return bad("grid must contain 0 with value 0".into());
        }
        for i in 1..n - 1 {
            let left = (self.values[i] - self.values[i - 1]) / (self.grid[i] - self.grid[i - 1]);
            let right = (self.values[i + 1] - self.values[i]) / (self.grid[i + 1] - self.grid[i]);
            if right - left < -1e-9 {
                return bad(format!("not convex at lambda = {}", self.grid[i]));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> Option<LogMgfKind> {
        self.analytic
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn half_width(&self) -> f64 {
        *self.grid.last().expect("validated grid is nonempty")
    }

    /// Evaluates `f(lambda)`. Tables refuse arguments beyond the grid.
    pub fn eval(&self, lambda: f64) -> Result<f64, OrliczError> {
        self.eval_with_error(lambda).map(|(v, _)| v)
    }

    /// Value plus an interpolation error estimate (0 for closed forms).
    pub fn eval_with_error(&self, lambda: f64) -> Result<(f64, f64), OrliczError> {
        if let Some(kind) = self.analytic {
            return Ok((kind.eval(lambda), 0.0));
        }
        let q = lambda.abs();
        if q > self.half_width() * (1.0 + 1e-12) {
            return Err(OrliczError::OutOfGrid(lambda));
        }
        if q == 0.0 {
            return Ok((0.0, 0.0));
        }
        let (g, err) = self.interp_g(q.min(self.half_width()));
        Ok((q * q * g, q * q * err))
    }

    /// Like [`LogMgfFunction::eval`], but tables continue quadratically
    /// (`g` frozen at the edge) beyond the grid.
    pub fn eval_extended(&self, lambda: f64) -> f64 {
        if let Some(kind) = self.analytic {
            return kind.eval(lambda);
        }
        let q = lambda.abs();
        if q <= self.half_width() {
            return self.eval(lambda).expect("inside grid");
        }
        q * q * self.gvals.last().copied().unwrap_or(0.0)
    }

    /// `lim f(lambda)/lambda^2` at 0 when known in closed form.
    pub fn curvature(&self) -> Option<f64> {
        self.analytic.map(|k| k.curvature())
    }

    fn interp_g(&self, q: f64) -> (f64, f64) {
        let x = &self.nodes;
        let y = &self.gvals;
        let len = x.len();
        if len < 5 {
            // one or two positive nodes: piecewise linear in g
            let i = x.partition_point(|&v| v <= q).clamp(1, len - 1);
            let t = (q - x[i - 1]) / (x[i] - x[i - 1]);
            return (y[i - 1] + t * (y[i] - y[i - 1]), 0.0);
        }
        // quintic stencils where possible; the error is the spread between two shifted stencils
        let w = if len >= 7 { 6 } else { 4 };
        let i = x.partition_point(|&v| v <= q).saturating_sub(1).min(len - 2);
        let primary = (i as isize + 1 - (w as isize) / 2).clamp(0, (len - w) as isize) as usize;
        let alt = if primary + w < len { primary + 1 } else { primary - 1 };
        let p = lagrange(&x[primary..primary + w], &y[primary..primary + w], q);
        let a = lagrange(&x[alt..alt + w], &y[alt..alt + w], q);
        (p, (p - a).abs())
    }

    /// `lim f(lambda)/lambda^2` at 0: closed form, or the interpolated `g(0)`.
    pub fn curvature_at_zero(&self) -> f64 {
        match self.analytic {
            Some(kind) => kind.curvature(),
            None => self.interp_g(0.0).0,
        }
    }
}

fn lagrange(xs: &[f64], ys: &[f64], q: f64) -> f64 {
    let mut acc = 0.0;
    for (j, (&xj, &yj)) in xs.iter().zip(ys).enumerate() {
        let mut w = 1.0;
        for (k, &xk) in xs.iter().enumerate() {
            if k != j {
                w *= (q - xk) / (xj - xk);
            }
        }
        acc += w * yj;
    }
    acc
}

/// `(C1, C2)` bracketing `f(lambda)/lambda^2` over grid points with `0 < |lambda| <= 1`
/// together with the curvature at 0.
pub fn envelope_constants(phi: &LogMgfFunction) -> Result<(f64, f64), OrliczError> {
    let mut ratios: Vec<f64> = phi
        .grid
        .iter()
        .zip(&phi.values)
        .filter(|(&l, _)| l > 0.0 && l <= 1.0)
        .map(|(&l, &v)| v / (l * l))
        .collect();
    if ratios.is_empty() {
        return Err(OrliczError::NoSmallLambda);
    }
    ratios.push(phi.curvature_at_zero());
    let c1 = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let c2 = ratios.iter().copied().fold(0.0, f64::max);
    if c1 <= 1e-12 {
        return Err(OrliczError::EnvelopeViolated(c1));
    }
    Ok((c1, c2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChiArgmax {
    N(u64),
    /// The quadratic `C2 lambda^2` limit won.
    Limit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiValue {
    pub value: f64,
    pub argmax: ChiArgmax,
}

fn n_candidates(n_cap: u64) -> Vec<u64> {
    let mut ns: Vec<u64> = (1..=n_cap.min(64)).collect();
    let mut k = 0;
    loop {
        let n = 10f64.powf(k as f64 / 20.0).round() as u64;
        if n >= n_cap {
            break;
        }
        if n > 64 {
            ns.push(n);
        }
        k += 1;
    }
    ns.push(n_cap);
    ns.dedup();
    ns
}

/// `sup_n n * phi(lambda / sqrt n)` over `n <= n_cap` (log-spaced beyond 64),
/// joined with the quadratic limit `C2 * lambda^2`.
pub fn chi_of(phi: &LogMgfFunction, lambda: f64, n_cap: u64) -> Result<ChiValue, OrliczError> {
    let (_, c2) = envelope_constants(phi)?;
    let mut best = ChiValue { value: c2 * lambda * lambda, argmax: ChiArgmax::Limit };
    let mut first = true;
    for n in n_candidates(n_cap.max(1)) {
        let nf = n as f64;
        let (v, err) = phi.eval_with_error(lambda / nf.sqrt())?;
        if nf * err > INTERP_TOL {
            return Err(OrliczError::GridTooCoarse { lambda, error: nf * err });
        }
        let cand = nf * v;
        // the n = 1 term is taken on ties with the limit
        let tie = 1e-12 * best.value.abs();
        if cand > best.value + tie || (first && cand >= best.value - tie) {
            best = ChiValue { value: cand, argmax: ChiArgmax::N(n) };
        }
        first = false;
    }
    Ok(best)
}

/// Tabulates `chi` on `phi`'s grid. When `chi` coincides with `C2 lambda^2`
/// everywhere the closed form is returned instead of a table.
pub fn chi_function(phi: &LogMgfFunction, n_cap: u64) -> Result<LogMgfFunction, OrliczError> {
    let (_, c2) = envelope_constants(phi)?;
    let grid = phi.grid.clone();
    let mid = grid.len() / 2;
    let mut values = vec![0.0; grid.len()];
    for i in mid + 1..grid.len() {
        let v = chi_of(phi, grid[i], n_cap)?.value;
        values[i] = v;
        values[grid.len() - 1 - i] = v;
    }
    let quadratic = grid
        .iter()
        .zip(&values)
        .all(|(&l, &v)| (v - c2 * l * l).abs() <= 1e-12 * (1.0 + v.abs()));
    if quadratic {
        LogMgfFunction::analytic(LogMgfKind::Quadratic { c: c2 }, grid)
    } else {
        LogMgfFunction::tabulated(grid, values)
    }
}
