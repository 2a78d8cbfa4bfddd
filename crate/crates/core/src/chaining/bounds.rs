use serde::Serialize;

use super::ChainingError;
use crate::orlicz::Conjugate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBound {
    pub value: f64,
    /// `chi*` was evaluated past its exact range; `value` is then an upper estimate.
    pub saturated: bool,
}

/// `exp(-chi*(C u sqrt n))`, clamped to `[0, 1]`.
pub fn tail_bound(u: f64, n: usize, c: f64, conjugate: &Conjugate) -> TailBound {
    let x = c * u * (n as f64).sqrt();
    let v = conjugate.eval(x);
    TailBound { value: (-v.value).exp().clamp(0.0, 1.0), saturated: v.saturated }
}

/// One cell of an empirical tail table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailObservation {
    pub u: f64,
    pub n: usize,
    pub p: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationOptions {
    pub c_max: f64,
    pub c_min: f64,
    pub rel_tol: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions { c_max: 100.0, c_min: 1e-3, rel_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub c: f64,
    /// Every cell holds even at `c_max`.
    pub saturated: bool,
    /// Indices of cells where the bound stays below `p + 2 stderr` at the returned `c`.
    pub violations: Vec<usize>,
}

/// Largest `C` in `[c_min, c_max]` with `exp(-chi*(C u sqrt n)) >= p + 2 stderr`
/// on every cell. Cells that fail even at `c_min` are reported as violations
/// and do not constrain `C`.
pub fn calibrate_c(
    cells: &[TailObservation],
    conjugate: &Conjugate,
    opts: &CalibrationOptions,
) -> Result<Calibration, ChainingError> {
    if cells.is_empty() {
        return Err(ChainingError::EmptyTable);
    }
    let holds = |cell: &TailObservation, c: f64| {
        let target = cell.p + 2.0 * cell.stderr;
        tail_bound(cell.u, cell.n, c, conjugate).value >= target
    };
    let active: Vec<&TailObservation> = cells.iter().filter(|cell| holds(cell, opts.c_min)).collect();
    let all_hold = |c: f64| active.iter().all(|cell| holds(cell, c));
    let c = if active.is_empty() {
        opts.c_min
    } else if all_hold(opts.c_max) {
        opts.c_max
    } else if let Conjugate::Quadratic { c: q } = conjugate {
        // invert x^2/(4q) = ln(1/target) cell by cell; bisection polishes the rounding
        let closed = active
            .iter()
            .filter(|cell| cell.u > 0.0)
            .map(|cell| {
                let target = cell.p + 2.0 * cell.stderr;
                (4.0 * q * (1.0 / target).ln()).sqrt() / (cell.u * (cell.n as f64).sqrt())
            })
            .fold(opts.c_max, f64::min)
            .max(opts.c_min);
        largest_holding(opts.c_min, closed * (1.0 + 1e-9), opts.rel_tol, all_hold)
    } else {
        largest_holding(opts.c_min, opts.c_max, opts.rel_tol, all_hold)
    };
    let violations = cells.iter().enumerate().filter(|(_, cell)| !holds(cell, c)).map(|(i, _)| i).collect();
    Ok(Calibration { c, saturated: !active.is_empty() && c == opts.c_max, violations })
}

/// Largest `x` in `[lo, hi]` with `ok(x)`, given `ok(lo)` and monotone `ok`.
fn largest_holding(mut lo: f64, mut hi: f64, rel_tol: f64, ok: impl Fn(f64) -> bool) -> f64 {
    if ok(hi) {
        return hi;
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
