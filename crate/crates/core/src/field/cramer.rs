use serde::Serialize;
use statrs::function::erf::erfc;

use super::{sample_ensemble, FieldError, FieldKind, RandomFieldModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CramerMethod {
    /// Tail vanishes beyond the almost-sure bound.
    Bounded,
    /// `sup_t P(|xi(t)| > x) = erfc(x / (sqrt 2 s_max))`.
    GaussianTail,
    /// Empirical tail plus two binomial standard errors.
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CramerRow {
    pub mu: f64,
    /// Smallest grid `x0` with `tail(x) <= exp(-mu x)` at every grid `x >= x0`.
    pub x0: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CramerReport {
    pub method: CramerMethod,
    pub rows: Vec<CramerRow>,
    pub pass: bool,
}

/// Checks `sup_t P(|xi(t)| > x) <= exp(-mu x)` eventually in `x`, for every `mu`.
pub fn cramer_check(
    model: &RandomFieldModel,
    mu_grid: &[f64],
    x_grid: &[f64],
    mc_count: usize,
    seed: u64,
) -> Result<CramerReport, FieldError> {
    if mu_grid.is_empty() {
        return Err(FieldError::EmptyGrid("mu"));
    }
    if x_grid.is_empty() {
        return Err(FieldError::EmptyGrid("x"));
    }
    if let Some(b) = model.bound() {
        let rows = mu_grid.iter().map(|&mu| CramerRow { mu, x0: Some(b), pass: true }).collect();
        return Ok(CramerReport { method: CramerMethod::Bounded, rows, pass: true });
    }
    let mut xs = x_grid.to_vec();
    xs.sort_by(f64::total_cmp);
    let (method, tails): (CramerMethod, Vec<f64>) = match model.kind() {
        FieldKind::Gaussian { .. } => {
            let s = (0..model.len()).map(|t| model.marginal(t).variance()).fold(0.0, f64::max).sqrt();
            let tails = xs
                .iter()
                .map(|&x| if s == 0.0 { 0.0 } else { erfc(x / (std::f64::consts::SQRT_2 * s)) })
                .collect();
            (CramerMethod::GaussianTail, tails)
        }
        _ => {
            let e = sample_ensemble(model, mc_count, seed)?;
            let n = e.count() as f64;
            let tails = xs
                .iter()
                .map(|&x| {
                    (0..e.points())
                        .map(|t| {
                            let p = e.paths().filter(|p| p[t].abs() > x).count() as f64 / n;
                            p + 2.0 * (p * (1.0 - p) / n).sqrt()
                        })
                        .fold(0.0, f64::max)
                })
                .collect();
            (CramerMethod::MonteCarlo, tails)
        }
    };
    let rows: Vec<CramerRow> = mu_grid
        .iter()
        .map(|&mu| {
            // walk down from the largest x while the inequality keeps holding
            let mut x0 = None;
            for (x, tail) in xs.iter().zip(&tails).rev() {
                if *tail <= (-mu * x).exp() {
                    x0 = Some(*x);
                } else {
                    break;
                }
            }
            CramerRow { mu, x0, pass: x0.is_some() }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    Ok(CramerReport { method, rows, pass })
}
