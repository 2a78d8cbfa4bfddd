use crate::numeric::{bisect_threshold, golden_max};

use super::{LogMgfFunction, LogMgfKind, OrliczError};

/// Result of a Legendre transform evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateValue {
    pub value: f64,
    pub argmax: f64,
    /// The sup sat on the grid edge; `value` is then only a lower bound.
    pub saturated: bool,
}

impl ConjugateValue {
    pub fn into_result(self) -> Result<f64, OrliczError> {
        if self.saturated {
            Err(OrliczError::SlopeOutOfRange { value: self.value })
        } else {
            Ok(self.value)
        }
    }
}

/// `sup_lambda (lambda |x| - f(lambda))` over `f`'s grid, refined by golden
/// section between the grid points bracketing the discrete maximum.
pub fn legendre(f: &LogMgfFunction, x: f64) -> ConjugateValue {
    let ax = x.abs();
    let objective = |l: f64| l * ax - f.eval(l).unwrap_or(f64::INFINITY);
    let grid: Vec<f64> = f.grid().iter().copied().filter(|&l| l >= 0.0).collect();
    let (mut k, mut best) = (0, objective(0.0));
    for (i, &l) in grid.iter().enumerate() {
        let v = objective(l);
        if v > best {
            best = v;
            k = i;
        }
    }
    let last = grid.len() - 1;
    let lo = grid[k.saturating_sub(1)];
    let hi = grid[(k + 1).min(last)];
    let (arg, val) = golden_max(lo, hi, 1e-11 * (1.0 + hi), objective);
    let (arg, val) = if val > best { (arg, val) } else { (grid[k], best) };
    let edge = grid[last];
    ConjugateValue {
        value: val.max(0.0),
        argmax: arg,
        saturated: ax > 0.0 && edge - arg <= 1e-9 * edge,
    }
}

/// A Legendre conjugate `chi*`: closed form for quadratics, numeric otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum Conjugate {
    /// Conjugate of `c lambda^2`, i.e. `x^2 / (4c)`.
    Quadratic { c: f64 },
    Numeric(LogMgfFunction),
}

impl Conjugate {
    pub fn of(f: &LogMgfFunction) -> Self {
        match f.kind() {
            Some(LogMgfKind::Quadratic { c }) if c > 0.0 => Conjugate::Quadratic { c },
            _ => Conjugate::Numeric(f.clone()),
        }
    }

    /// `chi*(x) = x^2/2`.
    pub fn gaussian() -> Self {
        Conjugate::Quadratic { c: 0.5 }
    }

    pub fn eval(&self, x: f64) -> ConjugateValue {
        match self {
            Conjugate::Quadratic { c } => ConjugateValue {
                value: x * x / (4.0 * c),
                argmax: x.abs() / (2.0 * c),
                saturated: false,
            },
            Conjugate::Numeric(f) => legendre(f, x),
        }
    }

    /// Largest argument at which the numeric conjugate is exact.
    pub fn exact_range(&self) -> f64 {
        match self {
            Conjugate::Quadratic { .. } => f64::INFINITY,
            Conjugate::Numeric(f) => {
                let g = f.grid();
                let n = g.len();
                // slope of the last grid segment
                (f.values()[n - 1] - f.values()[n - 2]) / (g[n - 1] - g[n - 2])
            }
        }
    }
}

/// The Young function `Y(z) = exp(chi*(z)) - 1` and its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct YoungPair {
    conjugate: Conjugate,
    z_max: f64,
}

impl YoungPair {
    /// Checks strict monotonicity of `chi*` on `[0, z_max]` (64 probes).
    pub fn new(conjugate: Conjugate, z_max: f64) -> Result<Self, OrliczError> {
        if let Conjugate::Numeric(_) = conjugate {
            let mut prev = conjugate.eval(0.0).value;
            for k in 1..=64 {
                let z = z_max * k as f64 / 64.0;
                let v = conjugate.eval(z).value;
                if v <= prev {
                    return Err(OrliczError::NotMonotone(z));
                }
                prev = v;
            }
        }
        Ok(YoungPair { conjugate, z_max })
    }

    /// `Y(z) = exp(z^2/2) - 1`, `Y^-1(u) = sqrt(2 ln(1+u))`.
    pub fn gaussian() -> Self {
        YoungPair { conjugate: Conjugate::gaussian(), z_max: f64::INFINITY }
    }

    /// Pair built from `chi`, exact up to the slope range of its grid.
    pub fn from_chi(chi: &LogMgfFunction) -> Result<Self, OrliczError> {
        let conj = Conjugate::of(chi);
        let z_max = conj.exact_range();
        Self::new(conj, z_max)
    }

    pub fn conjugate(&self) -> &Conjugate {
        &self.conjugate
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    pub fn forward(&self, z: f64) -> f64 {
        self.conjugate.eval(z).value.exp_m1()
    }

    pub fn inverse(&self, u: f64) -> Result<f64, OrliczError> {
        if u <= 0.0 {
            return Ok(0.0);
        }
        if let Conjugate::Quadratic { c } = self.conjugate {
            return Ok((4.0 * c * u.ln_1p()).sqrt());
        }
        if self.forward(self.z_max) < u {
            return Err(OrliczError::OutOfRange(u));
        }
        let z = bisect_threshold(0.0, self.z_max, 0.0, 1e-15, |z| self.forward(z) >= u);
        Ok(z)
    }
}

#[cfg(test)]
mod tests {
    use super::super::symmetric_grid;
    use super::*;

    fn quad(c: f64, half: f64) -> LogMgfFunction {
        LogMgfFunction::analytic(LogMgfKind::Quadratic { c }, symmetric_grid(half, 401)).unwrap()
    }

    #[test]
    fn quadratic_conjugate() {
        let v = legendre(&quad(0.5, 4.0), 3.0);
        assert!((v.value - 4.5).abs() < 1e-9);
        assert!(!v.saturated);
        assert_eq!(legendre(&quad(0.5, 4.0), 0.0).value, 0.0);
    }

    #[test]
    fn truncated_quadratic_interior_max() {
        // brute-force scan of l - l^2/2 on [0, 4]
        let brute = (0..=400_000).map(|k| k as f64 / 100_000.0).map(|l| l - 0.5 * l * l).fold(f64::MIN, f64::max);
        let g = symmetric_grid(4.0, 201);
        let table = LogMgfFunction::tabulated(g.clone(), g.iter().map(|l| 0.5 * l * l).collect()).unwrap();
        let v = legendre(&table, 1.0);
        assert!((v.value - brute).abs() < 1e-9);
        assert!((v.value - 0.5).abs() < 1e-9);
    }

    #[test]
    fn saturation_is_flagged() {
        let v = legendre(&quad(0.5, 4.0), 6.0);
        assert!(v.saturated);
        // sup over [0, 4] of 6l - l^2/2 is at l = 4
        assert!((v.value - 16.0).abs() < 1e-9);
        assert!(matches!(v.into_result(), Err(OrliczError::SlopeOutOfRange { .. })));
    }

    #[test]
    fn young_closed_form() {
        let y = YoungPair::gaussian();
        assert_eq!(y.inverse(0.0).unwrap(), 0.0);
        assert!((y.inverse(3.0).unwrap() - (2.0 * 4f64.ln()).sqrt()).abs() < 1e-15);
        assert!((y.forward(1.5) - (1.125f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn young_by_bisection_matches_closed_form() {
        let g = symmetric_grid(8.0, 401);
        let table = LogMgfFunction::tabulated(g.clone(), g.iter().map(|l| 0.5 * l * l).collect()).unwrap();
        let y = YoungPair::from_chi(&table).unwrap();
        assert!(matches!(y.conjugate(), Conjugate::Numeric(_)));
        let z = y.inverse(3.0).unwrap();
        assert!((z - 1.665_109_222_315_395_5).abs() < 1e-8);
        assert!((y.forward(z) - 3.0).abs() <= 1e-9 * 4.0);
    }

    #[test]
    fn degenerate_range_is_not_monotone() {
        let g = symmetric_grid(1.0, 5);
        let table = LogMgfFunction::tabulated(g, vec![4.0, 1.5, 0.0, 1.5, 4.0]).unwrap();
        assert!(matches!(YoungPair::new(Conjugate::Numeric(table.clone()), 0.0), Err(OrliczError::NotMonotone(_))));
        assert!(YoungPair::new(Conjugate::Numeric(table), 1.0).is_ok());
    }
}
