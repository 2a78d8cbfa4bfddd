use serde::Serialize;

use super::ChainingError;
use crate::metric_space::{CoverMode, MetricSpace};
use crate::orlicz::YoungPair;

/// `N(eps) = count` for `eps` in `[start, next start)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyStep {
    pub start: f64,
    pub count: usize,
}

/// The step function `eps -> N(T, d, eps)` on `(0, inf)`. Closed balls make
/// `N` right-continuous with jumps only at distances present in the matrix.
/// Greedy counts are made nonincreasing by a running minimum.
pub fn entropy_steps(sm: &MetricSpace, mode: CoverMode) -> Result<Vec<EntropyStep>, ChainingError> {
    let mut steps = vec![EntropyStep { start: 0.0, count: sm.cover_radius(0.0, mode)? }];
    for r in sm.distinct_distances() {
        let count = sm.cover_radius(r, mode)?.min(steps.last().unwrap().count);
        if count < steps.last().unwrap().count {
            steps.push(EntropyStep { start: r, count });
        }
        if count == 1 {
            break;
        }
    }
    Ok(steps)
}

/// `int_0^upper Y^-1(N(eps)) d eps`, exact on each constant piece.
fn integrate(steps: &[EntropyStep], young: &YoungPair, upper: f64) -> Result<f64, ChainingError> {
    let mut total = 0.0;
    for (k, step) in steps.iter().enumerate() {
        if step.start >= upper {
            break;
        }
        let end = steps.get(k + 1).map_or(upper, |s| s.start.min(upper));
        total += (end - step.start) * young.inverse(step.count as f64)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyIntegral {
    pub value: f64,
    /// Radii in `(0, sigma)` where `N` jumps.
    pub jumps: Vec<f64>,
    pub steps: Vec<EntropyStep>,
}

/// `J = int_0^sigma Y^-1(N(T, d, eps)) d eps`.
pub fn entropy_integral(
    sm: &MetricSpace,
    young: &YoungPair,
    sigma: f64,
    mode: CoverMode,
) -> Result<EntropyIntegral, ChainingError> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(ChainingError::BadSigma(sigma));
    }
    let steps = entropy_steps(sm, mode)?;
    let value = integrate(&steps, young, sigma)?;
    let jumps = steps.iter().skip(1).map(|s| s.start).filter(|&r| r < sigma).collect();
    Ok(EntropyIntegral { value, jumps, steps })
}

/// `rho_J(t, s) = int_0^d(t,s) Y^-1(N(eps)) d eps`. The integrand is
/// nonincreasing, so `rho_J` is a concave transform of `d` and a semi-distance.
pub fn chaining_modulus(sm: &MetricSpace, young: &YoungPair, mode: CoverMode) -> Result<MetricSpace, ChainingError> {
    let steps = entropy_steps(sm, mode)?;
    let n = sm.len();
    // F at every distinct distance, by cumulative exact integration
    let mut radii = sm.distinct_distances();
    radii.insert(0, 0.0);
    let mut values = Vec::with_capacity(radii.len());
    for &r in &radii {
        values.push(integrate(&steps, young, r)?);
    }
    let f = |d: f64| values[radii.binary_search_by(|x| x.total_cmp(&d)).expect("distance is tabulated")];
    let dist: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f(sm.d(i, j))).collect()).collect();
    let top = values.last().copied().unwrap_or(0.0);
    Ok(MetricSpace::new(sm.labels().to_vec(), dist, sm.tol().max(1e-12 * top.max(1.0)))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefinementVerdict {
    Converging,
    Diverging,
    /// Too few points to form three nested meshes.
    Insufficient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Refinement {
    /// `J` on every 4th point, every 2nd point and the full mesh.
    pub values: Vec<f64>,
    pub verdict: RefinementVerdict,
}

/// Recomputes `J` on nested sub-meshes (every 4th and every 2nd point) and
/// calls the sequence diverging when its increments do not shrink while the
/// last relative change stays above 1e-2.
pub fn refinement_check(
    sm: &MetricSpace,
    young: &YoungPair,
    sigma: f64,
    mode: CoverMode,
) -> Result<Refinement, ChainingError> {
    let n = sm.len();
    if n < 8 {
        let j = entropy_integral(sm, young, sigma, mode)?.value;
        return Ok(Refinement { values: vec![j], verdict: RefinementVerdict::Insufficient });
    }
    let sub = |stride: usize| -> Result<f64, ChainingError> {
        let idx: Vec<usize> = (0..n).step_by(stride).collect();
        let dist = idx.iter().map(|&i| idx.iter().map(|&j| sm.d(i, j)).collect()).collect();
        let labels = idx.iter().map(|&i| sm.labels()[i].clone()).collect();
        let space = MetricSpace::new(labels, dist, sm.tol())?;
        Ok(entropy_integral(&space, young, sigma, mode)?.value)
    };
    let values = vec![sub(4)?, sub(2)?, sub(1)?];
    let (d1, d2) = (values[1] - values[0], values[2] - values[1]);
    let rel = d2.abs() / values[2].abs().max(f64::MIN_POSITIVE);
    let verdict = if rel < 1e-2 || d2.abs() < d1.abs() {
        RefinementVerdict::Converging
    } else {
        RefinementVerdict::Diverging
    };
    Ok(Refinement { values, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(d: f64) -> MetricSpace {
        MetricSpace::from_matrix(vec![vec![0.0, d], vec![d, 0.0]]).unwrap()
    }

    #[test]
    fn two_point_integral() {
        let j = entropy_integral(&two_point(0.7), &YoungPair::gaussian(), 1.0, CoverMode::exact()).unwrap();
        let exact = 0.7 * (2.0 * 3f64.ln()).sqrt() + 0.3 * (2.0 * 2f64.ln()).sqrt();
        assert!((j.value - exact).abs() < 1e-15);
        assert!((j.value - 1.390_835_671_911_900_2).abs() < 1e-15);
        assert_eq!(j.jumps, vec![0.7]);
    }

    #[test]
    fn singleton_class_integral() {
        let y = YoungPair::gaussian();
        let j = entropy_integral(&two_point(0.0), &y, 0.6, CoverMode::exact()).unwrap();
        assert!((j.value - 0.6 * y.inverse(1.0).unwrap()).abs() < 1e-15);
        assert!(j.jumps.is_empty());
    }

    #[test]
    fn brownian_refinement_oracle() {
        // N(eps) = ceil(m / (2k + 1)) for eps in [sqrt(k/(m-1)), sqrt((k+1)/(m-1)))
        let expected = [(32, 1.744_983_246_303_503_3), (64, 1.767_819_537_159_444), (128, 1.780_828_968_385_850_3)];
        let y = YoungPair::gaussian();
        for (m, want) in expected {
            let sm = MetricSpace::brownian_grid(m).unwrap();
            let j = entropy_integral(&sm, &y, 1.0, CoverMode::auto()).unwrap().value;
            assert!((j - want).abs() < 1e-12, "m = {m}: {j} vs {want}");
        }
    }

    #[test]
    fn splitting_at_a_jump_is_additive() {
        let sm = MetricSpace::brownian_grid(16).unwrap();
        let y = YoungPair::gaussian();
        let steps = entropy_steps(&sm, CoverMode::auto()).unwrap();
        let whole = integrate(&steps, &y, 1.0).unwrap();
        for s in &steps[1..] {
            let left = integrate(&steps, &y, s.start).unwrap();
            let right: f64 = {
                let mut acc = 0.0;
                for (k, st) in steps.iter().enumerate() {
                    let a = st.start.max(s.start);
                    let b = steps.get(k + 1).map_or(1.0, |n| n.start.min(1.0));
                    if b > a {
                        acc += (b - a) * y.inverse(st.count as f64).unwrap();
                    }
                }
                acc
            };
            assert!((left + right - whole).abs() <= 4.0 * f64::EPSILON * whole);
        }
    }

    #[test]
    fn chaining_modulus_on_two_points() {
        let y = YoungPair::gaussian();
        let rho = chaining_modulus(&two_point(0.7), &y, CoverMode::exact()).unwrap();
        assert!((rho.d(0, 1) - 0.7 * (2.0 * 3f64.ln()).sqrt()).abs() < 1e-15);
        assert_eq!(rho.d(0, 0), 0.0);
    }

    #[test]
    fn chaining_modulus_is_dominated() {
        let sm = MetricSpace::brownian_grid(20).unwrap();
        let y = YoungPair::gaussian();
        let rho = chaining_modulus(&sm, &y, CoverMode::exact()).unwrap();
        let j = entropy_integral(&sm, &y, 1.0, CoverMode::exact()).unwrap().value;
        let crude = j + y.inverse(1.0).unwrap();
        for i in 0..20 {
            for k in 0..20 {
                assert!(rho.d(i, k) <= crude);
            }
        }
    }

    #[test]
    fn refinement_verdicts() {
        let y = YoungPair::gaussian();
        let r = refinement_check(&MetricSpace::brownian_grid(128).unwrap(), &y, 1.0, CoverMode::auto()).unwrap();
        assert_eq!(r.verdict, RefinementVerdict::Converging);
        assert!(r.values[0] < r.values[1] && r.values[1] < r.values[2]);
        let tiny = refinement_check(&two_point(1.0), &y, 1.0, CoverMode::auto()).unwrap();
        assert_eq!(tiny.verdict, RefinementVerdict::Insufficient);
    }

    #[test]
    fn bad_sigma() {
        let y = YoungPair::gaussian();
        assert!(matches!(entropy_integral(&two_point(1.0), &y, 0.0, CoverMode::exact()), Err(ChainingError::BadSigma(_))));
    }
}
