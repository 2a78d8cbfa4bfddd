use crate::numeric::{bisect_threshold, log_mean_exp, mean_sd, simpson};

use super::{LogMgfFunction, OrliczError, OrliczGenerator, ScalarLaw};

/// I.i.d. draws of a scalar random variable plus the seed that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSample {
    values: Vec<f64>,
    seed: Option<u64>,
}

impl RandomSample {
    pub fn new(values: Vec<f64>, seed: Option<u64>) -> Result<Self, OrliczError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(OrliczError::BadSample);
        }
        Ok(RandomSample { values, seed })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Fails when the sample mean sits more than 5 standard errors away from 0.
/// Returns the sample mean.
pub fn check_centered(values: &[f64]) -> Result<f64, OrliczError> {
    let (mean, sd) = mean_sd(values);
    let stderr = sd / (values.len() as f64).sqrt();
    if mean.abs() > 5.0 * stderr && mean.abs() > 1e-12 * (1.0 + sd) {
        return Err(OrliczError::NonCentered { mean, stderr });
    }
    Ok(mean)
}

/// Where the MGF of the variable comes from.
#[derive(Debug, Clone, Copy)]
pub enum NormSource<'a> {
    Analytic(ScalarLaw),
    /// Sample means of `exp(lambda (x - xbar))`; the sample is re-centered
    /// after passing the centering check.
    Sample(&'a RandomSample),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormOptions {
    /// Lambdas at which MGF domination is tested; `None` uses the `chi` grid.
    pub lambda_grid: Option<Vec<f64>>,
    pub rel_tol: f64,
    pub tau_max: f64,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions { lambda_grid: None, rel_tol: 1e-9, tau_max: 1e3 }
    }
}

/// `inf { tau : log E exp(lambda eta) <= chi(lambda tau) for every test lambda }`.
pub fn bchi_norm(source: NormSource<'_>, chi: &LogMgfFunction, opts: &NormOptions) -> Result<f64, OrliczError> {
    let grid: Vec<f64> = opts
        .lambda_grid
        .clone()
        .unwrap_or_else(|| chi.grid().to_vec())
        .into_iter()
        .filter(|&l| l != 0.0)
        .collect();
    // the lambda -> 0 limit enters as a curvature comparison
    let (log_mgf, curvature): (Vec<f64>, f64) = match source {
        NormSource::Analytic(law) => {
            let kind = law.log_mgf_kind().ok_or(OrliczError::Infeasible(opts.tau_max))?;
            (grid.iter().map(|&l| kind.eval(l)).collect(), kind.curvature())
        }
        NormSource::Sample(sample) => {
            let mean = check_centered(sample.values())?;
            let centered: Vec<f64> = sample.values().iter().map(|x| x - mean).collect();
            let var = centered.iter().map(|x| x * x).sum::<f64>() / centered.len() as f64;
            let values = grid
                .iter()
                .enumerate()
                .map(|(i, &l)| {
                    let v = log_mean_exp(centered.iter().map(|x| l * x));
                    if v.is_finite() && v < 700.0 {
                        Ok(v)
                    } else {
                        Err(OrliczError::MgfDiverged { point: i, lambda: l })
                    }
                })
                .collect::<Result<_, _>>()?;
            (values, 0.5 * var)
        }
    };
    let chi_curv = chi.curvature_at_zero();
    let feasible = |tau: f64| {
        curvature <= chi_curv * tau * tau * (1.0 + 1e-12)
            && grid
                .iter().zip(&log_mgf).all(|(&l, &m)| {
            let bound = chi.eval_extended(l * tau);
            m <= bound + 1e-12 * (1.0 + bound.abs())
        })
    };
    if feasible(0.0) {
        return Ok(0.0);
    }
    if !feasible(opts.tau_max) {
        return Err(OrliczError::Infeasible(opts.tau_max));
    }
    Ok(bisect_threshold(0.0, opts.tau_max, opts.rel_tol, 0.0, feasible))
}

/// Luxemburg gauge `inf { tau > 0 : mean Phi(|x_i| / tau) <= 1 }` of a sample.
pub fn luxemburg_norm(sample: &RandomSample, phi: &OrliczGenerator, rel_tol: f64) -> Result<f64, OrliczError> {
    let max = sample.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return Ok(0.0);
    }
    let n = sample.len() as f64;
    let hi = max / phi.inverse(1.0)?;
    let lo = match phi.inverse(n) {
        Ok(v) => max / v,
        Err(_) => 0.0,
    };
    let feasible = |tau: f64| {
        let s: f64 = sample.values().iter().map(|x| phi.forward(x.abs() / tau)).sum();
        s / n <= 1.0
    };
    Ok(bisect_threshold(lo, hi, rel_tol, 0.0, feasible))
}

/// Luxemburg gauge of a law, computed from `E Phi(|X| / tau)` in closed form
/// or by quadrature. Heavy-tailed laws (and Gaussians against generators
/// growing faster than `exp(u^2)`) have no finite gauge.
pub fn luxemburg_norm_law(law: ScalarLaw, phi: &OrliczGenerator, rel_tol: f64) -> Result<f64, OrliczError> {
    let law = law.normalized();
    match law {
        ScalarLaw::Degenerate => return Ok(0.0),
        ScalarLaw::Rademacher { scale } => return Ok(scale.abs() / phi.inverse(1.0)?),
        ScalarLaw::StudentT { .. } => return Err(OrliczError::Infeasible(f64::INFINITY)),
        ScalarLaw::Gaussian { sd } => match phi {
            OrliczGenerator::Gauss2 => return Ok(sd * (8.0f64 / 3.0).sqrt()),
            OrliczGenerator::PowerExp { p } if *p > 2.0 => return Err(OrliczError::Infeasible(f64::INFINITY)),
            OrliczGenerator::PowerExp { p } if *p == 2.0 => return Ok(sd * (8.0f64 / 3.0).sqrt()),
            _ => {}
        },
        ScalarLaw::RandomPhase { .. } => {}
    }
    let expectation = |tau: f64| expected_phi(law, phi, tau);
    let mut hi = law.variance().sqrt().max(1e-300);
    let mut tries = 0;
    while expectation(hi) > 1.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(OrliczError::Infeasible(hi));
        }
    }
    Ok(bisect_threshold(0.0, hi, rel_tol, 0.0, |t| t > 0.0 && expectation(t) <= 1.0))
}

fn expected_phi(law: ScalarLaw, phi: &OrliczGenerator, tau: f64) -> f64 {
    match law {
        ScalarLaw::Gaussian { sd } => {
            // 2 * int_0^inf pdf(z) Phi(sd z / tau) dz, in log space
            let log_pdf = |z: f64| -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln();
            // tables stop at their top; the Gaussian mass cut off there is negligible
            let upper = match phi {
                OrliczGenerator::Table { u, .. } => (u.last().unwrap() * tau / sd).min(40.0),
                _ => 40.0,
            };
            2.0 * simpson(0.0, upper, 8000, |z| {
                if z == 0.0 {
                    0.0
                } else {
                    (log_pdf(z) + phi.log_forward(sd * z / tau)).exp()
                }
            })
        }
        ScalarLaw::RandomPhase { amplitude } => {
            // |cos U| for U uniform: average over a quarter period
            let h = std::f64::consts::FRAC_PI_2;
            simpson(0.0, h, 4000, |u| phi.forward(amplitude * u.cos() / tau)) / h
        }
        _ => unreachable!("closed forms handled by the caller"),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{symmetric_grid, LogMgfKind};
    use super::*;

    fn std_chi() -> LogMgfFunction {
        LogMgfFunction::standard_gaussian()
    }

    #[test]
    fn gaussian_bchi_norms() {
        let opts = NormOptions::default();
        let one = bchi_norm(NormSource::Analytic(ScalarLaw::Gaussian { sd: 1.0 }), &std_chi(), &opts).unwrap();
        assert!((one - 1.0).abs() <= 1e-6);
        assert!(one >= 1.0);
        let two = bchi_norm(NormSource::Analytic(ScalarLaw::Gaussian { sd: 2.0 }), &std_chi(), &opts).unwrap();
        assert!((two - 2.0).abs() <= 2e-6);
        let zero = bchi_norm(NormSource::Analytic(ScalarLaw::Degenerate), &std_chi(), &opts).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn rademacher_scale_is_its_bchi_norm() {
        let opts = NormOptions::default();
        for c in [0.3, 0.8, 1.7] {
            let v = bchi_norm(NormSource::Analytic(ScalarLaw::Rademacher { scale: c }), &std_chi(), &opts).unwrap();
            assert!((v - c).abs() < 1e-6 * c, "{v} vs {c}");
        }
    }

    #[test]
    fn heavy_tails_are_infeasible() {
        let opts = NormOptions::default();
        let r = bchi_norm(NormSource::Analytic(ScalarLaw::StudentT { dof: 3.0, scale: 1.0 }), &std_chi(), &opts);
        assert!(matches!(r, Err(OrliczError::Infeasible(_))));
    }

    #[test]
    fn zero_sample_has_zero_norm() {
        let s = RandomSample::new(vec![0.0; 10], Some(1)).unwrap();
        let v = bchi_norm(NormSource::Sample(&s), &std_chi(), &NormOptions::default()).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(luxemburg_norm(&s, &OrliczGenerator::Gauss2, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn uncentered_samples_are_rejected() {
        let s = RandomSample::new(vec![1.0, 1.1, 0.9, 1.05], None).unwrap();
        assert!(matches!(
            bchi_norm(NormSource::Sample(&s), &std_chi(), &NormOptions::default()),
            Err(OrliczError::NonCentered { .. })
        ));
        let c = RandomSample::new(vec![2.0; 4], None).unwrap();
        assert!(check_centered(c.values()).is_err());
    }

    #[test]
    fn empirical_rademacher_sample() {
        // balanced +-1 sample: log mean exp = log cosh, norm exactly 1 up to bisection
        let s = RandomSample::new((0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect(), None).unwrap();
        let v = bchi_norm(NormSource::Sample(&s), &std_chi(), &NormOptions::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
    }

    #[test]
    fn divergent_empirical_mgf() {
        let s = RandomSample::new(vec![-300.0, 300.0], None).unwrap();
        let chi = LogMgfFunction::analytic(LogMgfKind::Quadratic { c: 0.5 }, symmetric_grid(4.0, 21)).unwrap();
        assert!(matches!(
            bchi_norm(NormSource::Sample(&s), &chi, &NormOptions::default()),
            Err(OrliczError::MgfDiverged { .. })
        ));
    }

    #[test]
    fn luxemburg_single_value_and_pair() {
        let g = OrliczGenerator::Gauss2;
        let c = 1.7;
        let one = RandomSample::new(vec![c], None).unwrap();
        let expect = c / 2f64.ln().sqrt();
        assert!((luxemburg_norm(&one, &g, 1e-12).unwrap() - expect).abs() < 1e-9);
        let pair = RandomSample::new(vec![1.0, -1.0], None).unwrap();
        assert!((luxemburg_norm(&pair, &g, 1e-12).unwrap() - 1.201_122_408_786_449_8).abs() < 1e-9);
    }

    #[test]
    fn luxemburg_of_laws() {
        let g = OrliczGenerator::Gauss2;
        let v = luxemburg_norm_law(ScalarLaw::Gaussian { sd: 1.0 }, &g, 1e-12).unwrap();
        assert!((v - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let r = luxemburg_norm_law(ScalarLaw::Rademacher { scale: 2.0 }, &g, 1e-12).unwrap();
        assert!((r - 2.0 / 2f64.ln().sqrt()).abs() < 1e-12);
        assert!(luxemburg_norm_law(ScalarLaw::StudentT { dof: 4.0, scale: 1.0 }, &g, 1e-9).is_err());
        assert!(luxemburg_norm_law(ScalarLaw::Gaussian { sd: 1.0 }, &OrliczGenerator::PowerExp { p: 3.0 }, 1e-9).is_err());
        assert_eq!(luxemburg_norm_law(ScalarLaw::Degenerate, &g, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn luxemburg_quadrature_agrees_with_closed_form() {
        // PowerExp{p: 2} takes the closed form; a table close to gauss2 goes through quadrature
        let u: Vec<f64> = (0..=600).map(|k| k as f64 * 0.01).collect();
        let phi: Vec<f64> = u.iter().map(|x| (x * x).exp_m1()).collect();
        let t = OrliczGenerator::table(u, phi).unwrap();
        let v = luxemburg_norm_law(ScalarLaw::Gaussian { sd: 1.0 }, &t, 1e-10).unwrap();
        assert!((v - (8.0f64 / 3.0).sqrt()).abs() < 1e-3, "{v}");
    }

    #[test]
    fn random_phase_luxemburg_by_quadrature_vs_sample() {
        let g = OrliczGenerator::Gauss2;
        let law = ScalarLaw::RandomPhase { amplitude: 1.0 };
        let exact = luxemburg_norm_law(law, &g, 1e-12).unwrap();
        // deterministic quasi-sample of |cos| over a fine uniform phase grid
        let vals: Vec<f64> = (0..200_000).map(|k| ((k as f64 + 0.5) / 200_000.0 * std::f64::consts::TAU).cos()).collect();
        let s = RandomSample::new(vals, None).unwrap();
        let emp = luxemburg_norm(&s, &g, 1e-12).unwrap();
        assert!((exact - emp).abs() < 1e-6, "{exact} vs {emp}");
    }
}
