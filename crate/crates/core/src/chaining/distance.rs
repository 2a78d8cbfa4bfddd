use rayon::prelude::*;

use super::ChainingError;
use crate::field::{Ensemble, RandomFieldModel};
use crate::metric_space::MetricSpace;
use crate::orlicz::{
    bchi_norm, luxemburg_norm, luxemburg_norm_law, LogMgfFunction, NormOptions, NormSource, OrliczError,
    OrliczGenerator, RandomSample, ScalarLaw,
};

/// Which norm measures the increments.
#[derive(Debug, Clone, Copy)]
pub enum NormKind<'a> {
    BChi(&'a LogMgfFunction),
    Luxemburg(&'a OrliczGenerator),
}

/// Where the increment laws come from.
#[derive(Debug, Clone, Copy)]
pub enum IncrementSource<'a> {
    Analytic,
    Ensemble(&'a Ensemble),
}

fn norm_of(
    law: impl FnOnce() -> ScalarLaw,
    sample: impl FnOnce() -> Vec<f64>,
    kind: NormKind<'_>,
    source: IncrementSource<'_>,
    opts: &NormOptions,
) -> Result<f64, OrliczError> {
    match (kind, source) {
        (NormKind::BChi(chi), IncrementSource::Analytic) => bchi_norm(NormSource::Analytic(law()), chi, opts),
        (NormKind::Luxemburg(phi), IncrementSource::Analytic) => luxemburg_norm_law(law(), phi, opts.rel_tol),
        (NormKind::BChi(chi), IncrementSource::Ensemble(e)) => {
            let s = RandomSample::new(sample(), Some(e.seed()))?;
            bchi_norm(NormSource::Sample(&s), chi, opts)
        }
        (NormKind::Luxemburg(phi), IncrementSource::Ensemble(e)) => {
            let s = RandomSample::new(sample(), Some(e.seed()))?;
            luxemburg_norm(&s, phi, opts.rel_tol)
        }
    }
}

/// `d(t, s) = ||xi(t) - xi(s)||` in the chosen norm. Only the upper triangle
/// is computed (in parallel, collected in pair order) and mirrored.
pub fn natural_distance(
    model: &RandomFieldModel,
    kind: NormKind<'_>,
    source: IncrementSource<'_>,
    opts: &NormOptions,
    labels: Option<&[String]>,
) -> Result<MetricSpace, ChainingError> {
    let n = model.len();
    if let IncrementSource::Ensemble(e) = source {
        if e.points() != n {
            return Err(crate::field::FieldError::DimensionMismatch { model: n, what: "ensemble", other: e.points() }.into());
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|t| (t + 1..n).map(move |s| (t, s))).collect();
    let values: Vec<Result<f64, ChainingError>> = pairs
        .par_iter()
        .map(|&(t, s)| {
            let sample = || match source {
                IncrementSource::Ensemble(e) => e.paths().map(|p| p[t] - p[s]).collect(),
                IncrementSource::Analytic => Vec::new(),
            };
            norm_of(|| model.increment(t, s), sample, kind, source, opts)
                .map_err(|source| ChainingError::Pair { t, s, source })
        })
        .collect();
    let mut dist = vec![vec![0.0; n]; n];
    for (&(t, s), v) in pairs.iter().zip(values) {
        let v = v?;
        dist[t][s] = v;
        dist[s][t] = v;
    }
    let labels = labels.map(<[String]>::to_vec).unwrap_or_else(|| (0..n).map(|i| format!("t{i}")).collect());
    let top = dist.iter().flatten().copied().fold(0.0, f64::max);
    // bisection error is relative, so the triangle slack scales with the entries
    Ok(MetricSpace::new(labels, dist, 1e-6 * top.max(1.0))?)
}

/// `sigma = sup_t ||xi(t)||_B(chi)`.
pub fn sigma_of(
    model: &RandomFieldModel,
    chi: &LogMgfFunction,
    source: IncrementSource<'_>,
    opts: &NormOptions,
) -> Result<f64, ChainingError> {
    let mut sigma = 0.0f64;
    for t in 0..model.len() {
        let sample = || match source {
            IncrementSource::Ensemble(e) => e.column(t),
            IncrementSource::Analytic => Vec::new(),
        };
        let v = norm_of(|| model.marginal(t), sample, NormKind::BChi(chi), source, opts)
            .map_err(|source| ChainingError::Point { t, source })?;
        sigma = sigma.max(v);
    }
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::sample_ensemble;

    fn grid(m: usize) -> Vec<f64> {
        (1..=m).map(|k| k as f64 / m as f64).collect()
    }

    #[test]
    fn brownian_distance_is_root_of_gap() {
        let times = grid(8);
        let model = RandomFieldModel::brownian(&times).unwrap();
        let chi = LogMgfFunction::standard_gaussian();
        let d = natural_distance(&model, NormKind::BChi(&chi), IncrementSource::Analytic, &NormOptions::default(), None)
            .unwrap();
        for i in 0..8 {
            assert_eq!(d.d(i, i), 0.0);
            for j in 0..8 {
                let exact = (times[i] - times[j]).abs().sqrt();
                assert!((d.d(i, j) - exact).abs() <= 1e-6);
                assert_eq!(d.d(i, j), d.d(j, i));
            }
        }
    }

    #[test]
    fn rademacher_distance_is_profile_gap() {
        let a = vec![0.1, 0.8, -0.3, 0.45];
        let model = RandomFieldModel::rademacher(a.clone()).unwrap();
        let chi = LogMgfFunction::standard_gaussian();
        let d = natural_distance(&model, NormKind::BChi(&chi), IncrementSource::Analytic, &NormOptions::default(), None)
            .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((d.d(i, j) - (a[i] - a[j]).abs()).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn luxemburg_distance_for_gaussians() {
        let model = RandomFieldModel::brownian(&[0.25, 1.0]).unwrap();
        let d = natural_distance(
            &model,
            NormKind::Luxemburg(&OrliczGenerator::Gauss2),
            IncrementSource::Analytic,
            &NormOptions::default(),
            None,
        )
        .unwrap();
        assert!((d.d(0, 1) - 0.75f64.sqrt() * (8.0f64 / 3.0).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn heavy_tails_name_the_failing_pair() {
        let model = RandomFieldModel::heavy_tail(4.0, vec![1.0, 1.0, 2.0]).unwrap();
        let chi = LogMgfFunction::standard_gaussian();
        let r = natural_distance(&model, NormKind::BChi(&chi), IncrementSource::Analytic, &NormOptions::default(), None);
        assert!(matches!(r, Err(ChainingError::Pair { t: 0, s: 2, .. })));
    }

    #[test]
    fn empirical_distance_is_close_to_analytic() {
        let model = RandomFieldModel::brownian(&[0.5, 1.0]).unwrap();
        let e = sample_ensemble(&model, 20_000, 3).unwrap();
        let chi = LogMgfFunction::standard_gaussian();
        let opts = NormOptions { lambda_grid: Some(crate::orlicz::symmetric_grid(2.0, 21)), ..Default::default() };
        let d = natural_distance(&model, NormKind::BChi(&chi), IncrementSource::Ensemble(&e), &opts, None).unwrap();
        assert!((d.d(0, 1) - 0.5f64.sqrt()).abs() < 0.05);
    }

    #[test]
    fn sigma_examples() {
        let chi = LogMgfFunction::standard_gaussian();
        let opts = NormOptions::default();
        let g = RandomFieldModel::gaussian_iid(3, 1.0).unwrap();
        assert!((sigma_of(&g, &chi, IncrementSource::Analytic, &opts).unwrap() - 1.0).abs() <= 1e-6);
        let zero = g.scaled(0.0);
        assert_eq!(sigma_of(&zero, &chi, IncrementSource::Analytic, &opts).unwrap(), 0.0);
        let r = RandomFieldModel::rademacher(vec![0.2, -0.8, 0.5]).unwrap();
        assert!((sigma_of(&r, &chi, IncrementSource::Analytic, &opts).unwrap() - 0.8).abs() <= 1e-6);
    }
}
