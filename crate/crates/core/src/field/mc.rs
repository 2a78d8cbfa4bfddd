use rayon::prelude::*;
use serde::Serialize;

use super::{stream_rng, Ensemble, FieldError, RandomFieldModel};
use crate::holder::{ball_membership, holder_norm, HolderModulus};
use crate::metric_space::MetricSpace;
use crate::numeric::binomial_stderr;

pub const DEFAULT_REPS: usize = 10_000;
pub const MIN_REPS: usize = 100;

struct Scratch {
    path: Vec<f64>,
    sum: Vec<f64>,
    avg: Vec<f64>,
}

impl Scratch {
    fn new(points: usize) -> Self {
        Scratch { path: vec![0.0; points], sum: vec![0.0; points], avg: vec![0.0; points] }
    }
}

/// Replication `rep`: draws `max(ns)` paths from stream `rep` and hands
/// `(k, n, S_n)` to `visit` for every `n = ns[k]` (`ns` ascending, nested sums).
fn replicate<F: FnMut(usize, usize, &[f64])>(
    model: &RandomFieldModel,
    ns: &[usize],
    seed: u64,
    rep: u64,
    s: &mut Scratch,
    mut visit: F,
) {
    let mut rng = stream_rng(seed, rep);
    s.sum.iter_mut().for_each(|v| *v = 0.0);
    let mut next = 0;
    let n_max = *ns.last().expect("nonempty n grid");
    for i in 1..=n_max {
        model.sample_path(&mut rng, &mut s.path);
        for (a, v) in s.sum.iter_mut().zip(&s.path) {
            *a += v;
        }
        while next < ns.len() && ns[next] == i {
            let nf = i as f64;
            for (o, a) in s.avg.iter_mut().zip(&s.sum) {
                *o = a / nf;
            }
            visit(next, i, &s.avg);
            next += 1;
        }
    }
}

fn sorted_ns(n_grid: &[usize]) -> Result<Vec<usize>, FieldError> {
    if n_grid.is_empty() {
        return Err(FieldError::EmptyGrid("n"));
    }
    if n_grid.contains(&0) {
        return Err(FieldError::ZeroN);
    }
    let mut ns = n_grid.to_vec();
    ns.sort_unstable();
    ns.dedup();
    Ok(ns)
}

fn check_reps(reps: usize) -> Result<(), FieldError> {
    if reps < MIN_REPS {
        return Err(FieldError::TooFewReps { min: MIN_REPS, got: reps });
    }
    Ok(())
}

/// Integer exceedance counts accumulated over replications. Counts add
/// associatively, so the parallel reduction equals the sequential one.
#[derive(Clone)]
struct Counts {
    hits: Vec<u64>,
    // smallest replication with a zero-rho violation, and the pair
    violation: Option<(u64, usize, usize)>,
}

impl Counts {
    fn new(cells: usize) -> Self {
        Counts { hits: vec![0; cells], violation: None }
    }

    fn merge(mut self, other: Counts) -> Counts {
        for (a, b) in self.hits.iter_mut().zip(other.hits) {
            *a += b;
        }
        self.violation = match (self.violation, other.violation) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self
    }
}

fn count_parallel<F>(model: &RandomFieldModel, ns: &[usize], reps: usize, seed: u64, cells: usize, per_rep: F) -> Counts
where
    F: Fn(u64, usize, usize, &[f64], &mut Counts) + Sync,
{
    (0..reps as u64)
        .into_par_iter()
        .fold(
            || (Scratch::new(model.len()), Counts::new(cells)),
            |(mut s, mut c), rep| {
                replicate(model, ns, seed, rep, &mut s, |k, n, avg| per_rep(rep, k, n, avg, &mut c));
                (s, c)
            },
        )
        .map(|(_, c)| c)
        .reduce(|| Counts::new(cells), Counts::merge)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCell {
    pub u: f64,
    pub n: usize,
    pub exceed: u64,
    pub p: f64,
    pub stderr: f64,
}

/// Empirical `P(sup_{t != s} |S_n(t) - S_n(s)| / rho(t, s) > u)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailTable {
    pub reps: usize,
    pub seed: u64,
    /// One cell per `(n, u)`, `n` outer, both in input order.
    pub cells: Vec<TailCell>,
}

impl TailTable {
    pub fn get(&self, u: f64, n: usize) -> Option<&TailCell> {
        self.cells.iter().find(|c| c.u == u && c.n == n)
    }
}

pub fn mc_tail_table(
    model: &RandomFieldModel,
    rho: &MetricSpace,
    u_grid: &[f64],
    n_grid: &[usize],
    reps: usize,
    seed: u64,
) -> Result<TailTable, FieldError> {
    if rho.len() != model.len() {
        return Err(FieldError::DimensionMismatch { model: model.len(), what: "rho", other: rho.len() });
    }
    if u_grid.is_empty() {
        return Err(FieldError::EmptyGrid("u"));
    }
    check_reps(reps)?;
    let ns = sorted_ns(n_grid)?;
    let hm = HolderModulus::new(rho.clone(), 0).expect("nonempty space");
    let nu = u_grid.len();
    let counts = count_parallel(model, &ns, reps, seed, ns.len() * nu, |rep, k, _, avg, c| match hm.max_ratio(avg) {
        Some(ratio) => {
            for (j, &u) in u_grid.iter().enumerate() {
                if ratio > u {
                    c.hits[k * nu + j] += 1;
                }
            }
        }
        None => {
            if c.violation.is_none() {
                let (i, j) = hm.zero_pair_violation(avg).expect("violation exists");
                c.violation = Some((rep, i, j));
            }
        }
    });
    if let Some((_, i, j)) = counts.violation {
        return Err(FieldError::ZeroRho(i, j));
    }
    let mut cells = Vec::with_capacity(n_grid.len() * nu);
    for &n in n_grid {
        let k = ns.binary_search(&n).expect("n in grid");
        for (j, &u) in u_grid.iter().enumerate() {
            let exceed = counts.hits[k * nu + j];
            let p = exceed as f64 / reps as f64;
            cells.push(TailCell { u, n, exceed, p, stderr: binomial_stderr(p, reps as u64) });
        }
    }
    Ok(TailTable { reps, seed, cells })
}

/// The compact set `K` whose exit probability is estimated.
#[derive(Debug, Clone, PartialEq)]
pub enum KSpec {
    /// `{ f : max_t |f(t)| <= c }`.
    SupBall(f64),
    /// `{ f : ||f||_H(omega) <= r }`; `r = inf` is the whole path space.
    HolderBall(HolderModulus, f64),
}

impl KSpec {
    pub fn contains(&self, f: &[f64]) -> bool {
        match self {
            KSpec::SupBall(c) => f.iter().all(|v| v.abs() <= *c),
            KSpec::HolderBall(hm, r) => ball_membership(f, hm, *r),
        }
    }

    pub fn label(&self) -> String {
        match self {
            KSpec::SupBall(c) => format!("sup-ball({c})"),
            KSpec::HolderBall(_, r) => format!("holder-ball({r})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum RateValue {
    Estimate(f64),
    /// No exits observed: the rate is at least `ln(reps) / n`.
    Censored(f64),
}

impl RateValue {
    pub fn value(&self) -> f64 {
        match *self {
            RateValue::Estimate(v) | RateValue::Censored(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateTrend {
    Increasing,
    Decreasing,
    Flat,
    Mixed,
    /// Fewer than two uncensored estimates.
    Insufficient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCell {
    pub n: usize,
    pub exits: u64,
    pub p_hat: f64,
    pub stderr: f64,
    pub rate: RateValue,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub k: String,
    pub cells: Vec<RateCell>,
    pub trend: RateTrend,
    pub all_censored: bool,
}

/// `-(1/n) ln P(S_n not in K)` per `K` and `n`. Membership is checked on the
/// mesh only, which is weaker than the continuum statement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTable {
    /// Always `"mesh-level"`: exits are judged on the finite index set.
    pub verification: &'static str,
    pub reps: usize,
    pub seed: u64,
    pub rows: Vec<RateRow>,
}

fn trend(cells: &[RateCell]) -> RateTrend {
    let mut by_n: Vec<(usize, f64)> = cells
        .iter()
        .filter_map(|c| match c.rate {
            RateValue::Estimate(v) => Some((c.n, v)),
            RateValue::Censored(_) => None,
        })
        .collect();
    if by_n.len() < 2 {
        return RateTrend::Insufficient;
    }
    by_n.sort_by_key(|p| p.0);
    let steps: Vec<f64> = by_n.windows(2).map(|w| w[1].1 - w[0].1).collect();
    if steps.iter().all(|&d| d == 0.0) {
        RateTrend::Flat
    } else if steps.iter().all(|&d| d >= 0.0) {
        RateTrend::Increasing
    } else if steps.iter().all(|&d| d <= 0.0) {
        RateTrend::Decreasing
    } else {
        RateTrend::Mixed
    }
}

pub fn etc_rate_estimate(
    model: &RandomFieldModel,
    ks: &[KSpec],
    n_grid: &[usize],
    reps: usize,
    seed: u64,
) -> Result<RateTable, FieldError> {
    if ks.is_empty() {
        return Err(FieldError::EmptyGrid("K"));
    }
    for k in ks {
        if let KSpec::HolderBall(hm, _) = k {
            if hm.len() != model.len() {
                return Err(FieldError::DimensionMismatch { model: model.len(), what: "modulus", other: hm.len() });
            }
        }
    }
    check_reps(reps)?;
    let ns = sorted_ns(n_grid)?;
    let nk = ks.len();
    let counts = count_parallel(model, &ns, reps, seed, ns.len() * nk, |_, k, _, avg, c| {
        for (j, spec) in ks.iter().enumerate() {
            if !spec.contains(avg) {
                c.hits[k * nk + j] += 1;
            }
        }
    });
    let rows = ks
        .iter()
        .enumerate()
        .map(|(j, spec)| {
            let cells: Vec<RateCell> = n_grid
                .iter()
                .map(|&n| {
                    let k = ns.binary_search(&n).expect("n in grid");
                    let exits = counts.hits[k * nk + j];
                    let p_hat = exits as f64 / reps as f64;
                    let rate = if exits == 0 {
                        RateValue::Censored((reps as f64).ln() / n as f64)
                    } else {
                        RateValue::Estimate(-p_hat.ln() / n as f64)
                    };
                    RateCell { n, exits, p_hat, stderr: binomial_stderr(p_hat, reps as u64), rate }
                })
                .collect();
            let all_censored = cells.iter().all(|c| matches!(c.rate, RateValue::Censored(_)));
            RateRow { k: spec.label(), trend: trend(&cells), all_censored, cells }
        })
        .collect();
    Ok(RateTable { verification: "mesh-level", reps, seed, rows })
}

/// `reps` independent copies of `zeta_n`; copy `r` is built from stream `r`.
pub fn zeta_replications(model: &RandomFieldModel, n: usize, reps: usize, seed: u64) -> Result<Ensemble, FieldError> {
    if n == 0 {
        return Err(FieldError::ZeroN);
    }
    if reps == 0 {
        return Err(FieldError::NotEnoughPaths { need: 1, have: 0 });
    }
    let points = model.len();
    let root = (n as f64).sqrt();
    let ns = [n];
    let paths: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map_init(
            || Scratch::new(points),
            |s, rep| {
                let mut out = vec![0.0; points];
                replicate(model, &ns, seed, rep, s, |_, _, avg| {
                    for (o, a) in out.iter_mut().zip(avg) {
                        *o = a * root;
                    }
                });
                out
            },
        )
        .collect();
    Ensemble::from_paths(paths, seed)
}

/// Per-path statistic of `zeta_n` whose exponential moments are checked.
#[derive(Debug, Clone, PartialEq)]
pub enum MomentStatistic {
    /// `sup_t |zeta_n(t)|`.
    Sup { n: usize },
    /// `||zeta_n||_H(omega)`.
    Holder { n: usize, modulus: HolderModulus },
}

impl MomentStatistic {
    fn n(&self) -> usize {
        match self {
            MomentStatistic::Sup { n } | MomentStatistic::Holder { n, .. } => *n,
        }
    }

    fn eval(&self, f: &[f64]) -> f64 {
        match self {
            MomentStatistic::Sup { .. } => f.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            MomentStatistic::Holder { modulus, .. } => holder_norm(f, modulus).value(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            MomentStatistic::Sup { n } => format!("sup|zeta_{n}|"),
            MomentStatistic::Holder { n, .. } => format!("holder-norm(zeta_{n})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCell {
    pub lambda: f64,
    /// Mean of `exp(lambda * stat)` over all `2 reps` replications.
    pub estimate: f64,
    pub stderr: f64,
    /// Same mean over the first `reps` replications.
    pub half_estimate: f64,
    pub stable: bool,
    pub overflow: bool,
    /// Deterministic upper bound for bounded models.
    pub ceiling: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub statistic: String,
    pub reps: usize,
    pub seed: u64,
    pub cells: Vec<MomentCell>,
}

/// Estimates `E exp(lambda stat)` from `2 reps` replications and calls a cell
/// stable when it moves by less than 20% between `reps` and `2 reps`.
pub fn exp_moment_check(
    model: &RandomFieldModel,
    stat: &MomentStatistic,
    lambda_grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<MomentReport, FieldError> {
    if lambda_grid.is_empty() {
        return Err(FieldError::EmptyGrid("lambda"));
    }
    let n = stat.n();
    let zetas = zeta_replications(model, n, 2 * reps.max(1), seed)?;
    let values: Vec<f64> = zetas.paths().map(|p| stat.eval(p)).collect();
    let top = values.iter().copied().fold(0.0f64, f64::max);
    let bound = match stat {
        MomentStatistic::Sup { n } => model.bound().map(|b| b * (*n as f64).sqrt()),
        MomentStatistic::Holder { .. } => None,
    };
    let cells = lambda_grid
        .iter()
        .map(|&lambda| {
            let ceiling = bound.map(|b| (lambda * b).exp());
            if lambda * top > 700.0 || !top.is_finite() {
                return MomentCell {
                    lambda,
                    estimate: f64::INFINITY,
                    stderr: f64::INFINITY,
                    half_estimate: f64::INFINITY,
                    stable: false,
                    overflow: true,
                    ceiling,
                };
            }
            let e: Vec<f64> = values.iter().map(|v| (lambda * v).exp()).collect();
            let full = e.iter().sum::<f64>() / e.len() as f64;
            let half = e[..reps.max(1)].iter().sum::<f64>() / reps.max(1) as f64;
            let var = e.iter().map(|x| (x - full).powi(2)).sum::<f64>() / (e.len() as f64 - 1.0).max(1.0);
            MomentCell {
                lambda,
                estimate: full,
                stderr: (var / e.len() as f64).sqrt(),
                half_estimate: half,
                stable: (full - half).abs() < 0.2 * half,
                overflow: false,
                ceiling,
            }
        })
        .collect();
    Ok(MomentReport { statistic: stat.label(), reps, seed, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(d: f64) -> MetricSpace {
        MetricSpace::from_matrix(vec![vec![0.0, d], vec![d, 0.0]]).unwrap()
    }

    /// Exact `P(|sum of n signs| > k)` by enumerating all `2^n` patterns.
    fn enumerate_exceed(n: usize, k: f64) -> f64 {
        let hits = (0u32..1 << n).filter(|m| {
            let plus = m.count_ones() as f64;
            (2.0 * plus - n as f64).abs() > k
        });
        hits.count() as f64 / (1u64 << n) as f64
    }

    #[test]
    fn two_point_rademacher_tail_matches_enumeration() {
        let model = RandomFieldModel::rademacher(vec![1.0, 0.0]).unwrap();
        let rho = two_point(0.5);
        let us = [0.3, 0.9, 1.5];
        let table = mc_tail_table(&model, &rho, &us, &[4, 10], 4000, 11).unwrap();
        for c in &table.cells {
            // ratio = |sum eps| / (n * 0.5) > u  <=>  |sum eps| > 0.5 n u
            let exact = enumerate_exceed(c.n, 0.5 * c.n as f64 * c.u);
            let se = (exact * (1.0 - exact) / 4000.0).sqrt();
            assert!((c.p - exact).abs() <= 3.0 * se + 1e-12, "{c:?} vs {exact}");
        }
    }

    #[test]
    fn deterministic_bound_gives_empty_tail() {
        let model = RandomFieldModel::random_phase(vec![1.0, 0.5, 0.2], vec![0.0, 1.0, 2.0]).unwrap();
        let rho = MetricSpace::interval_grid(3).unwrap();
        let u = 2.0 * 1.0 * 3f64.sqrt() / 0.5;
        let table = mc_tail_table(&model, &rho, &[u], &[1, 3], 200, 1).unwrap();
        assert!(table.cells.iter().all(|c| c.exceed == 0));
    }

    #[test]
    fn zero_level_is_always_exceeded() {
        let model = RandomFieldModel::brownian(&[0.25, 0.5, 0.75, 1.0]).unwrap();
        let rho = MetricSpace::brownian_grid(4).unwrap();
        let table = mc_tail_table(&model, &rho, &[0.0], &[1, 5], 300, 2).unwrap();
        assert!(table.cells.iter().all(|c| c.p == 1.0));
    }

    #[test]
    fn zero_rho_with_increment_is_an_error() {
        let model = RandomFieldModel::rademacher(vec![1.0, 0.0]).unwrap();
        let rho = two_point(0.0);
        assert!(matches!(
            mc_tail_table(&model, &rho, &[1.0], &[1], 100, 0),
            Err(FieldError::ZeroRho(0, 1))
        ));
        // identical columns with rho = 0 are skipped
        let same = RandomFieldModel::rademacher(vec![1.0, 1.0]).unwrap();
        let t = mc_tail_table(&same, &rho, &[0.0], &[1], 100, 0).unwrap();
        assert_eq!(t.cells[0].exceed, 0);
    }

    #[test]
    fn preconditions() {
        let model = RandomFieldModel::rademacher(vec![1.0, 0.0]).unwrap();
        let rho = two_point(1.0);
        assert!(matches!(mc_tail_table(&model, &rho, &[1.0], &[1], 99, 0), Err(FieldError::TooFewReps { .. })));
        assert!(matches!(mc_tail_table(&model, &rho, &[1.0], &[0], 100, 0), Err(FieldError::ZeroN)));
        assert!(matches!(mc_tail_table(&model, &rho, &[], &[1], 100, 0), Err(FieldError::EmptyGrid(_))));
    }

    #[test]
    fn tables_are_reproducible() {
        let model = RandomFieldModel::brownian(&[0.5, 1.0]).unwrap();
        let rho = MetricSpace::brownian_grid(2).unwrap();
        let a = mc_tail_table(&model, &rho, &[0.5, 1.0], &[2, 3], 500, 5).unwrap();
        let b = mc_tail_table(&model, &rho, &[0.5, 1.0], &[2, 3], 500, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nested_balls_have_nested_exits() {
        let model = RandomFieldModel::rademacher(vec![1.0, 0.4]).unwrap();
        let ks = [KSpec::SupBall(0.1), KSpec::SupBall(0.3), KSpec::SupBall(0.6)];
        let t = etc_rate_estimate(&model, &ks, &[2, 6, 12], 2000, 8).unwrap();
        for i in 0..3 {
            let exits: Vec<u64> = t.rows.iter().map(|r| r.cells[i].exits).collect();
            assert!(exits[0] >= exits[1] && exits[1] >= exits[2]);
        }
    }

    #[test]
    fn sup_ball_exit_matches_enumeration() {
        let model = RandomFieldModel::rademacher(vec![1.0, 1.0]).unwrap();
        let t = etc_rate_estimate(&model, &[KSpec::SupBall(0.5)], &[6, 12], 5000, 21).unwrap();
        for c in &t.rows[0].cells {
            let exact = enumerate_exceed(c.n, 0.5 * c.n as f64);
            let se = (exact * (1.0 - exact) / 5000.0).sqrt();
            assert!((c.p_hat - exact).abs() <= 3.0 * se, "{c:?} vs {exact}");
        }
    }

    #[test]
    fn never_exiting_sets_are_censored() {
        let model = RandomFieldModel::rademacher(vec![1.0, 0.2]).unwrap();
        let hm = HolderModulus::new(two_point(1.0), 0).unwrap();
        let ks = [KSpec::HolderBall(hm, f64::INFINITY), KSpec::SupBall(1.0)];
        let t = etc_rate_estimate(&model, &ks, &[1, 4], 200, 3).unwrap();
        for row in &t.rows {
            assert!(row.all_censored);
            assert_eq!(row.trend, RateTrend::Insufficient);
            assert_eq!(row.cells[1].rate, RateValue::Censored(200f64.ln() / 4.0));
        }
    }

    #[test]
    fn trend_summary() {
        let cell = |n, v| RateCell { n, exits: 1, p_hat: 0.1, stderr: 0.0, rate: RateValue::Estimate(v) };
        assert_eq!(trend(&[cell(1, 0.3), cell(2, 0.2)]), RateTrend::Decreasing);
        assert_eq!(trend(&[cell(2, 0.2), cell(1, 0.3)]), RateTrend::Decreasing);
        assert_eq!(trend(&[cell(1, 0.1), cell(2, 0.2), cell(3, 0.15)]), RateTrend::Mixed);
        assert_eq!(trend(&[cell(1, 0.1)]), RateTrend::Insufficient);
    }

    #[test]
    fn zeta_keeps_the_gaussian_variance() {
        let model = RandomFieldModel::brownian(&[0.5, 1.0]).unwrap();
        let z = zeta_replications(&model, 5, 4000, 12).unwrap();
        for (t, var) in [(0, 0.5), (1, 1.0)] {
            let col = z.column(t);
            let m = col.iter().map(|x| x * x).sum::<f64>() / col.len() as f64;
            // Var of the sample second moment is 2 var^2
            let se = (2.0 * var * var / col.len() as f64).sqrt();
            assert!((m - var).abs() < 3.0 * se, "{m} vs {var}");
        }
    }

    #[test]
    fn moments_of_bounded_fields() {
        let model = RandomFieldModel::rademacher(vec![0.5, -0.8]).unwrap();
        let r = exp_moment_check(&model, &MomentStatistic::Sup { n: 1 }, &[0.0, 1.0, 5.0], 200, 4).unwrap();
        assert_eq!(r.cells[0].estimate, 1.0);
        for c in &r.cells {
            assert!(c.stable && !c.overflow);
            assert!(c.estimate <= c.ceiling.unwrap() * (1.0 + 1e-12));
        }
        let heavy = RandomFieldModel::heavy_tail(3.0, vec![1.0]).unwrap();
        let r = exp_moment_check(&heavy, &MomentStatistic::Sup { n: 1 }, &[500.0], 500, 4).unwrap();
        assert!(r.cells[0].overflow && !r.cells[0].stable);
    }
}
