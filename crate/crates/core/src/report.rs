//! Scenario runs: the entropy and majorizing routes end to end, the JSON
//! report they produce, CSV artifacts, and report diffs.

use std::fmt;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::chaining::{
    calibrate_c, entropy_integral, increment_ratio_constant, natural_distance, refinement_check, sigma_of,
    tail_bound, uniform_norm_check, Calibration, CalibrationOptions, EntropyIntegral, IncrementSource, NormKind,
    Refinement, RefinementVerdict, TailObservation, UniformNormReport,
};
use crate::field::{
    cramer_check, etc_rate_estimate, exp_moment_check, mc_tail_table, sample_ensemble, CramerReport, Ensemble, KSpec,
    MomentReport, MomentStatistic, RandomFieldModel, RateTable, RateValue,
};
use crate::holder::{modulus_from, HolderModulus, ModulusSource};
use crate::majorizing::{
    base_point_check, classify_measure, theta_factorization, BasePoint, Classification, PointMeasure,
};
use crate::metric_space::{MetricSpace, SpaceError};
use crate::orlicz::{
    chi_function, envelope_constants, luxemburg_norm, phi_of, Conjugate, LogMgfFunction, NormOptions,
    OrliczGenerator, PhiSource, RandomSample, YoungPair,
};
use crate::scenario::{ChiSource, Scenario};

pub const SCHEMA_VERSION: u32 = 1;

/// Report key excluded from reproducibility comparisons.
pub const TIMESTAMP_KEY: &str = "generated_unix";

/// Report sections whose values come from Monte Carlo draws.
pub const MC_KEYS: &[&str] = &["mc", "tail", "rates", "moments", "uniform_norm", "c3", "theta", "cramer"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    PremiseFailure,
    BoundViolation,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::PremiseFailure => 2,
            Status::BoundViolation => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub exit_code: i32,
    pub notes: Vec<String>,
}

/// A failed stage, with the module error variant name verbatim.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageError {
    pub route: String,
    pub stage: String,
    pub error: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiSummary {
    pub source: ChiSource,
    pub grid_points: usize,
    pub half_width: f64,
    /// Envelope `C1 lambda^2 <= phi(lambda) <= C2 lambda^2` on `|lambda| <= 1`.
    pub envelope: (f64, f64),
    pub curvature_at_zero: f64,
    pub chi_curvature_at_zero: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceSummary {
    pub points: usize,
    pub diameter: f64,
    pub min_positive: Option<f64>,
    pub zero_pairs: usize,
}

impl DistanceSummary {
    fn of(sm: &MetricSpace) -> Self {
        let n = sm.len();
        let mut min_positive: Option<f64> = None;
        let mut zero_pairs = 0;
        for i in 0..n {
            for j in i + 1..n {
                let d = sm.d(i, j);
                if d > 0.0 {
                    min_positive = Some(min_positive.map_or(d, |m| m.min(d)));
                } else {
                    zero_pairs += 1;
                }
            }
        }
        DistanceSummary { points: n, diameter: sm.diameter(), min_positive, zero_pairs }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusSummary {
    pub base_point: usize,
    pub base_label: String,
    pub distance: DistanceSummary,
}

impl ModulusSummary {
    fn of(hm: &HolderModulus) -> Self {
        ModulusSummary {
            base_point: hm.base_point(),
            base_label: hm.omega().labels()[hm.base_point()].clone(),
            distance: DistanceSummary::of(hm.omega()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCell {
    pub u: f64,
    pub n: usize,
    pub empirical: f64,
    pub stderr: f64,
    pub exceed: u64,
    /// `exp(-chi*(C u sqrt n))` at the calibrated `C`.
    pub bound: f64,
    pub bound_saturated: bool,
    /// Same bound at the fixed `C` of the scenario.
    pub bound_fixed_c: f64,
    /// `bound >= empirical - 2 stderr`.
    pub dominated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailSection {
    pub reps: usize,
    pub seed: u64,
    pub fixed_c: f64,
    pub calibration: Calibration,
    pub cells: Vec<BoundCell>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EntropyReport {
    pub phi: Option<PhiSummary>,
    pub sigma: Option<f64>,
    pub natural_distance: Option<DistanceSummary>,
    pub entropy_integral: Option<EntropyIntegral>,
    pub refinement: Option<Refinement>,
    pub modulus: Option<ModulusSummary>,
    pub cramer: Option<CramerReport>,
    pub uniform_norm: Option<UniformNormReport>,
    pub c3: Option<f64>,
    pub tail: Option<TailSection>,
    pub moments: Option<MomentReport>,
    pub rates: Option<RateTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaSummary {
    pub paths: usize,
    pub max: f64,
    /// Luxemburg norm of the full sample and of its first half.
    pub luxemburg_norm: f64,
    pub luxemburg_norm_half: f64,
    /// Norms agree within 20%.
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MajorizingReport {
    pub phi: Option<String>,
    pub base_point: Option<BasePoint>,
    pub natural_distance: Option<DistanceSummary>,
    pub classification: Option<Classification>,
    pub v: Option<f64>,
    pub modulus: Option<ModulusSummary>,
    pub theta: Option<ThetaSummary>,
    pub tail: Option<TailSection>,
    pub moments: Option<MomentReport>,
    pub rates: Option<RateTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub schema_version: u32,
    pub tool: String,
    pub generated_unix: u64,
    /// Effective configuration, after command-line overrides.
    pub scenario: Scenario,
    pub verdict: Verdict,
    pub errors: Vec<StageError>,
    pub entropy: Option<EntropyReport>,
    pub majorizing: Option<MajorizingReport>,
}

impl BoundReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// A CSV (or JSON) file produced by a run, relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: BoundReport,
    pub artifacts: Vec<Artifact>,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        self.report.verdict.exit_code
    }

    /// Writes `report.json` and every artifact into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> std::io::Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.report.to_json())?;
        for a in &self.artifacts {
            std::fs::write(dir.join(&a.name), &a.contents)?;
        }
        Ok(())
    }
}

/// Which parts of the pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stages {
    /// Cramér, uniform-norm, increment-ratio, theta and exponential-moment checks.
    pub premise_checks: bool,
    /// Tail tables, calibration and exit rates.
    pub mc: bool,
}

impl Stages {
    pub const ALL: Stages = Stages { premise_checks: true, mc: true };
    pub const ANALYTIC: Stages = Stages { premise_checks: false, mc: false };
    pub const TABLES: Stages = Stages { premise_checks: false, mc: true };
}

/// Innermost variant name of a `Debug`-printed error, e.g. `BadIndex` for `Space(BadIndex(3))`.
pub fn error_name(debug: &str) -> String {
    let mut name = "";
    let mut rest = debug;
    loop {
        let end = rest.find(|c: char| !(c.is_alphanumeric() || c == '_')).unwrap_or(rest.len());
        let ident = &rest[..end];
        if ident.is_empty() || !ident.starts_with(char::is_uppercase) {
            break;
        }
        name = ident;
        match rest[end..].strip_prefix('(') {
            Some(r) => rest = r,
            None => break,
        }
    }
    name.to_string()
}

struct Outcome {
    status: Status,
    notes: Vec<String>,
    errors: Vec<StageError>,
    artifacts: Vec<Artifact>,
}

impl Outcome {
    fn premise(&mut self, note: String) {
        self.status = Status::PremiseFailure;
        self.notes.push(note);
    }

    fn violation(&mut self, note: String) {
        if self.status == Status::Ok {
            self.status = Status::BoundViolation;
        }
        self.notes.push(note);
    }

    fn error<E: fmt::Debug + fmt::Display>(&mut self, route: &str, stage: &str, e: E) {
        self.status = Status::PremiseFailure;
        self.errors.push(StageError {
            route: route.into(),
            stage: stage.into(),
            error: error_name(&format!("{e:?}")),
            message: e.to_string(),
        });
    }

    fn artifact(&mut self, name: String, contents: String) {
        self.artifacts.push(Artifact { name, contents });
    }
}

/// Unwraps a stage result or records the error and leaves the route.
macro_rules! stage {
    ($out:expr, $route:expr, $stage:expr, $e:expr, $ret:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => {
                $out.error($route, $stage, err);
                return $ret;
            }
        }
    };
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn matrix_string(sm: &MetricSpace) -> String {
    let mut buf = Vec::new();
    sm.write_csv(&mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("utf-8")
}

fn ensemble_for(s: &Scenario, model: &RandomFieldModel) -> Result<Option<Ensemble>, crate::field::FieldError> {
    match s.orlicz.source {
        ChiSource::Analytic => Ok(None),
        ChiSource::Empirical => sample_ensemble(model, s.mc.reps, s.mc.seed).map(Some),
    }
}

fn norm_options(s: &Scenario, ens: Option<&Ensemble>) -> NormOptions {
    match ens {
        Some(_) => NormOptions { lambda_grid: Some(s.grids.norm_lambda.values()), ..Default::default() },
        None => NormOptions::default(),
    }
}

fn increment_source(ens: Option<&Ensemble>) -> IncrementSource<'_> {
    ens.map_or(IncrementSource::Analytic, IncrementSource::Ensemble)
}

/// `phi`, then `chi = sup_n n phi(lambda / sqrt n)`.
fn phi_and_chi(
    s: &Scenario,
    model: &RandomFieldModel,
    ens: Option<&Ensemble>,
    route: &str,
    out: &mut Outcome,
) -> Option<(LogMgfFunction, LogMgfFunction, PhiSummary)> {
    let grid = s.grids.lambda.values();
    let phi = match ens {
        None => phi_of(PhiSource::Model(model), &grid),
        Some(e) => {
            let samples: Result<Vec<RandomSample>, _> =
                (0..e.points()).map(|t| RandomSample::new(e.column(t), Some(e.seed()))).collect();
            samples.and_then(|ss| phi_of(PhiSource::Samples(&ss), &grid))
        }
    };
    let phi = stage!(out, route, "phi", phi, None);
    let envelope = stage!(out, route, "envelope", envelope_constants(&phi), None);
    let chi = stage!(out, route, "chi", chi_function(&phi, s.orlicz.n_cap), None);
    let summary = PhiSummary {
        source: s.orlicz.source,
        grid_points: grid.len(),
        half_width: s.grids.lambda.half_width,
        envelope,
        curvature_at_zero: phi.curvature_at_zero(),
        chi_curvature_at_zero: chi.curvature_at_zero(),
    };
    Some((phi, chi, summary))
}

fn tail_section(
    s: &Scenario,
    model: &RandomFieldModel,
    omega: &MetricSpace,
    u_grid: &[f64],
    conj: &Conjugate,
    route: &str,
    out: &mut Outcome,
) -> Option<TailSection> {
    let table = stage!(out, route, "tail", mc_tail_table(model, omega, u_grid, &s.grids.n, s.mc.reps, s.mc.seed), None);
    let obs: Vec<TailObservation> =
        table.cells.iter().map(|c| TailObservation { u: c.u, n: c.n, p: c.p, stderr: c.stderr }).collect();
    let opts = CalibrationOptions { c_max: s.mc.c_max, c_min: s.mc.c_min, ..Default::default() };
    let calibration = stage!(out, route, "calibration", calibrate_c(&obs, conj, &opts), None);
    let cells: Vec<BoundCell> = table
        .cells
        .iter()
        .map(|c| {
            let b = tail_bound(c.u, c.n, calibration.c, conj);
            BoundCell {
                u: c.u,
                n: c.n,
                empirical: c.p,
                stderr: c.stderr,
                exceed: c.exceed,
                bound: b.value,
                bound_saturated: b.saturated,
                bound_fixed_c: tail_bound(c.u, c.n, s.mc.c, conj).value,
                dominated: b.value >= c.p - 2.0 * c.stderr,
            }
        })
        .collect();
    if !calibration.violations.is_empty() {
        let list: Vec<String> = calibration.violations.iter().map(|&i| format!("(u={}, n={})", cells[i].u, cells[i].n)).collect();
        out.violation(format!("{route}: bound below empirical tail + 2 stderr even at C = {}: {}", opts.c_min, list.join(", ")));
    }
    out.artifact(
        format!("{route}_tail.csv"),
        csv_string(
            &["u", "n", "bound", "empirical", "stderr"],
            cells.iter().map(|c| vec![c.u.to_string(), c.n.to_string(), c.bound.to_string(), c.empirical.to_string(), c.stderr.to_string()]),
        ),
    );
    Some(TailSection { reps: table.reps, seed: table.seed, fixed_c: s.mc.c, calibration, cells })
}

fn rates_section(s: &Scenario, model: &RandomFieldModel, hm: &HolderModulus, radii: &[f64], route: &str, out: &mut Outcome) -> Option<RateTable> {
    let ks: Vec<KSpec> = radii.iter().map(|&r| KSpec::HolderBall(hm.clone(), r)).collect();
    let table = stage!(out, route, "rates", etc_rate_estimate(model, &ks, &s.grids.n, s.mc.reps, s.mc.seed), None);
    let rows = table.rows.iter().flat_map(|row| {
        row.cells.iter().map(move |c| {
            let (rate, censored) = match c.rate {
                RateValue::Estimate(v) => (v, false),
                RateValue::Censored(v) => (v, true),
            };
            vec![row.k.clone(), c.n.to_string(), c.exits.to_string(), c.p_hat.to_string(), c.stderr.to_string(), rate.to_string(), censored.to_string()]
        })
    });
    out.artifact(
        format!("{route}_rates.csv"),
        csv_string(&["k", "n", "exits", "p_hat", "stderr", "rate", "censored"], rows),
    );
    Some(table)
}

fn moments_section(s: &Scenario, model: &RandomFieldModel, hm: &HolderModulus, route: &str, out: &mut Outcome) -> Option<MomentReport> {
    let n = *s.grids.n.iter().max().expect("validated nonempty");
    let stat = MomentStatistic::Holder { n, modulus: hm.clone() };
    let r = stage!(out, route, "moments", exp_moment_check(model, &stat, &s.grids.moment_lambda, s.mc.reps, s.mc.seed), None);
    for c in r.cells.iter().filter(|c| !c.stable || c.overflow) {
        out.premise(format!("{route}: E exp({} {}) is not stable under doubling the replications", c.lambda, r.statistic));
    }
    Some(r)
}

fn run_entropy(s: &Scenario, space: &MetricSpace, model: &RandomFieldModel, ens: Option<&Ensemble>, stages: Stages, out: &mut Outcome) -> EntropyReport {
    const R: &str = "entropy";
    let spec = s.entropy_spec();
    let mode = spec.cover.mode();
    let mut rep = EntropyReport::default();
    let Some((phi, chi, summary)) = phi_and_chi(s, model, ens, R, out) else { return rep };
    rep.phi = Some(summary);
    out.artifact("phi.csv".into(), csv_string(&["lambda", "value"], phi.grid().iter().zip(phi.values()).map(|(l, v)| vec![l.to_string(), v.to_string()])));
    out.artifact("chi.csv".into(), csv_string(&["lambda", "value"], chi.grid().iter().zip(chi.values()).map(|(l, v)| vec![l.to_string(), v.to_string()])));
    let young = stage!(out, R, "young", YoungPair::from_chi(&chi), rep);
    let opts = norm_options(s, ens);
    let source = increment_source(ens);
    let d = stage!(out, R, "natural_distance", natural_distance(model, NormKind::BChi(&chi), source, &opts, Some(space.labels())), rep);
    rep.natural_distance = Some(DistanceSummary::of(&d));
    out.artifact("entropy_distance.csv".into(), matrix_string(&d));
    let sigma = match spec.sigma {
        Some(v) => v,
        None => stage!(out, R, "sigma", sigma_of(model, &chi, source, &opts), rep),
    };
    rep.sigma = Some(sigma);
    if sigma == 0.0 {
        out.premise("entropy: sigma = 0, the field is degenerate".into());
        return rep;
    }
    let j = stage!(out, R, "entropy_integral", entropy_integral(&d, &young, sigma, mode), rep);
    out.artifact(
        "entropy_steps.csv".into(),
        csv_string(&["eps_start", "count"], j.steps.iter().map(|st| vec![st.start.to_string(), st.count.to_string()])),
    );
    rep.entropy_integral = Some(j);
    let refinement = stage!(out, R, "refinement", refinement_check(&d, &young, sigma, mode), rep);
    let diverging = refinement.verdict == RefinementVerdict::Diverging;
    rep.refinement = Some(refinement);
    if diverging {
        out.premise("entropy: the entropy integral grows without settling under mesh refinement".into());
        return rep;
    }
    let hm = stage!(out, R, "modulus", modulus_from(ModulusSource::Chaining { d: &d, young: &young, mode }, spec.base_point), rep);
    rep.modulus = Some(ModulusSummary::of(&hm));
    out.artifact("entropy_modulus.csv".into(), matrix_string(hm.omega()));

    if stages.premise_checks {
        let cramer = stage!(out, R, "cramer", cramer_check(model, &s.grids.mu, &s.grids.x, s.mc.reps, s.mc.seed), rep);
        if !cramer.pass {
            out.premise("entropy: the strengthened Cramér condition fails on the x grid".into());
        }
        rep.cramer = Some(cramer);
        if spec.norm_checks {
            let mc_opts = NormOptions { lambda_grid: Some(s.grids.norm_lambda.values()), ..Default::default() };
            let u = stage!(
                out, R, "uniform_norm",
                uniform_norm_check(model, &chi, sigma, &s.grids.n, s.mc.norm_reps, s.mc.seed, s.mc.norm_tolerance, &mc_opts),
                rep
            );
            if u.rows.iter().any(|r| !r.within) {
                out.premise(format!("entropy: sup_t ||zeta_n(t)|| exceeds sigma (1 + {})", s.mc.norm_tolerance));
            }
            rep.uniform_norm = Some(u);
            rep.c3 = Some(stage!(
                out, R, "c3",
                increment_ratio_constant(model, &chi, &d, &s.grids.n, s.mc.norm_reps, s.mc.seed, &mc_opts),
                rep
            ));
        }
    }
    if stages.mc {
        let conj = young.conjugate().clone();
        let u = spec.u.clone().unwrap_or_else(|| s.grids.u.clone());
        rep.tail = tail_section(s, model, hm.omega(), &u, &conj, R, out);
        let radii = spec.radius.clone().unwrap_or_else(|| s.grids.radius.clone());
        rep.rates = rates_section(s, model, &hm, &radii, R, out);
    }
    if stages.premise_checks {
        rep.moments = moments_section(s, model, &hm, R, out);
    }
    rep
}

fn run_majorizing(s: &Scenario, space: &MetricSpace, model: &RandomFieldModel, ens: Option<&Ensemble>, stages: Stages, out: &mut Outcome) -> MajorizingReport {
    const R: &str = "majorizing";
    let spec = s.majorizing_spec();
    let phi_gen: &OrliczGenerator = &spec.phi;
    let mut rep = MajorizingReport { phi: Some(phi_gen.name()), ..Default::default() };
    let base = stage!(out, R, "base_point", base_point_check(model, phi_gen), rep);
    rep.base_point = Some(base);
    let opts = norm_options(s, ens);
    let d = stage!(
        out, R, "natural_distance",
        natural_distance(model, NormKind::Luxemburg(phi_gen), increment_source(ens), &opts, Some(space.labels())),
        rep
    );
    rep.natural_distance = Some(DistanceSummary::of(&d));
    out.artifact("majorizing_distance.csv".into(), matrix_string(&d));
    let measure = match &spec.measure {
        None => PointMeasure::uniform(d.len()),
        Some(p) => {
            let path = if p.is_absolute() { p.clone() } else { s.base_dir.join(p) };
            stage!(out, R, "measure", PointMeasure::load_csv(path, &d), rep)
        }
    };
    let class = stage!(out, R, "classification", classify_measure(&measure, &d, phi_gen, s.grids.v.as_deref()), rep);
    let majorizing = class.majorizing;
    rep.classification = Some(class);
    if !majorizing {
        out.premise("majorizing: the measure is not majorizing for this distance".into());
        return rep;
    }
    let v = spec.v.unwrap_or_else(|| d.diameter());
    rep.v = Some(v);
    if v == 0.0 {
        out.premise("majorizing: the natural distance vanishes identically".into());
        return rep;
    }
    let src = ModulusSource::Majorizing { space: &d, measure: &measure, phi: phi_gen, v, t0: base.t0 };
    let hm = stage!(out, R, "modulus", modulus_from(src, spec.base_point), rep);
    rep.modulus = Some(ModulusSummary::of(&hm));
    out.artifact("w_matrix.csv".into(), matrix_string(hm.omega()));

    if stages.premise_checks {
        let sampled;
        let e = match ens {
            Some(e) => e,
            None => {
                sampled = stage!(out, R, "theta", sample_ensemble(model, s.mc.reps, s.mc.seed), rep);
                &sampled
            }
        };
        let theta = stage!(out, R, "theta", theta_factorization(e, hm.omega()), rep);
        let half = stage!(out, R, "theta", RandomSample::new(theta.values()[..theta.len().div_ceil(2)].to_vec(), theta.seed()), rep);
        let full_norm = stage!(out, R, "theta", luxemburg_norm(&theta, phi_gen, 1e-9), rep);
        let half_norm = stage!(out, R, "theta", luxemburg_norm(&half, phi_gen, 1e-9), rep);
        let stable = (full_norm - half_norm).abs() <= 0.2 * full_norm.max(f64::MIN_POSITIVE) || full_norm == half_norm;
        if !stable {
            out.premise("majorizing: the Orlicz norm of theta is not stable under halving the sample".into());
        }
        rep.theta = Some(ThetaSummary {
            paths: theta.len(),
            max: theta.values().iter().copied().fold(0.0, f64::max),
            luxemburg_norm: full_norm,
            luxemburg_norm_half: half_norm,
            stable,
        });
    }
    if stages.mc {
        let Some((_, chi, _)) = phi_and_chi(s, model, ens, R, out) else { return rep };
        let conj = Conjugate::of(&chi);
        let u = spec.u.clone().unwrap_or_else(|| s.grids.u.clone());
        rep.tail = tail_section(s, model, hm.omega(), &u, &conj, R, out);
        let radii = spec.radius.clone().unwrap_or_else(|| s.grids.radius.clone());
        rep.rates = rates_section(s, model, &hm, &radii, R, out);
    }
    if stages.premise_checks {
        rep.moments = moments_section(s, model, &hm, R, out);
    }
    rep
}

/// Runs the scenario's route(s) end to end.
pub fn run_scenario(s: &Scenario) -> RunOutput {
    run_stages(s, Stages::ALL)
}

pub fn run_stages(s: &Scenario, stages: Stages) -> RunOutput {
    let mut out = Outcome { status: Status::Ok, notes: Vec::new(), errors: Vec::new(), artifacts: Vec::new() };
    // the effective config carries only the sections its route reads
    let mut effective = s.clone();
    if !s.route.entropy() {
        effective.entropy = None;
    }
    if !s.route.majorizing() {
        effective.majorizing = None;
    }
    let (mut entropy, mut majorizing) = (None, None);
    match s.space().and_then(|sp| s.model(&sp).map(|m| (sp, m))) {
        Err(e) => out.error("common", "setup", SetupError(e)),
        Ok((space, model)) => match ensemble_for(s, &model) {
            Err(e) => out.error("common", "ensemble", e),
            Ok(ens) => {
                if s.route.entropy() {
                    entropy = Some(run_entropy(s, &space, &model, ens.as_ref(), stages, &mut out));
                }
                if s.route.majorizing() {
                    majorizing = Some(run_majorizing(s, &space, &model, ens.as_ref(), stages, &mut out));
                }
            }
        },
    }
    let generated_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let report = BoundReport {
        schema_version: SCHEMA_VERSION,
        tool: format!("tightlab {}", env!("CARGO_PKG_VERSION")),
        generated_unix,
        scenario: effective,
        verdict: Verdict { status: out.status, exit_code: out.status.exit_code(), notes: out.notes },
        errors: out.errors,
        entropy,
        majorizing,
    };
    RunOutput { report, artifacts: out.artifacts }
}

#[derive(Debug)]
struct SetupError(String);

impl fmt::Display for SetupError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One row of a covering table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverRow {
    pub eps: f64,
    pub count: usize,
    pub entropy: f64,
}

/// `N(T, d, eps)` and `H = ln N` of the scenario's space over `grids.eps`
/// (every distinct positive distance when absent).
pub fn cover_table(s: &Scenario) -> Result<Vec<CoverRow>, SpaceError> {
    let space = s.space().map_err(SpaceError::Parse)?;
    let mode = s.entropy_spec().cover.mode();
    let eps = s.grids.eps.clone().unwrap_or_else(|| space.distinct_distances());
    eps.iter()
        .map(|&e| {
            let count = space.covering_number(e, mode)?;
            Ok(CoverRow { eps: e, count, entropy: (count as f64).ln() })
        })
        .collect()
}

/// Drops the timestamp so reports of identical runs compare byte for byte.
pub fn without_timestamp(json: &str) -> Result<String, serde_json::Error> {
    let mut v: Value = serde_json::from_str(json)?;
    if let Value::Object(m) = &mut v {
        m.shift_remove(TIMESTAMP_KEY);
    }
    serde_json::to_string_pretty(&v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffEntry {
    /// Dotted path with `[i]` indices, e.g. `entropy.tail.cells[2].empirical`.
    pub path: String,
    pub a: Option<Value>,
    pub b: Option<Value>,
    /// Both numeric and within the relative tolerance.
    pub within_tol: bool,
    /// Lies in a Monte Carlo section.
    pub mc: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportDiff {
    pub schema_versions: (Option<Value>, Option<Value>),
    pub entries: Vec<DiffEntry>,
}

impl ReportDiff {
    pub fn schema_mismatch(&self) -> bool {
        self.schema_versions.0 != self.schema_versions.1
    }

    pub fn same(&self) -> bool {
        !self.schema_mismatch() && self.entries.iter().all(|e| e.within_tol)
    }

    /// Every difference beyond tolerance lies in a Monte Carlo section.
    pub fn only_mc_differ(&self) -> bool {
        self.entries.iter().all(|e| e.within_tol || e.mc)
    }
}

impl fmt::Display for ReportDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.schema_mismatch() {
            let show = |v: &Option<Value>| v.as_ref().map_or("missing".to_string(), Value::to_string);
            writeln!(
                f,
                "schema version mismatch: {} vs {}; comparing shared fields",
                show(&self.schema_versions.0),
                show(&self.schema_versions.1)
            )?;
        }
        let show = |v: &Option<Value>| v.as_ref().map_or("<absent>".to_string(), Value::to_string);
        for e in &self.entries {
            let flag = match (e.within_tol, e.mc) {
                (true, _) => "within-tol",
                (false, true) => "differs [mc]",
                (false, false) => "differs",
            };
            writeln!(f, "{flag:>14}  {}: {} -> {}", e.path, show(&e.a), show(&e.b))?;
        }
        let differing = self.entries.iter().filter(|e| !e.within_tol).count();
        if self.same() {
            writeln!(f, "same")
        } else {
            writeln!(f, "different ({differing} fields; {})", if self.only_mc_differ() { "Monte Carlo fields only" } else { "including non-Monte-Carlo fields" })
        }
    }
}

fn is_mc_path(path: &str) -> bool {
    path.split('.').map(|seg| seg.split('[').next().unwrap_or(seg)).any(|seg| MC_KEYS.contains(&seg))
}

fn walk(path: &str, a: Option<&Value>, b: Option<&Value>, rel_tol: f64, out: &mut Vec<DiffEntry>) {
    let child = |key: &str| if path.is_empty() { key.to_string() } else { format!("{path}.{key}") };
    match (a, b) {
        (Some(Value::Object(x)), Some(Value::Object(y))) => {
            for (k, v) in x {
                walk(&child(k), Some(v), y.get(k), rel_tol, out);
            }
            for (k, v) in y.iter().filter(|(k, _)| !x.contains_key(*k)) {
                walk(&child(k), None, Some(v), rel_tol, out);
            }
        }
        (Some(Value::Array(x)), Some(Value::Array(y))) => {
            for i in 0..x.len().max(y.len()) {
                walk(&format!("{path}[{i}]"), x.get(i), y.get(i), rel_tol, out);
            }
        }
        (Some(x), Some(y)) if x == y => {}
        _ => {
            let within_tol = match (a.and_then(Value::as_f64), b.and_then(Value::as_f64)) {
                (Some(x), Some(y)) => (x - y).abs() <= rel_tol * x.abs().max(y.abs()),
                _ => false,
            };
            out.push(DiffEntry { path: path.to_string(), a: a.cloned(), b: b.cloned(), within_tol, mc: is_mc_path(path) });
        }
    }
}

/// Field-by-field comparison of two reports; numbers within `rel_tol` are
/// flagged but count as equal. The timestamp and output directory are ignored.
pub fn diff_reports(a: &Value, b: &Value, rel_tol: f64) -> ReportDiff {
    let strip = |v: &Value| {
        let mut v = v.clone();
        if let Value::Object(m) = &mut v {
            m.shift_remove(TIMESTAMP_KEY);
            if let Some(Value::Object(s)) = m.get_mut("scenario") {
                s.shift_remove("output");
            }
        }
        v
    };
    let (a, b) = (strip(a), strip(b));
    let mut entries = Vec::new();
    walk("", Some(&a), Some(&b), rel_tol, &mut entries);
    ReportDiff { schema_versions: (a.get("schema_version").cloned(), b.get("schema_version").cloned()), entries }
}
