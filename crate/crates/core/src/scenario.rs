//! TOML scenarios: what to compute, on which space and model, with which grids.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::field::{RandomFieldModel, MIN_REPS};
use crate::metric_space::{CoverMode, MetricSpace, DEFAULT_EXACT_CAP};
use crate::orlicz::{symmetric_grid, OrliczGenerator};

/// Scenarios shipped with the library, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("gauss-bm-32", include_str!("../scenarios/gauss-bm-32.toml")),
    ("rademacher-ramp", include_str!("../scenarios/rademacher-ramp.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Entropy,
    Majorizing,
    #[default]
    Both,
}

impl Route {
    pub fn entropy(self) -> bool {
        matches!(self, Route::Entropy | Route::Both)
    }

    pub fn majorizing(self) -> bool {
        matches!(self, Route::Majorizing | Route::Both)
    }
}

impl std::str::FromStr for Route {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "entropy" => Ok(Route::Entropy),
            "majorizing" => Ok(Route::Majorizing),
            "both" => Ok(Route::Both),
            _ => Err(format!("unknown route {s:?} (entropy, majorizing, both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SpaceSpec {
    /// `{k / (points - 1)}` with `|t - s|`.
    Interval { points: usize },
    /// `{k / (points - 1)}` with `sqrt|t - s|`.
    Brownian { points: usize },
    Torus { side: usize, dims: usize },
    Product { left: Box<SpaceSpec>, right: Box<SpaceSpec> },
    /// CSV matrix file with a header row of labels.
    Matrix { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitude {
    Constant(f64),
    Values(Vec<f64>),
}

impl Amplitude {
    fn expand(&self, points: usize) -> Vec<f64> {
        match self {
            Amplitude::Constant(a) => vec![*a; points],
            Amplitude::Values(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    /// Brownian motion at the first coordinate of each point, times `scale`.
    Brownian {
        #[serde(default = "one")]
        scale: f64,
    },
    GaussianIid { sd: f64 },
    /// Covariance CSV in the matrix file format.
    Gaussian { covariance: PathBuf },
    Rademacher { amplitude: Amplitude },
    RandomPhase { amplitude: Amplitude, phase: Vec<f64> },
    HeavyTail { dof: f64, amplitude: Amplitude },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChiSource {
    /// Closed-form log-MGFs of the model marginals.
    #[default]
    Analytic,
    /// Empirical log-MGFs and increment norms from an ensemble of `mc.reps` paths.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrliczSpec {
    #[serde(default)]
    pub source: ChiSource,
    #[serde(default = "default_n_cap")]
    pub n_cap: u64,
}

impl Default for OrliczSpec {
    fn default() -> Self {
        OrliczSpec { source: ChiSource::Analytic, n_cap: default_n_cap() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverChoice {
    Exact,
    Greedy,
    #[default]
    Auto,
}

impl CoverChoice {
    pub fn mode(self) -> CoverMode {
        match self {
            CoverChoice::Exact => CoverMode::Exact { cap: DEFAULT_EXACT_CAP },
            CoverChoice::Greedy => CoverMode::Greedy,
            CoverChoice::Auto => CoverMode::Auto { cap: DEFAULT_EXACT_CAP },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropySpec {
    #[serde(default)]
    pub cover: CoverChoice,
    /// Upper limit of the entropy integral; defaults to `sup_t ||xi(t)||`.
    pub sigma: Option<f64>,
    pub base_point: Option<usize>,
    /// Overrides `grids.u` for the tail table of this route.
    pub u: Option<Vec<f64>>,
    /// Overrides `grids.radius` for the rate table of this route.
    pub radius: Option<Vec<f64>>,
    /// Run the uniform-norm and increment-ratio checks on `mc.norm_reps` replications.
    #[serde(default = "yes")]
    pub norm_checks: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MajorizingSpec {
    #[serde(default = "gauss2")]
    pub phi: OrliczGenerator,
    /// `label,weight` CSV; uniform when absent.
    pub measure: Option<PathBuf>,
    /// `V` of the w-matrix used as the modulus; defaults to the diameter.
    pub v: Option<f64>,
    pub base_point: Option<usize>,
    pub u: Option<Vec<f64>>,
    pub radius: Option<Vec<f64>>,
}

impl Default for MajorizingSpec {
    fn default() -> Self {
        MajorizingSpec { phi: OrliczGenerator::Gauss2, measure: None, v: None, base_point: None, u: None, radius: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaGrid {
    pub half_width: f64,
    pub points: usize,
}

impl LambdaGrid {
    pub fn values(&self) -> Vec<f64> {
        symmetric_grid(self.half_width, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    pub u: Vec<f64>,
    pub n: Vec<usize>,
    #[serde(default = "default_lambda")]
    pub lambda: LambdaGrid,
    /// Test lambdas for empirical B(chi) norms.
    #[serde(default = "default_norm_lambda")]
    pub norm_lambda: LambdaGrid,
    /// Covering radii for `cover`; all distinct distances when absent.
    pub eps: Option<Vec<f64>>,
    /// Classification grid for measures; `{D/4, D/2, D, 2D}` when absent.
    pub v: Option<Vec<f64>>,
    /// Hölder-ball radii for exit-rate tables.
    #[serde(default = "default_radius")]
    pub radius: Vec<f64>,
    #[serde(default = "default_moment_lambda")]
    pub moment_lambda: Vec<f64>,
    #[serde(default = "default_mu")]
    pub mu: Vec<f64>,
    #[serde(default = "default_x")]
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    #[serde(default = "default_reps")]
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_norm_reps")]
    pub norm_reps: usize,
    /// Relative slack of the uniform-norm check.
    #[serde(default = "default_norm_tolerance")]
    pub norm_tolerance: f64,
    /// Fixed `C` reported next to the calibrated one.
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "default_c_max")]
    pub c_max: f64,
    #[serde(default = "default_c_min")]
    pub c_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: default_dir() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub route: Route,
    pub space: SpaceSpec,
    pub model: ModelSpec,
    #[serde(default)]
    pub orlicz: OrliczSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy: Option<EntropySpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub majorizing: Option<MajorizingSpec>,
    pub grids: Grids,
    pub mc: McSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn gauss2() -> OrliczGenerator {
    OrliczGenerator::Gauss2
}
fn default_n_cap() -> u64 {
    1 << 20
}
fn default_lambda() -> LambdaGrid {
    LambdaGrid { half_width: 8.0, points: 161 }
}
fn default_norm_lambda() -> LambdaGrid {
    LambdaGrid { half_width: 2.0, points: 41 }
}
fn default_radius() -> Vec<f64> {
    vec![1.0, 2.0]
}
fn default_moment_lambda() -> Vec<f64> {
    vec![0.0, 0.5, 1.0]
}
fn default_mu() -> Vec<f64> {
    vec![1.0, 2.0, 4.0]
}
fn default_x() -> Vec<f64> {
    (0..=40).map(|k| 0.25 * k as f64).collect()
}
fn default_reps() -> usize {
    crate::field::DEFAULT_REPS
}
fn default_norm_reps() -> usize {
    500
}
fn default_norm_tolerance() -> f64 {
    0.1
}
fn default_c_max() -> f64 {
    100.0
}
fn default_c_min() -> f64 {
    1e-3
}
fn default_dir() -> PathBuf {
    PathBuf::from("tightlab-out")
}

/// A rejected scenario, located by line (when known) and field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}, field `{}`: {}", self.field, self.message),
            None => write!(f, "field `{}`: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line of `key` inside `[section]` (or at top level for an empty section).
fn locate(src: &str, field: &str) -> Option<usize> {
    let (section, key) = match field.rsplit_once('.') {
        Some((s, k)) => (s, k),
        None => ("", field),
    };
    let key = key.split('[').next().unwrap_or(key);
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        let k = t.split('=').next().unwrap_or("").trim();
        if current == section && k == key {
            return Some(i + 1);
        }
    }
    if !section.is_empty() {
        return src.lines().position(|l| l.trim() == format!("[{section}]")).map(|i| i + 1);
    }
    None
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

impl Scenario {
    /// Parses and validates; relative file paths resolve against `base_dir`.
    pub fn parse(src: &str, base_dir: impl AsRef<Path>) -> Result<Scenario, ConfigError> {
        let mut s: Scenario = toml::from_str(src).map_err(|e| {
            let line = e.span().map(|r| line_of(src, r.start));
            let message = e.message().to_string();
            let field = message
                .split('`')
                .nth(1)
                .filter(|_| message.contains("field"))
                .unwrap_or("<document>")
                .to_string();
            ConfigError { line, field, message }
        })?;
        s.base_dir = base_dir.as_ref().to_path_buf();
        s.validate().map_err(|(field, message)| ConfigError { line: locate(src, &field), field, message })?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ConfigError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            field: "<file>".into(),
            message: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&src, path.parent().unwrap_or(Path::new(".")))
    }

    /// A file path, or the name of a bundled scenario.
    pub fn resolve(name_or_path: &str) -> Result<Scenario, ConfigError> {
        if Path::new(name_or_path).is_file() {
            return Self::load(name_or_path);
        }
        match bundled(name_or_path) {
            Some(src) => Self::parse(src, "."),
            None => Err(ConfigError {
                line: None,
                field: "<file>".into(),
                message: format!("{name_or_path:?} is neither a file nor a bundled scenario"),
            }),
        }
    }

    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn entropy_spec(&self) -> EntropySpec {
        self.entropy.clone().unwrap_or_default()
    }

    pub fn majorizing_spec(&self) -> MajorizingSpec {
        self.majorizing.clone().unwrap_or_default()
    }

    /// Checks everything that can be checked without running the pipeline.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let err = |f: &str, m: String| Err((f.to_string(), m));
        let positive = |f: &str, v: &[f64]| -> Result<(), (String, String)> {
            if v.is_empty() {
                return err(f, "grid must be nonempty".into());
            }
            match v.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
                Some(i) => err(&format!("{f}[{i}]"), format!("{} must be positive and finite", v[i])),
                None => Ok(()),
            }
        };
        let nonnegative = |f: &str, v: &[f64]| -> Result<(), (String, String)> {
            if v.is_empty() {
                return err(f, "grid must be nonempty".into());
            }
            match v.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                Some(i) => err(&format!("{f}[{i}]"), format!("{} must be nonnegative and finite", v[i])),
                None => Ok(()),
            }
        };
        self.check_files()?;
        let points = self.space().map_err(|m| ("space".to_string(), m))?.len();
        self.check_model(points)?;

        let g = &self.grids;
        positive("grids.u", &g.u)?;
        if g.n.is_empty() {
            return err("grids.n", "grid must be nonempty".into());
        }
        if let Some(i) = g.n.iter().position(|&n| n == 0) {
            return err(&format!("grids.n[{i}]"), "n must be at least 1; S_0 is undefined".into());
        }
        for (f, lg) in [("grids.lambda", &g.lambda), ("grids.norm_lambda", &g.norm_lambda)] {
            if !(lg.half_width.is_finite() && lg.half_width > 0.0) || lg.points < 7 {
                return err(f, "needs half_width > 0 and at least 7 points".into());
            }
        }
        if let Some(e) = &g.eps {
            positive("grids.eps", e)?;
        }
        if let Some(v) = &g.v {
            positive("grids.v", v)?;
        }
        positive("grids.radius", &g.radius)?;
        nonnegative("grids.moment_lambda", &g.moment_lambda)?;
        positive("grids.mu", &g.mu)?;
        nonnegative("grids.x", &g.x)?;

        if self.mc.reps < MIN_REPS {
            return err("mc.reps", format!("at least {MIN_REPS} replications are required, got {}", self.mc.reps));
        }
        if self.mc.norm_reps < 2 {
            return err("mc.norm_reps", "at least 2 replications are required".into());
        }
        if !(self.mc.c.is_finite() && self.mc.c > 0.0) {
            return err("mc.c", "C must be positive".into());
        }
        if !(self.mc.c_min > 0.0 && self.mc.c_min < self.mc.c_max && self.mc.c_max.is_finite()) {
            return err("mc.c_min", "need 0 < c_min < c_max < inf".into());
        }
        if !(self.mc.norm_tolerance >= 0.0) {
            return err("mc.norm_tolerance", "must be nonnegative".into());
        }
        if self.orlicz.n_cap == 0 {
            return err("orlicz.n_cap", "must be at least 1".into());
        }

        if let Some(e) = &self.entropy {
            if let Some(s) = e.sigma {
                if !(s.is_finite() && s > 0.0) {
                    return err("entropy.sigma", "sigma must be positive and finite".into());
                }
            }
            if let Some(b) = e.base_point.filter(|&b| b >= points) {
                return err("entropy.base_point", format!("point {b} out of range (space has {points})"));
            }
            if let Some(u) = &e.u {
                positive("entropy.u", u)?;
            }
            if let Some(r) = &e.radius {
                positive("entropy.radius", r)?;
            }
        }
        if let Some(m) = &self.majorizing {
            if let Err(e) = m.phi.validate() {
                return err("majorizing.phi", e.to_string());
            }
            if let Some(v) = m.v {
                if !(v.is_finite() && v > 0.0) {
                    return err("majorizing.v", "V must be positive and finite".into());
                }
            }
            if let Some(b) = m.base_point.filter(|&b| b >= points) {
                return err("majorizing.base_point", format!("point {b} out of range (space has {points})"));
            }
            if let Some(u) = &m.u {
                positive("majorizing.u", u)?;
            }
            if let Some(r) = &m.radius {
                positive("majorizing.radius", r)?;
            }
        }
        Ok(())
    }

    fn check_files(&self) -> Result<(), (String, String)> {
        let mut files: Vec<(&str, &Path)> = Vec::new();
        fn space_files<'a>(s: &'a SpaceSpec, out: &mut Vec<(&'static str, &'a Path)>) {
            match s {
                SpaceSpec::Matrix { file } => out.push(("space.file", file)),
                SpaceSpec::Product { left, right } => {
                    space_files(left, out);
                    space_files(right, out);
                }
                _ => {}
            }
        }
        space_files(&self.space, &mut files);
        if let ModelSpec::Gaussian { covariance } = &self.model {
            files.push(("model.covariance", covariance));
        }
        if let Some(MajorizingSpec { measure: Some(m), .. }) = &self.majorizing {
            files.push(("majorizing.measure", m));
        }
        for (field, f) in files {
            if !self.path(f).is_file() {
                return Err((field.to_string(), format!("file {} does not exist", self.path(f).display())));
            }
        }
        Ok(())
    }

    fn check_model(&self, points: usize) -> Result<(), (String, String)> {
        let len_check = |f: &str, a: &Amplitude| match a {
            Amplitude::Values(v) if v.len() != points => {
                Err((f.to_string(), format!("{} entries for a space of {points} points", v.len())))
            }
            _ => Ok(()),
        };
        match &self.model {
            ModelSpec::Rademacher { amplitude } | ModelSpec::HeavyTail { amplitude, .. } => {
                len_check("model.amplitude", amplitude)
            }
            ModelSpec::RandomPhase { amplitude, phase } => {
                len_check("model.amplitude", amplitude)?;
                if phase.len() != points {
                    return Err(("model.phase".into(), format!("{} entries for a space of {points} points", phase.len())));
                }
                Ok(())
            }
            _ => Ok(()),
        }?;
        self.model(&self.space().map_err(|m| ("space".to_string(), m))?).map(|_| ()).map_err(|m| ("model".to_string(), m))
    }

    /// Builds the index space.
    pub fn space(&self) -> Result<MetricSpace, String> {
        self.build_space(&self.space)
    }

    fn build_space(&self, spec: &SpaceSpec) -> Result<MetricSpace, String> {
        let r = match spec {
            SpaceSpec::Interval { points } => MetricSpace::interval_grid(*points),
            SpaceSpec::Brownian { points } => MetricSpace::brownian_grid(*points),
            SpaceSpec::Torus { side, dims } => MetricSpace::torus_grid(*side, *dims),
            SpaceSpec::Product { left, right } => {
                MetricSpace::product(&self.build_space(left)?, &self.build_space(right)?)
            }
            SpaceSpec::Matrix { file } => MetricSpace::load_csv(self.path(file)),
        };
        r.map_err(|e| e.to_string())
    }

    /// Builds the field model over `space`.
    pub fn model(&self, space: &MetricSpace) -> Result<RandomFieldModel, String> {
        let points = space.len();
        let r = match &self.model {
            ModelSpec::Brownian { scale } => {
                let coords = space.coords().ok_or("brownian model needs a space with coordinates")?;
                let times: Vec<f64> = coords.iter().map(|c| c[0]).collect();
                RandomFieldModel::brownian(&times).map(|m| m.scaled(*scale))
            }
            ModelSpec::GaussianIid { sd } => RandomFieldModel::gaussian_iid(points, *sd),
            ModelSpec::Gaussian { covariance } => {
                let cov = read_matrix(&self.path(covariance))?;
                if cov.len() != points {
                    return Err(format!("covariance is {}x{} but the space has {points} points", cov.len(), cov.len()));
                }
                RandomFieldModel::gaussian(cov)
            }
            ModelSpec::Rademacher { amplitude } => RandomFieldModel::rademacher(amplitude.expand(points)),
            ModelSpec::RandomPhase { amplitude, phase } => {
                RandomFieldModel::random_phase(amplitude.expand(points), phase.clone())
            }
            ModelSpec::HeavyTail { dof, amplitude } => RandomFieldModel::heavy_tail(*dof, amplitude.expand(points)),
        };
        r.map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        rows.push(
            rec.iter()
                .map(|s| s.parse::<f64>().map_err(|_| format!("cannot parse {s:?} as a number")))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok(rows)
}
