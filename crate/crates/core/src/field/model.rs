use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::Serialize;

use super::FieldError;
use crate::orlicz::ScalarLaw;

/// Concrete centered field families with closed-form marginals and increments.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldKind {
    /// `xi = L z` with `L L^T = covariance`, `z` i.i.d. standard normal.
    Gaussian {
        covariance: Vec<f64>,
        #[serde(skip)]
        factor: Vec<f64>,
    },
    /// `xi(t) = eps * a(t)` with one Rademacher sign per path.
    RademacherProfile { amplitude: Vec<f64> },
    /// `xi(t) = a(t) cos(U + theta(t))` with one uniform phase per path.
    RandomPhase { amplitude: Vec<f64>, phase: Vec<f64> },
    /// `xi(t) = a(t) T` with one Student-t factor per path.
    HeavyTail { dof: f64, amplitude: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomFieldModel {
    #[serde(flatten)]
    kind: FieldKind,
    points: usize,
}

impl RandomFieldModel {
    /// Gaussian field from a row-major covariance. Eigenvalues below
    /// `-1e-9 * max(1, largest eigenvalue)` are rejected, small negatives clipped.
    pub fn gaussian(covariance: Vec<Vec<f64>>) -> Result<Self, FieldError> {
        let n = covariance.len();
        if n == 0 || covariance.iter().any(|r| r.len() != n) {
            return Err(FieldError::InvalidModel("covariance must be a nonempty square matrix".into()));
        }
        let flat: Vec<f64> = covariance.into_iter().flatten().collect();
        for i in 0..n {
            for j in 0..i {
                if flat[i * n + j] != flat[j * n + i] {
                    return Err(FieldError::InvalidModel(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        let eig = DMatrix::from_row_slice(n, n, &flat).symmetric_eigen();
        let top = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-9 * top.max(1.0) {
            return Err(FieldError::CovarianceNotPsd(min));
        }
        let mut factor = vec![0.0; n * n];
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            let s = lambda.max(0.0).sqrt();
            for i in 0..n {
                factor[i * n + k] = eig.eigenvectors[(i, k)] * s;
            }
        }
        Ok(RandomFieldModel { kind: FieldKind::Gaussian { covariance: flat, factor }, points: n })
    }

    /// Brownian motion observed at `times`: covariance `min(t, s)`.
    pub fn brownian(times: &[f64]) -> Result<Self, FieldError> {
        let cov = times.iter().map(|&t| times.iter().map(|&s| t.min(s)).collect()).collect();
        Self::gaussian(cov)
    }

    /// Independent `N(0, sd^2)` values at every point.
    pub fn gaussian_iid(points: usize, sd: f64) -> Result<Self, FieldError> {
        let cov = (0..points)
            .map(|i| (0..points).map(|j| if i == j { sd * sd } else { 0.0 }).collect())
            .collect();
        Self::gaussian(cov)
    }

    pub fn rademacher(amplitude: Vec<f64>) -> Result<Self, FieldError> {
        check_profile(&amplitude)?;
        let points = amplitude.len();
        Ok(RandomFieldModel { kind: FieldKind::RademacherProfile { amplitude }, points })
    }

    pub fn random_phase(amplitude: Vec<f64>, phase: Vec<f64>) -> Result<Self, FieldError> {
        check_profile(&amplitude)?;
        if phase.len() != amplitude.len() || phase.iter().any(|p| !p.is_finite()) {
            return Err(FieldError::InvalidModel("phase must be finite with one entry per point".into()));
        }
        let points = amplitude.len();
        Ok(RandomFieldModel { kind: FieldKind::RandomPhase { amplitude, phase }, points })
    }

    /// Requires `dof > 2` so the field is centered with finite variance.
    pub fn heavy_tail(dof: f64, amplitude: Vec<f64>) -> Result<Self, FieldError> {
        check_profile(&amplitude)?;
        if !(dof > 2.0) {
            return Err(FieldError::InvalidModel(format!("heavy-tail model needs dof > 2, got {dof}")));
        }
        let points = amplitude.len();
        Ok(RandomFieldModel { kind: FieldKind::HeavyTail { dof, amplitude }, points })
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FieldKind::Gaussian { .. } => "gaussian",
            FieldKind::RademacherProfile { .. } => "rademacher",
            FieldKind::RandomPhase { .. } => "random-phase",
            FieldKind::HeavyTail { .. } => "heavy-tail",
        }
    }

    /// Law of `xi(t)`.
    pub fn marginal(&self, t: usize) -> ScalarLaw {
        match &self.kind {
            FieldKind::Gaussian { covariance, .. } => {
                ScalarLaw::Gaussian { sd: covariance[t * self.points + t].max(0.0).sqrt() }
            }
            FieldKind::RademacherProfile { amplitude } => ScalarLaw::Rademacher { scale: amplitude[t].abs() },
            FieldKind::RandomPhase { amplitude, .. } => ScalarLaw::RandomPhase { amplitude: amplitude[t].abs() },
            FieldKind::HeavyTail { dof, amplitude } => ScalarLaw::StudentT { dof: *dof, scale: amplitude[t].abs() },
        }
        .normalized()
    }

    /// Law of `xi(t) - xi(s)`.
    pub fn increment(&self, t: usize, s: usize) -> ScalarLaw {
        match &self.kind {
            FieldKind::Gaussian { covariance, .. } => {
                let n = self.points;
                let v = covariance[t * n + t] + covariance[s * n + s] - 2.0 * covariance[t * n + s];
                ScalarLaw::Gaussian { sd: v.max(0.0).sqrt() }
            }
            FieldKind::RademacherProfile { amplitude } => {
                ScalarLaw::Rademacher { scale: (amplitude[t] - amplitude[s]).abs() }
            }
            FieldKind::RandomPhase { amplitude, phase } => {
                let re = amplitude[t] * phase[t].cos() - amplitude[s] * phase[s].cos();
                let im = amplitude[t] * phase[t].sin() - amplitude[s] * phase[s].sin();
                ScalarLaw::RandomPhase { amplitude: re.hypot(im) }
            }
            FieldKind::HeavyTail { dof, amplitude } => {
                ScalarLaw::StudentT { dof: *dof, scale: (amplitude[t] - amplitude[s]).abs() }
            }
        }
        .normalized()
    }

    /// `sup_t |xi(t)|` almost surely, for bounded families.
    pub fn bound(&self) -> Option<f64> {
        match &self.kind {
            FieldKind::RademacherProfile { amplitude } | FieldKind::RandomPhase { amplitude, .. } => {
                Some(amplitude.iter().fold(0.0f64, |m, a| m.max(a.abs())))
            }
            _ => None,
        }
    }

    /// The law with the largest scale among the marginals (the one attaining
    /// `sup_t log E exp(lambda xi(t))` for these families).
    pub fn widest_marginal(&self) -> ScalarLaw {
        (0..self.points)
            .map(|t| self.marginal(t))
            .max_by(|a, b| a.variance().total_cmp(&b.variance()))
            .unwrap_or(ScalarLaw::Degenerate)
    }

    /// Field multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let kind = match &self.kind {
            FieldKind::Gaussian { covariance, factor } => FieldKind::Gaussian {
                covariance: covariance.iter().map(|v| v * c * c).collect(),
                factor: factor.iter().map(|v| v * c).collect(),
            },
            FieldKind::RademacherProfile { amplitude } => {
                FieldKind::RademacherProfile { amplitude: amplitude.iter().map(|a| a * c).collect() }
            }
            FieldKind::RandomPhase { amplitude, phase } => FieldKind::RandomPhase {
                amplitude: amplitude.iter().map(|a| a * c).collect(),
                phase: phase.clone(),
            },
            FieldKind::HeavyTail { dof, amplitude } => {
                FieldKind::HeavyTail { dof: *dof, amplitude: amplitude.iter().map(|a| a * c).collect() }
            }
        };
        RandomFieldModel { kind, points: self.points }
    }

    /// Draws one path into `out`.
    pub fn sample_path<R: RngCore>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.points);
        match &self.kind {
            FieldKind::Gaussian { factor, .. } => {
                let n = self.points;
                let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &factor[i * n..(i + 1) * n];
                    *o = row.iter().zip(&z).map(|(a, b)| a * b).sum();
                }
            }
            FieldKind::RademacherProfile { amplitude } => {
                let sign = if rng.next_u32() & 1 == 1 { 1.0 } else { -1.0 };
                for (o, a) in out.iter_mut().zip(amplitude) {
                    *o = sign * a;
                }
            }
            FieldKind::RandomPhase { amplitude, phase } => {
                let u = std::f64::consts::TAU * rng.random::<f64>();
                for ((o, a), p) in out.iter_mut().zip(amplitude).zip(phase) {
                    *o = a * (u + p).cos();
                }
            }
            FieldKind::HeavyTail { dof, amplitude } => {
                let t: f64 = StudentT::new(*dof).expect("validated dof").sample(rng);
                for (o, a) in out.iter_mut().zip(amplitude) {
                    *o = a * t;
                }
            }
        }
    }
}

fn check_profile(amplitude: &[f64]) -> Result<(), FieldError> {
    if amplitude.is_empty() || amplitude.iter().any(|a| !a.is_finite()) {
        return Err(FieldError::InvalidModel("amplitude must be nonempty and finite".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indefinite_covariance_is_rejected() {
        let r = RandomFieldModel::gaussian(vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(r, Err(FieldError::CovarianceNotPsd(_))));
    }

    #[test]
    fn factor_reproduces_covariance() {
        let times = [0.1, 0.4, 0.7, 1.0];
        let m = RandomFieldModel::brownian(&times).unwrap();
        let FieldKind::Gaussian { covariance, factor } = m.kind() else { unreachable!() };
        let n = 4;
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|k| factor[i * n + k] * factor[j * n + k]).sum();
                assert!((v - covariance[i * n + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn increments() {
        let m = RandomFieldModel::brownian(&[0.25, 1.0]).unwrap();
        let ScalarLaw::Gaussian { sd } = m.increment(0, 1) else { panic!() };
        assert!((sd - 0.75f64.sqrt()).abs() < 1e-15);
        let r = RandomFieldModel::rademacher(vec![0.2, 0.9]).unwrap();
        assert_eq!(r.increment(1, 0), ScalarLaw::Rademacher { scale: 0.9 - 0.2 });
        assert_eq!(r.increment(1, 1), ScalarLaw::Degenerate);
        let p = RandomFieldModel::random_phase(vec![1.0, 1.0], vec![0.0, std::f64::consts::PI]).unwrap();
        let ScalarLaw::RandomPhase { amplitude } = p.increment(0, 1) else { panic!() };
        assert!((amplitude - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bounded_families_respect_their_bound() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = RandomFieldModel::random_phase(vec![0.5, 1.5, 1.0], vec![0.0, 1.0, 2.0]).unwrap();
        let mut out = [0.0; 3];
        for _ in 0..1000 {
            p.sample_path(&mut rng, &mut out);
            assert!(out.iter().all(|v| v.abs() <= 1.5));
        }
        assert_eq!(p.bound(), Some(1.5));
        assert!(RandomFieldModel::heavy_tail(2.0, vec![1.0]).is_err());
    }
}
