use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use super::LogMgfKind;

/// Centered scalar laws with known structure. Every marginal and every
/// increment of the built-in field models is one of these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum ScalarLaw {
    Degenerate,
    Gaussian { sd: f64 },
    /// `scale * eps` with `eps = +-1` equiprobable.
    Rademacher { scale: f64 },
    /// `amplitude * cos(U)` with `U` uniform on a full period.
    RandomPhase { amplitude: f64 },
    /// `scale * T` with `T` Student-t; polynomial tails, no MGF.
    StudentT { dof: f64, scale: f64 },
}

impl ScalarLaw {
    /// Closed-form log-MGF family, `None` when the MGF is infinite.
    pub fn log_mgf_kind(&self) -> Option<LogMgfKind> {
        match *self {
            ScalarLaw::Degenerate => Some(LogMgfKind::Quadratic { c: 0.0 }),
            ScalarLaw::Gaussian { sd } => Some(LogMgfKind::Quadratic { c: 0.5 * sd * sd }),
            ScalarLaw::Rademacher { scale } => Some(LogMgfKind::LogCosh { scale: scale.abs() }),
            ScalarLaw::RandomPhase { amplitude } => Some(LogMgfKind::LogBesselI0 { scale: amplitude.abs() }),
            ScalarLaw::StudentT { .. } => None,
        }
    }

    pub fn log_mgf(&self, lambda: f64) -> Option<f64> {
        self.log_mgf_kind().map(|k| k.eval(lambda))
    }

    /// Law of `a * X`.
    pub fn scaled(&self, a: f64) -> ScalarLaw {
        match *self {
            ScalarLaw::Degenerate => ScalarLaw::Degenerate,
            ScalarLaw::Gaussian { sd } => ScalarLaw::Gaussian { sd: sd * a.abs() },
            ScalarLaw::Rademacher { scale } => ScalarLaw::Rademacher { scale: scale * a.abs() },
            ScalarLaw::RandomPhase { amplitude } => ScalarLaw::RandomPhase { amplitude: amplitude * a.abs() },
            ScalarLaw::StudentT { dof, scale } => ScalarLaw::StudentT { dof, scale: scale * a.abs() },
        }
        .normalized()
    }

    /// Collapses zero-scale laws to `Degenerate`.
    pub fn normalized(self) -> ScalarLaw {
        let zero = match self {
            ScalarLaw::Degenerate => true,
            ScalarLaw::Gaussian { sd } => sd == 0.0,
            ScalarLaw::Rademacher { scale } => scale == 0.0,
            ScalarLaw::RandomPhase { amplitude } => amplitude == 0.0,
            ScalarLaw::StudentT { scale, .. } => scale == 0.0,
        };
        if zero {
            ScalarLaw::Degenerate
        } else {
            self
        }
    }

    /// Almost-sure bound on `|X|`, if any.
    pub fn bound(&self) -> Option<f64> {
        match *self {
            ScalarLaw::Degenerate => Some(0.0),
            ScalarLaw::Rademacher { scale } => Some(scale.abs()),
            ScalarLaw::RandomPhase { amplitude } => Some(amplitude.abs()),
            _ => None,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ScalarLaw::Degenerate => 0.0,
            ScalarLaw::Gaussian { sd } => sd * sd,
            ScalarLaw::Rademacher { scale } => scale * scale,
            ScalarLaw::RandomPhase { amplitude } => 0.5 * amplitude * amplitude,
            ScalarLaw::StudentT { dof, scale } => {
                if dof > 2.0 {
                    scale * scale * dof / (dof - 2.0)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ScalarLaw::Degenerate => 0.0,
            ScalarLaw::Gaussian { sd } => {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            }
            ScalarLaw::Rademacher { scale } => {
                if rng.random::<bool>() {
                    scale
                } else {
                    -scale
                }
            }
            ScalarLaw::RandomPhase { amplitude } => {
                amplitude * (std::f64::consts::TAU * rng.random::<f64>()).cos()
            }
            ScalarLaw::StudentT { dof, scale } => {
                scale * StudentT::new(dof).expect("positive degrees of freedom").sample(rng)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_collapses_to_degenerate() {
        assert_eq!(ScalarLaw::Gaussian { sd: 1.0 }.scaled(0.0), ScalarLaw::Degenerate);
        assert_eq!(ScalarLaw::Rademacher { scale: 0.5 }.scaled(-2.0), ScalarLaw::Rademacher { scale: 1.0 });
    }

    #[test]
    fn heavy_tail_has_no_mgf() {
        assert!(ScalarLaw::StudentT { dof: 3.0, scale: 1.0 }.log_mgf(0.1).is_none());
        assert_eq!(ScalarLaw::Degenerate.log_mgf(3.0), Some(0.0));
    }
}
