use serde::{Deserialize, Serialize};

use super::OrliczError;

/// A Young-Orlicz function `Phi` that outgrows every exponential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum OrliczGenerator {
    /// `exp(u^2) - 1`.
    Gauss2,
    /// `exp(u^p) - 1`, `p > 1`.
    PowerExp { p: f64 },
    /// Piecewise-linear table through `(0, 0)`, strictly increasing.
    Table { u: Vec<f64>, phi: Vec<f64> },
}

impl OrliczGenerator {
    pub fn power_exp(p: f64) -> Result<Self, OrliczError> {
        let g = OrliczGenerator::PowerExp { p };
        g.validate()?;
        Ok(g)
    }

    pub fn table(u: Vec<f64>, phi: Vec<f64>) -> Result<Self, OrliczError> {
        let g = OrliczGenerator::Table { u, phi };
        g.validate()?;
        Ok(g)
    }

    /// Checks `Phi(0) = 0`, strict monotonicity, inverse consistency and growth
    /// beyond every exponential. Named generators are super-exponential exactly
    /// when `p > 1`; tables are probed at their top `u_max` for lambda in {1, 2, 4}.
    pub fn validate(&self) -> Result<(), OrliczError> {
        let bad = |m: String| Err(OrliczError::InvalidGenerator(m));
        match self {
            OrliczGenerator::Gauss2 => {}
            OrliczGenerator::PowerExp { p } => {
                if !(p.is_finite() && *p > 1.0) {
                    return bad(format!(
                        "exp(u^{p}) - 1 does not outgrow every exponential exp(lambda u); need p > 1"
                    ));
                }
            }
            OrliczGenerator::Table { u, phi } => {
                if u.len() < 3 || u.len() != phi.len() {
                    return bad("table needs >= 3 (u, phi) pairs of equal length".into());
                }
                if u[0] != 0.0 || phi[0] != 0.0 {
                    return bad("table must start at (0, 0)".into());
                }
                for i in 1..u.len() {
                    if !(u[i] > u[i - 1] && phi[i] > phi[i - 1]) || !phi[i].is_finite() {
                        return bad(format!("table is not strictly increasing at row {i}"));
                    }
                }
                let top = *u.last().unwrap();
                for lambda in [1.0, 2.0, 4.0] {
                    let full = self.log_forward(top) - lambda * top;
                    let half = self.log_forward(0.5 * top) - lambda * 0.5 * top;
                    if full <= half {
                        return bad(format!(
                            "table growth does not dominate exp({lambda} u) on [0, {top}]"
                        ));
                    }
                }
            }
        }
        for k in 1..=50 {
            let u = k as f64 * self.probe_top() / 50.0;
            let back = self.inverse(self.forward(u))?;
            if (back - u).abs() > 1e-9 * (1.0 + u) {
                return bad(format!("inverse(forward({u})) = {back}"));
            }
        }
        Ok(())
    }

    fn probe_top(&self) -> f64 {
        match self {
            OrliczGenerator::Table { u, .. } => *u.last().unwrap(),
            _ => 4.0,
        }
    }

    pub fn name(&self) -> String {
        match self {
            OrliczGenerator::Gauss2 => "gauss2".into(),
            OrliczGenerator::PowerExp { p } => format!("power-exp({p})"),
            OrliczGenerator::Table { .. } => "table".into(),
        }
    }

    pub fn forward(&self, u: f64) -> f64 {
        let u = u.abs();
        match self {
            OrliczGenerator::Gauss2 => (u * u).exp_m1(),
            OrliczGenerator::PowerExp { p } => u.powf(*p).exp_m1(),
            OrliczGenerator::Table { u: us, phi } => {
                let top = *us.last().unwrap();
                if u > top {
                    return f64::INFINITY;
                }
                let i = us.partition_point(|&x| x < u).clamp(1, us.len() - 1);
                let t = (u - us[i - 1]) / (us[i] - us[i - 1]);
                phi[i - 1] + t * (phi[i] - phi[i - 1])
            }
        }
    }

    /// `ln Phi(u)`, finite where `Phi` would overflow.
    pub fn log_forward(&self, u: f64) -> f64 {
        let u = u.abs();
        let log_expm1 = |x: f64| if x > 30.0 { x + (-(-x).exp()).ln_1p() } else { x.exp_m1().ln() };
        match self {
            OrliczGenerator::Gauss2 => log_expm1(u * u),
            OrliczGenerator::PowerExp { p } => log_expm1(u.powf(*p)),
            OrliczGenerator::Table { .. } => self.forward(u).ln(),
        }
    }

    pub fn inverse(&self, y: f64) -> Result<f64, OrliczError> {
        if y <= 0.0 {
            return Ok(0.0);
        }
        match self {
            OrliczGenerator::Gauss2 => Ok(y.ln_1p().sqrt()),
            OrliczGenerator::PowerExp { p } => Ok(y.ln_1p().powf(1.0 / p)),
            OrliczGenerator::Table { u, phi } => {
                if y > *phi.last().unwrap() {
                    return Err(OrliczError::OutOfRange(y));
                }
                let i = phi.partition_point(|&x| x < y).clamp(1, phi.len() - 1);
                let t = (y - phi[i - 1]) / (phi[i] - phi[i - 1]);
                Ok(u[i - 1] + t * (u[i] - u[i - 1]))
            }
        }
    }
}
