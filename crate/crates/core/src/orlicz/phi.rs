use std::io::Write;

use super::{check_centered, LogMgfFunction, OrliczError, RandomSample};
use crate::field::RandomFieldModel;
use crate::numeric::log_mean_exp;

/// Where `phi(lambda) = sup_t max_+- log E exp(+-lambda xi(t))` comes from.
#[derive(Debug, Clone, Copy)]
pub enum PhiSource<'a> {
    /// Closed form from the model's marginals.
    Model(&'a RandomFieldModel),
    /// One sample of `xi(t)` per point; plain sample means, no bias correction.
    Samples(&'a [RandomSample]),
}

pub fn phi_of(source: PhiSource<'_>, lambda_grid: &[f64]) -> Result<LogMgfFunction, OrliczError> {
    match source {
        PhiSource::Model(model) => {
            let kind = model.widest_marginal().log_mgf_kind().ok_or(OrliczError::InfiniteMgf)?;
            LogMgfFunction::analytic(kind, lambda_grid.to_vec())
        }
        PhiSource::Samples(samples) => {
            let mut values = vec![0.0f64; lambda_grid.len()];
            for s in samples {
                check_centered(s.values())?;
            }
            for (point, s) in samples.iter().enumerate() {
                for (v, &l) in values.iter_mut().zip(lambda_grid) {
                    if l == 0.0 {
                        continue;
                    }
                    let up = log_mean_exp(s.values().iter().map(|x| l * x));
                    let down = log_mean_exp(s.values().iter().map(|x| -l * x));
                    let m = up.max(down);
                    if !m.is_finite() || m >= 700.0 {
                        return Err(OrliczError::MgfDiverged { point, lambda: l });
                    }
                    *v = v.max(m);
                }
            }
            LogMgfFunction::tabulated(lambda_grid.to_vec(), values)
        }
    }
}

impl LogMgfFunction {
    /// Two-column `lambda,value` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lambda", "value"])?;
        for (l, v) in self.grid().iter().zip(self.values()) {
            w.write_record([l.to_string(), v.to_string()])?;
        }
        w.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::super::{symmetric_grid, LogMgfKind};
    use super::*;
    use crate::field::sample_ensemble;

    #[test]
    fn gaussian_field_has_quadratic_phi() {
        let m = RandomFieldModel::gaussian_iid(4, 1.0).unwrap();
        let g = symmetric_grid(4.0, 201);
        let phi = phi_of(PhiSource::Model(&m), &g).unwrap();
        for (l, v) in g.iter().zip(phi.values()) {
            assert!((v - 0.5 * l * l).abs() < 1e-12);
        }
        assert_eq!(phi.values()[100], 0.0);
    }

    #[test]
    fn rademacher_field_has_log_cosh_phi() {
        let m = RandomFieldModel::rademacher(vec![0.3, -1.0, 0.5]).unwrap();
        let phi = phi_of(PhiSource::Model(&m), &symmetric_grid(4.0, 201)).unwrap();
        assert_eq!(phi.kind(), Some(LogMgfKind::LogCosh { scale: 1.0 }));
        assert!((phi.eval(1.0).unwrap() - 1f64.cosh().ln()).abs() < 1e-15);
    }

    #[test]
    fn heavy_tails_have_no_phi() {
        let m = RandomFieldModel::heavy_tail(3.0, vec![1.0]).unwrap();
        assert!(matches!(phi_of(PhiSource::Model(&m), &symmetric_grid(1.0, 5)), Err(OrliczError::InfiniteMgf)));
    }

    #[test]
    fn empirical_phi_of_balanced_signs_is_log_cosh() {
        let s = RandomSample::new((0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect(), None).unwrap();
        let g = symmetric_grid(2.0, 41);
        let phi = phi_of(PhiSource::Samples(&[s]), &g).unwrap();
        for (l, v) in g.iter().zip(phi.values()) {
            assert!((v - l.cosh().ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_phi_tracks_gaussian() {
        let m = RandomFieldModel::gaussian_iid(2, 1.0).unwrap();
        let e = sample_ensemble(&m, 20_000, 5).unwrap();
        let samples: Vec<RandomSample> = (0..2).map(|t| RandomSample::new(e.column(t), Some(5)).unwrap()).collect();
        let phi = phi_of(PhiSource::Samples(&samples), &symmetric_grid(1.0, 21)).unwrap();
        assert!((phi.eval(1.0).unwrap() - 0.5).abs() < 0.05);
    }

    #[test]
    fn empirical_phi_rejects_offsets_and_overflow() {
        let off = RandomSample::new(vec![1.0, 1.2, 0.8, 1.1], None).unwrap();
        assert!(matches!(
            phi_of(PhiSource::Samples(&[off]), &symmetric_grid(1.0, 5)),
            Err(OrliczError::NonCentered { .. })
        ));
        let wide = RandomSample::new(vec![-400.0, 400.0], None).unwrap();
        assert!(matches!(
            phi_of(PhiSource::Samples(&[wide]), &symmetric_grid(4.0, 9)),
            Err(OrliczError::MgfDiverged { .. })
        ));
    }

    #[test]
    fn csv_export() {
        let f = LogMgfFunction::analytic(LogMgfKind::Quadratic { c: 0.5 }, symmetric_grid(1.0, 3)).unwrap();
        let mut out = Vec::new();
        f.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "lambda,value\n-1,0.5\n0,0\n1,0.5\n");
    }
}
