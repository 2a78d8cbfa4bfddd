//! Hölder norms relative to a modulus semi-distance, and Hölder-ball membership.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::chaining::{chaining_modulus, ChainingError};
use crate::majorizing::{w_matrix, MajorizingError, PointMeasure};
use crate::metric_space::{CoverMode, MetricSpace, SpaceError};
use crate::orlicz::{OrliczGenerator, YoungPair};

/// A modulus `omega` together with the base point `t0` of the norm.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderModulus {
    omega: MetricSpace,
    base_point: usize,
    // (i, j, omega_ij) with omega > 0, and pairs with omega = 0
    positive: Vec<(usize, usize, f64)>,
    zero: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum HolderNorm {
    Finite(f64),
    /// Some pair with `omega = 0` has `f(t) != f(s)`.
    Infinite,
}

impl HolderNorm {
    pub fn value(&self) -> f64 {
        match *self {
            HolderNorm::Finite(v) => v,
            HolderNorm::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, HolderNorm::Finite(_))
    }
}

impl HolderModulus {
    pub fn new(omega: MetricSpace, base_point: usize) -> Result<Self, SpaceError> {
        let n = omega.len();
        if base_point >= n {
            return Err(SpaceError::BadIndex(base_point));
        }
        let mut positive = Vec::new();
        let mut zero = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let w = omega.d(i, j);
                if w > 0.0 {
                    positive.push((i, j, w));
                } else {
                    zero.push((i, j));
                }
            }
        }
        Ok(HolderModulus { omega, base_point, positive, zero })
    }

    pub fn omega(&self) -> &MetricSpace {
        &self.omega
    }

    pub fn base_point(&self) -> usize {
        self.base_point
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Largest increment ratio `sup |f(t) - f(s)| / omega(t, s)`, or `None`
    /// when a zero-modulus pair carries a nonzero increment.
    pub fn max_ratio(&self, f: &[f64]) -> Option<f64> {
        debug_assert_eq!(f.len(), self.len());
        if self.zero.iter().any(|&(i, j)| f[i] != f[j]) {
            return None;
        }
        Some(self.positive.iter().fold(0.0f64, |m, &(i, j, w)| m.max((f[i] - f[j]).abs() / w)))
    }

    /// First zero-modulus pair with a nonzero increment.
    pub fn zero_pair_violation(&self, f: &[f64]) -> Option<(usize, usize)> {
        self.zero.iter().copied().find(|&(i, j)| f[i] != f[j])
    }
}

/// `|f(t0)| + sup_{t != s} |f(t) - f(s)| / omega(t, s)`.
pub fn holder_norm(f: &[f64], hm: &HolderModulus) -> HolderNorm {
    match hm.max_ratio(f) {
        Some(r) => HolderNorm::Finite(f[hm.base_point].abs() + r),
        None => HolderNorm::Infinite,
    }
}

/// `holder_norm(f) <= r`; an infinite norm lies outside every finite ball.
pub fn ball_membership(f: &[f64], hm: &HolderModulus, r: f64) -> bool {
    match holder_norm(f, hm) {
        HolderNorm::Finite(v) => v <= r,
        HolderNorm::Infinite => r == f64::INFINITY,
    }
}

/// Where the modulus comes from.
#[derive(Debug, Clone, Copy)]
pub enum ModulusSource<'a> {
    /// `rho_J(t, s) = int_0^d(t,s) Y^-1(N(eps)) d eps`; base point defaults to index 0.
    Chaining { d: &'a MetricSpace, young: &'a YoungPair, mode: CoverMode },
    /// `w(t, s; V)` of a point measure; base point defaults to `t0`.
    Majorizing { space: &'a MetricSpace, measure: &'a PointMeasure, phi: &'a OrliczGenerator, v: f64, t0: usize },
}

#[derive(Debug, Error)]
pub enum ModulusError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Chaining(#[from] ChainingError),
    #[error(transparent)]
    Majorizing(#[from] MajorizingError),
}

pub fn modulus_from(source: ModulusSource<'_>, base_point: Option<usize>) -> Result<HolderModulus, ModulusError> {
    let (omega, default_base) = match source {
        ModulusSource::Chaining { d, young, mode } => (chaining_modulus(d, young, mode)?, 0),
        ModulusSource::Majorizing { space, measure, phi, v, t0 } => (w_matrix(measure, space, phi, v)?, t0),
    };
    Ok(HolderModulus::new(omega, base_point.unwrap_or(default_base))?)
}

/// Writes `path, norm, in_r1, in_r2, ...` rows.
pub fn write_norm_table<'a, W: Write>(
    writer: W,
    paths: impl IntoIterator<Item = &'a [f64]>,
    hm: &HolderModulus,
    radii: &[f64],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["path".to_string(), "norm".to_string()];
    header.extend(radii.iter().map(|r| format!("in_ball_{r}")));
    w.write_record(&header)?;
    for (k, f) in paths.into_iter().enumerate() {
        let norm = holder_norm(f, hm);
        let mut row = vec![k.to_string(), norm.value().to_string()];
        row.extend(radii.iter().map(|&r| ball_membership(f, hm, r).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_on_grid(points: usize) -> (Vec<f64>, HolderModulus) {
        let space = MetricSpace::interval_grid(points).unwrap();
        let f = space.coords().unwrap().iter().map(|c| c[0]).collect();
        (f, HolderModulus::new(space, 0).unwrap())
    }

    #[test]
    fn identity_has_unit_norm() {
        let (f, hm) = identity_on_grid(11);
        assert_eq!(holder_norm(&f, &hm), HolderNorm::Finite(1.0));
        assert!(!ball_membership(&f, &hm, 0.99));
        assert!(ball_membership(&f, &hm, 1.01));
    }

    #[test]
    fn constants_have_norm_of_their_value() {
        let (_, hm) = identity_on_grid(5);
        assert_eq!(holder_norm(&[-2.5; 5], &hm), HolderNorm::Finite(2.5));
    }

    #[test]
    fn square_root_against_brownian_modulus() {
        let omega = MetricSpace::brownian_grid(17).unwrap();
        let f: Vec<f64> = (0..17).map(|k| (k as f64 / 16.0).sqrt()).collect();
        // brute force over all pairs
        let mut best: f64 = 0.0;
        for i in 0..17 {
            for j in 0..17 {
                if i != j {
                    let (t, s) = (i as f64 / 16.0, j as f64 / 16.0);
                    best = best.max((t.sqrt() - s.sqrt()).abs() / (t - s).abs().sqrt());
                }
            }
        }
        let hm = HolderModulus::new(omega, 0).unwrap();
        let v = holder_norm(&f, &hm).value();
        assert!((v - best).abs() < 1e-15);
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_modulus_pairs() {
        let omega = MetricSpace::from_matrix(vec![
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ])
        .unwrap();
        let hm = HolderModulus::new(omega, 0).unwrap();
        assert_eq!(holder_norm(&[1.0, 1.0, 3.0], &hm), HolderNorm::Finite(3.0));
        assert_eq!(holder_norm(&[1.0, 1.5, 3.0], &hm), HolderNorm::Infinite);
        assert!(!ball_membership(&[1.0, 1.5, 3.0], &hm, 1e300));
        assert!(ball_membership(&[1.0, 1.5, 3.0], &hm, f64::INFINITY));
    }

    #[test]
    fn norm_table_csv() {
        let (f, hm) = identity_on_grid(3);
        let mut out = Vec::new();
        write_norm_table(&mut out, [f.as_slice(), &[0.0, 0.0, 0.0][..]], &hm, &[0.5, 2.0]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "path,norm,in_ball_0.5,in_ball_2\n0,1,false,true\n1,0,true,true\n");
    }

    #[test]
    fn moduli_from_both_routes() {
        let d = MetricSpace::from_matrix(vec![vec![0.0, 0.7], vec![0.7, 0.0]]).unwrap();
        let y = YoungPair::gaussian();
        let hm = modulus_from(ModulusSource::Chaining { d: &d, young: &y, mode: CoverMode::exact() }, None).unwrap();
        assert_eq!(hm.base_point(), 0);
        assert!((hm.omega().d(0, 1) - 0.7 * (2.0 * 3f64.ln()).sqrt()).abs() < 1e-15);

        let m = PointMeasure::uniform(2);
        let src = ModulusSource::Majorizing { space: &d, measure: &m, phi: &OrliczGenerator::Gauss2, v: 1.0, t0: 1 };
        let hm = modulus_from(src, None).unwrap();
        assert_eq!(hm.base_point(), 1);
        assert!((hm.omega().d(0, 1) - 14.139_007_516_675_512).abs() < 1e-9);
        assert_eq!(modulus_from(src, Some(0)).unwrap().base_point(), 0);
        assert!(modulus_from(src, Some(5)).is_err());
    }
}
