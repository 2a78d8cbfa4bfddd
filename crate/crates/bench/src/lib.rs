//! Fixtures shared by the benchmarks in `benches/`.

use tightlab_core::orlicz::{chi_function, phi_of, symmetric_grid, LogMgfFunction, PhiSource};
use tightlab_core::{MetricSpace, RandomFieldModel};

/// Brownian motion on `{k / m}`, its natural space, and `chi` on the default grid.
pub fn brownian(m: usize) -> (MetricSpace, RandomFieldModel, LogMgfFunction) {
    let space = MetricSpace::brownian_grid(m).expect("valid grid");
    let times: Vec<f64> = (1..=m).map(|k| k as f64 / m as f64).collect();
    let model = RandomFieldModel::brownian(&times).expect("valid times");
    let phi = phi_of(PhiSource::Model(&model), &symmetric_grid(4.0, 201)).expect("gaussian phi");
    let chi = chi_function(&phi, 1 << 20).expect("gaussian chi");
    (space, model, chi)
}

/// `n` scrambled points of a 7 x 7 lattice under the L1 distance.
pub fn lattice(n: usize) -> MetricSpace {
    let pts: Vec<(i64, i64)> = (0..n as i64).map(|k| ((k * 5 + 3) % 7, (k * 3 + k * k) % 7)).collect();
    let dist = pts
        .iter()
        .map(|a| pts.iter().map(|b| ((a.0 - b.0).abs() + (a.1 - b.1).abs()) as f64).collect())
        .collect();
    MetricSpace::from_matrix(dist).expect("L1 is a semi-metric")
}
