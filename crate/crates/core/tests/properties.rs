use proptest::prelude::*;
use tightlab_core::chaining::{natural_distance, tail_bound, IncrementSource, NormKind};
use tightlab_core::holder::{holder_norm, HolderModulus};
use tightlab_core::majorizing::w_distance;
use tightlab_core::orlicz::{chi_function, luxemburg_norm, phi_of, symmetric_grid, Conjugate, NormOptions, PhiSource};
use tightlab_core::{CoverMode, MetricSpace, OrliczGenerator, PointMeasure, RandomFieldModel, RandomSample};

fn lattice_space(pts: &[(i32, i32)]) -> MetricSpace {
    let dist = pts
        .iter()
        .map(|a| pts.iter().map(|b| ((a.0 - b.0).abs() + (a.1 - b.1).abs()) as f64).collect())
        .collect();
    MetricSpace::from_matrix(dist).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covering_numbers_fall_with_the_radius(pts in prop::collection::vec((0i32..6, 0i32..6), 2..11)) {
        let sm = lattice_space(&pts);
        let radii = sm.distinct_distances();
        let mut last = usize::MAX;
        for &eps in &radii {
            let exact = sm.covering_number(eps, CoverMode::exact()).unwrap();
            let greedy = sm.covering_number(eps, CoverMode::Greedy).unwrap();
            prop_assert!(exact <= last);
            prop_assert!(greedy >= exact);
            last = exact;
        }
        prop_assert_eq!(sm.covering_number(sm.diameter().max(1.0), CoverMode::exact()).unwrap(), 1);
    }

    #[test]
    fn covering_ignores_the_point_order(pts in prop::collection::vec((0i32..6, 0i32..6), 2..10), seed in any::<u64>()) {
        let sm = lattice_space(&pts);
        let mut perm: Vec<usize> = (0..sm.len()).collect();
        let mut s = seed;
        for i in (1..perm.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled = sm.permuted(&perm);
        for &eps in &sm.distinct_distances() {
            prop_assert_eq!(
                sm.covering_number(eps, CoverMode::exact()).unwrap(),
                shuffled.covering_number(eps, CoverMode::exact()).unwrap()
            );
        }
    }

    #[test]
    fn natural_distance_follows_a_relabelling(amp in prop::collection::vec(-2.0f64..2.0, 2..7)) {
        let n = amp.len();
        let perm: Vec<usize> = (0..n).rev().collect();
        let model = RandomFieldModel::rademacher(amp.clone()).unwrap();
        let flipped = RandomFieldModel::rademacher(perm.iter().map(|&i| amp[i]).collect()).unwrap();
        let grid = symmetric_grid(4.0, 81);
        let chi = chi_function(&phi_of(PhiSource::Model(&model), &grid).unwrap(), 1 << 20).unwrap();
        let opts = NormOptions::default();
        let d = natural_distance(&model, NormKind::BChi(&chi), IncrementSource::Analytic, &opts, None).unwrap();
        let e = natural_distance(&flipped, NormKind::BChi(&chi), IncrementSource::Analytic, &opts, None).unwrap();
        for a in 0..n {
            for b in 0..n {
                prop_assert!((e.d(a, b) - d.d(perm[a], perm[b])).abs() <= 1e-12 * (1.0 + d.d(perm[a], perm[b])));
            }
        }
    }

    #[test]
    fn tail_bound_is_monotone(u in 0.0f64..3.0, du in 0.0f64..1.0, n in 1usize..50, c in 0.01f64..5.0) {
        let g = Conjugate::gaussian();
        let b = tail_bound(u, n, c, &g).value;
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert!(tail_bound(u + du, n, c, &g).value <= b);
        prop_assert!(tail_bound(u, n + 1, c, &g).value <= b);
        prop_assert!(tail_bound(u, n, c * 1.5, &g).value <= b);
    }

    #[test]
    fn luxemburg_norm_is_homogeneous(xs in prop::collection::vec(-3.0f64..3.0, 1..40), a in 0.1f64..10.0) {
        let phi = OrliczGenerator::Gauss2;
        let s = RandomSample::new(xs.clone(), None).unwrap();
        let scaled = RandomSample::new(xs.iter().map(|x| a * x).collect(), None).unwrap();
        let (n1, n2) = (luxemburg_norm(&s, &phi, 1e-12).unwrap(), luxemburg_norm(&scaled, &phi, 1e-12).unwrap());
        prop_assert!((n2 - a * n1).abs() <= 1e-9 * (1.0 + a * n1));
    }

    #[test]
    fn holder_shift_moves_only_the_base_value(f in prop::collection::vec(-5.0f64..5.0, 6), shift in -5.0f64..5.0) {
        let hm = HolderModulus::new(MetricSpace::interval_grid(6).unwrap(), 2).unwrap();
        let g: Vec<f64> = f.iter().map(|x| x + shift).collect();
        let (nf, ng) = (holder_norm(&f, &hm).value(), holder_norm(&g, &hm).value());
        let expected = nf - f[2].abs() + g[2].abs();
        prop_assert!((ng - expected).abs() <= 1e-9 * (1.0 + nf + ng), "{} vs {}", ng, expected);
    }

    #[test]
    fn holder_norm_dominates_the_sup_norm(f in prop::collection::vec(-5.0f64..5.0, 8), t0 in 0usize..8) {
        let omega = MetricSpace::brownian_grid(8).unwrap();
        let reach = (0..8).map(|t| omega.d(t0, t)).fold(0.0, f64::max);
        let hm = HolderModulus::new(omega, t0).unwrap();
        let sup = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(sup <= holder_norm(&f, &hm).value() * (1.0 + reach) + 1e-12);
    }

    #[test]
    fn w_is_symmetric_for_random_measures(raw in prop::collection::vec(0.01f64..1.0, 6), v in 0.05f64..4.0) {
        let total: f64 = raw.iter().sum();
        let m = PointMeasure::new(raw.iter().map(|x| x / total).collect()).unwrap();
        let sm = MetricSpace::interval_grid(6).unwrap();
        let phi = OrliczGenerator::Gauss2;
        for i in 0..6 {
            for j in 0..6 {
                let a = w_distance(i, j, v, &m, &phi, &sm).unwrap();
                prop_assert_eq!(a, w_distance(j, i, v, &m, &phi, &sm).unwrap());
                prop_assert!(a <= w_distance(i, j, 2.0 * v, &m, &phi, &sm).unwrap());
            }
        }
    }
}
