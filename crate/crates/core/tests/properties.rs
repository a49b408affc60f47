use proptest::prelude::*;
use skewreg_core::gauge::exp_skew;
use skewreg_core::hardy_bmo::{bmo_seminorm, hardy_norm, MaximalConfig, WenteSolver};
use skewreg_core::morrey::{j_p, m_p};
use skewreg_core::random::{random_field, rng};
use skewreg_core::snapshot::{read_snapshot, write_snapshot};
use skewreg_core::{build_grid, DiscGrid, Field, Shape, Structure};
use std::sync::{Arc, OnceLock};

fn grid() -> Arc<DiscGrid> {
    static G: OnceLock<Arc<DiscGrid>> = OnceLock::new();
    G.get_or_init(|| Arc::new(build_grid(33).unwrap())).clone()
}

fn scalar(seed: u64) -> Field {
    random_field(&grid(), Shape::SCALAR, &mut rng(seed), 4, 3.0)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bmo_ignores_constants_and_scales(seed in 0u64..1000, c in -5.0f64..5.0, s in -3.0f64..3.0) {
        let f = scalar(seed);
        let base = bmo_seminorm(&f, 0.5).unwrap();
        let shifted = bmo_seminorm(&f.map(Structure::General, |v| v + c).unwrap(), 0.5).unwrap();
        let scaled = bmo_seminorm(&f.scale(s), 0.5).unwrap();
        prop_assert!(close(shifted, base, 1e-9));
        prop_assert!(close(scaled, s.abs() * base, 1e-9));
    }

    #[test]
    fn hardy_norm_is_homogeneous(seed in 0u64..1000, s in -3.0f64..3.0) {
        let g = grid();
        let cfg = MaximalConfig::dyadic(g.spacing(), 0.5).unwrap();
        let f = scalar(seed);
        let base = hardy_norm(&f, &cfg).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert!(close(hardy_norm(&f.scale(s), &cfg).unwrap(), s.abs() * base, 1e-9));
    }

    #[test]
    fn wente_ratio_ignores_constants_and_order(seed in 0u64..1000, c in -3.0f64..3.0) {
        let solver = WenteSolver::new(&grid()).unwrap();
        let (a, b) = (scalar(seed), scalar(seed + 5000));
        let base = solver.check(&a, &b, 2.0).unwrap().ratio;
        let shifted = solver.check(&a.map(Structure::General, |v| v + c).unwrap(), &b, 2.0).unwrap().ratio;
        let swapped = solver.check(&b, &a, 2.0).unwrap().ratio;
        prop_assert!(close(shifted, base, 1e-8));
        prop_assert!(close(swapped, base, 1e-8));
    }

    #[test]
    fn exponential_of_skew_is_rotation(seed in 0u64..1000, m in 2usize..5) {
        let raw = random_field(&grid(), Shape::matrix(m), &mut rng(seed), 3, 2.0).skew_part().unwrap();
        let p = exp_skew(&raw).unwrap();
        prop_assert!(p.rotation_defect().unwrap() < 1e-12);
    }

    #[test]
    fn morrey_dominates_j(seed in 0u64..1000, r in 0.2f64..0.6) {
        let u = scalar(seed);
        let a = [0.1, -0.2];
        let j = j_p(&u, a, r, 1.5).unwrap();
        let m = m_p(&u, a, r, 1.5, 2).unwrap();
        prop_assert!(m >= j);
        // Nested sample sets along a quarter-octave chain.
        prop_assert!(m_p(&u, a, r * 2f64.powf(-0.25), 1.5, 2).unwrap() <= m);
    }

    #[test]
    fn snapshot_round_trip(seed in 0u64..1000) {
        let f = random_field(&grid(), Shape::vector_form(2), &mut rng(seed), 3, 2.0);
        let mut buf = Vec::new();
        write_snapshot(&f, &mut buf).unwrap();
        let back = read_snapshot(&buf[..], Some(grid())).unwrap();
        prop_assert_eq!(back, f);
    }
}
