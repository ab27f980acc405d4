use mcmp_core::coercive::{
    check_strict_monotonicity, check_weak_coercivity, miklyukov_gap, miklyukov_tolerance, CoerciveMap, Nonlinearity, NonlinearitySpec,
};
use mcmp_core::RadialFn;
use proptest::prelude::*;

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-1.0f64..1.0, dim), -6.0f64..6.0).prop_map(|(v, e)| v.into_iter().map(|c| c * 10f64.powf(e)).collect())
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    prop::sample::select(vec![1usize, 2, 3, 8]).prop_flat_map(|d| (vector(d), vector(d)))
}

fn maps() -> Vec<CoerciveMap> {
    vec![
        CoerciveMap::mean_curvature(),
        CoerciveMap::weighted_graph(RadialFn::ExpDecay { scale: 2.0, rate: 0.3 }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn builtin_maps_are_bounded_and_vanish_at_zero(xi in prop::collection::vec(-1e6f64..1e6, 1..9), s in -10.0f64..10.0) {
        let x: Vec<f64> = xi.iter().map(|v| v.sin()).collect();
        for a in maps() {
            let v = a.eval_map(&x, s, &xi).unwrap();
            let n: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            prop_assert!(n <= 1.0);
            prop_assert_eq!(v.len(), xi.len());
            let zero = a.eval_map(&x, s, &vec![0.0; xi.len()]).unwrap();
            prop_assert!(zero.iter().all(|c| *c == 0.0));
        }
    }

    #[test]
    fn mean_curvature_pairing(xi in prop::collection::vec(-1e3f64..1e3, 1..9)) {
        let a = CoerciveMap::mean_curvature();
        let v = a.eval_map(&vec![0.0; xi.len()], 0.0, &xi).unwrap();
        let n2: f64 = xi.iter().map(|c| c * c).sum();
        let pairing: f64 = v.iter().zip(&xi).map(|(a, b)| a * b).sum();
        let exact = n2 / (1.0 + n2).sqrt();
        prop_assert!(pairing >= 0.0);
        prop_assert!((pairing - exact).abs() <= 1e-14 * exact.max(1e-300));
        // strict bound |A| < 1 for moderate |ξ|
        prop_assert!(v.iter().map(|c| c * c).sum::<f64>() < 1.0);
    }

    #[test]
    fn miklyukov_gap_nonnegative((xi, eta) in pair()) {
        let g = miklyukov_gap(&xi, &eta).unwrap();
        prop_assert!(g.gap >= -miklyukov_tolerance(&xi, &eta), "{g:?}");
    }

    #[test]
    fn linear_nonlinearity_slope(slope in 0.01f64..5.0, offset in -3.0f64..3.0, seed in any::<u64>()) {
        let f = Nonlinearity::from_spec(&NonlinearitySpec::Linear { slope, offset });
        prop_assert!(f.check_slope(200, 10.0, seed));
        let wrong = Nonlinearity::new(move |s| slope * s + offset, true, Some(2.0 * slope));
        prop_assert!(!wrong.check_slope(200, 10.0, seed));
    }
}

#[test]
fn miklyukov_closed_form_in_one_dimension() {
    // ξ = 0, η = 1: lhs = 1/√2, rhs = ½(1 + √2)/2
    let g = miklyukov_gap(&[0.0], &[1.0]).unwrap();
    let s2 = 2f64.sqrt();
    assert!((g.lhs - 1.0 / s2).abs() < 1e-15);
    assert!((g.rhs - 0.25 * (1.0 + s2)).abs() < 1e-15);
}

#[test]
fn checkers_are_seed_deterministic() {
    for a in maps() {
        let r1 = check_weak_coercivity(&a, 3, 2000, 42).unwrap();
        let r2 = check_weak_coercivity(&a, 3, 2000, 42).unwrap();
        assert!(r1.pass);
        assert_eq!(r1, r2);
        let m = check_strict_monotonicity(&a, 2, 2000, 7).unwrap();
        assert!(m.pass, "{m:?}");
    }
}
