use mcmp_core::geometry::{estimate_c_mu, MaskedDomain, ModelManifold, RadiusSchedule, WarpingProfile, WeightedModel};
use mcmp_core::{RadialFn, Weight};
use proptest::prelude::*;

fn manifold(kind: u8, dim: usize, r_max: f64) -> ModelManifold {
    match kind {
        0 => ModelManifold::euclidean(dim),
        1 => ModelManifold::hyperbolic(dim),
        2 => ModelManifold::new(dim, WarpingProfile::scaled_hyperbolic(0.5), None).unwrap(),
        _ => ModelManifold::new(dim, WarpingProfile::jacobi(1.0, 1.0), Some(r_max)).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ball_volume_increases(kind in 0u8..4, dim in 2usize..5, r1 in 0.01f64..20.0, dr in 1e-3f64..20.0) {
        let m = manifold(kind, dim, 60.0);
        let v1 = m.ball_volume(r1, None).unwrap();
        let v2 = m.ball_volume(r1 + dr, None).unwrap();
        prop_assert!(v2 > v1, "{v1} {v2}");
    }

    #[test]
    fn growth_estimate_nonnegative(kind in 0u8..4, dim in 2usize..5, mu in 0.0f64..=1.0, weighted in any::<bool>()) {
        let sched = if mu == 1.0 { RadiusSchedule::default_for(1.0) } else { RadiusSchedule::geometric(1.0, 1.5, 16).unwrap() };
        let m = manifold(kind, dim, sched.last());
        let w = Weight::from_density(RadialFn::ExpDecay { scale: 1.0, rate: 0.5 });
        let src = WeightedModel { manifold: &m, weight: weighted.then_some(&w) };
        let e = estimate_c_mu(&src, mu, &sched).unwrap();
        prop_assert!(e.value >= 0.0);
    }

    #[test]
    fn growth_monotone_under_inclusion(seed in any::<u64>(), mu in 0.0f64..0.9) {
        use rand::{Rng, SeedableRng};
        let n = 61;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let big: Vec<bool> = (0..n * n).map(|_| rng.random_bool(0.9)).collect();
        let small: Vec<bool> = big.iter().map(|&b| b && rng.random_bool(0.7)).collect();
        let c = [30.0, 30.0];
        let d2 = MaskedDomain::new(n, n, 1.0, c, big, None).unwrap();
        let d1 = MaskedDomain::new(n, n, 1.0, c, small, None).unwrap();
        let sched = RadiusSchedule::geometric(2.0, 1.2, 12).unwrap();
        let (Ok(e1), Ok(e2)) = (estimate_c_mu(&d1, mu, &sched), estimate_c_mu(&d2, mu, &sched)) else {
            return Ok(());
        };
        for (a, b) in e1.window.iter().zip(&e2.window) {
            if let (Some(x), Some(y)) = (a.tail_inf, b.tail_inf) {
                prop_assert!(x <= y + 1e-6, "R = {}: {x} > {y}", a.radius);
            }
        }
    }
}

#[test]
fn base_point_independence_on_the_plane_grid() {
    let n = 401;
    let sched = RadiusSchedule::geometric(10.0, 1.3, 12).unwrap();
    let a = MaskedDomain::rectangle(n, n, 1.0, [200.0, 200.0]);
    let b = a.clone().with_center([205.0, 200.0]);
    let ea = estimate_c_mu(&a, 1.0, &sched).unwrap();
    let eb = estimate_c_mu(&b, 1.0, &sched).unwrap();
    let la = ea.window.last().unwrap().statistic;
    let lb = eb.window.last().unwrap().statistic;
    assert!((la - lb).abs() < 0.05, "{la} vs {lb}");
    // log(πR²)/log R at the last radius
    let r = sched.last();
    let exact = (std::f64::consts::PI * r * r).ln() / r.ln();
    assert!((la - exact).abs() < 0.01, "{la} vs {exact}");
}

#[test]
fn jacobi_flat_decay_is_sinh() {
    let m = ModelManifold::new(2, WarpingProfile::jacobi(0.0, 1.0), Some(10.0)).unwrap();
    for i in 0..=100 {
        let r = 0.1 * i as f64;
        let (g, dg, _) = m.warping_eval(r).unwrap();
        assert!((g - r.sinh()).abs() <= 1e-8 * r.cosh(), "r = {r}: {g}");
        assert!((dg - r.cosh()).abs() <= 1e-8 * r.cosh(), "r = {r}: {dg}");
    }
}

#[test]
fn euclidean_ball_volume_closed_form() {
    // ω_{m-1} R^m / m against the Gamma-function formula
    for m in 2..=8usize {
        let v = ModelManifold::euclidean(m).ball_volume(1.7, None).unwrap();
        let half = m as f64 / 2.0;
        let unit = std::f64::consts::PI.powf(half) / gamma(half + 1.0);
        let exact = unit * 1.7f64.powi(m as i32);
        assert!((v - exact).abs() <= 1e-9 * exact, "m = {m}: {v} vs {exact}");
    }
}

// Γ at positive integers and half-integers
fn gamma(x: f64) -> f64 {
    if (x - 0.5).abs() < 1e-12 {
        std::f64::consts::PI.sqrt()
    } else if (x - 1.0).abs() < 1e-12 {
        1.0
    } else {
        (x - 1.0) * gamma(x - 1.0)
    }
}
