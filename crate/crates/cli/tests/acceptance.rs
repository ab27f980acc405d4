//! Acceptance criteria, one test and one printed verdict line each.
//!
//! Run with `cargo test -p mcmp-cli --test acceptance -- --nocapture`.

use std::path::Path;
use std::time::Instant;

use mcmp_cli::{run_experiment, ExperimentConfig};
use mcmp_core::coercive::{miklyukov_gap, miklyukov_tolerance};
use mcmp_core::geometry::{c_mu_bound_from_ricci, estimate_c_mu, ModelManifold, RadiusSchedule, RicciProfile, WarpingProfile};
use mcmp_core::grid::{comparison_experiment, jacobian_check, newton_solve, GridDomain, GridEquation};
use mcmp_core::radial::{critical_h, max_graph_radius, shoot_capillary, solve_capillary_bvp, RadialEquation, RadialProblem};
use mcmp_core::verify::{replay_flow, FlowField, FlowParams, LowerBoundParams};
use mcmp_core::{RadialFn, Weight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(id: u32, name: &str, ok: bool, detail: &str) {
    println!("[{}] {id:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

fn c_mu(m: &ModelManifold, mu: f64) -> f64 {
    estimate_c_mu(m, mu, &RadiusSchedule::default_for(mu)).unwrap().value
}

#[test]
fn c01_growth_constants() {
    let t = Instant::now();
    let cases = [
        (ModelManifold::euclidean(2), 1.0, 2.0),
        (ModelManifold::euclidean(3), 1.0, 3.0),
        (ModelManifold::euclidean(2), 0.5, 0.0),
        (ModelManifold::euclidean(3), 0.5, 0.0),
        (ModelManifold::euclidean(8), 0.5, 0.0),
        (ModelManifold::hyperbolic(3), 0.0, 2.0),
    ];
    let mut worst = 0.0f64;
    for (m, mu, exact) in &cases {
        worst = worst.max((c_mu(m, *mu) - exact).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(1, "growth constants", worst <= 0.05 && secs < 5.0, &format!("max |error| {worst:.2e}, {secs:.2} s"));
}

#[test]
fn c02_ricci_bound_consistency() {
    let s = RadiusSchedule::default_for(0.5);
    let m = ModelManifold::new(2, WarpingProfile::jacobi(1.0, 1.0), Some(s.last())).unwrap();
    let a = estimate_c_mu(&m, 0.5, &s).unwrap().value;
    let ba = c_mu_bound_from_ricci(2, &RicciProfile::new(1.0, 1.0).unwrap(), 0.5);
    let s = RadiusSchedule::default_for(1.0);
    let m = ModelManifold::new(3, WarpingProfile::jacobi(2.0, 0.0), Some(s.last())).unwrap();
    let b = estimate_c_mu(&m, 1.0, &s).unwrap().value;
    let bb = c_mu_bound_from_ricci(3, &RicciProfile::new(2.0, 0.0).unwrap(), 1.0);
    let ok = a <= 1.0 + 0.05 && b <= 3.0 + 0.05 && ba == 1.0 && bb == 3.0;
    verdict(2, "Ricci-bound consistency", ok, &format!("jacobi(1,1,m=2) {a:.4} <= {ba}, jacobi(2,0,m=3) {b:.4} <= {bb}"));
}

#[test]
fn c03_euclidean_cmc_radius() {
    let mut worst = 0.0f64;
    for m in [2, 3] {
        for h in [0.5, 1.0, 2.0] {
            let r = max_graph_radius(&ModelManifold::euclidean(m), h, None, 40.0).unwrap();
            worst = worst.max((r - 1.0 / h).abs());
        }
    }
    verdict(3, "Euclidean CMC radius 1/H", worst <= 1e-4, &format!("max |R - 1/H| {worst:.2e}"));
}

#[test]
fn c04_hyperbolic_threshold() {
    let t = Instant::now();
    let c2 = critical_h(&ModelManifold::hyperbolic(2), None, 40.0, 1e-3).unwrap();
    let t2 = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let c3 = critical_h(&ModelManifold::hyperbolic(3), None, 40.0, 1e-3).unwrap();
    let t3 = t.elapsed().as_secs_f64();
    let ok = (0.48..=0.52).contains(&c2.estimate) && (0.63..=0.70).contains(&c3.estimate) && t2 < 10.0 && t3 < 10.0;
    verdict(
        4,
        "hyperbolic threshold",
        ok,
        &format!("H^2 {:.4} ({t2:.2} s), H^3 {:.4} ({t3:.2} s)", c2.estimate, c3.estimate),
    );
}

#[test]
fn c05_weighted_threshold() {
    let w = Weight::cosh();
    let c = critical_h(&ModelManifold::hyperbolic(2), Some(&w), 40.0, 1e-3).unwrap();
    verdict(5, "weighted equidistant threshold", (0.95..=1.05).contains(&c.estimate), &format!("H^2, h = cosh r: {:.4}", c.estimate));
}

#[test]
fn c06_zero_boundary_uniqueness() {
    let p = RadialProblem::ball(ModelManifold::euclidean(2), RadialEquation::capillary(1.0), 1.0, 0.0);
    let radial = solve_capillary_bvp(&p, 1e-10).unwrap().sup_abs_u();
    let d = GridDomain::unit_square(33).unwrap();
    let s = newton_solve(&d, &GridEquation::capillary(1.0), 1e-12, 50).unwrap();
    let grid = s.sup_abs(&d);
    let ok = s.converged && radial <= 1e-8 && grid <= 1e-8;
    verdict(6, "capillary uniqueness", ok, &format!("radial {radial:.1e}, grid 33x33 {grid:.1e}"));
}

#[test]
fn c07_capillary_bound() {
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    for m in [2, 3] {
        for c in [0.5, -0.5, 1.0, -1.0] {
            let p = RadialProblem::ball(ModelManifold::euclidean(m), RadialEquation::capillary(1.0), 1.0, c);
            let s = solve_capillary_bvp(&p, 1e-10).unwrap();
            ok &= s.is_complete() && s.u.iter().all(|&u| u * c >= 0.0);
            worst = worst.max(s.sup_abs_u() - c.abs());
        }
    }
    // the same on a discretised disk
    for c in [0.5, -0.5, 1.0, -1.0] {
        let d = GridDomain::disk(41, 1.0).unwrap().with_boundary(|_, _| c);
        let s = newton_solve(&d, &GridEquation::capillary(1.0), 1e-12, 50).unwrap();
        ok &= s.converged && d.interior_cells().iter().all(|&k| s.u[k] * c >= 0.0);
        worst = worst.max(s.sup_abs(&d) - c.abs());
    }
    ok &= worst <= 1e-6;
    verdict(7, "capillary bound", ok, &format!("max(|u|_inf - |c|) {worst:.2e}, constant sign {ok}"));
}

#[test]
fn c08_miklyukov() {
    let mut violations = 0usize;
    let mut worst = f64::INFINITY;
    let mut count = 0usize;
    for (di, dim) in [1usize, 2, 3, 8].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed + di as u64);
        let mut xi = vec![0.0; dim];
        let mut eta = vec![0.0; dim];
        for i in 0..250_000 {
            let sx = 10f64.powf(rng.random_range(-3.0..3.0));
            let se = 10f64.powf(rng.random_range(-3.0..3.0));
            for k in 0..dim {
                xi[k] = sx * rng.random_range(-1.0..1.0);
                eta[k] = se * rng.random_range(-1.0..1.0);
            }
            if i % 10 == 0 {
                // nearly equal gradients
                for k in 0..dim {
                    eta[k] = xi[k] * (1.0 + 1e-6 * rng.random_range(-1.0..1.0));
                }
            }
            let g = miklyukov_gap(&xi, &eta).unwrap();
            let tol = miklyukov_tolerance(&xi, &eta);
            if g.gap < -tol {
                violations += 1;
            }
            worst = worst.min(g.gap / tol);
            count += 1;
        }
    }
    verdict(8, "Miklyukov inequality", violations == 0 && count == 1_000_000, &format!("{count} pairs, {violations} violations, min gap/scale {worst:.3e}"));
}

#[test]
fn c09_flow_replay() {
    // linear field: vol(U_t) = e^{tr A t} vol(U_0) exactly
    let a = vec![0.3, 0.1, -0.2, 0.15];
    let field = FlowField::linear(2, a).unwrap();
    let params = FlowParams {
        center: vec![0.5, -0.2],
        delta: 0.25,
        t_end: 2.0,
        steps: 8,
        particles: 100_000,
        seed: 7,
        lower_bound: None,
    };
    let tr = replay_flow(&field, &params).unwrap();
    let v0 = tr.volumes[0];
    let liouville = tr.times.iter().zip(&tr.volumes).map(|(t, v)| (v / (v0 * (0.45 * t).exp()) - 1.0).abs()).fold(0.0, f64::max);

    // capillary supersolution u with the flow of ∇u/W: div X = b u
    let b = 1.0;
    let sol = shoot_capillary(&RadialProblem::shoot(ModelManifold::euclidean(2), RadialEquation::capillary(b), 0.2, 4.0), 4.0, 1e-10).unwrap();
    let (center, delta) = (vec![0.8, 0.0], 0.3);
    let c_star = sol.eval(0.8 - delta).unwrap().0;
    let lb = LowerBoundParams { c_star, epsilon: 0.0, beta_star: 0.99 * b, mu: 0.0, r0: 0.0 };
    let p2 = FlowParams { center, delta, t_end: 1.5, steps: 10, particles: 100_000, seed: 11, lower_bound: Some(lb) };
    let sup = replay_flow(&FlowField::from_radial(&sol).unwrap(), &p2).unwrap();

    let ok = liouville <= 1e-3 && tr.containment_ok && sup.containment_ok && sup.lower_bound_ok == Some(true);
    verdict(
        9,
        "Liouville / flow replay",
        ok,
        &format!(
            "linear rel err {liouville:.2e}, containment {}/{}, lower bound respected {:?}",
            tr.containment_ok,
            sup.containment_ok,
            sup.lower_bound_ok
        ),
    );
}

fn random_boundary(seed: u64) -> impl Fn(f64, f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<[f64; 4]> = (0..6)
        .map(|_| [rng.random_range(0.0..3.0), rng.random_range(0.0..3.0), rng.random_range(0.0..6.3), rng.random_range(-1.0..1.0)])
        .collect();
    move |x, y| modes.iter().map(|[kx, ky, ph, c]| c * (kx * x + ky * y + ph).cos()).sum()
}

#[test]
fn c10_discrete_comparison() {
    let d = GridDomain::unit_square(65).unwrap();
    let eq = GridEquation::capillary(1.0);
    let mut worst = f64::NEG_INFINITY;
    let mut passed = 0;
    for k in 0..20u64 {
        let (fu, fv) = (random_boundary(2 * k), random_boundary(2 * k + 1));
        let r = comparison_experiment(&d, &d.sample(&fu), &d.sample(&fv), &eq, 1e-10).unwrap();
        worst = worst.max(r.max_interior_diff - r.max_boundary_diff);
        passed += r.pass as usize;
    }
    verdict(10, "discrete comparison", passed == 20 && worst <= 1e-6, &format!("{passed}/20 pairs, max(interior - boundary) {worst:.2e}"));
}

#[test]
fn c11_jacobian() {
    let sq = GridDomain::unit_square(33).unwrap();
    let f = random_boundary(99);
    let u1 = sq.sample(|x, y| 2.0 * f(x, y));
    let disk = GridDomain::disk(41, 1.0).unwrap();
    let u2 = disk.sample(|x, y| (3.0 * x).sin() * y + x * x);
    let rect = GridDomain::rectangle(40, 25, 0.05, [-1.0, -0.6]).unwrap();
    let u3 = rect.sample(|x, y| 5.0 * (x * x - y * y) + (4.0 * x * y).cos());
    let radial_b = GridEquation::Capillary { b: RadialFn::Power { scale: 2.0, exponent: 0.5 } };
    let cases = [
        (&sq, GridEquation::capillary(1.0), &u1),
        (&disk, GridEquation::pmc(0.7), &u2),
        (&rect, radial_b, &u3),
    ];
    let mut worst = 0.0f64;
    for (i, (d, eq, u)) in cases.iter().enumerate() {
        worst = worst.max(jacobian_check(d, eq, u, 100, 1000 + i as u64).unwrap());
    }
    verdict(11, "Jacobian correctness", worst <= 1e-5, &format!("worst relative error {worst:.2e} over 3 x 100 probes"));
}

#[test]
fn c12_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut names: Vec<_> = std::fs::read_dir(&configs).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    let mut experiments = std::collections::BTreeSet::new();
    let mut mismatched = Vec::new();
    for path in &names {
        let mut cfg = ExperimentConfig::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
        cfg.output_dir = dir.path().to_path_buf();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        if a.summary_digest != b.summary_digest {
            mismatched.push(path.file_name().unwrap().to_string_lossy().to_string());
        }
        experiments.insert(cfg.experiment.clone());
    }
    let ok = mismatched.is_empty() && experiments.len() == mcmp_cli::config::EXPERIMENTS.len();
    verdict(12, "determinism", ok, &format!("{} configs over {} experiments, mismatched {mismatched:?}", names.len(), experiments.len()));
}
