use mcmp_core::geometry::ModelManifold;
use mcmp_core::grid::{assemble_residual, comparison_experiment, face_fluxes, newton_solve, CellLabel, GridDomain, GridEquation};
use mcmp_core::radial::{shoot_capillary, RadialEquation, RadialProblem, RadialSolution};
use proptest::prelude::*;

fn trig(c: [f64; 4]) -> impl Fn(f64, f64) -> f64 {
    move |x, y| c[0] * (3.0 * x + c[1]).sin() + c[2] * (2.0 * y - c[3]).cos()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn face_fluxes_below_one(c in prop::array::uniform4(-20.0f64..20.0), n in 5usize..30) {
        let d = GridDomain::unit_square(n).unwrap();
        let u = d.sample(trig(c));
        prop_assert!(face_fluxes(&d, &u).iter().all(|f| f.abs() < 1.0));
    }

    #[test]
    fn capillary_is_odd(c in prop::array::uniform4(-2.0f64..2.0), b in 0.3f64..3.0) {
        let d = GridDomain::disk(25, 1.0).unwrap();
        let eq = GridEquation::capillary(b);
        let f = trig(c);
        let up = newton_solve(&d.clone().with_boundary(&f), &eq, 1e-11, 50).unwrap();
        let down = newton_solve(&d.clone().with_boundary(|x, y| -f(x, y)), &eq, 1e-11, 50).unwrap();
        prop_assert!(up.converged && down.converged);
        for k in 0..d.len() {
            prop_assert!((up.u[k] + down.u[k]).abs() <= 1e-9);
        }
    }

    #[test]
    fn converged_solution_properties(c in prop::array::uniform4(-1.0f64..1.0), n in 9usize..25) {
        let d = GridDomain::unit_square(n).unwrap().with_boundary(trig(c));
        let eq = GridEquation::capillary(1.0);
        let s = newton_solve(&d, &eq, 1e-10, 50).unwrap();
        prop_assert!(s.converged);
        prop_assert!(s.residual_norm <= 1e-10);
        for k in d.boundary_cells() {
            prop_assert_eq!(s.u[k], d.boundary_data[k]);
        }
        let r = assemble_residual(&d, &s.u, &eq).unwrap();
        prop_assert!(r.iter().all(|v| v.abs() <= 1e-10));
    }

    #[test]
    fn comparison_on_random_pairs(cu in prop::array::uniform4(-1.5f64..1.5), cv in prop::array::uniform4(-1.5f64..1.5)) {
        let d = GridDomain::unit_square(17).unwrap();
        let r = comparison_experiment(&d, &d.sample(trig(cu)), &d.sample(trig(cv)), &GridEquation::capillary(1.0), 1e-10).unwrap();
        prop_assert!(r.pass, "{r:?}");
    }
}

fn radial_profile() -> RadialSolution {
    let p = RadialProblem::shoot(ModelManifold::euclidean(2), RadialEquation::capillary(1.0), 0.6, 1.0);
    let s = shoot_capillary(&p, 1.0, 1e-12).unwrap();
    assert!(s.is_complete());
    s
}

fn grid_error(n: usize, sol: &RadialSolution) -> f64 {
    let exact = |x: f64, y: f64| sol.eval(((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt()).unwrap().0;
    let d = GridDomain::unit_square(n).unwrap().with_boundary(exact);
    let s = newton_solve(&d, &GridEquation::capillary(1.0), 1e-10, 50).unwrap();
    assert!(s.converged);
    d.interior_cells()
        .into_iter()
        .map(|k| {
            let [x, y] = d.position(k);
            (s.u[k] - exact(x, y)).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn second_order_against_radial_solution() {
    let sol = radial_profile();
    let e: Vec<f64> = [17, 33, 65].iter().map(|&n| grid_error(n, &sol)).collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.8, "errors {e:?}, order {order}");
    }
    assert!(e[2] < 1e-4, "{e:?}");
}

/// Values at the interior nodes of the 9×9 subgrid shared by all levels.
fn nested_values(n: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let d = GridDomain::unit_square(n).unwrap().with_boundary(f);
    let s = newton_solve(&d, &GridEquation::capillary(1.0), 1e-11, 50).unwrap();
    assert!(s.converged);
    let step = (n - 1) / 8;
    (1..8).flat_map(|j| (1..8).map(move |i| (i, j))).map(|(i, j)| s.u[d.index(i * step, j * step)]).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn mesh_convergence_order_on_smooth_data() {
    // no closed form; Richardson order from three nested grids
    let f = |x: f64, y: f64| 0.5 * (x + 2.0 * y).cos();
    let (a, b, c) = (nested_values(17, f), nested_values(33, f), nested_values(65, f));
    let order = (max_diff(&a, &b) / max_diff(&b, &c)).log2();
    assert!(order >= 1.8, "order {order}");
}

#[test]
fn sine_data_against_refined_grid() {
    let f = |x: f64, _: f64| (std::f64::consts::PI * x).sin();
    let (a, b, c) = (nested_values(33, f), nested_values(65, f), nested_values(129, f));
    let (d1, d2) = (max_diff(&a, &b), max_diff(&b, &c));
    // steep corner data converges more slowly than the smooth case
    assert!(d2 < 0.5 * d1 && d2 < 3e-3, "{d1:e} {d2:e}");
}

#[test]
fn sine_boundary_solution_is_bounded_by_data() {
    let d = GridDomain::unit_square(33).unwrap().with_boundary(|x, _| (std::f64::consts::PI * x).sin());
    let s = newton_solve(&d, &GridEquation::capillary(1.0), 1e-11, 50).unwrap();
    assert!(s.converged);
    assert!(d.interior_cells().iter().all(|&k| s.u[k] > 0.0 && s.u[k] < 1.0));
    assert!(d.mask.iter().filter(|l| **l == CellLabel::Interior).count() == 31 * 31);
}
