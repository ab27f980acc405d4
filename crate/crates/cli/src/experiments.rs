//! Dispatch from a validated plan to the library operations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use mcmp_core::coercive::{
    check_strict_monotonicity, check_weak_coercivity, miklyukov_gap, miklyukov_tolerance, CoerciveMap, Nonlinearity,
};
use mcmp_core::geometry::{
    check_condition_b, estimate_c_mu, GrowthCondition, GrowthEstimate, ManifoldSpec, ModelManifold, RadiusSchedule,
    WarpingProfile, WeightedModel,
};
use mcmp_core::grid::{comparison_experiment, newton_solve, CellLabel, GridDomain, GridEquation};
use mcmp_core::radial::{
    critical_h, max_graph_radius, shoot_capillary, shoot_cmc, solve_capillary_bvp, RadialEquation, RadialProblem,
};
use mcmp_core::verify::{
    check_comparison, check_theorem_a1w, replay_flow, weakform_shell, AnalyticProfile, CheckOptions, FlowField,
    FlowParams, LowerBoundParams, ShellOptions, SolutionRef, TheoremReport,
};
use mcmp_core::{Error, Weight};

use crate::config::*;
use crate::CliError;

/// An experiment's deterministic summary plus the files it wants written.
pub struct Outcome {
    pub summary: Value,
    pub files: Vec<(String, Vec<u8>)>,
}

/// JSON has no infinities; non-finite values become strings.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn opt_num(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}

pub fn execute(plan: &Plan, seed: u64) -> Result<Outcome, CliError> {
    let out = match plan {
        Plan::Growth(p) => growth(p)?,
        Plan::ConditionB(p) => condition_b(p)?,
        Plan::Coercivity(p) => coercivity(p, seed)?,
        Plan::RadialSolve(p) => radial_solve(p)?,
        Plan::CriticalH(p) => critical(p)?,
        Plan::GridSolve(p) => grid_solve(p, seed)?,
        Plan::Comparison(p) => comparison(p, seed)?,
        Plan::ReplayFlow(p) => flow(p, seed)?,
        Plan::Shell(p) => shell(p, seed)?,
        Plan::TheoremCheck(p) => theorem(p, seed)?,
    };
    Ok(out)
}

fn manifold(spec: &ManifoldSpec, reach: f64) -> Result<ModelManifold, Error> {
    let mut spec = spec.clone();
    if matches!(spec.warping, WarpingProfile::Jacobi { .. }) && spec.r_max.is_none() {
        spec.r_max = Some(reach);
    }
    ModelManifold::from_spec(&spec)
}

fn growth(p: &GrowthParams) -> Result<Outcome, CliError> {
    let sched = match &p.radii {
        Some(r) => RadiusSchedule::new(r.clone())?,
        None => RadiusSchedule::default_for(p.mu),
    };
    let man = manifold(&p.manifold, sched.last())?;
    let w = p.weight.clone().map(Weight::from_density);
    let est = estimate_c_mu(&WeightedModel { manifold: &man, weight: w.as_ref() }, p.mu, &sched)?;
    Ok(Outcome {
        summary: json!({"mu": p.mu, "value": num(est.value), "converged": est.converged, "radii": sched.radii().len()}),
        files: vec![("growth.csv".into(), est.to_csv().into_bytes())],
    })
}

fn condition_b(p: &ConditionBParams) -> Result<Outcome, CliError> {
    let gc = GrowthCondition::new(p.mu, p.beta, p.b.clone())?;
    let probes = p.probes.clone().unwrap_or_else(|| (0..40).map(|j| 2f64.powi(j)).collect());
    let c = check_condition_b(&gc, &probes)?;
    Ok(Outcome { summary: json!({"pass": c.pass, "liminf_estimate": num(c.liminf_estimate)}), files: vec![] })
}

fn coercivity(p: &CoercivityParams, seed: u64) -> Result<Outcome, CliError> {
    let a = match &p.map {
        MapSpec::MeanCurvature => CoerciveMap::mean_curvature(),
        MapSpec::WeightedGraph { w } => CoerciveMap::weighted_graph(w.clone()),
    };
    let wc = check_weak_coercivity(&a, p.dim, p.samples, seed)?;
    let mono = check_strict_monotonicity(&a, p.dim, p.samples, seed.wrapping_add(1))?;
    // the Mīkljukov gap on the same number of random pairs
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let mut worst = f64::INFINITY;
    let mut violations = 0usize;
    for _ in 0..p.samples {
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let xi: Vec<f64> = (0..p.dim).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let eta: Vec<f64> = (0..p.dim).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let g = miklyukov_gap(&xi, &eta)?;
        let tol = miklyukov_tolerance(&xi, &eta);
        if g.gap < -tol {
            violations += 1;
        }
        worst = worst.min(g.gap / tol.max(f64::MIN_POSITIVE));
    }
    Ok(Outcome {
        summary: json!({
            "weak_coercivity": {"pass": wc.pass, "worst_margin": num(wc.worst_margin), "max_norm": opt_num(wc.max_norm)},
            "strict_monotonicity": {"pass": mono.pass, "worst_margin": num(mono.worst_margin)},
            "miklyukov": {"violations": violations, "worst_scaled_gap": num(worst)},
            "pass": wc.pass && mono.pass && violations == 0,
        }),
        files: vec![],
    })
}

fn radial_solve(p: &RadialSolveParams) -> Result<Outcome, CliError> {
    let reach = match p.problem {
        ProblemSpec::Shoot { r_max, .. } => r_max,
        ProblemSpec::Ball { radius, .. } => radius,
        ProblemSpec::Annulus { r_out, .. } => r_out,
    };
    let man = manifold(&p.manifold, reach.max(1.0))?;
    let eq = p.equation.clone();
    let sol = match p.problem {
        ProblemSpec::Shoot { u0, r_max } => {
            let prob = RadialProblem::shoot(man, eq, u0, r_max);
            if matches!(prob.equation, RadialEquation::Capillary { .. }) {
                shoot_capillary(&prob, r_max, p.tol)?
            } else {
                shoot_cmc(&prob, r_max)?
            }
        }
        ProblemSpec::Ball { radius, boundary } => solve_capillary_bvp(&RadialProblem::ball(man, eq, radius, boundary), p.tol)?,
        ProblemSpec::Annulus { r_in, r_out, inner, outer } => {
            solve_capillary_bvp(&RadialProblem::annulus(man, eq, r_in, r_out, inner, outer), p.tol)?
        }
    };
    let s = sol.summary();
    let mut q = String::from("r,q,margin\n");
    for i in 0..sol.grid.len() {
        q.push_str(&format!("{:e},{:e},{:e}\n", sol.grid[i], sol.q[i], sol.margin[i]));
    }
    let (u_min, u_max) = sol.u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    Ok(Outcome {
        summary: json!({
            "status": s.status,
            "r_star": opt_num(s.r_star),
            "r_end": num(sol.r_end()),
            "u_min": num(u_min),
            "u_max": num(u_max),
            "sup_abs_u": num(sol.sup_abs_u()),
            "residual_norm": num(s.residual_norm),
            "nodes": sol.grid.len(),
        }),
        files: vec![("profile.csv".into(), sol.to_csv().into_bytes()), ("q.csv".into(), q.into_bytes())],
    })
}

fn critical(p: &CriticalHParams) -> Result<Outcome, CliError> {
    let man = manifold(&p.manifold, p.r_cap)?;
    let w = p.weight.clone().map(Weight::from_density);
    let summary = match p.h {
        Some(h) => {
            let r = max_graph_radius(&man, h, w.as_ref(), p.r_cap)?;
            json!({"H": h, "max_radius": num(r), "exists": r.is_infinite()})
        }
        None => {
            let c = critical_h(&man, w.as_ref(), p.r_cap, p.tol)?;
            json!({"estimate": num(c.estimate), "lo": num(c.lo), "hi": num(c.hi), "probes": c.probes})
        }
    };
    Ok(Outcome { summary, files: vec![] })
}

/// Evaluates a field spec; `Random` draws its coefficients from `seed`.
pub fn field_fn(spec: &FieldSpec, seed: u64) -> Box<dyn Fn(f64, f64) -> f64 + Send + Sync> {
    match *spec {
        FieldSpec::Constant { value } => Box::new(move |_, _| value),
        FieldSpec::Linear { a, b, c } => Box::new(move |x, y| a + b * x + c * y),
        FieldSpec::SinPiX { amplitude } => Box::new(move |x, _| amplitude * (std::f64::consts::PI * x).sin()),
        FieldSpec::Quadratic { c } => Box::new(move |x, y| c * (x * x + y * y)),
        FieldSpec::Gaussian { amplitude } => Box::new(move |x, y| amplitude * (-(x * x + y * y)).exp()),
        FieldSpec::Random { amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let modes: Vec<(f64, f64, f64, f64)> = (0..8)
                .map(|_| {
                    (
                        rng.random_range(0.0..3.0),
                        rng.random_range(0.0..3.0),
                        rng.random_range(0.0..std::f64::consts::TAU),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect();
            Box::new(move |x, y| {
                let s: f64 = modes.iter().map(|(kx, ky, ph, c)| c * (kx * x + ky * y + ph).cos()).sum();
                amplitude * s / 8f64.sqrt()
            })
        }
    }
}

fn domain(spec: &DomainSpec) -> Result<GridDomain, Error> {
    match *spec {
        DomainSpec::UnitSquare { n } => GridDomain::unit_square(n),
        DomainSpec::Disk { n, radius } => GridDomain::disk(n, radius),
        DomainSpec::Rectangle { nx, ny, spacing, origin } => GridDomain::rectangle(nx, ny, spacing, origin),
    }
}

fn grid_solve(p: &GridSolveParams, seed: u64) -> Result<Outcome, CliError> {
    let f = field_fn(&p.boundary, seed);
    let d = domain(&p.domain)?.with_boundary(f);
    let sol = newton_solve(&d, &p.equation, p.tol, p.max_iters)?;
    Ok(Outcome {
        summary: json!({
            "converged": sol.converged,
            "newton_iters": sol.newton_iters,
            "residual_norm": num(sol.residual_norm),
            "sup_abs": num(sol.sup_abs(&d)),
            "nx": d.nx,
            "ny": d.ny,
        }),
        files: vec![("u.bin".into(), sol.to_binary()?), ("u.csv".into(), d.to_csv(&sol.u).into_bytes())],
    })
}

fn comparison(p: &ComparisonParams, seed: u64) -> Result<Outcome, CliError> {
    let d = GridDomain::unit_square(p.n)?;
    let mut rows = Vec::with_capacity(p.pairs);
    let mut all = true;
    let mut csv = String::from("pair,max_interior_diff,max_boundary_diff,pass\n");
    for k in 0..p.pairs {
        let s = seed.wrapping_mul(1_000_003).wrapping_add(2 * k as u64);
        let fu = field_fn(&FieldSpec::Random { amplitude: p.amplitude }, s);
        let fv = field_fn(&FieldSpec::Random { amplitude: p.amplitude }, s + 1);
        let r = comparison_experiment(&d, &d.sample(fu), &d.sample(fv), &p.equation, p.tol)?;
        all &= r.pass;
        csv.push_str(&format!("{k},{:e},{:e},{}\n", r.max_interior_diff, r.max_boundary_diff, r.pass));
        rows.push(json!({
            "pair": k,
            "max_interior_diff": num(r.max_interior_diff),
            "max_boundary_diff": num(r.max_boundary_diff),
            "pass": r.pass,
        }));
    }
    Ok(Outcome { summary: json!({"pairs": rows, "all_pass": all, "pass": all}), files: vec![("comparison.csv".into(), csv.into_bytes())] })
}

fn flow(p: &ReplayFlowParams, seed: u64) -> Result<Outcome, CliError> {
    let (field, auto_lb) = match &p.field {
        FlowFieldSpec::Constant { v } => (FlowField::constant(v.clone()), None),
        FlowFieldSpec::Linear { dim, matrix } => (FlowField::linear(*dim, matrix.clone())?, None),
        FlowFieldSpec::RadialCapillary { dim, u0, b, r_max } => {
            let prob = RadialProblem::shoot(ModelManifold::euclidean(*dim), RadialEquation::capillary(*b), *u0, *r_max);
            let sol = shoot_capillary(&prob, *r_max, 1e-10)?;
            // div X = b u and u increases along the flow, so the infimum of
            // u over the seed ball bounds the source from below
            let rp = p.center.iter().map(|a| a * a).sum::<f64>().sqrt();
            let inf_u = sol.eval((rp - p.delta).max(0.0))?.0;
            let lb = LowerBoundParams { c_star: inf_u, epsilon: 0.0, beta_star: 0.99 * b, mu: 0.0, r0: 0.0 };
            (FlowField::from_radial(&sol)?, Some(lb))
        }
    };
    let params = FlowParams {
        center: p.center.clone(),
        delta: p.delta,
        t_end: p.t_end,
        steps: p.steps,
        particles: p.particles,
        seed,
        lower_bound: p.lower_bound.or(auto_lb),
    };
    let tr = replay_flow(&field, &params)?;
    Ok(Outcome {
        summary: json!({
            "containment_ok": tr.containment_ok,
            "lower_bound_ok": tr.lower_bound_ok,
            "k": num(tr.k),
            "r1": opt_num(tr.r1),
            "log_volume_start": num(tr.log_volumes[0]),
            "log_volume_end": num(*tr.log_volumes.last().unwrap()),
            "particles": tr.particle_count,
            "pass": tr.containment_ok && tr.lower_bound_ok.unwrap_or(true),
        }),
        files: vec![
            ("trace.csv".into(), tr.to_csv().into_bytes()),
            ("trace.json".into(), serde_json::to_vec_pretty(&tr).expect("trace serializes")),
        ],
    })
}

fn shell(p: &ShellParams, seed: u64) -> Result<Outcome, CliError> {
    let n = p.grid.n;
    let hw = p.grid.half_width;
    if n < 3 {
        return Err(CliError::Schema { path: "params.grid.n".into(), message: "need n >= 3".into() });
    }
    let d = GridDomain::rectangle(n, n, 2.0 * hw / (n - 1) as f64, [-hw, -hw])?;
    let f = field_fn(&p.psi, seed);
    let psi = d.sample(f);
    let xs = vec![p.x; d.len()];
    let w = p.weight.clone().map(Weight::from_density).unwrap_or_else(Weight::unit);
    let gc = GrowthCondition::new(p.mu, p.beta, p.b.clone())?;
    let opts = ShellOptions { beta_star: p.beta_star, r0: p.r0, ..Default::default() };
    let tr = weakform_shell(&d, &psi, &xs, &w, &gc, p.gamma, &p.radii, &opts)?;
    let violated = tr.verdicts.iter().filter(|v| v.holds == Some(false)).count();
    Ok(Outcome {
        summary: json!({
            "consistent": tr.consistent,
            "violated": violated,
            "implied_growth_lower_bound": num(tr.implied_growth_lower_bound),
            "values": tr.values.iter().map(|v| num(*v)).collect::<Vec<_>>(),
            "touches_boundary": tr.touches_boundary,
        }),
        files: vec![("shell.csv".into(), tr.to_csv().into_bytes())],
    })
}

fn report_json(r: &TheoremReport, extra: Value) -> Value {
    let mut v = serde_json::to_value(r).expect("report serializes");
    if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
        m.extend(e);
    }
    for key in ["claimed_bound", "observed_value"] {
        if let Some(x) = v.get(key).and_then(|x| x.as_f64()) {
            v[key] = num(x);
        } else if v.get(key) == Some(&Value::Null) {
            // serde_json writes non-finite floats as null
            v[key] = json!("inf");
        }
    }
    v
}

fn theorem(p: &TheoremCheckParams, seed: u64) -> Result<Outcome, CliError> {
    let a = CoerciveMap::mean_curvature();
    let opts = CheckOptions::default();
    let zero = GrowthEstimate::exact(0.0, 0.0);
    let res = match p {
        TheoremCheckParams::RadialBvp { dim, b, radius, boundary, f } => {
            let prob = RadialProblem::ball(ModelManifold::euclidean(*dim), RadialEquation::capillary(*b), *radius, *boundary);
            let sol = solve_capillary_bvp(&prob, 1e-10)?;
            let nl = Nonlinearity::from_spec(f);
            check_theorem_a1w(
                SolutionRef::Radial(&sol),
                &a,
                &GrowthCondition::constant(*b),
                &nl,
                &zero,
                Some(nl.eval(*boundary)),
                &opts,
            )
        }
        TheoremCheckParams::GridBvp { n, radius, b, boundary } => {
            let g = field_fn(boundary, seed);
            let d = GridDomain::disk(*n, *radius)?.with_boundary(g);
            let sol = newton_solve(&d, &GridEquation::capillary(*b), 1e-11, 50)?;
            let bsup = d.boundary_cells().iter().map(|&k| d.boundary_data[k]).fold(f64::NEG_INFINITY, f64::max);
            check_theorem_a1w(
                SolutionRef::Grid { domain: &d, solution: &sol },
                &a,
                &GrowthCondition::constant(*b),
                &Nonlinearity::identity(),
                &zero,
                Some(bsup),
                &CheckOptions { residual_tol: 1e-9, ..opts },
            )
        }
        TheoremCheckParams::Quadratic { dim, c, radius, b } => {
            let c = *c;
            let prof = AnalyticProfile::new(ModelManifold::euclidean(*dim), *radius, 400, move |r| (c * r * r, 2.0 * c * r));
            check_theorem_a1w(
                SolutionRef::Radial(&prof),
                &a,
                &GrowthCondition::constant(*b),
                &Nonlinearity::identity(),
                &zero,
                Some(c * radius * radius),
                &opts,
            )
        }
        TheoremCheckParams::ComparisonPair { n, b, shift } => {
            let d = GridDomain::unit_square(*n)?;
            let eq = GridEquation::capillary(*b);
            let fu = field_fn(&FieldSpec::Random { amplitude: 1.0 }, seed);
            let du = d.clone().with_boundary(&fu);
            let dv = d.clone().with_boundary(|x, y| fu(x, y) - shift);
            let su = newton_solve(&du, &eq, 1e-11, 50)?;
            let sv = newton_solve(&dv, &eq, 1e-11, 50)?;
            if !(su.converged && sv.converged) {
                return Err(Error::NoConvergence("comparison pair did not converge".into()).into());
            }
            let bsup = d.boundary_cells().iter().map(|&k| su.u[k] - sv.u[k]).fold(f64::NEG_INFINITY, f64::max);
            let interior: Vec<usize> = (0..d.len()).filter(|&k| d.mask[k] == CellLabel::Interior).collect();
            let u: Vec<f64> = interior.iter().map(|&k| su.u[k]).collect();
            let v: Vec<f64> = interior.iter().map(|&k| sv.u[k]).collect();
            check_comparison(&u, &v, &a, &GrowthCondition::constant(*b), 1.0, &zero, Some(bsup), &opts)
        }
    };
    let summary = match res {
        Ok(r) => report_json(&r, json!({"hypothesis_violation": null})),
        Err(Error::Hypothesis { hypothesis, location, value }) => json!({
            "pass": false,
            "hypothesis_violation": {"hypothesis": hypothesis, "location": location, "value": num(value)},
        }),
        Err(e) => return Err(e.into()),
    };
    Ok(Outcome { summary, files: vec![] })
}
