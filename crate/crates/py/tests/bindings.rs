use std::ffi::CString;

use pyo3::prelude::*;

use mcmp::mcmp;

fn run(src: &str) {
    Python::attach(|py| {
        let code = CString::new(src).unwrap();
        if let Err(e) = py.run(&code, None, None) {
            e.display(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn bindings_from_embedded_interpreter() {
    pyo3::append_to_inittab!(mcmp);
    Python::initialize();

    run(r#"
import mcmp
plane = mcmp.ModelManifold.euclidean(2)
assert abs(mcmp.max_graph_radius(plane, 0.5) - 2.0) < 1e-6
assert abs(plane.ball_volume(1.0) - 3.141592653589793) < 1e-9

sol = mcmp.solve_capillary_bvp(plane, 1.0, 1.0, 0.5)
assert sol.status == "complete" and abs(sol.eval(1.0)[0] - 0.5) < 1e-9
rep = mcmp.check_theorem_a1w(sol, 1.0, boundary_sup=0.5)
assert rep["pass"] and rep["claimed_bound"] == 0.5

dom = mcmp.GridDomain.disk(21, 1.0)
dom.set_boundary([0.3 * x for x, _ in dom.positions()])
g = mcmp.grid_solve(dom)
assert g.converged and g.sup_abs() <= 0.3 + 1e-12
assert dom.labels().count(2) == len(dom.interior_cells())

rep = mcmp.check_weak_coercivity(2, 500, 1)
assert rep["pass"]

m = mcmp.ModelManifold.from_json(mcmp.ModelManifold.hyperbolic(3).to_json())
assert m.dim == 3
"#);

    run(r#"
import mcmp
try:
    mcmp.GridDomain.unit_square(4).set_boundary([0.0])
except mcmp.McmpError as e:
    assert "expected 16" in str(e)
else:
    raise AssertionError
assert issubclass(mcmp.HypothesisError, mcmp.McmpError)
"#);
}
