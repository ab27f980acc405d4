//! Experiment configuration and its typed, schema-checked parameter sets.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use mcmp_core::coercive::NonlinearitySpec;
use mcmp_core::geometry::ManifoldSpec;
use mcmp_core::grid::GridEquation;
use mcmp_core::radial::RadialEquation;
use mcmp_core::verify::LowerBoundParams;
use mcmp_core::RadialFn;

use crate::CliError;

pub const EXPERIMENTS: [&str; 10] = [
    "growth",
    "condition-b",
    "coercivity",
    "radial-solve",
    "critical-h",
    "grid-solve",
    "comparison",
    "replay-flow",
    "shell",
    "theorem-check",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default = "empty_object")]
    pub params: Value,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| CliError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    /// Applies the `MCMP_SEED` override when set.
    pub fn with_env_seed(mut self) -> Result<Self, CliError> {
        if let Ok(s) = std::env::var("MCMP_SEED") {
            self.seed = s.trim().parse().map_err(|_| CliError::Schema {
                path: "MCMP_SEED".into(),
                message: format!("not a 64-bit unsigned integer: {s:?}"),
            })?;
        }
        Ok(self)
    }

    /// The part of the config that determines results (`output_dir` excluded).
    pub fn digest(&self) -> String {
        mcmp_core::digest::digest_of(&serde_json::json!({
            "experiment": self.experiment,
            "params": self.params,
            "seed": self.seed,
        }))
    }

    pub fn plan(&self) -> Result<Plan, CliError> {
        let p = &self.params;
        Ok(match self.experiment.as_str() {
            "growth" => Plan::Growth(parse(p)?),
            "condition-b" => Plan::ConditionB(parse(p)?),
            "coercivity" => Plan::Coercivity(parse(p)?),
            "radial-solve" => Plan::RadialSolve(parse(p)?),
            "critical-h" => Plan::CriticalH(parse(p)?),
            "grid-solve" => Plan::GridSolve(parse(p)?),
            "comparison" => Plan::Comparison(parse(p)?),
            "replay-flow" => Plan::ReplayFlow(parse(p)?),
            "shell" => Plan::Shell(parse(p)?),
            "theorem-check" => Plan::TheoremCheck(parse(p)?),
            other => {
                return Err(CliError::Schema {
                    path: "experiment".into(),
                    message: format!("unknown experiment {other:?}; expected one of {}", EXPERIMENTS.join(", ")),
                })
            }
        })
    }
}

fn parse<T: DeserializeOwned>(v: &Value) -> Result<T, CliError> {
    serde_path_to_error::deserialize(v.clone()).map_err(|e| {
        let inner = e.path().to_string();
        CliError::Schema {
            path: if inner == "." { "params".into() } else { format!("params.{inner}") },
            message: e.inner().to_string(),
        }
    })
}

#[derive(Debug, Clone)]
pub enum Plan {
    Growth(GrowthParams),
    ConditionB(ConditionBParams),
    Coercivity(CoercivityParams),
    RadialSolve(RadialSolveParams),
    CriticalH(CriticalHParams),
    GridSolve(GridSolveParams),
    Comparison(ComparisonParams),
    ReplayFlow(ReplayFlowParams),
    Shell(ShellParams),
    TheoremCheck(TheoremCheckParams),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthParams {
    pub manifold: ManifoldSpec,
    pub mu: f64,
    /// Weight density on the model.
    #[serde(default)]
    pub weight: Option<RadialFn>,
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionBParams {
    pub mu: f64,
    pub beta: f64,
    pub b: RadialFn,
    #[serde(default)]
    pub probes: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    MeanCurvature,
    WeightedGraph { w: RadialFn },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoercivityParams {
    pub map: MapSpec,
    pub dim: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Shoot { u0: f64, r_max: f64 },
    Ball { radius: f64, boundary: f64 },
    Annulus { r_in: f64, r_out: f64, inner: f64, outer: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialSolveParams {
    pub manifold: ManifoldSpec,
    pub equation: RadialEquation,
    pub problem: ProblemSpec,
    #[serde(default = "default_radial_tol")]
    pub tol: f64,
}

fn default_radial_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalHParams {
    pub manifold: ManifoldSpec,
    #[serde(default)]
    pub weight: Option<RadialFn>,
    #[serde(default = "default_r_cap")]
    pub r_cap: f64,
    #[serde(default = "default_h_tol")]
    pub tol: f64,
    /// When present, only `max_graph_radius(H)` is computed.
    #[serde(default, rename = "H")]
    pub h: Option<f64>,
}

fn default_r_cap() -> f64 {
    mcmp_core::radial::DEFAULT_R_CAP
}

fn default_h_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    UnitSquare { n: usize },
    Disk { n: usize, radius: f64 },
    Rectangle { nx: usize, ny: usize, spacing: f64, origin: [f64; 2] },
}

/// Scalar fields on the plane, used for boundary data and test functions.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant { value: f64 },
    /// `a + b x + c y`
    Linear { a: f64, b: f64, c: f64 },
    /// `amplitude · sin(π x)`
    SinPiX { amplitude: f64 },
    /// `c |x|²`
    Quadratic { c: f64 },
    /// `amplitude · exp(−|x|²)`
    Gaussian { amplitude: f64 },
    /// Random low-frequency trigonometric polynomial drawn from the seed.
    Random { amplitude: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSolveParams {
    pub domain: DomainSpec,
    pub equation: GridEquation,
    pub boundary: FieldSpec,
    #[serde(default = "default_grid_tol")]
    pub tol: f64,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
}

fn default_grid_tol() -> f64 {
    1e-10
}

fn default_iters() -> usize {
    50
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonParams {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_capillary")]
    pub equation: GridEquation,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_grid_tol")]
    pub tol: f64,
}

fn default_n() -> usize {
    65
}

fn default_capillary() -> GridEquation {
    GridEquation::capillary(1.0)
}

fn default_pairs() -> usize {
    20
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowFieldSpec {
    Constant { v: Vec<f64> },
    /// Row-major `dim × dim` matrix.
    Linear { dim: usize, matrix: Vec<f64> },
    /// Mean curvature field of the radial capillary solution on `ℝ^dim`
    /// shot from `u(0) = u0`.
    RadialCapillary { dim: usize, u0: f64, b: f64, r_max: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayFlowParams {
    pub field: FlowFieldSpec,
    pub center: Vec<f64>,
    pub delta: f64,
    pub t_end: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_particles")]
    pub particles: usize,
    /// Lower-bound constants; derived from the solution for
    /// `radial_capillary` fields when absent.
    #[serde(default)]
    pub lower_bound: Option<LowerBoundParams>,
}

fn default_steps() -> usize {
    10
}

fn default_particles() -> usize {
    10_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellGrid {
    pub n: usize,
    pub half_width: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellParams {
    pub grid: ShellGrid,
    pub psi: FieldSpec,
    /// Constant vector field `X`.
    pub x: [f64; 2],
    #[serde(default)]
    pub weight: Option<RadialFn>,
    pub mu: f64,
    pub beta: f64,
    pub b: RadialFn,
    pub gamma: f64,
    pub radii: Vec<f64>,
    #[serde(default)]
    pub beta_star: Option<f64>,
    #[serde(default)]
    pub r0: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case", deny_unknown_fields)]
pub enum TheoremCheckParams {
    /// Capillary BVP on a Euclidean ball, checked against the localized bound.
    RadialBvp {
        dim: usize,
        b: f64,
        radius: f64,
        boundary: f64,
        #[serde(default = "default_nonlinearity")]
        f: NonlinearitySpec,
    },
    /// Capillary Dirichlet problem on a grid disk.
    GridBvp { n: usize, radius: f64, b: f64, boundary: FieldSpec },
    /// Closed-form profile `c r²` on a Euclidean ball; a counterexample
    /// probe for the supersolution hypothesis.
    Quadratic { dim: usize, c: f64, radius: f64, b: f64 },
    /// Two shifted-boundary grid solves fed to the comparison bound.
    ComparisonPair { n: usize, b: f64, shift: f64 },
}

fn default_nonlinearity() -> NonlinearitySpec {
    NonlinearitySpec::Identity
}
