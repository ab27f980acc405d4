//! Numerical laboratory for maximum and comparison principles of weakly
//! 1-coercive quasilinear operators.
//!
//! * [`geometry`]: rotationally symmetric models, volumes, growth indicators.
//! * [`coercive`]: structure maps `A(x, s, ξ)` and their property checks.
//! * [`radial`]: shooting solvers for the radial capillary, prescribed mean
//!   curvature and equidistant-graph equations.
//! * [`grid`]: damped Newton on masked planar grids.
//! * [`verify`]: theorem checkers, flow replay and the superlevel shell tracker.

pub mod coercive;
pub mod digest;
pub mod error;
pub mod functions;
pub mod geometry;
pub mod grid;
pub mod ode;
pub mod quad;
pub mod radial;
pub mod verify;

pub use error::{Error, Result};
pub use functions::{RadialFn, Weight};
