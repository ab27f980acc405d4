//! Model manifolds, ball volumes and the growth indicators `c_μ`, `c^w_μ`.

mod domain;
mod growth;
mod profile;

pub use domain::MaskedDomain;
pub use growth::{
    c_mu_bound_from_ricci, check_condition_b, estimate_c_mu, growth_statistic, ConditionBCheck, GrowthCondition,
    GrowthEstimate, GrowthSample, RadiusSchedule, RicciProfile, VolumeGrowth, WeightedModel, INFINITE_GROWTH,
};
pub use profile::{sphere_area, JacobiParams, ManifoldSpec, ModelManifold, ScaledParams, WarpingProfile, DEFAULT_TABLE_RADIUS};
