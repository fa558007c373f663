//! Unstable curves (`u = 1` carriers), admissible measures on them, and the
//! disintegration of their push-forwards.

pub mod curve;
pub mod growth;
pub mod lift;
pub mod measure;
pub mod toy;

pub use curve::{AdmissibilityConstants, Carrier, CarrierNode, R0};
pub use growth::{curvature_growth_check, CurvatureGrowthReport};
pub use lift::{
    cesaro_lift, density_bounds_check, direct_pushforward, disintegrate, disintegrate_with, pullback_metric,
    radius_function, CesaroLift, DensityBoundsReport, EnvelopeConstants, GridOptions, LiftEntry, LiftedMeasure,
    SandwichReport, CESARO_WORKING_NODES, CHILD_NODES, MAX_WORKING_NODES,
};
pub use measure::SimpleAdmissibleMeasure;
pub use toy::{toy_density, toy_rho, toy_rho_at, verify_toy_identity};
