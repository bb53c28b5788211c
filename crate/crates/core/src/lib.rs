//! Sharp partial-identification bounds for causal means and average treatment
//! effects under the distributionally enhanced marginal sensitivity model
//! (deMSM), alongside the MSM and the recommended-specification eMSM.
//!
//! The crate is organised bottom-up:
//!
//! - [`dist`]: finite outcome laws with quantile and check-loss primitives;
//! - [`params`]: sensitivity parameters and the implied-parameter algebra;
//! - [`bounds`]: closed-form bounds, stratum aggregation and curves;
//! - [`oracle`]: greedy and grid-search oracles plus an explicit witness law;
//! - [`estimate`]: plug-in estimation from samples and a percentile bootstrap;
//! - [`cli`]: the `demsm` command-line front end.

pub mod bounds;
pub mod cli;
pub mod dist;
pub mod error;
pub mod estimate;
pub mod oracle;
pub mod params;

pub use bounds::{
    aggregate_bounds, demsm_nu0_bounds, demsm_nu1_bounds, demsm_nu1_upper_minform, emsm_nu0_bounds_recommended,
    emsm_nu1_bounds_recommended, msm_nu0_bounds, msm_nu1_bounds, sensitivity_curve, BoundsReport, CurveMode, CurveRow,
    Interval, Model, ObservedLaw, Reference, SensitivitySpec, Stratum, StratumOverride,
};
pub use dist::WeightedDistribution;
pub use error::{Arm, Error, Result};
pub use oracle::{
    binary_u_grid_oracle, build_witness, greedy_density_ratio_bound, verify_witness, Direction, WitnessAudit,
    WitnessJoint,
};
pub use params::{
    emsm_implied_lambdas, emsm_recommended_deltas, implied_emsm_deltas, implied_lambda, implied_lambda_control,
    matching_gammas, EmsmDelta, GammaPair, ImpliedLambda, LambdaPair,
};
