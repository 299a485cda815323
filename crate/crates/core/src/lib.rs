//! Occlusion-aware dynamic speed limits for an automated vehicle passing parked
//! vehicles: hidden-pedestrian geometry, the resulting speed limit, a drivable
//! velocity profile, and an adversarial emergence sweep that checks the limit
//! actually avoids frontal collisions.
//!
//! Everything numeric is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, with `*F32` variants for single precision.

pub mod cli;
pub mod limiter;
pub mod model;
pub mod occlusion;
pub mod profiler;
pub mod scalar;
pub mod scenario_file;
pub mod shadow;
pub mod simkernel;

pub use limiter::{is_relevant, limit_at, limit_profile, v_sup, Binding};
pub use model::{preset, validate, Preset};
pub use occlusion::{conflict_point, d_o_closed_form, d_o_raycast};
pub use profiler::{metrics, plan_profile};
pub use scenario_file::{load_scenario, parse_scenario};
pub use simkernel::{adversary_sweep, simulate, step, Outcome};

pub type AssumptionSet = model::AssumptionSet<f64>;
pub type EgoVehicle = model::EgoVehicle<f64>;
pub type ParkedVehicle = model::ParkedVehicle<f64>;
pub type PostedLimit = model::PostedLimit<f64>;
pub type Scenario = model::Scenario<f64>;
pub type OcclusionView = occlusion::OcclusionView<f64>;
pub type LimitSample = limiter::LimitSample<f64>;
pub type SpeedProfile = profiler::SpeedProfile<f64>;
pub type Metrics = profiler::Metrics<f64>;
pub type EgoState = simkernel::EgoState<f64>;
pub type SweepConfig = simkernel::SweepConfig<f64>;
pub type SweepReport = simkernel::SweepReport<f64>;
pub type EmergenceEvent = simkernel::EmergenceEvent<f64>;

pub type AssumptionSetF32 = model::AssumptionSet<f32>;
pub type ScenarioF32 = model::Scenario<f32>;
pub type LimitSampleF32 = limiter::LimitSample<f32>;
pub type SpeedProfileF32 = profiler::SpeedProfile<f32>;
pub type MetricsF32 = profiler::Metrics<f32>;
pub type SweepReportF32 = simkernel::SweepReport<f32>;
