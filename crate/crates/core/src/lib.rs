//! Mean-field transport with non-local velocity, stabilized by sparse bump feedback.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below fix the
//! scalar for the common cases.

pub mod controller;
pub mod error;
pub mod field;
pub mod kernels;
pub mod lyapunov;
pub mod measure;
pub mod scalar;
pub mod scenarios;
pub mod solver;
pub mod verify;

pub use controller::{
    admissible, admissible_strict, bump_1d, bump_nd, control_function, search_maximizer, slope, ActiveControl, BumpParams,
    ControlDecision, Controller, ControllerConfig, ControllerState, Mode, SearchConfig, Trigger,
};
pub use error::{Error, Result};
pub use field::VectorField;
pub use kernels::{nonlocal_field, truncate_to_ball, ConstantKernel, HkKernel, InteractionKernel, TableKernel};
pub use lyapunov::{lie_derivative, MomentFunctional, TargetSet};
pub use measure::{wasserstein_1d, GridMeasure, Measure, ParticleMeasure, SupportBall};
pub use scalar::Real;
pub use solver::{evolve, Dynamics, SolverConfig, TrajectoryLog};

pub type GridMeasure64 = GridMeasure<f64>;
pub type GridMeasure32 = GridMeasure<f32>;
pub type ParticleMeasure64 = ParticleMeasure<f64>;
pub type ParticleMeasure32 = ParticleMeasure<f32>;
pub type Measure64 = Measure<f64>;
pub type Measure32 = Measure<f32>;
pub type HkKernel64 = HkKernel<f64>;
pub type MomentFunctional64 = MomentFunctional<f64>;
pub type Controller64 = Controller<f64>;
pub type TrajectoryLog64 = TrajectoryLog<f64>;
