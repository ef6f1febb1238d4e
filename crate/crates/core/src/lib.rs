//! Event-stream calculus: exact windowed sections (event streams, clocks,
//! trajectories), composable block-stepped machines (series, tensor, trace,
//! delay), signal-processing blocks (sampler, level crossing, hold,
//! discrete/continuous dynamical systems), and a closed-loop optomotor
//! heading-regulation simulation built from them.

pub mod blocks;
pub mod csv;
pub mod event;
pub mod laws;
pub mod machine;
pub mod optomotor;
pub mod scalar;
pub mod scenario;
pub mod sheaf;
pub mod timebase;
pub mod trajectory;

pub use scalar::Real;
pub use timebase::{ClosedInterval, Duration, Tick, TickScale};

/// Default-precision concrete aliases.
pub type EventStream = event::EventStream<machine::Value<f64>>;
pub type LinearTrajectory = trajectory::LinearTrajectory<f64>;
pub type StepTrajectory = trajectory::StepTrajectory<f64>;
pub type Machine = machine::Machine<f64>;
pub type SectionVal = machine::SectionVal<f64>;
pub type Value = machine::Value<f64>;
pub type BehaviorTrace = machine::BehaviorTrace<f64>;
