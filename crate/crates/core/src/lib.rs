//! Thermodynamics of quantum-jump trajectories under imperfect detection.

pub mod conditioning;
pub mod error;
pub mod operators;
pub mod propagators;
pub mod records;
pub mod scalar;
pub mod thermo;
pub mod trajectories;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision aliases.
pub type Model = operators::Model<f64>;
pub type Channel = operators::Channel<f64>;
pub type Protocol = operators::Protocol<f64>;
pub type MeasurementBasis = operators::MeasurementBasis<f64>;
pub type TwoLevelParams = operators::TwoLevelParams<f64>;
pub type Propagators = propagators::Propagators<f64>;
pub type JumpEvent = records::JumpEvent<f64>;
pub type Record = records::Record<f64>;
pub type FullRecord = records::FullRecord<f64>;
pub type VisibleRecord = records::VisibleRecord<f64>;
pub type HiddenRecord = records::HiddenRecord<f64>;
pub type TrajectoryContext = trajectories::TrajectoryContext<f64>;
pub type ThermoBreakdown = thermo::ThermoBreakdown<f64>;
pub type ConditionalEnsemble = thermo::ConditionalEnsemble<f64>;
pub type Enumeration = conditioning::Enumeration<f64>;
