//! Cascaded cavity-QED simulator for motional state transfer between trapped
//! atoms, and an exact engine for the delocalised-state preparation protocols
//! built on it.
//!
//! * [`hilbert`]: truncated Fock spaces, sparse operators, states.
//! * [`dynamics`]: adaptive Lindblad integrator, cascaded and cavity-retained models.
//! * [`transfer`]: pulse schedules, rate formulas, transfer experiments.
//! * [`protocol`]: symbolic kets over coherent/Fock labels with exact overlaps.
//! * [`validity`]: parameter-regime checks.
//!
//! Numerical types are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

// NaN must fail domain checks, so `!(x > 0)` is intentional throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod protocol;
pub mod scalar;
pub mod transfer;
pub mod validity;

pub use error::{Error, Result};

/// Library version, recorded in result provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use scalar::Real;

pub type Complex = num_complex::Complex<f64>;
pub type Operator = hilbert::Operator<f64>;
pub type StateVector = hilbert::StateVector<f64>;
pub type DensityOperator = hilbert::DensityOperator<f64>;
pub type LindbladModel = dynamics::LindbladModel<f64>;
pub type IntegratorConfig = dynamics::IntegratorConfig<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
pub type PulseSchedule = transfer::PulseSchedule<f64>;
pub type PhysicalParams = transfer::PhysicalParams<f64>;
pub type TransferReport = transfer::TransferReport<f64>;
pub type MotionalLabel = protocol::MotionalLabel<f64>;
pub type SymbolicKet = protocol::SymbolicKet<f64>;
pub type ProtocolResult = protocol::ProtocolResult<f64>;
pub use validity::RegimeReport;

pub type StateVector32 = hilbert::StateVector<f32>;
pub type DensityOperator32 = hilbert::DensityOperator<f32>;
pub type SymbolicKet32 = protocol::SymbolicKet<f32>;

