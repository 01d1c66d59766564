//! Multi-order two-scale expansions of `dX/dt = a(t,(t−s)/ε,X) + b(t,X)/ε`.
//!
//! The averaging engine builds the non-oscillating systems for `Y⁰ … Y^k`
//! from any [`TwoScaleSystem`]; [`regimes`] adds closed forms for four
//! charged-particle regimes; [`harness`] measures convergence orders against
//! a stiff reference solve.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`). The aliases below
//! fix the scalar to `f64`.

// Guards are written `!(x > 0)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod scalar;
pub mod averaging;
pub mod field;
pub mod integrate;
pub mod reconstruct;
pub mod regimes;
pub mod harness;

pub use averaging::{Alpha2Route, AveragingEngine, FdConfig, LocalExpansion, StateStack};
pub use error::{Error, Result};
pub use field::{ElectricField, WaveComponent, WaveField};
pub use harness::{
    crosscheck, fit_slope, run_convergence, sup_error, ConvergenceReport, CrosscheckReport, SweepOptions,
};
pub use integrate::{solve_hierarchy, solve_reference, AveragedHierarchy, TimeGrid, TrajectoryBundle};
pub use model::{PeriodicFlow, PhaseState, TwoScaleSystem};
pub use quadrature::QuadratureConfig;
pub use reconstruct::{expansion_sum, reconstruct_x, transported_density, ExpansionModel, GenericModel};
pub use regimes::{ClosedFormModel, Regime, RegimeKind};
pub use scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Engine = averaging::AveragingEngine<f64>;
pub type Stack = averaging::StateStack<f64>;
pub type Grid = integrate::TimeGrid<f64>;
pub type Hierarchy = integrate::AveragedHierarchy<f64>;
pub type Bundle = integrate::TrajectoryBundle<f64>;
pub type Generic = reconstruct::GenericModel<f64>;
pub type ClosedForm = regimes::ClosedFormModel<f64>;
pub type Regime64 = regimes::Regime<f64>;
pub type Field = field::WaveField<f64>;
