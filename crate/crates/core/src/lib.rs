//! Reduced Lagrange-Poincare dynamics of a serial manipulator on a free-floating
//! spacecraft in an elliptical orbit, with closed-form Keplerian forcing.
//!
//! Every module is generic over the scalar type; `f64` aliases are provided at
//! the crate root.

pub mod dynamics;
pub mod kinematics;
pub mod liegroup;
pub mod orbit;
pub mod scalar;
pub mod sim;

pub use scalar::Real;

pub type Twist = liegroup::Twist<f64>;
pub type Wrench = liegroup::Wrench<f64>;
pub type PoseSE3 = liegroup::PoseSE3<f64>;
pub type PoseSE2 = liegroup::PoseSE2<f64>;
pub type OrbitModel = orbit::OrbitModel<f64>;
pub type ChainModel = kinematics::ChainModel<f64>;
pub type Body = kinematics::Body<f64>;
pub type ReducedState = dynamics::ReducedState<f64>;
pub type InputWrenches = dynamics::InputWrenches<f64>;
pub type SimConfig = sim::SimConfig<f64>;
pub type RunRecord = sim::RunRecord<f64>;
