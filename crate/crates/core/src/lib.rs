//! Finite-strain viscoelasticity with an evolving natural configuration.
//!
//! The model stores energy in two neo-Hookean springs (`B_p` and `B_G`) and
//! dissipates through the rate of the natural configuration. This crate
//! provides the tensor kernel, a general material-point integrator, the
//! scalar creep/recovery simulator used for uniaxial tests, and a
//! derivative-free fitter for creep data.

// `!(x > 0.0)` is used on purpose so NaN lands on the error path
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataio;
pub mod evolution;
pub mod exec;
pub mod fitting;
pub mod kinematics;
pub mod material;
pub mod odesolve;
pub mod tensors;
pub mod uniaxial;
pub mod validate;

pub use exec::Execution;
pub use material::MaterialParams;
