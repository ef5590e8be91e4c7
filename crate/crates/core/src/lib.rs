//! Multiplicative finite-strain viscoplasticity with implicit integrators
//! for the inelastic right Cauchy-Green tensor `Ci`.
//!
//! The three integrators ([`IntegratorKind`]) differ in how they treat the
//! constraint `det Ci = 1`. Only the schemes that keep it exactly
//! avoid a slow build-up of error along long loading programs; the
//! [`stability`] module provides the tools to quantify why.
//!
//! ```
//! use viscoflow::{integrate, paper_loading, IntegratorKind, MaterialParams, SymTensor3};
//!
//! let traj = integrate(
//!     &paper_loading(),
//!     &MaterialParams::TABLE1,
//!     IntegratorKind::Mebm,
//!     1.0,
//!     300.0,
//!     &SymTensor3::identity(),
//! )
//! .unwrap();
//! assert_eq!(traj.len(), 301);
//! assert!(traj.det_ci.iter().all(|d| (d - 1.0).abs() < 1e-11));
//! ```

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod integrators;
pub mod loading;
pub mod material;
pub mod stability;
pub mod tensor;
pub mod trajectory;

pub use error::{Error, Result};
pub use integrators::{integrate, solve_step, IntegratorKind, StepProblem, StepSolution};
pub use loading::{paper_loading, LoadingProgram};
pub use material::MaterialParams;
pub use tensor::{SymTensor3, Tensor3};
pub use trajectory::Trajectory;
