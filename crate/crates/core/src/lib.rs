//! Probabilistic low-cycle-fatigue life and discrete-adjoint shape gradients
//! for 3D linear elastic components.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod export;
pub mod fem;
pub mod lcf;
pub mod field;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod sensitivity;
pub mod surrogate;
pub mod validation;

pub use error::{Error, Result};
pub use field::NodalField;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
