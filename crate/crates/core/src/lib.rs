//! Hybridizable discontinuous Galerkin solver for fifth-order KdV-type
//! equations
//!
//! ```text
//! u_t + alpha u_xxx + beta u_xxxxx + F(u)_x = f,   beta < 0,
//! ```
//!
//! rewritten as the first-order system `q = u_x, p = q_x, r = p_x, s = r_x`.

pub mod banded;
pub mod basis;
pub mod cli;
pub mod custom;
pub mod error;
pub mod global;
pub mod local;
pub mod mesh;
pub mod problem;
pub mod stabilization;
pub mod time;
pub mod verification;

pub use error::{HdgError, Result};
