//! Bergman geodesics and Monge–Ampère geodesics for S¹-invariant metrics on
//! the line bundle O(1) → P¹.

// negated float comparisons are deliberate so that NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bergman;
pub mod error;
pub mod exec;
pub mod hmae;
pub mod legendre;
pub mod oracle;
pub mod path;
pub mod potential;
pub mod quadrature;

pub use error::{Error, Result};
pub use exec::Exec;
