//! Partial-wave phase shifts by the variable phase method.
// `!(x > 0.0)` guards are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod absolute;
pub mod error;
pub mod iterate;
pub mod observables;
pub mod ode;
pub mod potentials;
pub mod quad;
pub mod phasefunc;
pub mod radial;
pub mod specfun;
pub mod validation;

pub use error::{Error, Result};
