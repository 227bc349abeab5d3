//! Online proximal method of multipliers with quadratic approximations for
//! online optimization under long-term constraints.
//!
//! Each round the learner commits `x^{t+1}` from a proximal augmented
//! Lagrangian step on quadratic surrogates of the revealed loss and the
//! constraints, then updates the multipliers and only afterwards sees the
//! next loss.

pub mod dual;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod opmm;
pub mod oracle;
pub mod pgd;

pub use error::{Error, Result};
