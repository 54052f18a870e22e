//! Running fixed-point iterations of time-varying averaged operators.
//!
//! A time-varying convex program is sampled at discrete times; each sample
//! defines an averaged operator whose fixed points are the sample's
//! solutions, and the running algorithm applies one operator per sample.

pub mod error;
pub mod analysis;
pub mod functions;
pub mod linalg;
pub mod operators;
pub mod oracle;
pub mod problems;
pub mod running;

pub use error::{Error, Result};
pub use operators::Vector;
