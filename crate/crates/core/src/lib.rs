//! Sparse, precision-optimal robust H-infinity observer design.
//!
//! Observers are synthesized from linear matrix inequalities solved as
//! semidefinite programs inside a reweighted l1 loop over the sensor
//! precisions, then certified against sampled admissible uncertainty.

pub mod analysis;
pub mod cli;
pub mod design;
pub mod error;
pub mod linalg;
pub mod lmi;
pub mod sdp;
pub mod smd;
pub mod system_model;

pub use error::{Error, Result};
