//! Learning-based topology identification and state estimation for
//! unbalanced, sparsely metered distribution feeders.

pub mod error;
pub mod estimators;
pub mod feeder;
pub mod fixtures;
pub mod loadmodel;
pub mod lse;
pub mod measerr;
pub mod nn;
pub mod phasor;
pub mod placement;
pub mod powerflow;
pub mod rng;
pub mod smd;

pub use error::{Error, Result};
pub use phasor::Phasor;
