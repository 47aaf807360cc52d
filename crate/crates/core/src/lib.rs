//! Finite-blocklength achievability bounds for the two-receiver Gaussian
//! broadcast channel.

pub mod dt_dpc;
pub mod dt_spc;
pub mod error;
pub mod kappa_beta;
pub mod mc_oracle;
pub mod model;
mod numeric;
pub mod qform;
pub mod specfun;

pub use error::{Error, Result};
