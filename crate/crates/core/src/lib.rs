pub mod bifurcation;
pub mod criticality;
pub mod dynamics;
pub mod error;
pub mod freqdist;
pub mod graphon;
pub mod meanfield;
pub mod quadrature;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
