pub mod density;
pub mod cli;
pub mod cubature;
pub mod divergence;
pub mod error;
pub mod family;
pub mod harness;
pub mod math;
pub mod optimize;
pub mod posterior;
pub mod quadrature;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
