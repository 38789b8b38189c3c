pub mod cli;
pub mod coupled;
pub mod error;
pub mod functions;
pub mod linalg;
pub mod mesh;
pub mod plate;
pub mod quadrature;
pub mod stokes;
pub mod verification;

pub use error::{Error, Result};
