pub mod certify;
pub mod engine;
pub mod error;
pub mod krylov;
pub mod linalg;
pub mod precond;
pub mod problems;
pub mod projector;
pub mod recruitment;
pub mod spectral;

pub use error::{DfpiError, Result};
