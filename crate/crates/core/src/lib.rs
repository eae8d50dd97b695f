pub mod error;
pub mod experiments;
pub mod linalg;
pub mod norm;
pub mod certificate;
pub mod cli;
pub mod solver;
pub mod stability;

pub use error::{Error, LinalgError, RegimeViolation, Result};
pub use linalg::Matrix;
pub use norm::NormIndex;
