pub mod catalog;
pub mod dimension;
pub mod error;
pub mod linalg;
pub mod learning_degree;
pub mod membership;
pub mod network;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod symtensor;
pub mod training;

pub use error::{PnnError, Result};
pub use network::{Architecture, CoefficientVector, WeightVector};
pub use scalar::{Backend, Fp, Rational, Scalar};
