//! Signatures of piecewise-linear and Brownian paths, Cartan development into
//! hyperbolic space, and estimators for the normalized tail asymptotics of
//! the Brownian signature.

pub mod asymptotics;
pub mod brownian;
pub mod error;
pub mod hyperbolic;
pub mod path;
pub mod rng;
pub mod signature;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{NormKind, Permutation, TruncatedTensorSeries};
