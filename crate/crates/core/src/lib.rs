//! Exact and numerical tools for Riesz-product witnesses showing that
//! `||D^{alpha_1} f||_1` is not dominated by the other derivatives of an
//! arithmetic family of multiindices on the 2-torus.

pub mod certify;
pub mod error;
pub mod exact;
pub mod frequency;
pub mod growth;
pub mod hypothesis;
pub mod norm;
pub mod report;
pub mod riesz;

pub use error::{Error, Result};
pub use exact::{LatticeVector, MultiIndex, Rational};
