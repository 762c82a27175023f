//! Stratified differential forms with polynomial coefficients.
//!
//! The crate provides exact exterior algebra over rational polynomials,
//! integration over parametrized cells and chains, simplicial cohomology,
//! Whitney elementary forms, homotopy operators for cone and lifted
//! retractions, and mollifier smoothing of grid-sampled forms.

pub mod cohomology;
pub mod complex;
pub mod error;
pub mod fixtures;
pub mod forms;
pub mod homotopy;
pub mod linalg;
pub mod poly;
pub mod quadrature;
pub mod scalar;
pub mod smoothing;
pub mod whitney;

pub use error::{Error, Result};
pub use poly::Polynomial;
pub use scalar::Q;
