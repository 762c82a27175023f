//! Simplicial complexes, chains and stratifications.

mod chain;
mod simplicial;
mod strata;

pub use chain::{boundary, Chain};
pub use simplicial::{simplex_id, Simplex, SimplicialComplex};
pub use strata::{
    interior_samples, refine_common, validate_frontier, FrontierReport, FrontierSample,
    Stratification, Stratum,
};
