//! Quadrature on reference simplices and boxes; integration of forms over
//! parametrized cells and chains.

mod cell;
mod integrate;
mod rules;

pub use cell::{
    facet_count, facet_inclusion, project_to_simplex, reference_lattice, shrink_map, CellCatalogue,
    ParametrizedCell,
};
pub use integrate::{
    assign_chain, default_eps_seq, integrate_cell, integrate_cell_exact, integrate_cell_order,
    integrate_chain, integrate_stratified, integrate_stratified_exact, required_order,
    stokes_residual, AssignedPiece, EpsResidual, ResidualReport,
};
pub use rules::{
    cached_rule, exact_monomial_integral, gauss_jacobi_unit, points_for_order, DomainKind,
    QuadratureRule,
};
