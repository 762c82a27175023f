//! Differential forms with polynomial coefficients, and stratified forms.

mod algebra;
mod stratified;

pub use algebra::{
    component_label, multi_indices, parse_component_label, sort_with_sign, FloatMap, MultiIndex,
    Multivector, PolyForm, PolyMap,
};
pub use stratified::{
    check_graph_closed, sup_norm_estimate, BoundAudit, ContinuityReport, ContinuitySample,
    StratifiedForm,
};
