//! Integration of forms over cells and chains, and Stokes residuals.

use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use super::cell::{facet_inclusion, shrink_map, CellCatalogue, ParametrizedCell};
use super::rules::{cached_rule, exact_monomial_integral, QuadratureRule};
use crate::complex::{boundary, Chain, Stratification};
use crate::error::{Error, Result};
use crate::forms::{PolyForm, StratifiedForm};
use crate::scalar::{f64_to_q, q_to_f64, qi, Q};

/// Top coefficient of `σ*ω` on the reference domain, times orientation.
fn pulled_density(omega: &PolyForm, cell: &ParametrizedCell) -> Result<crate::poly::Polynomial> {
    if omega.degree() != cell.dim() {
        return Err(Error::DegreeMismatch {
            form: omega.degree(),
            cell: cell.dim(),
        });
    }
    if omega.dim() != cell.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: cell.ambient_dim(),
            found: omega.dim(),
        });
    }
    let pulled = omega.pullback(&cell.map)?;
    Ok(pulled.top_coefficient().scale(&qi(cell.orientation as i64)))
}

/// `∫_σ ω` by the given rule, which must match the cell's reference domain.
pub fn integrate_cell(
    omega: &PolyForm,
    cell: &ParametrizedCell,
    rule: &QuadratureRule,
) -> Result<f64> {
    if rule.kind != cell.kind || rule.dim != cell.dim() {
        return Err(Error::Invalid(format!(
            "rule for {:?}^{} used on cell `{}`",
            rule.kind, rule.dim, cell.id
        )));
    }
    let density = pulled_density(omega, cell)?.to_float();
    Ok(rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(u, w)| w * density.eval(u))
        .sum())
}

/// `∫_σ ω` with the shared rule of the given order.
pub fn integrate_cell_order(
    omega: &PolyForm,
    cell: &ParametrizedCell,
    order: usize,
) -> Result<f64> {
    let rule = cached_rule(cell.kind, cell.dim(), order);
    integrate_cell(omega, cell, &rule)
}

/// `∫_σ ω` exactly, from exact monomial integrals over the reference domain.
pub fn integrate_cell_exact(omega: &PolyForm, cell: &ParametrizedCell) -> Result<Q> {
    let density = pulled_density(omega, cell)?;
    let mut acc = Q::zero();
    for (e, c) in density.terms() {
        acc += c * exact_monomial_integral(cell.kind, e);
    }
    Ok(acc)
}

/// Quadrature order that integrates `σ*ω` exactly.
pub fn required_order(omega: &PolyForm, cell: &ParametrizedCell) -> usize {
    let md = cell.map.degree() as usize;
    omega.coefficient_degree() as usize * md + omega.degree() * md.saturating_sub(1)
}

/// `Σ_j a_j ∫_{σ_j} ω` for a polynomial form; cells come from `cat`.
pub fn integrate_chain(
    omega: &PolyForm,
    c: &Chain,
    cat: &CellCatalogue,
    order: usize,
) -> Result<f64> {
    let vals: Vec<Result<f64>> = c
        .terms()
        .par_iter()
        .map(|(id, a)| {
            let cell = cat.get(id)?;
            Ok(q_to_f64(a) * integrate_cell_order(omega, cell, order)?)
        })
        .collect();
    // deterministic order of summation
    let mut acc = 0.0;
    for v in vals {
        acc += v?;
    }
    Ok(acc)
}

/// A piece of a chain assigned to one stratum.
#[derive(Clone, Debug)]
pub struct AssignedPiece {
    pub cell: ParametrizedCell,
    pub coefficient: Q,
    pub stratum: String,
}

/// Resolves the cells of `c` into pieces lying in single strata: a cell is
/// assigned by id (stratum cell or support cell), then through a registered
/// refinement, then by classifying interior samples.
pub fn assign_chain(
    c: &Chain,
    cat: &CellCatalogue,
    strat: &Stratification,
) -> Result<Vec<AssignedPiece>> {
    let owners = strat.support_owners()?;
    let mut out = Vec::new();
    for (id, a) in c.terms() {
        assign_cell(id, a.clone(), cat, strat, &owners, &mut out, 0)?;
    }
    Ok(out)
}

fn lookup<'a>(
    id: &str,
    cat: &'a CellCatalogue,
    strat: &'a Stratification,
) -> Result<&'a ParametrizedCell> {
    match cat.get(id) {
        Ok(c) => Ok(c),
        Err(e) => strat
            .catalogue()
            .get(id)
            .or_else(|_| strat.get(id).map(|s| &s.cell).ok_or(e)),
    }
}

fn assign_cell(
    id: &str,
    a: Q,
    cat: &CellCatalogue,
    strat: &Stratification,
    owners: &std::collections::BTreeMap<String, usize>,
    out: &mut Vec<AssignedPiece>,
    depth: usize,
) -> Result<()> {
    if depth > 32 {
        return Err(Error::Invalid(format!(
            "refinement of `{id}` does not terminate"
        )));
    }
    let cell = lookup(id, cat, strat)?;
    if let Some(s) = strat.get(id) {
        if s.cell.map == cell.map {
            out.push(AssignedPiece {
                cell: cell.clone(),
                coefficient: a,
                stratum: s.id.clone(),
            });
            return Ok(());
        }
    }
    if let Some(&i) = owners.get(id) {
        out.push(AssignedPiece {
            cell: cell.clone(),
            coefficient: a,
            stratum: strat.strata()[i].id.clone(),
        });
        return Ok(());
    }
    let refinement = cat
        .refinement(id)
        .or_else(|| strat.catalogue().refinement(id));
    if let Some(pieces) = refinement {
        for (p, s) in pieces {
            assign_cell(p, &a * qi(*s as i64), cat, strat, owners, out, depth + 1)?;
        }
        return Ok(());
    }
    let mut found: Option<usize> = None;
    for u in crate::complex::interior_samples(cell, 16) {
        let x = cell.eval(&u);
        match strat.classify(&x, 1e-9) {
            Some(i) if found.is_none() || found == Some(i) => found = Some(i),
            _ => return Err(Error::StratumStraddle(id.to_string())),
        }
    }
    match found {
        Some(i) => {
            out.push(AssignedPiece {
                cell: cell.clone(),
                coefficient: a,
                stratum: strat.strata()[i].id.clone(),
            });
            Ok(())
        }
        None => Err(Error::StratumStraddle(id.to_string())),
    }
}

fn integrate_pieces(omega: &StratifiedForm, pieces: &[AssignedPiece], order: usize) -> Result<f64> {
    let vals: Vec<Result<f64>> = pieces
        .par_iter()
        .map(|p| {
            let w = omega.component_or_zero(&p.stratum);
            Ok(q_to_f64(&p.coefficient) * integrate_cell_order(&w, &p.cell, order)?)
        })
        .collect();
    let mut acc = 0.0;
    for v in vals {
        acc += v?;
    }
    Ok(acc)
}

/// `∫_c ω` for a stratified form: every cell is integrated against the
/// component of the stratum it lies in.
pub fn integrate_stratified(
    omega: &StratifiedForm,
    c: &Chain,
    cat: &CellCatalogue,
    order: usize,
) -> Result<f64> {
    let pieces = assign_chain(c, cat, omega.stratification())?;
    integrate_pieces(omega, &pieces, order)
}

/// Exact counterpart of [`integrate_stratified`].
pub fn integrate_stratified_exact(
    omega: &StratifiedForm,
    c: &Chain,
    cat: &CellCatalogue,
) -> Result<Q> {
    let pieces = assign_chain(c, cat, omega.stratification())?;
    let mut acc = Q::zero();
    for p in &pieces {
        let w = omega.component_or_zero(&p.stratum);
        acc += &p.coefficient * integrate_cell_exact(&w, &p.cell)?;
    }
    Ok(acc)
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsResidual {
    pub eps: f64,
    /// `|Σ ∫_{P_ε} dω − Σ ∫_{∂P_ε} ω|` over the shrunk pieces.
    pub residual: f64,
    /// `|Σ ∫_{∂P_ε} ω − ∫_{∂σ} ω|`, which tends to 0 with ε.
    pub boundary_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub pass: bool,
    pub tol: f64,
    pub integral_d_omega: f64,
    pub integral_boundary: f64,
    pub limit_residual: f64,
    pub per_eps: Vec<EpsResidual>,
    pub cells: Vec<(String, String, f64)>,
}

/// Default shrink sequence `2^{-1}, …, 2^{-8}`.
pub fn default_eps_seq() -> Vec<f64> {
    (1..=8).map(|i| 2f64.powi(-i)).collect()
}

/// Stokes residuals for a stratified `(k−1)`-form over a chain of `k`-cells.
/// Each piece of the chain (after assignment to strata) is shrunk toward its
/// reference barycentre by `1 − ε`.
pub fn stokes_residual(
    omega: &StratifiedForm,
    sigma: &Chain,
    cat: &CellCatalogue,
    order: usize,
    eps_seq: &[f64],
    tol: f64,
) -> Result<ResidualReport> {
    let k = sigma.degree();
    if omega.degree() + 1 != k {
        return Err(Error::DegreeMismatch {
            form: omega.degree() + 1,
            cell: k,
        });
    }
    let strat = omega.stratification();
    let d_omega = omega.exterior_derivative();
    let pieces = assign_chain(sigma, cat, strat)?;
    let mut cells = Vec::new();
    let mut int_d = 0.0;
    for p in &pieces {
        let w = d_omega.component_or_zero(&p.stratum);
        let v = q_to_f64(&p.coefficient) * integrate_cell_order(&w, &p.cell, order)?;
        cells.push((p.cell.id.clone(), p.stratum.clone(), v));
        int_d += v;
    }
    let mut merged = CellCatalogue::new();
    for c in cat.cells().chain(strat.catalogue().cells()) {
        if !merged.contains(&c.id) {
            merged.insert(c.clone());
        }
    }
    for (id, r) in cat.refinements().chain(strat.catalogue().refinements()) {
        if merged.refinement(id).is_none() {
            merged.register_refinement(id, r.clone())?;
        }
    }
    let bd = boundary(sigma, &merged)?;
    let int_bd = integrate_stratified(omega, &bd, &merged, order)?;
    let limit = (int_d - int_bd).abs();

    let mut per_eps = Vec::new();
    for &eps in eps_seq {
        let e = f64_to_q(eps);
        let mut interior = 0.0;
        let mut shell = 0.0;
        for p in &pieces {
            let kdim = p.cell.dim();
            let shrink = shrink_map(p.cell.kind, kdim, &e);
            let map = p.cell.map.compose(&shrink)?;
            let shrunk =
                ParametrizedCell::new(format!("{}@{eps}", p.cell.id), p.cell.kind, map.clone())
                    .with_orientation(p.cell.orientation);
            let a = q_to_f64(&p.coefficient);
            let w = omega.component_or_zero(&p.stratum);
            let dw = d_omega.component_or_zero(&p.stratum);
            interior += a * integrate_cell_order(&dw, &shrunk, order)?;
            for f in 0..shrunk.num_facets() {
                let (inc, sign) = facet_inclusion(p.cell.kind, kdim, f);
                let fmap = map.compose(&inc)?;
                let fc = ParametrizedCell::new("facet", p.cell.kind, fmap)
                    .with_orientation(sign * p.cell.orientation);
                shell += a * integrate_cell_order(&w, &fc, order)?;
            }
        }
        per_eps.push(EpsResidual {
            eps,
            residual: (interior - shell).abs(),
            boundary_gap: (shell - int_bd).abs(),
        });
    }
    let scale = int_d.abs().max(int_bd.abs()).max(1.0);
    let noise = 1e-12 * scale;
    let monotone = per_eps
        .windows(2)
        .all(|w| w[1].residual <= w[0].residual + noise);
    Ok(ResidualReport {
        pass: limit <= tol && monotone,
        tol,
        integral_d_omega: int_d,
        integral_boundary: int_bd,
        limit_residual: limit,
        per_eps,
        cells,
    })
}
