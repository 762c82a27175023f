use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::algebra::{multi_indices, Multivector, PolyForm};
use crate::complex::Stratification;
use crate::error::{Error, Result};
use crate::quadrature::reference_lattice;
use crate::scalar::{f64_to_q, q_to_f64, Q};

/// A polynomial k-form on every stratum of a stratification.
#[derive(Clone, Debug)]
pub struct StratifiedForm {
    strat: Arc<Stratification>,
    degree: usize,
    components: BTreeMap<String, PolyForm>,
    declared_bound: Option<Q>,
}

impl StratifiedForm {
    /// Every stratum of dimension `≥ degree` needs a component; lower strata
    /// may omit theirs (the restriction is zero there).
    pub fn new(
        strat: Arc<Stratification>,
        degree: usize,
        components: BTreeMap<String, PolyForm>,
    ) -> Result<Self> {
        let n = strat.ambient_dim();
        for (id, f) in &components {
            if strat.get(id).is_none() {
                return Err(Error::Invalid(format!(
                    "form given on unknown stratum `{id}`"
                )));
            }
            if f.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: f.dim(),
                });
            }
            if f.degree() != degree {
                return Err(Error::DegreeMismatch {
                    form: f.degree(),
                    cell: degree,
                });
            }
        }
        for s in strat.strata() {
            if s.dim() >= degree && !components.contains_key(&s.id) {
                return Err(Error::Invalid(format!(
                    "no form given on stratum `{}`",
                    s.id
                )));
            }
        }
        Ok(Self {
            strat,
            degree,
            components,
            declared_bound: None,
        })
    }

    /// The same ambient form on every stratum.
    pub fn global(strat: Arc<Stratification>, form: &PolyForm) -> Result<Self> {
        let comps = strat
            .strata()
            .iter()
            .map(|s| (s.id.clone(), form.clone()))
            .collect();
        Self::new(strat, form.degree(), comps)
    }

    /// Uses the given components and fills every other stratum from the
    /// first higher-dimensional stratum (in id order) it is adjacent to.
    pub fn from_partial(
        strat: Arc<Stratification>,
        degree: usize,
        given: BTreeMap<String, PolyForm>,
    ) -> Result<Self> {
        let mut comps = given;
        // highest dimension first so that fills can chain downward
        let mut order: Vec<usize> = (0..strat.strata().len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(strat.strata()[i].dim()));
        for &i in &order {
            let s = &strat.strata()[i];
            if comps.contains_key(&s.id) || s.dim() < degree {
                continue;
            }
            let donor = strat
                .strata()
                .iter()
                .filter(|t| t.adjacency.contains(&s.id))
                .find_map(|t| comps.get(&t.id).cloned());
            match donor {
                Some(f) => {
                    comps.insert(s.id.clone(), f);
                }
                None => {
                    return Err(Error::Invalid(format!(
                        "no adjacent stratum provides a form for `{}`",
                        s.id
                    )))
                }
            }
        }
        Self::new(strat, degree, comps)
    }

    pub fn with_bound(mut self, bound: Q) -> Self {
        self.declared_bound = Some(bound);
        self
    }

    pub fn declared_bound(&self) -> Option<&Q> {
        self.declared_bound.as_ref()
    }

    pub fn stratification(&self) -> &Arc<Stratification> {
        &self.strat
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn ambient_dim(&self) -> usize {
        self.strat.ambient_dim()
    }

    pub fn component(&self, stratum: &str) -> Option<&PolyForm> {
        self.components.get(stratum)
    }

    /// Component on a stratum, with the zero form for strata too small to
    /// carry one.
    pub fn component_or_zero(&self, stratum: &str) -> PolyForm {
        self.components
            .get(stratum)
            .cloned()
            .unwrap_or_else(|| PolyForm::zero(self.ambient_dim(), self.degree))
    }

    pub fn components(&self) -> &BTreeMap<String, PolyForm> {
        &self.components
    }

    /// Stratum-wise exterior derivative.
    pub fn exterior_derivative(&self) -> StratifiedForm {
        let comps = self
            .components
            .iter()
            .filter(|(id, _)| self.strat.get(id).is_some_and(|s| s.dim() > self.degree))
            .map(|(id, f)| (id.clone(), f.exterior_derivative()))
            .collect();
        StratifiedForm {
            strat: self.strat.clone(),
            degree: self.degree + 1,
            components: comps,
            declared_bound: None,
        }
    }

    pub fn add(&self, other: &StratifiedForm) -> Result<StratifiedForm> {
        if !Arc::ptr_eq(&self.strat, &other.strat) || self.degree != other.degree {
            return Err(Error::Invalid(
                "forms live on different stratifications".into(),
            ));
        }
        let mut comps = self.components.clone();
        for (id, f) in &other.components {
            let sum = match comps.get(id) {
                Some(g) => g.add(f)?,
                None => f.clone(),
            };
            comps.insert(id.clone(), sum);
        }
        Ok(StratifiedForm {
            strat: self.strat.clone(),
            degree: self.degree,
            components: comps,
            declared_bound: None,
        })
    }

    /// Whether every component is closed, exactly.
    pub fn is_closed(&self) -> bool {
        self.exterior_derivative()
            .components
            .values()
            .all(|f| f.is_zero())
    }

    pub fn map_components(&self, f: impl Fn(&str, &PolyForm) -> PolyForm) -> StratifiedForm {
        StratifiedForm {
            strat: self.strat.clone(),
            degree: self.degree,
            components: self
                .components
                .iter()
                .map(|(id, c)| (id.clone(), f(id, c)))
                .collect(),
            declared_bound: None,
        }
    }

    /// Audits the declared bound against [`sup_norm_estimate`].
    pub fn audit_bound(&self, samples: usize) -> Option<BoundAudit> {
        let bound = self.declared_bound.as_ref()?;
        let est = sup_norm_estimate(self, samples);
        let b = q_to_f64(bound);
        Some(BoundAudit {
            pass: est <= b * (1.0 + 1e-12),
            estimate: est,
            bound: b,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundAudit {
    pub pass: bool,
    pub estimate: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuitySample {
    /// `(S', S)` with `S' ≤ S`.
    pub pair: (String, String),
    pub point: Vec<f64>,
    pub multivector: BTreeMap<String, f64>,
    /// `ω_S(p_i; ξ_i)` at the finest approach step.
    pub limit_value: f64,
    /// `ω_{S'}(p; ξ)`.
    pub value: f64,
    pub discrepancy: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityReport {
    pub pass: bool,
    pub max_discrepancy: f64,
    pub tol: f64,
    pub samples: Vec<ContinuitySample>,
}

impl ContinuityReport {
    pub fn worst(&self) -> Option<&ContinuitySample> {
        self.samples
            .iter()
            .max_by(|a, b| a.discrepancy.total_cmp(&b.discrepancy))
    }
}

const APPROACH_STEPS: i32 = 12;

fn orthonormalize(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for e in &out {
            let d: f64 = w.iter().zip(e).map(|(a, b)| a * b).sum();
            w.iter_mut().zip(e).for_each(|(a, b)| *a -= d * b);
        }
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-14 {
            out.push(w.iter().map(|x| x / n).collect());
        }
    }
    out
}

/// Orthogonal projection of `v` onto the column span of `cols`.
fn project_onto(cols: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let basis = orthonormalize(cols);
    let mut out = vec![0.0; v.len()];
    for e in &basis {
        let d: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
        out.iter_mut().zip(e).for_each(|(o, b)| *o += d * b);
    }
    out
}

fn columns(jac: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|j| jac.iter().map(|row| row[j]).collect())
        .collect()
}

/// Audits the closed-graph condition on adjacency pairs `S' ≤ S`: the values
/// of `ω_S` along sequences `p_i → p ∈ S'` with tangent multivectors
/// `ξ_i → ξ ∈ ∧^k T_p S'` must converge to `ω_{S'}(p; ξ)`.
///
/// Components are polynomials, so the limit of `ω_S` is its value at `p`;
/// `ξ` is the wedge of the projections of an orthonormal frame of `T_p S'`
/// onto the tangent plane of `S` at `p` (or at a point `2^{-12}` inside along
/// the reference barycentre direction when the parametrization degenerates
/// at `p`).
pub fn check_graph_closed(
    omega: &StratifiedForm,
    pairs: Option<&[(String, String)]>,
    samples: usize,
    tol: f64,
) -> Result<ContinuityReport> {
    let strat = omega.stratification();
    let k = omega.degree();
    let n = strat.ambient_dim();
    let all_pairs: Vec<(String, String)> = match pairs {
        Some(p) => p.to_vec(),
        None => strat
            .strata()
            .iter()
            .flat_map(|s| s.adjacency.iter().map(move |a| (a.clone(), s.id.clone())))
            .collect(),
    };
    let mut out = Vec::new();
    for (lo_id, hi_id) in &all_pairs {
        let lo = strat
            .get(lo_id)
            .ok_or_else(|| Error::Invalid(format!("unknown stratum `{lo_id}`")))?;
        let hi = strat
            .get(hi_id)
            .ok_or_else(|| Error::Invalid(format!("unknown stratum `{hi_id}`")))?;
        if !hi.adjacency.contains(lo_id) {
            return Err(Error::Invalid(format!(
                "`{lo_id}` is not adjacent to `{hi_id}`"
            )));
        }
        if lo.dim() < k {
            continue;
        }
        let w_lo = omega.component_or_zero(lo_id);
        let w_hi = omega.component_or_zero(hi_id);
        let d_lo = lo.dim();
        let d_hi = hi.dim();
        for u in reference_lattice(lo.cell.kind, d_lo, samples, false) {
            let p = lo.cell.eval(&u);
            let frame = if d_lo == 0 {
                vec![]
            } else {
                let j = lo.cell.float_map().jacobian(&u);
                let cols = columns(&j, d_lo);
                let f = orthonormalize(&cols);
                if f.len() < d_lo {
                    return Err(Error::NoTangentData(lo_id.clone()));
                }
                f
            };
            let (ustar, dist) = hi.cell.closest_point(&p);
            if dist > 1e-7 {
                return Err(Error::Invalid(format!(
                    "point {p:?} of `{lo_id}` is not in the closure of `{hi_id}`"
                )));
            }
            let c = hi.cell.reference_center();
            let t = 2f64.powi(-APPROACH_STEPS);
            let ui: Vec<f64> = ustar.iter().zip(&c).map(|(a, b)| a + t * (b - a)).collect();
            let hi_cols = if d_hi == 0 {
                vec![]
            } else {
                let j = hi.cell.float_map().jacobian(&ustar);
                let cols = columns(&j, d_hi);
                if orthonormalize(&cols).len() == d_hi {
                    cols
                } else {
                    let j = hi.cell.float_map().jacobian(&ui);
                    let cols = columns(&j, d_hi);
                    if orthonormalize(&cols).len() < d_hi {
                        return Err(Error::NoTangentData(hi_id.clone()));
                    }
                    cols
                }
            };
            for idx in multi_indices(d_lo, k) {
                let vs: Vec<Vec<f64>> = idx.iter().map(|&i| frame[i].clone()).collect();
                let xi = Multivector::from_vectors(n, &vs);
                let vs_i: Vec<Vec<f64>> = vs.iter().map(|v| project_onto(&hi_cols, v)).collect();
                let xi_i = Multivector::from_vectors(n, &vs_i);
                let value = w_lo.evaluate(&p, &xi)?;
                let limit_value = w_hi.evaluate(&p, &xi_i)?;
                out.push(ContinuitySample {
                    pair: (lo_id.clone(), hi_id.clone()),
                    point: p.clone(),
                    multivector: xi
                        .components()
                        .iter()
                        .map(|(i, v)| (format!("{i:?}"), *v))
                        .collect(),
                    limit_value,
                    value,
                    discrepancy: (limit_value - value).abs(),
                });
            }
        }
    }
    let max = out.iter().map(|s| s.discrepancy).fold(0.0, f64::max);
    Ok(ContinuityReport {
        pass: max <= tol,
        max_discrepancy: max,
        tol,
        samples: out,
    })
}

/// Exact Gram–Schmidt (without normalization) over the rationals.
fn rational_orthogonal(vectors: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let mut out: Vec<Vec<Q>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for e in &out {
            let ee: Q = e.iter().map(|x| x * x).sum();
            let d: Q = w.iter().zip(e).map(|(a, b)| a * b).sum();
            let f = d / ee;
            for (a, b) in w.iter_mut().zip(e) {
                *a = &*a - &f * b;
            }
        }
        if w.iter().any(|x| !x.is_zero()) {
            out.push(w);
        }
    }
    out
}

fn norm_q(v: &[Q]) -> f64 {
    v.iter().map(|x| q_to_f64(&(x * x))).sum::<f64>().sqrt()
}

/// Lower bound for `sup |ω_S|` (comass over unit simple multivectors tangent
/// to each stratum), sampled on closed lattices of every stratum.
pub fn sup_norm_estimate(omega: &StratifiedForm, samples: usize) -> f64 {
    let strat = omega.stratification();
    let k = omega.degree();
    let n = strat.ambient_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut best: f64 = 0.0;
    for s in strat.strata() {
        let Some(w) = omega.component(&s.id) else {
            continue;
        };
        let d = s.dim();
        if d < k || w.is_zero() {
            continue;
        }
        for u in reference_lattice(s.cell.kind, d, samples, true) {
            let uq: Vec<Q> = u.iter().map(|&x| f64_to_q(x)).collect();
            let x: Vec<Q> = s.cell.map.eval(&uq);
            let jac = s.cell.map.jacobian_at(&uq);
            let cols: Vec<Vec<Q>> = (0..d)
                .map(|j| jac.iter().map(|r| r[j].clone()).collect())
                .collect();
            let frame = rational_orthogonal(&cols);
            if k == 0 {
                best = best.max(q_to_f64(&w.coeff(&[]).eval(&x)).abs());
                continue;
            }
            // exact values on elementary wedges of the orthogonal frame
            let mut vals = Vec::new();
            for idx in multi_indices(frame.len(), k) {
                let vs: Vec<Vec<Q>> = idx.iter().map(|&i| frame[i].clone()).collect();
                let num = w
                    .evaluate(&x, &Multivector::from_vectors(n, &vs))
                    .expect("shapes agree");
                let den: f64 = vs.iter().map(|v| norm_q(v)).product();
                vals.push(q_to_f64(&num) / den);
            }
            if k == 1 {
                // the covector restricted to T_x S has norm sqrt(Σ vals²)
                best = best.max(vals.iter().map(|v| v * v).sum::<f64>().sqrt());
            } else {
                best = vals.iter().fold(best, |m, v| m.max(v.abs()));
                if k < frame.len() {
                    let xf: Vec<f64> = x.iter().map(q_to_f64).collect();
                    let ff: Vec<Vec<f64>> = frame
                        .iter()
                        .map(|v| {
                            let nv = norm_q(v);
                            v.iter().map(|c| q_to_f64(c) / nv).collect()
                        })
                        .collect();
                    for _ in 0..16 {
                        let vs: Vec<Vec<f64>> = (0..k)
                            .map(|_| {
                                let coef: Vec<f64> =
                                    (0..ff.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                                (0..n)
                                    .map(|r| ff.iter().zip(&coef).map(|(f, c)| f[r] * c).sum())
                                    .collect()
                            })
                            .collect();
                        let on = orthonormalize(&vs);
                        if on.len() < k {
                            continue;
                        }
                        let v = w
                            .evaluate(&xf, &Multivector::from_vectors(n, &on))
                            .expect("shapes agree");
                        best = best.max(v.abs());
                    }
                }
            }
        }
    }
    best
}
