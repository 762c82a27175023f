//! Retractions (cones and lifts over graph/band cells), the homotopy
//! operator `K ω = ∫₀¹ β dt` and the audits of the retraction contract.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::complex::{interior_samples, Stratification};
use crate::error::{Error, Result};
use crate::forms::{
    check_graph_closed, multi_indices, ContinuityReport, MultiIndex, PolyForm, PolyMap,
    StratifiedForm,
};
use crate::poly::Polynomial;
use crate::quadrature::{cached_rule, reference_lattice, DomainKind};
use crate::scalar::{f64_to_q, qi, Scalar, Q};

/// Central finite-difference step for spatial differentials.
pub const FD_STEP: f64 = 1e-5;

/// A delimiting function `θ` over the base.
#[derive(Clone, Debug, PartialEq)]
pub enum Delimiter {
    Poly(Polynomial),
    /// `below` where `x[axis] ≤ at`, `above` elsewhere.
    Step {
        axis: usize,
        at: Q,
        below: Polynomial,
        above: Polynomial,
    },
}

impl Delimiter {
    pub fn eval<S: Scalar>(&self, x: &[S]) -> S {
        match self {
            Delimiter::Poly(p) => p.eval(x),
            Delimiter::Step {
                axis,
                at,
                below,
                above,
            } => {
                if x[*axis].as_f64() <= at.as_f64() {
                    below.eval(x)
                } else {
                    above.eval(x)
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LiftCell {
    Graph,
    Band,
}

/// Where `r_0` lands.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Point(Vec<Q>),
    Strata(Vec<String>),
}

#[derive(Clone, Debug)]
pub enum RetractionKind {
    /// `r(x, t)` given by a polynomial map of `(x, t)`; `t` is the last
    /// variable.
    Polynomial(PolyMap),
    /// `r(q,t) = (r'(x,t), τ(q) θ_hi(r'(x,t)) + (1 − τ(q)) θ_lo(r'(x,t)))`
    /// with `τ(q) = (y − θ_lo(x)) / (θ_hi(x) − θ_lo(x))`; the graph case uses
    /// `θ_lo` only.
    Lifted {
        base: Box<Retraction>,
        lo: Delimiter,
        hi: Delimiter,
        cell: LiftCell,
    },
}

#[derive(Clone, Debug)]
pub struct Retraction {
    pub kind: RetractionKind,
    pub domain: Option<Arc<Stratification>>,
    pub target: Target,
    dim: usize,
}

impl Retraction {
    /// Unaudited polynomial retraction; `map` has `n + 1` source variables.
    pub fn polynomial(
        map: PolyMap,
        domain: Option<Arc<Stratification>>,
        target: Target,
    ) -> Result<Self> {
        let n = map.target_dim();
        if map.source_dim() != n + 1 {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                found: map.source_dim(),
            });
        }
        Ok(Self {
            kind: RetractionKind::Polynomial(map),
            domain,
            target,
            dim: n,
        })
    }

    /// Unaudited cone `r(x,t) = p + t(x − p)`.
    pub fn cone_unchecked(p: &[Q], domain: Option<Arc<Stratification>>) -> Self {
        let n = p.len();
        let t = Polynomial::var(n + 1, n);
        let comps = (0..n)
            .map(|i| {
                let x = Polynomial::var(n + 1, i);
                let pc = Polynomial::constant(n + 1, p[i].clone());
                &pc + &(&t * &(&x - &pc))
            })
            .collect();
        Self::polynomial(
            PolyMap::new(n + 1, comps).expect("consistent"),
            domain,
            Target::Point(p.to_vec()),
        )
        .expect("consistent")
    }

    /// `r(q, t) = q` for all `t`.
    pub fn identity(n: usize) -> Self {
        let comps = (0..n).map(|i| Polynomial::var(n + 1, i)).collect();
        Self::polynomial(
            PolyMap::new(n + 1, comps).expect("consistent"),
            None,
            Target::Strata(vec![]),
        )
        .expect("consistent")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn polynomial_map(&self) -> Option<&PolyMap> {
        match &self.kind {
            RetractionKind::Polynomial(m) => Some(m),
            _ => None,
        }
    }

    pub fn eval<S: Scalar>(&self, q: &[S], t: S) -> Vec<S> {
        match &self.kind {
            RetractionKind::Polynomial(m) => {
                let mut z = q.to_vec();
                z.push(t);
                m.eval(&z)
            }
            RetractionKind::Lifted { base, lo, hi, cell } => {
                let nb = base.dim();
                let x = &q[..nb];
                let xr = base.eval(x, t);
                let y_new = match cell {
                    LiftCell::Graph => lo.eval(&xr),
                    LiftCell::Band => {
                        let tau = band_tau(lo, hi, x, q[nb].clone());
                        tau.clone() * hi.eval(&xr) + (S::s_one() - tau) * lo.eval(&xr)
                    }
                };
                let mut out = xr;
                out.push(y_new);
                out
            }
        }
    }

    pub fn eval_f64(&self, q: &[f64], t: f64) -> Vec<f64> {
        self.eval(q, t)
    }

    /// `τ(q)` of a band lift.
    pub fn tau<S: Scalar>(&self, q: &[S]) -> Option<S> {
        match &self.kind {
            RetractionKind::Lifted {
                base,
                lo,
                hi,
                cell: LiftCell::Band,
            } => {
                let nb = base.dim();
                Some(band_tau(lo, hi, &q[..nb], q[nb].clone()))
            }
            _ => None,
        }
    }

    /// `d_x r_t` at `q` (rows: outputs, columns: inputs): exact Jacobian for
    /// polynomial retractions, central differences otherwise.
    pub fn spatial_differential(&self, q: &[f64], t: f64) -> Vec<Vec<f64>> {
        let n = self.dim;
        if let RetractionKind::Polynomial(m) = &self.kind {
            let mut z = q.to_vec();
            z.push(t);
            let j = m.to_float().jacobian(&z);
            return j.into_iter().map(|row| row[..n].to_vec()).collect();
        }
        let mut jac = vec![vec![0.0; n]; n];
        for c in 0..n {
            let mut a = q.to_vec();
            let mut b = q.to_vec();
            a[c] += FD_STEP;
            b[c] -= FD_STEP;
            let ra = self.eval_f64(&a, t);
            let rb = self.eval_f64(&b, t);
            for r in 0..n {
                jac[r][c] = (ra[r] - rb[r]) / (2.0 * FD_STEP);
            }
        }
        jac
    }

    /// `∂_t r` at `(q, t)`.
    pub fn time_derivative(&self, q: &[f64], t: f64) -> Vec<f64> {
        if let RetractionKind::Polynomial(m) = &self.kind {
            let mut z = q.to_vec();
            z.push(t);
            let j = m.to_float().jacobian(&z);
            return j.into_iter().map(|row| row[self.dim]).collect();
        }
        let a = self.eval_f64(q, t + FD_STEP);
        let b = self.eval_f64(q, t - FD_STEP);
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y) / (2.0 * FD_STEP))
            .collect()
    }
}

fn band_tau<S: Scalar>(lo: &Delimiter, hi: &Delimiter, x: &[S], y: S) -> S {
    let l = lo.eval(x);
    let d = hi.eval(x) - l.clone();
    // collapsed fibre: every τ gives the same point
    if d.s_is_zero() {
        return S::s_zero();
    }
    (y - l) / d
}

/// Sample points of every stratum of the domain, paired with the stratum
/// index.
fn domain_samples(strat: &Stratification, budget: usize) -> Vec<(usize, Vec<f64>)> {
    strat
        .strata()
        .iter()
        .enumerate()
        .flat_map(|(i, s)| {
            interior_samples(&s.cell, budget)
                .into_iter()
                .map(move |u| (i, s.cell.eval(&u)))
        })
        .collect()
}

const AUDIT_TIMES: [f64; 5] = [1.0, 0.75, 0.5, 0.25, 0.0625];

/// Cone retraction onto `p`, after auditing that every stratum is mapped
/// into itself for `t ∈ (0, 1]`.
pub fn cone_retraction(p: &[Q], domain: Arc<Stratification>, samples: usize) -> Result<Retraction> {
    let r = Retraction::cone_unchecked(p, Some(domain.clone()));
    let pts = domain_samples(&domain, samples);
    let bad = pts.par_iter().find_map_first(|(i, x)| {
        for &t in &AUDIT_TIMES {
            let y = r.eval_f64(x, t);
            if domain.classify(&y, AUDIT_TOL) != Some(*i) {
                return Some((domain.strata()[*i].id.clone(), y));
            }
        }
        None
    });
    match bad {
        Some((stratum, witness)) => Err(Error::NotConeInvariant { stratum, witness }),
        None => Ok(r),
    }
}

const AUDIT_TOL: f64 = 1e-9;

/// Lift of `base` over a graph or band cell; in the band case `θ_lo < θ_hi`
/// is checked at the given base points.
pub fn lift_retraction(
    base: Retraction,
    lo: Delimiter,
    hi: Delimiter,
    cell: LiftCell,
    base_samples: &[Vec<f64>],
    domain: Option<Arc<Stratification>>,
    target: Target,
) -> Result<Retraction> {
    if cell == LiftCell::Band {
        for x in base_samples {
            if lo.eval(x.as_slice()) >= hi.eval(x.as_slice()) {
                return Err(Error::DelimiterCrossing(x.clone()));
            }
        }
    }
    let dim = base.dim() + 1;
    Ok(Retraction {
        kind: RetractionKind::Lifted {
            base: Box::new(base),
            lo,
            hi,
            cell,
        },
        domain,
        target,
        dim,
    })
}

/// `max |τ(r(q,t)) − τ(q)|` over the given points and times, in exact
/// arithmetic.
pub fn tau_invariance(r: &Retraction, points: &[Vec<Q>], times: &[Q]) -> Result<Q> {
    if r.tau(&points.first().cloned().unwrap_or_default())
        .is_none()
        && !points.is_empty()
    {
        return Err(Error::Invalid("τ is only defined for band lifts".into()));
    }
    let worst = points
        .par_iter()
        .map(|q| {
            let t0 = r.tau(q).expect("band");
            times
                .iter()
                .map(|t| {
                    let z = r.eval(q, t.clone());
                    let d = r.tau(&z).expect("band") - t0.clone();
                    if d < Q::zero() {
                        -d
                    } else {
                        d
                    }
                })
                .fold(Q::zero(), |a, b| if b > a { b } else { a })
        })
        .reduce(Q::zero, |a, b| if b > a { b } else { a });
    Ok(worst)
}

/// Outcome of auditing the retraction contract.
#[derive(Clone, Debug, Serialize)]
pub struct ContractAudit {
    pub pass: bool,
    pub samples: usize,
    pub failures: Vec<String>,
}

/// `r(·,1) = id`, `r(·,0) ∈ N`, stratum preservation for `t ∈ (0,1]` and
/// `r_0(S)` inside a single stratum of `N`.
pub fn audit_contract(r: &Retraction, samples: usize, tol: f64) -> Result<ContractAudit> {
    let domain = r
        .domain
        .as_ref()
        .ok_or_else(|| Error::Invalid("retraction has no domain to audit".into()))?;
    let pts = domain_samples(domain, samples);
    let mut failures: Vec<String> = pts
        .par_iter()
        .flat_map_iter(|(i, x)| {
            let sid = &domain.strata()[*i].id;
            let mut f = Vec::new();
            let r1 = r.eval_f64(x, 1.0);
            let e1 = dist(&r1, x);
            if e1 > tol {
                f.push(format!("r(x,1) ≠ x at {x:?} in `{sid}` (|Δ| = {e1:e})"));
            }
            let r0 = r.eval_f64(x, 0.0);
            match &r.target {
                Target::Point(p) => {
                    let p: Vec<f64> = p.iter().map(|v| v.as_f64()).collect();
                    if dist(&r0, &p) > tol {
                        f.push(format!(
                            "r(x,0) = {r0:?} misses the target point for x = {x:?}"
                        ));
                    }
                }
                Target::Strata(ids) => match domain.classify(&r0, tol) {
                    Some(j) if ids.contains(&domain.strata()[j].id) => {}
                    _ => f.push(format!("r(x,0) = {r0:?} lies outside N for x = {x:?}")),
                },
            }
            for &t in &AUDIT_TIMES[1..] {
                let y = r.eval_f64(x, t);
                if domain.classify(&y, tol) != Some(*i) {
                    f.push(format!("r({x:?}, {t}) = {y:?} leaves stratum `{sid}`"));
                    break;
                }
            }
            f
        })
        .collect();
    if let Target::Strata(_) = &r.target {
        // r_0 of each stratum inside a single stratum of N
        let mut seen: BTreeMap<usize, Option<usize>> = BTreeMap::new();
        for (i, x) in &pts {
            let c = domain.classify(&r.eval_f64(x, 0.0), tol);
            match seen.get(i) {
                Some(prev) if *prev != c => {
                    failures.push(format!(
                        "r_0(`{}`) meets several strata",
                        domain.strata()[*i].id
                    ));
                }
                _ => {
                    seen.insert(*i, c);
                }
            }
        }
    }
    failures.sort();
    failures.dedup();
    Ok(ContractAudit {
        pass: failures.is_empty(),
        samples: pts.len(),
        failures,
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `r*ω = α + dt ∧ β` on `ℝ^{n+1}`, `t` being the last coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSplitForm {
    pub alpha: PolyForm,
    pub beta: PolyForm,
}

impl TimeSplitForm {
    pub fn split(pulled: &PolyForm) -> Result<Self> {
        let m = pulled.dim();
        if m == 0 {
            return Err(Error::Invalid("no time variable".into()));
        }
        let tvar = m - 1;
        let k = pulled.degree();
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        for (idx, c) in pulled.coeffs() {
            if idx.last() == Some(&tvar) {
                // c dx_I ∧ dt = (−1)^{|I|} dt ∧ c dx_I
                let i: MultiIndex = idx[..idx.len() - 1].to_vec();
                let sign = if i.len() % 2 == 0 { 1 } else { -1 };
                beta.push((i, c.scale(&qi(sign))));
            } else {
                alpha.push((idx.clone(), c.clone()));
            }
        }
        Ok(Self {
            alpha: PolyForm::from_terms(m, k, alpha)?,
            beta: PolyForm::from_terms(m, k.saturating_sub(1), beta)?,
        })
    }

    pub fn reassemble(&self) -> Result<PolyForm> {
        let m = self.alpha.dim();
        let dt = PolyForm::basis(m, &[m - 1]);
        self.alpha.add(&dt.wedge(&self.beta)?)
    }
}

/// `γ₀ = ∫₀¹ β dt` for a polynomial retraction, symbolically.
pub fn homotopy_operator(omega: &PolyForm, r: &Retraction) -> Result<PolyForm> {
    let map = r.polynomial_map().ok_or(Error::NonPolynomialRetraction)?;
    let n = r.dim();
    if omega.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: omega.dim(),
        });
    }
    if omega.degree() == 0 {
        return Ok(PolyForm::zero(n, 0));
    }
    let split = TimeSplitForm::split(&omega.pullback(map)?)?;
    let terms = split
        .beta
        .coeffs()
        .iter()
        .map(|(idx, c)| (idx.clone(), c.integrate_unit_interval(n).drop_var(n)))
        .collect::<Vec<_>>();
    PolyForm::from_terms(n, omega.degree() - 1, terms)
}

/// `r_0* ω` for a polynomial retraction.
pub fn pullback_at_zero(omega: &PolyForm, r: &Retraction) -> Result<PolyForm> {
    let map = r.polynomial_map().ok_or(Error::NonPolynomialRetraction)?;
    let n = r.dim();
    let subs: Vec<Polynomial> = (0..=n)
        .map(|i| {
            if i < n {
                Polynomial::var(n, i)
            } else {
                Polynomial::zero(n)
            }
        })
        .collect();
    let comps = map.components().iter().map(|c| c.compose(&subs)).collect();
    omega.pullback(&PolyMap::new(n, comps)?)
}

/// Coefficients of `γ₀` at `x`, with `β_I(x,t) = ω(r; ∂_t r, ∂_{i_1} r, …)`
/// integrated over `t` by Gauss–Legendre quadrature of order 10.
pub fn homotopy_operator_at(
    omega: &PolyForm,
    r: &Retraction,
    x: &[f64],
) -> Result<BTreeMap<MultiIndex, f64>> {
    let n = r.dim();
    let k = omega.degree();
    if k == 0 {
        return Ok(BTreeMap::new());
    }
    let rule = cached_rule(DomainKind::Cube, 1, 10);
    let mut out = BTreeMap::new();
    for idx in multi_indices(n, k - 1) {
        let mut acc = 0.0;
        for (node, w) in rule.nodes.iter().zip(&rule.weights) {
            let t = node[0];
            let y = r.eval_f64(x, t);
            let mut vs = vec![r.time_derivative(x, t)];
            let jac = r.spatial_differential(x, t);
            for &i in &idx {
                vs.push(jac.iter().map(|row| row[i]).collect());
            }
            acc += w * omega.evaluate_on_vectors(&y, &vs)?;
        }
        out.insert(idx, acc);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct PoincareResult {
    pub primitive: StratifiedForm,
    pub audit: ContractAudit,
    /// Strata where `dγ = ω` failed symbolically (empty on success).
    pub symbolic_failures: Vec<String>,
    pub continuity: ContinuityReport,
}

/// `γ = γ₀ + r_0*γ'` with `dγ = ω` on every stratum. `gamma_prime` is a
/// primitive of `ω|_N` (omitted when `N` is a point and `k ≥ 1`).
pub fn poincare_primitive(
    omega: &StratifiedForm,
    r: &Retraction,
    gamma_prime: Option<&PolyForm>,
    samples: usize,
) -> Result<PoincareResult> {
    let k = omega.degree();
    if k == 0 {
        return Err(Error::Invalid("primitives need degree ≥ 1".into()));
    }
    if !omega.is_closed() {
        return Err(Error::NotClosed("dω ≠ 0 on some stratum".into()));
    }
    if r.domain.is_none() {
        return Err(Error::AuditFailed("retraction has no domain".into()));
    }
    let audit = audit_contract(r, samples, AUDIT_TOL)?;
    if !audit.pass {
        return Err(Error::AuditFailed(
            audit.failures.first().cloned().unwrap_or_default(),
        ));
    }
    let mut comps = BTreeMap::new();
    let mut failures = Vec::new();
    for (sid, w) in omega.components() {
        let mut g = homotopy_operator(w, r)?;
        if let Some(gp) = gamma_prime {
            g = g.add(&pullback_at_zero(gp, r)?)?;
        }
        let lhs = g.exterior_derivative();
        let rhs = w.sub(&pullback_at_zero(w, r)?)?;
        if lhs != rhs {
            failures.push(sid.clone());
        }
        comps.insert(sid.clone(), g);
    }
    let primitive = StratifiedForm::new(omega.stratification().clone(), k - 1, comps)?;
    let continuity = check_graph_closed(&primitive, None, samples, 1e-9)?;
    Ok(PoincareResult {
        primitive,
        audit,
        symbolic_failures: failures,
        continuity,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SemidiffReport {
    pub pass: bool,
    pub tol: f64,
    /// `(t, max_q ‖d_x r_t(q) − d_x r_0(q)‖)` in the order of `t_seq`.
    pub residuals: Vec<(f64, f64)>,
    pub monotone: bool,
    pub final_residual: f64,
    pub preservation_failures: Vec<String>,
}

pub fn default_t_seq() -> Vec<f64> {
    (1..=10).map(|i| 2f64.powi(-i)).collect()
}

fn spectral_norm(m: &[Vec<f64>]) -> f64 {
    let r = m.len();
    let c = m.first().map_or(0, |row| row.len());
    if r == 0 || c == 0 {
        return 0.0;
    }
    let a = DMatrix::from_fn(r, c, |i, j| m[i][j]);
    a.singular_values().max()
}

/// `d_x r_t → d_x r_0` along `t_seq`, sampled at interior points of every
/// domain stratum, together with stratum preservation.
pub fn check_semidifferentiable(
    r: &Retraction,
    samples: usize,
    t_seq: &[f64],
    tol: f64,
) -> Result<SemidiffReport> {
    let domain = r
        .domain
        .as_ref()
        .ok_or_else(|| Error::Invalid("retraction has no domain".into()))?;
    let pts = domain_samples(domain, samples);
    let d0: Vec<Vec<Vec<f64>>> = pts
        .par_iter()
        .map(|(_, x)| r.spatial_differential(x, 0.0))
        .collect();
    let residuals: Vec<(f64, f64)> = t_seq
        .iter()
        .map(|&t| {
            let worst = pts
                .par_iter()
                .zip(&d0)
                .map(|((_, x), j0)| {
                    let jt = r.spatial_differential(x, t);
                    let diff: Vec<Vec<f64>> = jt
                        .iter()
                        .zip(j0)
                        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - q).collect())
                        .collect();
                    spectral_norm(&diff)
                })
                .reduce(|| 0.0, f64::max);
            (t, worst)
        })
        .collect();
    let preservation_failures: Vec<String> = pts
        .par_iter()
        .flat_map_iter(|(i, x)| {
            t_seq.iter().filter_map(move |&t| {
                let y = r.eval_f64(x, t);
                (domain.classify(&y, AUDIT_TOL) != Some(*i))
                    .then(|| format!("r({x:?}, {t}) = {y:?} leaves `{}`", domain.strata()[*i].id))
            })
        })
        .collect();
    let monotone = residuals.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    let final_residual = residuals.last().map_or(0.0, |r| r.1);
    Ok(SemidiffReport {
        pass: monotone && final_residual <= tol && preservation_failures.is_empty(),
        tol,
        residuals,
        monotone,
        final_residual,
        preservation_failures,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzEstimate {
    pub estimate: f64,
    pub samples: usize,
    pub pairs: usize,
}

/// Sampled lower bound for the Lipschitz constant of `(q,t) ↦ r(q,t)` on
/// the closure of the domain: random pairs, short pairs along the leading
/// singular direction of the full differential at each sample, and the
/// reference corners of every top stratum at `t ∈ {0, 1}`.
pub fn lipschitz_estimate(r: &Retraction, samples: usize, seed: u64) -> Result<LipschitzEstimate> {
    let domain = r
        .domain
        .as_ref()
        .ok_or_else(|| Error::Invalid("retraction has no domain".into()))?;
    let n = r.dim();
    let top = domain.dim();
    let cells: Vec<_> = domain.strata_of_dim(top).map(|s| s.cell.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<Vec<f64>> = Vec::new();
    for c in &cells {
        for u in reference_lattice(c.kind, c.dim(), 1, true) {
            for t in [0.0, 1.0] {
                let mut z = c.eval(&u);
                z.push(t);
                pts.push(z);
            }
        }
    }
    let per_cell = samples.div_ceil(cells.len().max(1));
    for c in &cells {
        for _ in 0..per_cell {
            let u = random_reference_point(c.kind, c.dim(), &mut rng);
            let mut z = c.eval(&u);
            z.push(rng.gen::<f64>());
            pts.push(z);
        }
    }
    let f = |z: &[f64]| r.eval_f64(&z[..n], z[n]);
    let ratio = |a: &[f64], b: &[f64]| {
        let den = dist(a, b);
        if den == 0.0 {
            0.0
        } else {
            dist(&f(a), &f(b)) / den
        }
    };
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for i in 0..pts.len() {
        let j = rng.gen_range(0..pts.len());
        pairs.push((pts[i].clone(), pts[j].clone()));
    }
    let h = 1e-6;
    let local: Vec<(Vec<f64>, Vec<f64>)> = pts
        .par_iter()
        .map(|z| {
            let mut jac = r.spatial_differential(&z[..n], z[n]);
            let dt = r.time_derivative(&z[..n], z[n]);
            for (row, d) in jac.iter_mut().zip(dt) {
                row.push(d);
            }
            let a = DMatrix::from_fn(n, n + 1, |i, j| jac[i][j]);
            let svd = a.svd(false, true);
            let v_t = svd.v_t.expect("requested");
            let k = svd
                .singular_values
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map_or(0, |(i, _)| i);
            let w: Vec<f64> = (0..=n).map(|j| z[j] + h * v_t[(k, j)]).collect();
            (z.clone(), w)
        })
        .collect();
    pairs.extend(local);
    let estimate = pairs
        .par_iter()
        .map(|(a, b)| ratio(a, b))
        .reduce(|| 0.0, f64::max);
    Ok(LipschitzEstimate {
        estimate,
        samples: pts.len(),
        pairs: pairs.len(),
    })
}

fn random_reference_point(kind: DomainKind, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match kind {
        DomainKind::Cube => (0..k).map(|_| rng.gen::<f64>()).collect(),
        DomainKind::Simplex => {
            // sorted uniforms give a uniform point of the simplex
            let mut s: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
            s.sort_by(f64::total_cmp);
            let mut prev = 0.0;
            s.iter()
                .map(|&v| {
                    let d = v - prev;
                    prev = v;
                    d
                })
                .collect()
        }
    }
}

/// Rational lattice points `(i/m, j/m)` with `0 < j < i ≤ m` of the open
/// triangle band `0 < y < x ≤ 1`.
pub fn band_points(m: i64) -> Vec<Vec<Q>> {
    let mut out = Vec::new();
    for i in 1..=m {
        for j in 1..i {
            out.push(vec![crate::scalar::q(i, m), crate::scalar::q(j, m)]);
        }
    }
    out
}

/// `t` values `2^{-i}` for `i = 0..count` as rationals.
pub fn dyadic_times(count: i32) -> Vec<Q> {
    (0..count).map(|i| f64_to_q(2f64.powi(-i))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;

    #[test]
    fn cone_on_two_forms() {
        let r = Retraction::cone_unchecked(&[qi(0), qi(0)], None);
        let w = PolyForm::basis(2, &[0, 1]);
        let g = homotopy_operator(&w, &r).unwrap();
        let x = Polynomial::var(2, 0);
        let y = Polynomial::var(2, 1);
        let expect = PolyForm::term(x.scale(&q(1, 2)), &[1])
            .sub(&PolyForm::term(y.scale(&q(1, 2)), &[0]))
            .unwrap();
        assert_eq!(g, expect);
        assert_eq!(g.exterior_derivative(), w);
    }

    #[test]
    fn cone_on_one_forms() {
        let r = Retraction::cone_unchecked(&[qi(0)], None);
        let g = homotopy_operator(&PolyForm::basis(1, &[0]), &r).unwrap();
        assert_eq!(g, PolyForm::function(Polynomial::var(1, 0)));
        assert!(homotopy_operator(&PolyForm::zero(1, 1), &r)
            .unwrap()
            .is_zero());
    }

    #[test]
    fn df_gives_f_minus_f0() {
        let r = Retraction::cone_unchecked(&[qi(0), qi(0)], None);
        let x = Polynomial::var(2, 0);
        let y = Polynomial::var(2, 1);
        let f = &(&x * &y) + &(&x.pow(3) + &Polynomial::constant(2, qi(7)));
        let df = PolyForm::function(f.clone()).exterior_derivative();
        let g = homotopy_operator(&df, &r).unwrap();
        let f0 = Polynomial::constant(2, f.constant_term());
        assert_eq!(g, PolyForm::function(&f - &f0));
    }

    #[test]
    fn split_reassembles() {
        let r = Retraction::cone_unchecked(&[q(1, 2), qi(-1)], None);
        let x = Polynomial::var(2, 0);
        let w = PolyForm::term(x.pow(2), &[1]);
        let pulled = w.pullback(r.polynomial_map().unwrap()).unwrap();
        let s = TimeSplitForm::split(&pulled).unwrap();
        assert_eq!(s.reassemble().unwrap(), pulled);
    }

    #[test]
    fn numeric_operator_matches_symbolic() {
        let r = Retraction::cone_unchecked(&[qi(0), qi(0)], None);
        let x = Polynomial::var(2, 0);
        let w = PolyForm::term(x.clone(), &[0, 1]);
        let g = homotopy_operator(&w, &r).unwrap();
        let pt = [0.3, -0.7];
        let num = homotopy_operator_at(&w, &r, &pt).unwrap();
        for (idx, v) in num {
            assert!((g.coeff(&idx).eval_f64(&pt) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_lift_is_scaling() {
        let base = Retraction::cone_unchecked(&[qi(0)], None);
        let lo = Delimiter::Poly(Polynomial::zero(1));
        let hi = Delimiter::Poly(Polynomial::var(1, 0));
        let samples: Vec<Vec<f64>> = (1..=10).map(|i| vec![i as f64 / 10.0]).collect();
        let r = lift_retraction(
            base,
            lo,
            hi,
            LiftCell::Band,
            &samples,
            None,
            Target::Point(vec![qi(0), qi(0)]),
        )
        .unwrap();
        for p in band_points(6) {
            for t in dyadic_times(4) {
                let z = r.eval(&p, t.clone());
                assert_eq!(z, vec![&t * &p[0], &t * &p[1]]);
            }
        }
        assert!(tau_invariance(&r, &band_points(6), &dyadic_times(4))
            .unwrap()
            .is_zero());
    }

    #[test]
    fn graph_lift_stays_on_parabola() {
        let base = Retraction::cone_unchecked(&[qi(0)], None);
        let x = Polynomial::var(1, 0);
        let theta = Delimiter::Poly(x.pow(2));
        let r = lift_retraction(
            base,
            theta.clone(),
            theta,
            LiftCell::Graph,
            &[],
            None,
            Target::Point(vec![qi(0), qi(0)]),
        )
        .unwrap();
        let p = vec![q(3, 5), q(9, 25)];
        let t = q(1, 3);
        let z = r.eval(&p, t.clone());
        assert_eq!(z, vec![&t * &p[0], &t * &t * &p[1]]);
    }

    #[test]
    fn crossing_delimiters_rejected() {
        let base = Retraction::cone_unchecked(&[qi(0)], None);
        let lo = Delimiter::Poly(Polynomial::var(1, 0));
        let hi = Delimiter::Poly(Polynomial::zero(1));
        let e = lift_retraction(
            base,
            lo,
            hi,
            LiftCell::Band,
            &[vec![0.5]],
            None,
            Target::Strata(vec![]),
        );
        assert!(matches!(e, Err(Error::DelimiterCrossing(_))));
    }
}
