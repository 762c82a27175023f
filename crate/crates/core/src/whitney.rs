//! Barycentric partitions of unity, elementary (Whitney) forms and the
//! de Rham map on triangulated sets.
//!
//! Every maximal simplex `[v_0, …, v_m]` carries local coordinates
//! `u ∈ ℝ^m` with `v_0 ↦ 0` and `v_i ↦ e_i`; there `λ_0 = 1 − Σ u_i` and
//! `λ_i = u_i`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::cohomology::{coboundary, cocycle_basis, cycle_basis, Cochain};
use crate::complex::{simplex_id, SimplicialComplex, Stratification};
use crate::error::{Error, Result};
use crate::forms::{PolyForm, PolyMap, StratifiedForm};
use crate::linalg::{rank, solve, QMatrix};
use crate::poly::Polynomial;
use crate::quadrature::{integrate_cell_exact, integrate_cell_order, ParametrizedCell};
use crate::scalar::{qi, Q};

/// A geometric simplicial complex whose maximal simplices are
/// non-degenerate.
#[derive(Clone, Debug)]
pub struct Triangulation {
    complex: SimplicialComplex,
    top: Vec<Vec<usize>>,
}

impl Triangulation {
    pub fn new(complex: SimplicialComplex) -> Result<Self> {
        let top = complex.maximal_simplices();
        for s in &top {
            let p0 = &complex.points()[s[0]];
            let edges: QMatrix = s[1..]
                .iter()
                .map(|&v| {
                    complex.points()[v]
                        .iter()
                        .zip(p0)
                        .map(|(a, b)| a - b)
                        .collect()
                })
                .collect();
            if rank(&edges) != s.len() - 1 {
                return Err(Error::DegenerateSimplex(s.to_vec()));
            }
        }
        Ok(Self { complex, top })
    }

    pub fn complex(&self) -> &SimplicialComplex {
        &self.complex
    }

    pub fn maximal_simplices(&self) -> &[Vec<usize>] {
        &self.top
    }

    /// First maximal simplex containing `s`.
    pub fn host(&self, s: &[usize]) -> Option<&[usize]> {
        self.top
            .iter()
            .find(|t| s.iter().all(|v| t.contains(v)))
            .map(|t| t.as_slice())
    }

    /// Affine parametrization `u ↦ v_0 + Σ u_i (v_i − v_0)` of a maximal
    /// simplex.
    pub fn affine_map(&self, t: &[usize]) -> PolyMap {
        let p = self.complex.points();
        let origin = &p[t[0]];
        let cols: Vec<Vec<Q>> = t[1..]
            .iter()
            .map(|&v| p[v].iter().zip(origin).map(|(a, b)| a - b).collect())
            .collect();
        PolyMap::affine(origin, &cols)
    }

    /// `σ ⊂ t` as an affine cell in `t`'s local coordinates, vertices in the
    /// order given.
    pub fn local_cell(&self, t: &[usize], sigma: &[usize]) -> Result<ParametrizedCell> {
        let m = t.len() - 1;
        let verts = sigma
            .iter()
            .map(|v| {
                let pos = t
                    .iter()
                    .position(|w| w == v)
                    .ok_or_else(|| Error::NotInComplex(sigma.to_vec()))?;
                let mut u = vec![Q::zero(); m];
                if pos > 0 {
                    u[pos - 1] = qi(1);
                }
                Ok(u)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(if sigma.len() == 1 {
            ParametrizedCell::point(simplex_id(sigma), &verts[0])
        } else {
            ParametrizedCell::affine_simplex(simplex_id(sigma), &verts)
        })
    }
}

/// `λ_i` of a maximal simplex with `m` local coordinates.
pub fn barycentric(m: usize, i: usize) -> Polynomial {
    if i == 0 {
        let mut lin = vec![qi(-1); m];
        if m == 0 {
            lin.clear();
        }
        Polynomial::affine(qi(1), &lin)
    } else {
        Polynomial::var(m, i - 1)
    }
}

/// Hat functions: on each maximal simplex, the vertex functions are its
/// barycentric coordinates (zero on simplices outside the vertex star).
#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    pub pieces: BTreeMap<Vec<usize>, Vec<(usize, Polynomial)>>,
}

impl PartitionOfUnity {
    /// `φ_v` on maximal simplex `t` (zero when `v ∉ t`).
    pub fn function(&self, t: &[usize], v: usize) -> Option<Polynomial> {
        let piece = self.pieces.get(t)?;
        let m = t.len() - 1;
        Some(
            piece
                .iter()
                .find(|(w, _)| *w == v)
                .map(|(_, p)| p.clone())
                .unwrap_or_else(|| Polynomial::zero(m)),
        )
    }
}

pub fn partition_of_unity(tri: &Triangulation) -> PartitionOfUnity {
    let pieces = tri
        .top
        .iter()
        .map(|t| {
            let m = t.len() - 1;
            let fs = t
                .iter()
                .enumerate()
                .map(|(i, &v)| (v, barycentric(m, i)))
                .collect();
            (t.clone(), fs)
        })
        .collect();
    PartitionOfUnity { pieces }
}

/// A form given by one local polynomial form per maximal simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementaryForm {
    pub degree: usize,
    pub pieces: BTreeMap<Vec<usize>, PolyForm>,
}

impl ElementaryForm {
    pub fn piece(&self, t: &[usize]) -> Option<&PolyForm> {
        self.pieces.get(t)
    }

    pub fn exterior_derivative(&self) -> ElementaryForm {
        ElementaryForm {
            degree: self.degree + 1,
            pieces: self
                .pieces
                .iter()
                .map(|(t, f)| (t.clone(), f.exterior_derivative()))
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.values().all(|f| f.is_zero())
    }

    pub fn is_closed(&self) -> bool {
        self.pieces.values().all(|f| f.is_closed())
    }

    /// Largest coefficient of `self − other`, exactly.
    pub fn max_difference(&self, other: &ElementaryForm) -> Result<Q> {
        let mut worst = Q::zero();
        for (t, a) in &self.pieces {
            let b = other
                .pieces
                .get(t)
                .cloned()
                .unwrap_or_else(|| PolyForm::zero(a.dim(), a.degree()));
            let diff = a.sub(&b)?;
            for p in diff.coeffs().values() {
                for (_, c) in p.terms() {
                    if c.abs() > worst {
                        worst = c.abs();
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// `j! Σ_k (−1)^k λ_{p_k} dλ_{p_0} ∧ … (omit k) … ∧ dλ_{p_j}` in the local
/// coordinates of a maximal simplex with `m` coordinates; `p` are vertex
/// positions inside that simplex.
pub fn local_elementary(m: usize, p: &[usize]) -> PolyForm {
    let j = p.len() - 1;
    let lambdas: Vec<Polynomial> = p.iter().map(|&i| barycentric(m, i)).collect();
    let dl: Vec<PolyForm> = lambdas
        .iter()
        .map(|l| PolyForm::function(l.clone()).exterior_derivative())
        .collect();
    let mut out = PolyForm::zero(m, j);
    for k in 0..=j {
        let mut w = PolyForm::function(lambdas[k].clone());
        for (i, d) in dl.iter().enumerate() {
            if i != k {
                w = w.wedge(d).expect("same dimension");
            }
        }
        out = if k % 2 == 0 { out.add(&w) } else { out.sub(&w) }.expect("same shape");
    }
    let fact: i64 = (1..=j as i64).product();
    out.scale(&qi(fact))
}

/// `φ_{T,f} = Σ_σ f(σ) φ_{T,σ}`.
pub fn elementary_form(tri: &Triangulation, f: &Cochain) -> Result<ElementaryForm> {
    f.to_vector(&tri.complex)?;
    let j = f.degree();
    let pieces = tri
        .top
        .par_iter()
        .map(|t| {
            let m = t.len() - 1;
            let mut acc = PolyForm::zero(m, j);
            if j <= m {
                for (s, v) in f.values() {
                    let pos: Option<Vec<usize>> =
                        s.iter().map(|x| t.iter().position(|y| y == x)).collect();
                    if let Some(pos) = pos {
                        acc = acc.add(&local_elementary(m, &pos).scale(v))?;
                    }
                }
            }
            Ok((t.clone(), acc))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(ElementaryForm { degree: j, pieces })
}

/// `max |d φ_{T,f} − φ_{T,df}|` over all coefficients, exactly.
pub fn check_commute(tri: &Triangulation, f: &Cochain) -> Result<Q> {
    let lhs = elementary_form(tri, f)?.exterior_derivative();
    let rhs = elementary_form(tri, &coboundary(f, &tri.complex)?)?;
    lhs.max_difference(&rhs)
}

/// `ψ(φ)(σ) = ∫_σ φ` over every `deg`-simplex, exactly.
pub fn derham_exact(tri: &Triangulation, phi: &ElementaryForm) -> Result<Cochain> {
    let deg = phi.degree;
    let vals = tri
        .complex
        .simplices(deg)
        .par_iter()
        .map(|s| {
            let t = tri.host(s).ok_or_else(|| Error::NotInComplex(s.to_vec()))?;
            let cell = tri.local_cell(t, s)?;
            let w = &phi.pieces[t];
            Ok((s.clone(), integrate_cell_exact(w, &cell)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Cochain::from_values(deg, vals))
}

/// `ψ(φ)(σ)` by quadrature of the given order, in the order of
/// `K.simplices(deg)`.
pub fn derham_quadrature(
    tri: &Triangulation,
    phi: &ElementaryForm,
    order: usize,
) -> Result<Vec<f64>> {
    tri.complex
        .simplices(phi.degree)
        .par_iter()
        .map(|s| {
            let t = tri.host(s).ok_or_else(|| Error::NotInComplex(s.to_vec()))?;
            let cell = tri.local_cell(t, s)?;
            integrate_cell_order(&phi.pieces[t], &cell, order)
        })
        .collect()
}

/// `ψ(ω)(σ)` for a stratified form on the complex's own stratification, by
/// quadrature, in the order of `K.simplices(deg)`.
pub fn derham_map(tri: &Triangulation, omega: &StratifiedForm, order: usize) -> Result<Vec<f64>> {
    let cat = tri.complex.to_catalogue();
    tri.complex
        .simplices(omega.degree())
        .par_iter()
        .map(|s| {
            let c = crate::complex::Chain::cell(omega.degree(), simplex_id(s));
            crate::quadrature::integrate_stratified(omega, &c, &cat, order)
        })
        .collect()
}

/// Quadrature order used for duality checks: `2·(coefficient degree) + 2`.
pub fn duality_order(phi: &ElementaryForm) -> usize {
    let d = phi
        .pieces
        .values()
        .map(|f| f.coefficient_degree())
        .max()
        .unwrap_or(0);
    2 * d as usize + 2
}

/// `M[i][j] = ∫_{σ_i} φ_{T,σ_j}` over all `deg`-simplices, by quadrature.
pub fn pairing_matrix(tri: &Triangulation, deg: usize) -> Result<Vec<Vec<f64>>> {
    let simplices = tri.complex.simplices(deg).to_vec();
    let cols: Vec<Vec<f64>> = simplices
        .iter()
        .map(|s| {
            let phi = elementary_form(tri, &Cochain::indicator(s))?;
            derham_quadrature(tri, &phi, duality_order(&phi))
        })
        .collect::<Result<_>>()?;
    let n = simplices.len();
    Ok((0..n)
        .map(|i| (0..n).map(|j| cols[j][i]).collect())
        .collect())
}

/// The closed elementary form of a cocycle.
pub fn phi_t(f: &Cochain, tri: &Triangulation) -> Result<ElementaryForm> {
    let df = coboundary(f, &tri.complex)?;
    if !df.is_zero() {
        return Err(Error::NotClosed(format!(
            "coboundary has {} nonzero entries",
            df.values().len()
        )));
    }
    let phi = elementary_form(tri, f)?;
    if !phi.is_closed() {
        return Err(Error::NotClosed("elementary form is not closed".into()));
    }
    Ok(phi)
}

/// Local form pulled back to ambient coordinates through the left inverse
/// `(EᵀE)^{-1}Eᵀ` of each simplex's edge matrix, attached to the complex's
/// own stratification.
pub fn to_stratified(tri: &Triangulation, phi: &ElementaryForm) -> Result<StratifiedForm> {
    let strat = Arc::new(Stratification::from_complex(&tri.complex)?);
    let n = tri.complex.ambient_dim();
    let mut given = BTreeMap::new();
    for t in &tri.top {
        let m = t.len() - 1;
        if m < phi.degree {
            continue;
        }
        let p = tri.complex.points();
        let origin = &p[t[0]];
        let e: Vec<Vec<Q>> = t[1..]
            .iter()
            .map(|&v| p[v].iter().zip(origin).map(|(a, b)| a - b).collect())
            .collect();
        // Gram matrix G = EᵀE, rows of E here are the edge vectors
        let gram: QMatrix = (0..m)
            .map(|a| {
                (0..m)
                    .map(|b| e[a].iter().zip(&e[b]).map(|(x, y)| x * y).sum())
                    .collect()
            })
            .collect();
        let mut comps = Vec::with_capacity(m);
        for a in 0..m {
            let mut unit = vec![Q::zero(); m];
            unit[a] = Q::one();
            // row a of G^{-1}
            let row = solve(&gram, &unit).ok_or_else(|| Error::DegenerateSimplex(t.to_vec()))?;
            // u_a = Σ_b row_b ⟨e_b, x − origin⟩
            let mut lin = vec![Q::zero(); n];
            for (b, rb) in row.iter().enumerate() {
                for (i, l) in lin.iter_mut().enumerate() {
                    *l += rb * &e[b][i];
                }
            }
            let c0: Q = -lin.iter().zip(origin).map(|(l, o)| l * o).sum::<Q>();
            comps.push(Polynomial::affine(c0, &lin));
        }
        let inv = PolyMap::new(n, comps)?;
        let ambient = phi.pieces[t].pullback(&inv)?;
        given.insert(simplex_id(t), ambient);
    }
    StratifiedForm::from_partial(strat, phi.degree, given)
}

/// Rank of `P[a][b] = ∫_{c_b} φ_T(z_a)` for a cocycle basis `z` and a cycle
/// basis `c`, computed exactly.
pub fn pairing_rank(tri: &Triangulation, deg: usize) -> Result<(usize, QMatrix)> {
    let cocycles = cocycle_basis(&tri.complex, deg);
    let cycles = cycle_basis(&tri.complex, deg);
    let mut p = Vec::with_capacity(cocycles.len());
    for z in &cocycles {
        let phi = phi_t(z, tri)?;
        let psi = derham_exact(tri, &phi)?;
        let v = psi.to_vector(&tri.complex)?;
        p.push(
            cycles
                .iter()
                .map(|c| c.iter().zip(&v).map(|(a, b)| a * b).sum())
                .collect(),
        );
    }
    let r = if p.is_empty() || cycles.is_empty() {
        0
    } else {
        rank(&p)
    };
    Ok((r, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;

    fn two_triangles() -> Triangulation {
        let pts = vec![
            vec![qi(0), qi(0)],
            vec![qi(1), qi(0)],
            vec![qi(1), qi(1)],
            vec![qi(0), qi(1)],
        ];
        Triangulation::new(SimplicialComplex::new(pts, &[vec![0, 1, 2], vec![0, 2, 3]]).unwrap())
            .unwrap()
    }

    #[test]
    fn degenerate_rejected() {
        let pts = vec![vec![qi(0), qi(0)], vec![qi(1), qi(1)], vec![qi(2), qi(2)]];
        let k = SimplicialComplex::new(pts, &[vec![0, 1, 2]]).unwrap();
        assert!(matches!(
            Triangulation::new(k),
            Err(Error::DegenerateSimplex(_))
        ));
    }

    #[test]
    fn partition_sums_to_one() {
        let tri = two_triangles();
        let pu = partition_of_unity(&tri);
        for (t, fs) in &pu.pieces {
            let sum = fs.iter().fold(Polynomial::zero(2), |a, (_, p)| &a + p);
            assert_eq!(sum, Polynomial::one(2));
            for (i, &v) in t.iter().enumerate() {
                let mut u = vec![qi(0); 2];
                if i > 0 {
                    u[i - 1] = qi(1);
                }
                for &w in t {
                    let expect = if w == v { qi(1) } else { qi(0) };
                    assert_eq!(pu.function(t, w).unwrap().eval(&u), expect);
                }
            }
        }
    }

    #[test]
    fn hats_agree_on_shared_edge() {
        let tri = two_triangles();
        let pu = partition_of_unity(&tri);
        // edge [0,2] seen from both triangles
        let a = tri.affine_map(&[0, 1, 2]);
        let b = tri.affine_map(&[0, 2, 3]);
        for s in 0..=4 {
            let s = q(s, 4);
            // point (s,s): local coords in [0,1,2] are (0,s); in [0,2,3] are (s,0)
            let ua = vec![qi(0), s.clone()];
            let ub = vec![s.clone(), qi(0)];
            assert_eq!(a.eval(&ua), b.eval(&ub));
            for v in [0, 2] {
                let fa = pu.function(&[0, 1, 2], v).unwrap().eval(&ua);
                let fb = pu.function(&[0, 2, 3], v).unwrap().eval(&ub);
                assert_eq!(fa, fb);
            }
        }
    }

    #[test]
    fn edge_form_expansion() {
        // λ_0 dλ_1 − λ_1 dλ_0 on a single triangle
        let phi = local_elementary(2, &[0, 1]);
        let l0 = barycentric(2, 0);
        let l1 = barycentric(2, 1);
        let expect = PolyForm::function(l0.clone())
            .wedge(&PolyForm::function(l1.clone()).exterior_derivative())
            .unwrap()
            .sub(
                &PolyForm::function(l1)
                    .wedge(&PolyForm::function(l0).exterior_derivative())
                    .unwrap(),
            )
            .unwrap();
        assert_eq!(phi, expect);
        assert_eq!(
            local_elementary(2, &[1]),
            PolyForm::function(barycentric(2, 1))
        );
    }

    #[test]
    fn commute_and_duality_on_quad() {
        let tri = two_triangles();
        for deg in 0..=2 {
            for s in tri.complex().simplices(deg).to_vec() {
                let f = Cochain::indicator(&s);
                assert!(check_commute(&tri, &f).unwrap().is_zero());
                let psi = derham_exact(&tri, &elementary_form(&tri, &f).unwrap()).unwrap();
                assert_eq!(psi, f, "ψφ ≠ id at {s:?}");
            }
        }
        assert!(elementary_form(&tri, &Cochain::zero(1)).unwrap().is_zero());
    }

    #[test]
    fn stratified_conversion_is_continuous() {
        let tri = two_triangles();
        let phi = elementary_form(&tri, &Cochain::indicator(&[0, 2])).unwrap();
        let w = to_stratified(&tri, &phi).unwrap();
        let rep = crate::forms::check_graph_closed(&w, None, 8, 1e-9).unwrap();
        assert!(rep.pass, "{:?}", rep.worst());
    }
}
