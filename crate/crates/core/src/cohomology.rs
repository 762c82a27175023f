//! Simplicial cochains over the rationals: coboundary, Betti numbers,
//! primitives and the splitting of a functional through two surjections.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::Serialize;

use crate::complex::SimplicialComplex;
use crate::error::{Error, Result};
use crate::linalg::{
    kernel_basis, mat_vec, rank, rref, solve, solve_particular, transpose, QMatrix,
};
use crate::scalar::{q_to_f64, qi, Q};

/// A k-cochain: values on k-simplices (increasing vertex lists).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cochain {
    degree: usize,
    values: BTreeMap<Vec<usize>, Q>,
}

impl Cochain {
    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            values: BTreeMap::new(),
        }
    }

    /// Value `1` on the oriented simplex `vertices` (negated when the order
    /// is odd relative to the increasing one).
    pub fn indicator(vertices: &[usize]) -> Self {
        let (sorted, sign) =
            crate::forms::sort_with_sign(vertices.to_vec()).expect("distinct vertices");
        let mut c = Self::zero(vertices.len() - 1);
        c.set(sorted, qi(sign));
        c
    }

    pub fn from_values(degree: usize, values: impl IntoIterator<Item = (Vec<usize>, Q)>) -> Self {
        let mut c = Self::zero(degree);
        for (s, v) in values {
            c.set(s, v);
        }
        c
    }

    /// From a dense vector over `K`'s k-simplices.
    pub fn from_vector(k: &SimplicialComplex, degree: usize, v: &[Q]) -> Self {
        Self::from_values(
            degree,
            k.simplices(degree).iter().cloned().zip(v.iter().cloned()),
        )
    }

    pub fn set(&mut self, simplex: Vec<usize>, v: Q) {
        if v.is_zero() {
            self.values.remove(&simplex);
        } else {
            self.values.insert(simplex, v);
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn get(&self, simplex: &[usize]) -> Q {
        self.values.get(simplex).cloned().unwrap_or_else(Q::zero)
    }

    pub fn values(&self) -> &BTreeMap<Vec<usize>, Q> {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    pub fn add(&self, other: &Cochain) -> Cochain {
        assert_eq!(self.degree, other.degree);
        let mut out = self.clone();
        for (s, v) in &other.values {
            let nv = out.get(s) + v;
            out.set(s.clone(), nv);
        }
        out
    }

    pub fn scale(&self, a: &Q) -> Cochain {
        Cochain::from_values(
            self.degree,
            self.values.iter().map(|(s, v)| (s.clone(), v * a)),
        )
    }

    pub fn sub(&self, other: &Cochain) -> Cochain {
        self.add(&other.scale(&qi(-1)))
    }

    /// Dense vector over `K`'s k-simplices; errors if the cochain has values
    /// on simplices outside `K`.
    pub fn to_vector(&self, k: &SimplicialComplex) -> Result<Vec<Q>> {
        let mut v = vec![Q::zero(); k.count(self.degree)];
        for (s, val) in &self.values {
            let i = k
                .index_of(s)
                .filter(|_| s.len() == self.degree + 1)
                .ok_or_else(|| {
                    Error::GradingMismatch(format!("{s:?} is not a {}-simplex of K", self.degree))
                })?;
            v[i] = val.clone();
        }
        Ok(v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .values()
            .map(|v| q_to_f64(v).abs())
            .fold(0.0, f64::max)
    }
}

/// `(df)(τ) = f(∂τ) = Σ_i (−1)^i f(τ with vertex i removed)`.
pub fn coboundary(f: &Cochain, k: &SimplicialComplex) -> Result<Cochain> {
    f.to_vector(k)?;
    let mut out = Cochain::zero(f.degree + 1);
    for t in k.simplices(f.degree + 1) {
        let mut acc = Q::zero();
        for i in 0..t.len() {
            let mut face = t.clone();
            face.remove(i);
            let v = f.get(&face);
            if i % 2 == 0 {
                acc += v;
            } else {
                acc -= v;
            }
        }
        out.set(t.clone(), acc);
    }
    Ok(out)
}

/// Matrix of `d : C^k → C^{k+1}` (rows (k+1)-simplices, columns k-simplices).
pub fn coboundary_matrix(k: &SimplicialComplex, deg: usize) -> QMatrix {
    let b = k.boundary_matrix(deg + 1);
    transpose(&b, k.count(deg), k.count(deg + 1))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BettiTable {
    pub betti: Vec<usize>,
}

impl BettiTable {
    pub fn get(&self, k: usize) -> usize {
        self.betti.get(k).copied().unwrap_or(0)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.betti
            .iter()
            .enumerate()
            .map(|(k, &b)| if k % 2 == 0 { b as i64 } else { -(b as i64) })
            .sum()
    }
}

/// `b_k = dim ker ∂_k − rank ∂_{k+1}`, by exact fraction-free elimination.
pub fn betti(k: &SimplicialComplex) -> BettiTable {
    let Some(top) = k.dim() else {
        return BettiTable { betti: vec![] };
    };
    let ranks: Vec<usize> = (0..=top + 1)
        .map(|d| {
            if d == 0 || d > top {
                0
            } else {
                rank(&k.boundary_matrix(d))
            }
        })
        .collect();
    let betti = (0..=top)
        .map(|d| k.count(d) - ranks[d] - ranks[d + 1])
        .collect();
    BettiTable { betti }
}

/// A `g` with `dg = f`, with free unknowns set to zero; `NoSolution` when the
/// class of `f` is nonzero.
pub fn solve_primitive(f: &Cochain, k: &SimplicialComplex) -> Result<Cochain> {
    if f.degree == 0 {
        return Err(Error::Invalid("0-cochains have no primitive".into()));
    }
    let df = coboundary(f, k)?;
    if !df.is_zero() {
        return Err(Error::NotClosed(format!("{}", df.max_abs())));
    }
    if f.is_zero() {
        return Ok(Cochain::zero(f.degree - 1));
    }
    let m = coboundary_matrix(k, f.degree - 1);
    let b = f.to_vector(k)?;
    let x = solve_particular(&m, &b).ok_or(Error::NoSolution)?;
    Ok(Cochain::from_vector(k, f.degree - 1, &x))
}

/// Basis of closed k-cochains.
pub fn cocycle_basis(k: &SimplicialComplex, deg: usize) -> Vec<Cochain> {
    let n = k.count(deg);
    let m = coboundary_matrix(k, deg);
    let m = if m.is_empty() {
        vec![vec![Q::zero(); n]]
    } else {
        m
    };
    kernel_basis(&m, n)
        .into_iter()
        .map(|v| Cochain::from_vector(k, deg, &v))
        .collect()
}

/// Basis of k-cycles, as coefficient vectors over the k-simplices.
pub fn cycle_basis(k: &SimplicialComplex, deg: usize) -> Vec<Vec<Q>> {
    let n = k.count(deg);
    if deg == 0 {
        return kernel_basis(&[vec![Q::zero(); n]], n);
    }
    let m = k.boundary_matrix(deg);
    let m = if m.is_empty() {
        vec![vec![Q::zero(); n]]
    } else {
        m
    };
    kernel_basis(&m, n)
}

/// Splits `f` as `f = g1∘φ1 + g2∘φ2`. Matrices are row-major (`W_i × V`),
/// functionals are coefficient vectors.
///
/// Following the factorization through `ψ = (φ1, φ2) : V → W1 ⊕ W2`, `g` is
/// defined on `Im ψ` by `g(ψ e_j) = f(e_j)` for the pivot columns `j` of `ψ`
/// and extended by zero on standard vectors completing a basis of `Im ψ`.
pub fn split_functional(
    dim_v: usize,
    phi1: &QMatrix,
    phi2: &QMatrix,
    f: &[Q],
) -> Result<(Vec<Q>, Vec<Q>)> {
    let m1 = phi1.len();
    let m2 = phi2.len();
    if f.len() != dim_v || phi1.iter().chain(phi2).any(|r| r.len() != dim_v) {
        return Err(Error::DimensionMismatch {
            expected: dim_v,
            found: f.len(),
        });
    }
    if rank(phi1) != m1 {
        return Err(Error::NotSurjective("φ1"));
    }
    if rank(phi2) != m2 {
        return Err(Error::NotSurjective("φ2"));
    }
    let psi: QMatrix = phi1.iter().chain(phi2).cloned().collect();
    let mut with_f = psi.clone();
    with_f.push(f.to_vec());
    if rank(&with_f) != rank(&psi) {
        return Err(Error::KernelConditionFails);
    }
    let m = m1 + m2;
    if m == 0 {
        return Ok((vec![], vec![]));
    }
    let (_, pivots) = rref(&psi);
    // basis of W: ψ e_j for pivot j, then greedy standard vectors
    let mut basis: Vec<Vec<Q>> = pivots
        .iter()
        .map(|&j| psi.iter().map(|row| row[j].clone()).collect())
        .collect();
    let mut rhs: Vec<Q> = pivots.iter().map(|&j| f[j].clone()).collect();
    for i in 0..m {
        if basis.len() == m {
            break;
        }
        let mut e = vec![Q::zero(); m];
        e[i] = qi(1);
        let mut trial = basis.clone();
        trial.push(e.clone());
        if rank(&trial) > basis.len() {
            basis = trial;
            rhs.push(Q::zero());
        }
    }
    // g · b_i = rhs_i for every basis vector b_i
    let g = solve(&basis, &rhs).ok_or(Error::KernelConditionFails)?;
    let g1 = g[..m1].to_vec();
    let g2 = g[m1..].to_vec();
    Ok((g1, g2))
}

/// `g1(φ1 x) + g2(φ2 x)` for every standard basis vector `x` of `V`.
pub fn reconstruct(dim_v: usize, phi1: &QMatrix, phi2: &QMatrix, g1: &[Q], g2: &[Q]) -> Vec<Q> {
    (0..dim_v)
        .map(|j| {
            let mut e = vec![Q::zero(); dim_v];
            e[j] = qi(1);
            let a: Q = mat_vec(phi1, &e).iter().zip(g1).map(|(x, y)| x * y).sum();
            let b: Q = mat_vec(phi2, &e).iter().zip(g2).map(|(x, y)| x * y).sum();
            a + b
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle_boundary() -> SimplicialComplex {
        SimplicialComplex::abstract_complex(3, &[vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap()
    }

    #[test]
    fn indicator_coboundary_on_edge() {
        let k = SimplicialComplex::abstract_complex(2, &[vec![0, 1]]).unwrap();
        let df = coboundary(&Cochain::indicator(&[0]), &k).unwrap();
        assert_eq!(df.get(&[0, 1]), qi(-1));
    }

    #[test]
    fn constant_is_closed() {
        let k = triangle_boundary();
        let f = Cochain::from_values(0, (0..3).map(|v| (vec![v], qi(5))));
        assert!(coboundary(&f, &k).unwrap().is_zero());
    }

    #[test]
    fn circle_generator_has_no_primitive() {
        let k = triangle_boundary();
        let f = Cochain::indicator(&[0, 1]);
        assert!(coboundary(&f, &k).unwrap().is_zero());
        assert_eq!(solve_primitive(&f, &k), Err(Error::NoSolution));
        assert_eq!(betti(&k).betti, vec![1, 1]);
    }

    #[test]
    fn primitive_of_zero() {
        let k = triangle_boundary();
        assert!(solve_primitive(&Cochain::zero(1), &k).unwrap().is_zero());
    }

    #[test]
    fn grading_mismatch() {
        let k = triangle_boundary();
        let f = Cochain::indicator(&[0, 1, 2]);
        assert!(matches!(coboundary(&f, &k), Err(Error::GradingMismatch(_))));
    }

    #[test]
    fn split_identity_example() {
        let phi1 = vec![vec![qi(1), qi(0)]];
        let phi2 = vec![vec![qi(0), qi(1)]];
        let (g1, g2) = split_functional(2, &phi1, &phi2, &[qi(1), qi(1)]).unwrap();
        assert_eq!(g1, vec![qi(1)]);
        assert_eq!(g2, vec![qi(1)]);
        let (g1, g2) = split_functional(2, &phi1, &phi2, &[qi(0), qi(0)]).unwrap();
        assert!(g1.iter().chain(&g2).all(|x| x.is_zero()));
    }

    #[test]
    fn split_rejects() {
        let phi1 = vec![vec![qi(1), qi(0), qi(0)]];
        let phi2 = vec![vec![qi(0), qi(1), qi(0)]];
        assert_eq!(
            split_functional(3, &phi1, &phi2, &[qi(0), qi(0), qi(1)]),
            Err(Error::KernelConditionFails)
        );
        let bad = vec![vec![qi(1), qi(0), qi(0)], vec![qi(2), qi(0), qi(0)]];
        assert_eq!(
            split_functional(3, &bad, &phi2, &[qi(0), qi(0), qi(0)]),
            Err(Error::NotSurjective("φ1"))
        );
    }
}
