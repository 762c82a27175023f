//! Exterior algebra over polynomial coefficients.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::det;
use crate::poly::{FloatPoly, Polynomial};
use crate::scalar::{qi, Scalar, Q};

/// Strictly increasing list of axis indices (0-based).
pub type MultiIndex = Vec<usize>;

/// Sorts `idx` in place and returns the permutation sign, or `None` when an
/// index repeats.
pub fn sort_with_sign(mut idx: Vec<usize>) -> Option<(MultiIndex, i64)> {
    let mut sign = 1;
    // insertion sort, counting transpositions
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some((idx, sign))
    }
}

/// All strictly increasing multi-indices of length `k` over `0..n`, in
/// lexicographic order.
pub fn multi_indices(n: usize, k: usize) -> Vec<MultiIndex> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Polynomial map `ℝ^m → ℝ^n`, one polynomial in `m` variables per component.
#[derive(Clone, PartialEq, Debug)]
pub struct PolyMap {
    source_dim: usize,
    components: Vec<Polynomial>,
}

impl PolyMap {
    pub fn new(source_dim: usize, components: Vec<Polynomial>) -> Result<Self> {
        for c in &components {
            if c.nvars() != source_dim {
                return Err(Error::DimensionMismatch {
                    expected: source_dim,
                    found: c.nvars(),
                });
            }
        }
        Ok(Self {
            source_dim,
            components,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            source_dim: n,
            components: (0..n).map(|i| Polynomial::var(n, i)).collect(),
        }
    }

    pub fn constant(source_dim: usize, point: &[Q]) -> Self {
        Self {
            source_dim,
            components: point
                .iter()
                .map(|c| Polynomial::constant(source_dim, c.clone()))
                .collect(),
        }
    }

    /// `u ↦ origin + Σ_j u_j · columns[j]`.
    pub fn affine(origin: &[Q], columns: &[Vec<Q>]) -> Self {
        let m = columns.len();
        let components = (0..origin.len())
            .map(|i| {
                let lin: Vec<Q> = columns.iter().map(|c| c[i].clone()).collect();
                Polynomial::affine(origin[i].clone(), &lin)
            })
            .collect();
        Self {
            source_dim: m,
            components,
        }
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn target_dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn eval<S: Scalar>(&self, u: &[S]) -> Vec<S> {
        self.components.iter().map(|p| p.eval(u)).collect()
    }

    pub fn eval_f64(&self, u: &[f64]) -> Vec<f64> {
        self.eval(u)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &PolyMap) -> Result<PolyMap> {
        if inner.target_dim() != self.source_dim {
            return Err(Error::DimensionMismatch {
                expected: self.source_dim,
                found: inner.target_dim(),
            });
        }
        Ok(PolyMap {
            source_dim: inner.source_dim,
            components: self
                .components
                .iter()
                .map(|p| p.compose(&inner.components))
                .collect(),
        })
    }

    /// Jacobian as `target × source` polynomials.
    pub fn jacobian(&self) -> Vec<Vec<Polynomial>> {
        self.components
            .iter()
            .map(|p| (0..self.source_dim).map(|j| p.derivative(j)).collect())
            .collect()
    }

    /// Jacobian evaluated at `u`, `target × source`.
    pub fn jacobian_at<S: Scalar>(&self, u: &[S]) -> Vec<Vec<S>> {
        self.components
            .iter()
            .map(|p| {
                (0..self.source_dim)
                    .map(|j| p.derivative(j).eval(u))
                    .collect()
            })
            .collect()
    }

    pub fn degree(&self) -> u32 {
        self.components
            .iter()
            .map(|p| p.degree())
            .max()
            .unwrap_or(0)
    }
}

impl PolyMap {
    /// Floating-point copy with a precomputed Jacobian.
    pub fn to_float(&self) -> FloatMap {
        FloatMap {
            source_dim: self.source_dim,
            components: self.components.iter().map(|p| p.to_float()).collect(),
            jacobian: self
                .jacobian()
                .iter()
                .map(|row| row.iter().map(|p| p.to_float()).collect())
                .collect(),
        }
    }
}

/// Floating-point evaluator for a [`PolyMap`] and its Jacobian.
#[derive(Clone, Debug)]
pub struct FloatMap {
    source_dim: usize,
    components: Vec<FloatPoly>,
    jacobian: Vec<Vec<FloatPoly>>,
}

impl FloatMap {
    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn target_dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        self.components.iter().map(|p| p.eval(u)).collect()
    }

    /// `target × source` Jacobian at `u`.
    pub fn jacobian(&self, u: &[f64]) -> Vec<Vec<f64>> {
        self.jacobian
            .iter()
            .map(|row| row.iter().map(|p| p.eval(u)).collect())
            .collect()
    }
}

/// A k-vector in the elementary basis `e_I`.
#[derive(Clone, Debug, PartialEq)]
pub struct Multivector<S> {
    dim: usize,
    degree: usize,
    components: BTreeMap<MultiIndex, S>,
}

impl<S: Scalar> Multivector<S> {
    pub fn new(dim: usize, degree: usize) -> Self {
        Self {
            dim,
            degree,
            components: BTreeMap::new(),
        }
    }

    /// The unit scalar, the only 0-vector basis element.
    pub fn unit(dim: usize) -> Self {
        let mut m = Self::new(dim, 0);
        m.components.insert(vec![], S::s_one());
        m
    }

    pub fn basis(dim: usize, idx: &[usize]) -> Self {
        let mut m = Self::new(dim, idx.len());
        if let Some((sorted, sign)) = sort_with_sign(idx.to_vec()) {
            m.components.insert(sorted, S::s_from_i64(sign));
        }
        m
    }

    /// `v_1 ∧ … ∧ v_k` expanded in the elementary basis.
    pub fn from_vectors(dim: usize, vectors: &[Vec<S>]) -> Self {
        let k = vectors.len();
        let mut m = Self::new(dim, k);
        for idx in multi_indices(dim, k) {
            let minor: Vec<Vec<S>> = idx
                .iter()
                .map(|&r| vectors.iter().map(|v| v[r].clone()).collect())
                .collect();
            let d = det(&minor);
            if !d.s_is_zero() {
                m.components.insert(idx, d);
            }
        }
        if k == 0 {
            m.components.insert(vec![], S::s_one());
        }
        m
    }

    pub fn add_term(&mut self, idx: MultiIndex, c: S) {
        let e = self.components.entry(idx).or_insert_with(S::s_zero);
        *e = e.clone() + c;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> &BTreeMap<MultiIndex, S> {
        &self.components
    }

    pub fn scale(&self, c: S) -> Self {
        Self {
            dim: self.dim,
            degree: self.degree,
            components: self
                .components
                .iter()
                .map(|(i, v)| (i.clone(), v.clone() * c.clone()))
                .collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.components
            .values()
            .map(|v| v.as_f64().powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// `dx0^dx2`-style text label of a basis multi-index, `1` for degree 0.
pub fn component_label(idx: &[usize]) -> String {
    if idx.is_empty() {
        "1".into()
    } else {
        idx.iter()
            .map(|i| format!("dx{i}"))
            .collect::<Vec<_>>()
            .join("^")
    }
}

/// Inverse of [`component_label`]; also accepts `dx, dy, dz, dw` for the
/// first four axes. The result is not sorted.
pub fn parse_component_label(s: &str) -> Result<MultiIndex> {
    let s = s.trim();
    if s == "1" {
        return Ok(vec![]);
    }
    s.split('^')
        .map(|t| match t.trim() {
            "dx" => Some(0),
            "dy" => Some(1),
            "dz" => Some(2),
            "dw" => Some(3),
            t => t.strip_prefix("dx").and_then(|v| v.parse().ok()),
        })
        .map(|v| v.ok_or_else(|| Error::Invalid(format!("bad component label `{s}`"))))
        .collect()
}

/// Degree-k differential form on `ℝ^dim` with polynomial coefficients,
/// `Σ_I a_I dx_I` over strictly increasing `I`.
#[derive(Clone, PartialEq)]
pub struct PolyForm {
    dim: usize,
    degree: usize,
    coeffs: BTreeMap<MultiIndex, Polynomial>,
}

impl fmt::Debug for PolyForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PolyForm<{}; deg {}>[", self.dim, self.degree)?;
        for (i, (idx, c)) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})dx{idx:?}")?;
        }
        write!(f, "]")
    }
}

impl PolyForm {
    pub fn zero(dim: usize, degree: usize) -> Self {
        Self {
            dim,
            degree,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn function(p: Polynomial) -> Self {
        let mut f = Self::zero(p.nvars(), 0);
        f.add_term(vec![], p);
        f
    }

    pub fn constant(dim: usize, c: Q) -> Self {
        Self::function(Polynomial::constant(dim, c))
    }

    /// `dx_{i_1} ∧ … ∧ dx_{i_k}` for any ordering of `idx`.
    pub fn basis(dim: usize, idx: &[usize]) -> Self {
        Self::term(Polynomial::one(dim), idx)
    }

    /// `p · dx_{i_1} ∧ … ∧ dx_{i_k}` for any ordering of `idx`.
    pub fn term(p: Polynomial, idx: &[usize]) -> Self {
        let dim = p.nvars();
        let mut f = Self::zero(dim, idx.len());
        assert!(idx.iter().all(|&i| i < dim), "axis out of range");
        if let Some((sorted, sign)) = sort_with_sign(idx.to_vec()) {
            f.add_term(sorted, p.scale(&qi(sign)));
        }
        f
    }

    pub fn from_terms(
        dim: usize,
        degree: usize,
        terms: impl IntoIterator<Item = (MultiIndex, Polynomial)>,
    ) -> Result<Self> {
        let mut f = Self::zero(dim, degree);
        for (idx, p) in terms {
            if idx.len() != degree || idx.iter().any(|&i| i >= dim) {
                return Err(Error::Invalid(format!(
                    "multi-index {idx:?} invalid for degree {degree} in dimension {dim}"
                )));
            }
            if p.nvars() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.nvars(),
                });
            }
            let Some((sorted, sign)) = sort_with_sign(idx) else {
                continue;
            };
            f.add_term(sorted, p.scale(&qi(sign)));
        }
        Ok(f)
    }

    /// Form from `(label, polynomial text)` pairs, e.g. `("dx^dy", "x*y")`.
    pub fn parse_terms<'a>(
        dim: usize,
        degree: usize,
        terms: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let parsed = terms
            .into_iter()
            .map(|(l, p)| Ok((parse_component_label(l)?, Polynomial::parse(dim, p)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_terms(dim, degree, parsed)
    }

    fn add_term(&mut self, idx: MultiIndex, p: Polynomial) {
        if p.is_zero() {
            return;
        }
        match self.coeffs.get_mut(&idx) {
            Some(c) => {
                let s = &*c + &p;
                if s.is_zero() {
                    self.coeffs.remove(&idx);
                } else {
                    *c = s;
                }
            }
            None => {
                self.coeffs.insert(idx, p);
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, Polynomial> {
        &self.coeffs
    }

    pub fn coeff(&self, idx: &[usize]) -> Polynomial {
        self.coeffs
            .get(idx)
            .cloned()
            .unwrap_or_else(|| Polynomial::zero(self.dim))
    }

    /// Largest total degree among the coefficients.
    pub fn coefficient_degree(&self) -> u32 {
        self.coeffs.values().map(|p| p.degree()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &PolyForm) -> Result<PolyForm> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (i, p) in &other.coeffs {
            out.add_term(i.clone(), p.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &PolyForm) -> Result<PolyForm> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> PolyForm {
        self.scale(&qi(-1))
    }

    pub fn scale(&self, c: &Q) -> PolyForm {
        let mut out = PolyForm::zero(self.dim, self.degree);
        for (i, p) in &self.coeffs {
            out.add_term(i.clone(), p.scale(c));
        }
        out
    }

    /// Multiplication by a 0-form.
    pub fn mul_function(&self, f: &Polynomial) -> PolyForm {
        let mut out = PolyForm::zero(self.dim, self.degree);
        for (i, p) in &self.coeffs {
            out.add_term(i.clone(), p * f);
        }
        out
    }

    fn check_same(&self, other: &PolyForm) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch {
                form: other.degree,
                cell: self.degree,
            });
        }
        Ok(())
    }

    /// Exterior product. Products beyond the top degree give the zero form
    /// of degree `k + l`.
    pub fn wedge(&self, other: &PolyForm) -> Result<PolyForm> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut out = PolyForm::zero(self.dim, self.degree + other.degree);
        if self.degree + other.degree > self.dim {
            return Ok(out);
        }
        for (i, a) in &self.coeffs {
            for (j, b) in &other.coeffs {
                let mut idx = i.clone();
                idx.extend_from_slice(j);
                if let Some((sorted, sign)) = sort_with_sign(idx) {
                    out.add_term(sorted, (a * b).scale(&qi(sign)));
                }
            }
        }
        Ok(out)
    }

    pub fn exterior_derivative(&self) -> PolyForm {
        let mut out = PolyForm::zero(self.dim, self.degree + 1);
        for (idx, a) in &self.coeffs {
            for v in 0..self.dim {
                if idx.contains(&v) {
                    continue;
                }
                let da = a.derivative(v);
                if da.is_zero() {
                    continue;
                }
                let mut full = vec![v];
                full.extend_from_slice(idx);
                if let Some((sorted, sign)) = sort_with_sign(full) {
                    out.add_term(sorted, da.scale(&qi(sign)));
                }
            }
        }
        out
    }

    /// Pullback along a polynomial map `F : ℝ^m → ℝ^n` (`n = self.dim()`).
    pub fn pullback(&self, f: &PolyMap) -> Result<PolyForm> {
        if f.target_dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: f.target_dim(),
            });
        }
        let m = f.source_dim();
        let mut out = PolyForm::zero(m, self.degree);
        if self.degree > m {
            return Ok(out);
        }
        // dF_i as 1-forms on ℝ^m
        let jac = f.jacobian();
        let dfs: Vec<PolyForm> = jac
            .iter()
            .map(|row| {
                let mut w = PolyForm::zero(m, 1);
                for (j, p) in row.iter().enumerate() {
                    w.add_term(vec![j], p.clone());
                }
                w
            })
            .collect();
        let mut wedge_cache: BTreeMap<MultiIndex, PolyForm> = BTreeMap::new();
        for (idx, a) in &self.coeffs {
            let basis = match wedge_cache.get(idx) {
                Some(b) => b.clone(),
                None => {
                    let mut acc = PolyForm::constant(m, qi(1));
                    for &i in idx {
                        acc = acc.wedge(&dfs[i])?;
                    }
                    wedge_cache.insert(idx.clone(), acc.clone());
                    acc
                }
            };
            let a_f = a.compose(f.components());
            for (j, p) in basis.coeffs {
                out.add_term(j, &p * &a_f);
            }
        }
        Ok(out)
    }

    /// Coefficients `a_I(x)` at a point.
    pub fn coefficients_at<S: Scalar>(&self, x: &[S]) -> BTreeMap<MultiIndex, S> {
        self.coeffs
            .iter()
            .map(|(i, p)| (i.clone(), p.eval(x)))
            .collect()
    }

    /// `ω(x; ξ)` for a k-vector `ξ` given in the elementary basis.
    pub fn evaluate<S: Scalar>(&self, x: &[S], xi: &Multivector<S>) -> Result<S> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if xi.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: xi.dim(),
            });
        }
        if xi.degree() != self.degree {
            return Err(Error::DegreeMismatch {
                form: self.degree,
                cell: xi.degree(),
            });
        }
        let mut acc = S::s_zero();
        for (idx, c) in xi.components() {
            if let Some(p) = self.coeffs.get(idx) {
                acc = acc + p.eval(x) * c.clone();
            }
        }
        Ok(acc)
    }

    /// `ω(x; v_1 ∧ … ∧ v_k)`.
    pub fn evaluate_on_vectors<S: Scalar>(&self, x: &[S], vectors: &[Vec<S>]) -> Result<S> {
        self.evaluate(x, &Multivector::from_vectors(self.dim, vectors))
    }

    /// Re-indexes a form on `ℝ^dim` as a form on `ℝ^(dim + extra)` that does
    /// not depend on the new coordinates.
    pub fn extend_dim(&self, extra: usize) -> PolyForm {
        let mut out = PolyForm::zero(self.dim + extra, self.degree);
        for (i, p) in &self.coeffs {
            out.add_term(i.clone(), p.extend_vars(extra));
        }
        out
    }

    /// Largest absolute coefficient among all coefficient polynomials.
    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs
            .values()
            .map(|p| p.max_abs_coeff())
            .fold(0.0, f64::max)
    }

    pub fn is_closed(&self) -> bool {
        self.exterior_derivative().is_zero()
    }

    /// Top-degree coefficient (the `dx_0 ∧ … ∧ dx_{n-1}` component).
    pub fn top_coefficient(&self) -> Polynomial {
        assert_eq!(self.degree, self.dim, "top coefficient needs degree == dim");
        self.coeff(&(0..self.dim).collect::<Vec<_>>())
    }
}

impl Zero for PolyForm {
    fn zero() -> Self {
        PolyForm::zero(0, 0)
    }
    fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
}

impl std::ops::Add for PolyForm {
    type Output = PolyForm;
    fn add(self, rhs: PolyForm) -> PolyForm {
        if self.dim == 0 && self.coeffs.is_empty() {
            return rhs;
        }
        PolyForm::add(&self, &rhs).expect("adding forms of different shape")
    }
}
