//! Gauss-type rules on the unit interval, the reference simplex and the unit
//! box.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigInt;
use num_traits::One;

use crate::error::{Error, Result};
use crate::scalar::{q_to_f64, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DomainKind {
    Simplex,
    Cube,
}

/// Nodes and weights on a reference domain.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub kind: DomainKind,
    pub dim: usize,
    /// Polynomial degree integrated exactly.
    pub order: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Gauss–Jacobi rule for `∫_0^1 f(x)(1−x)^α dx` with `n` nodes
/// (Golub–Welsch on the Jacobi matrix of `P_n^{(α,0)}`).
pub fn gauss_jacobi_unit(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let a = alpha;
    let b = 0.0;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for (i, d) in diag.iter_mut().enumerate() {
        let k = i as f64;
        *d = if i == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * k + a + b) * (2.0 * k + a + b + 2.0))
        };
    }
    for (i, o) in off.iter_mut().enumerate() {
        let k = (i + 1) as f64;
        let s = 2.0 * k + a + b;
        *o = (4.0 * k * (k + a) * (k + b) * (k + a + b) / (s * s * (s + 1.0) * (s - 1.0))).sqrt();
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag[i];
        if i + 1 < n {
            m[(i, i + 1)] = off[i];
            m[(i + 1, i)] = off[i];
        }
    }
    let eig = SymmetricEigen::new(m);
    // ∫_{-1}^{1} (1−t)^α dt
    let mu0 = 2f64.powf(a + 1.0) / (a + 1.0);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            let w = mu0 * v0 * v0;
            ((t + 1.0) / 2.0, w / 2f64.powf(a + 1.0))
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs.into_iter().unzip()
}

/// Points per direction needed for exactness up to `order`.
pub fn points_for_order(order: usize) -> usize {
    (order + 2) / 2
}

impl QuadratureRule {
    /// Conical-product rule on the standard simplex `{u ≥ 0, Σu ≤ 1}`.
    pub fn simplex(dim: usize, order: usize) -> Self {
        if dim == 0 {
            return Self::point(DomainKind::Simplex);
        }
        let n = points_for_order(order);
        let factors: Vec<(Vec<f64>, Vec<f64>)> = (1..=dim)
            .map(|j| gauss_jacobi_unit(n, (dim - j) as f64))
            .collect();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut idx = vec![0usize; dim];
        loop {
            // collapsed coordinates s_j ↦ u_j = s_j Π_{i<j}(1 − s_i)
            let mut u = vec![0.0; dim];
            let mut scale = 1.0;
            let mut w = 1.0;
            for j in 0..dim {
                let s = factors[j].0[idx[j]];
                u[j] = s * scale;
                scale *= 1.0 - s;
                w *= factors[j].1[idx[j]];
            }
            nodes.push(u);
            weights.push(w);
            if !advance(&mut idx, n) {
                break;
            }
        }
        Self {
            kind: DomainKind::Simplex,
            dim,
            order,
            nodes,
            weights,
        }
    }

    /// Tensor Gauss–Legendre rule on `[0,1]^dim`.
    pub fn cube(dim: usize, order: usize) -> Self {
        if dim == 0 {
            return Self::point(DomainKind::Cube);
        }
        let n = points_for_order(order);
        let (x, w) = gauss_jacobi_unit(n, 0.0);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut idx = vec![0usize; dim];
        loop {
            nodes.push(idx.iter().map(|&i| x[i]).collect());
            weights.push(idx.iter().map(|&i| w[i]).product());
            if !advance(&mut idx, n) {
                break;
            }
        }
        Self {
            kind: DomainKind::Cube,
            dim,
            order,
            nodes,
            weights,
        }
    }

    fn point(kind: DomainKind) -> Self {
        Self {
            kind,
            dim: 0,
            order: usize::MAX,
            nodes: vec![vec![]],
            weights: vec![1.0],
        }
    }

    pub fn new(kind: DomainKind, dim: usize, order: usize) -> Self {
        match kind {
            DomainKind::Simplex => Self::simplex(dim, order),
            DomainKind::Cube => Self::cube(dim, order),
        }
    }

    /// Checks the rule against exact monomial integrals up to its order.
    pub fn audit(&self, rel_tol: f64) -> Result<()> {
        if self.dim == 0 {
            return Ok(());
        }
        let mut exps = Vec::new();
        monomials_up_to(self.dim, self.order, &mut vec![], &mut exps);
        for e in exps {
            let exact = q_to_f64(&exact_monomial_integral(self.kind, &e));
            let approx: f64 = self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(x, w)| {
                    w * x
                        .iter()
                        .zip(&e)
                        .map(|(xi, &k)| xi.powi(k as i32))
                        .product::<f64>()
                })
                .sum();
            if (approx - exact).abs() > rel_tol * exact.abs().max(1e-300) {
                return Err(Error::Invalid(format!(
                    "quadrature rule fails on monomial {e:?}: {approx} vs {exact}"
                )));
            }
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn advance(idx: &mut [usize], n: usize) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < n {
            return true;
        }
        idx[i] = 0;
    }
    false
}

fn monomials_up_to(dim: usize, order: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if cur.len() == dim {
        out.push(cur.clone());
        return;
    }
    let used: u32 = cur.iter().sum();
    for k in 0..=(order as u32 - used) {
        cur.push(k);
        monomials_up_to(dim, order, cur, out);
        cur.pop();
    }
}

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `∫ u^e` over the reference domain, exactly.
pub fn exact_monomial_integral(kind: DomainKind, e: &[u32]) -> Q {
    match kind {
        DomainKind::Simplex => {
            let num = e.iter().fold(BigInt::one(), |acc, &k| acc * factorial(k));
            let tot: u32 = e.iter().sum::<u32>() + e.len() as u32;
            Q::new(num, factorial(tot))
        }
        DomainKind::Cube => e.iter().fold(Q::one(), |acc, &k| {
            acc / Q::from_integer(BigInt::from(k + 1))
        }),
    }
}

/// Shared, audited rule for `(kind, dim, order)`.
pub fn cached_rule(kind: DomainKind, dim: usize, order: usize) -> Arc<QuadratureRule> {
    static CACHE: OnceLock<Mutex<HashMap<(DomainKind, usize, usize), Arc<QuadratureRule>>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&(kind, dim, order)) {
        return r.clone();
    }
    let rule = QuadratureRule::new(kind, dim, order);
    if dim <= 3 && order <= 24 {
        rule.audit(1e-9)
            .expect("built-in quadrature rule failed its audit");
    }
    let rule = Arc::new(rule);
    cache
        .lock()
        .unwrap()
        .insert((kind, dim, order), rule.clone());
    rule
}
