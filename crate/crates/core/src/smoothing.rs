//! Grid-sampled forms, mollifier convolution, weak-derivative residuals and
//! tube extensions.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::{
    component_label as label, multi_indices, parse_component_label as parse_label, sort_with_sign,
    MultiIndex, PolyForm, StratifiedForm,
};
use crate::poly::Polynomial;
use crate::quadrature::{integrate_cell_order, required_order};
use crate::scalar::{q_to_f64, qi, Q};

/// A `k`-form sampled on a regular grid of an axis-aligned box; `res[a]`
/// counts nodes along axis `a`, the last axis varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridForm {
    lo: Vec<f64>,
    hi: Vec<f64>,
    res: Vec<usize>,
    degree: usize,
    comps: Vec<MultiIndex>,
    values: Vec<Vec<f64>>,
}

impl GridForm {
    pub fn zeros(lo: &[f64], hi: &[f64], res: &[usize], degree: usize) -> Result<Self> {
        let n = lo.len();
        if hi.len() != n || res.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: res.len(),
            });
        }
        if res.iter().any(|&r| r < 4) {
            return Err(Error::Invalid(
                "grid needs at least 4 nodes per axis".into(),
            ));
        }
        if lo.iter().zip(hi).any(|(a, b)| !(b > a)) {
            return Err(Error::Invalid("empty grid box".into()));
        }
        if degree > n {
            return Err(Error::Invalid(format!(
                "degree {degree} exceeds dimension {n}"
            )));
        }
        let comps = multi_indices(n, degree);
        let nodes = res.iter().product();
        Ok(Self {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            res: res.to_vec(),
            degree,
            values: vec![vec![0.0; nodes]; comps.len()],
            comps,
        })
    }

    /// Samples `f(x) → coefficient list` (in `multi_indices` order).
    pub fn from_fn(
        lo: &[f64],
        hi: &[f64],
        res: &[usize],
        degree: usize,
        f: impl Fn(&[f64]) -> Vec<f64> + Sync,
    ) -> Result<Self> {
        let mut g = Self::zeros(lo, hi, res, degree)?;
        let m = g.comps.len();
        let vals: Vec<Vec<f64>> = (0..g.num_nodes())
            .into_par_iter()
            .map(|i| f(&g.node(i)))
            .collect();
        for (i, v) in vals.into_iter().enumerate() {
            if v.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: v.len(),
                });
            }
            for (c, x) in v.into_iter().enumerate() {
                g.values[c][i] = x;
            }
        }
        Ok(g)
    }

    pub fn sample(lo: &[f64], hi: &[f64], res: &[usize], form: &PolyForm) -> Result<Self> {
        let comps = multi_indices(form.dim(), form.degree());
        let polys: Vec<_> = comps.iter().map(|c| form.coeff(c).to_float()).collect();
        Self::from_fn(lo, hi, res, form.degree(), |x| {
            polys.iter().map(|p| p.eval(x)).collect()
        })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn res(&self) -> &[usize] {
        &self.res
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn components(&self) -> &[MultiIndex] {
        &self.comps
    }

    pub fn values(&self, idx: &[usize]) -> Option<&[f64]> {
        self.comps
            .iter()
            .position(|c| c == idx)
            .map(|i| self.values[i].as_slice())
    }

    pub fn step(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|a| (self.hi[a] - self.lo[a]) / (self.res[a] - 1) as f64)
            .collect()
    }

    pub fn num_nodes(&self) -> usize {
        self.res.iter().product()
    }

    fn strides(&self) -> Vec<usize> {
        let n = self.dim();
        let mut s = vec![1; n];
        for a in (0..n.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.res[a + 1];
        }
        s
    }

    pub fn multi(&self, mut i: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            out[a] = i % self.res[a];
            i /= self.res[a];
        }
        out
    }

    pub fn node(&self, i: usize) -> Vec<f64> {
        let h = self.step();
        self.multi(i)
            .iter()
            .enumerate()
            .map(|(a, &k)| self.lo[a] + k as f64 * h[a])
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest coefficient difference on common nodes; `other` must be a
    /// sub-grid of `self` with the same steps, or the same grid.
    pub fn max_diff_on(&self, other: &GridForm) -> Result<f64> {
        let offs = self.subgrid_offsets(other)?;
        let st = self.strides();
        let mut worst: f64 = 0.0;
        for (c, idx) in other.comps.iter().enumerate() {
            let mine = self
                .values(idx)
                .ok_or_else(|| Error::Invalid("component layout differs".into()))?;
            for j in 0..other.num_nodes() {
                let m = other.multi(j);
                let i: usize = m
                    .iter()
                    .zip(&offs)
                    .zip(&st)
                    .map(|((a, o), s)| (a + o) * s)
                    .sum();
                worst = worst.max((mine[i] - other.values[c][j]).abs());
            }
        }
        Ok(worst)
    }

    fn subgrid_offsets(&self, other: &GridForm) -> Result<Vec<usize>> {
        let h = self.step();
        let ho = other.step();
        if self.dim() != other.dim() || self.degree != other.degree {
            return Err(Error::Invalid("grid forms have different shapes".into()));
        }
        (0..self.dim())
            .map(|a| {
                if (h[a] - ho[a]).abs() > 1e-9 * h[a] {
                    return Err(Error::Invalid("grid steps differ".into()));
                }
                let o = ((other.lo[a] - self.lo[a]) / h[a]).round();
                if o < 0.0 || o as usize + other.res[a] > self.res[a] {
                    return Err(Error::Invalid("grid is not a sub-grid".into()));
                }
                Ok(o as usize)
            })
            .collect()
    }

    pub fn sub(&self, other: &GridForm) -> Result<GridForm> {
        if self.res != other.res || self.degree != other.degree {
            return Err(Error::Invalid("grid forms have different shapes".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            for (x, y) in a.iter_mut().zip(b) {
                *x -= y;
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> GridForm {
        let mut out = self.clone();
        out.values.iter_mut().flatten().for_each(|v| *v *= c);
        out
    }

    /// `∂_a` of one node field: central differences inside, second-order
    /// one-sided differences on the two end layers.
    fn partial(&self, f: &[f64], a: usize) -> Vec<f64> {
        let h = self.step()[a];
        let st = self.strides()[a];
        let n = self.res[a];
        (0..f.len())
            .into_par_iter()
            .map(|i| {
                let k = self.multi(i)[a];
                if k == 0 {
                    (-3.0 * f[i] + 4.0 * f[i + st] - f[i + 2 * st]) / (2.0 * h)
                } else if k == n - 1 {
                    (3.0 * f[i] - 4.0 * f[i - st] + f[i - 2 * st]) / (2.0 * h)
                } else {
                    (f[i + st] - f[i - st]) / (2.0 * h)
                }
            })
            .collect()
    }

    /// Discrete exterior derivative.
    pub fn exterior_derivative(&self) -> GridForm {
        let n = self.dim();
        let mut out = GridForm::zeros(&self.lo, &self.hi, &self.res, (self.degree + 1).min(n))
            .expect("same grid");
        if self.degree == n {
            out.degree = n + 1;
            out.comps.clear();
            out.values.clear();
            return out;
        }
        for (c, idx) in self.comps.iter().enumerate() {
            for v in 0..n {
                let mut full = vec![v];
                full.extend_from_slice(idx);
                let Some((sorted, sign)) = sort_with_sign(full) else {
                    continue;
                };
                let d = self.partial(&self.values[c], v);
                let j = out
                    .comps
                    .iter()
                    .position(|x| *x == sorted)
                    .expect("dense layout");
                for (o, x) in out.values[j].iter_mut().zip(&d) {
                    *o += sign as f64 * x;
                }
            }
        }
        out
    }

    /// Pointwise wedge of two forms on the same grid.
    pub fn wedge(&self, other: &GridForm) -> Result<GridForm> {
        if self.res != other.res || self.lo != other.lo || self.hi != other.hi {
            return Err(Error::Invalid("grid forms live on different grids".into()));
        }
        let n = self.dim();
        let deg = self.degree + other.degree;
        if deg > n {
            let mut z = GridForm::zeros(&self.lo, &self.hi, &self.res, 0)?;
            z.degree = deg;
            z.comps.clear();
            z.values.clear();
            return Ok(z);
        }
        let mut out = GridForm::zeros(&self.lo, &self.hi, &self.res, deg)?;
        for (a, ia) in self.comps.iter().enumerate() {
            for (b, ib) in other.comps.iter().enumerate() {
                let mut full = ia.clone();
                full.extend_from_slice(ib);
                let Some((sorted, sign)) = sort_with_sign(full) else {
                    continue;
                };
                let j = out
                    .comps
                    .iter()
                    .position(|x| *x == sorted)
                    .expect("dense layout");
                for i in 0..self.num_nodes() {
                    out.values[j][i] += sign as f64 * self.values[a][i] * other.values[b][i];
                }
            }
        }
        Ok(out)
    }

    /// Text dump: a header (`dim`, `degree`, `lo`, `hi`, `res`,
    /// `components`) and then one line per node with its coefficients.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(s, "gridform 1").unwrap();
        writeln!(s, "dim {}", self.dim()).unwrap();
        writeln!(s, "degree {}", self.degree).unwrap();
        writeln!(s, "lo {}", join(&self.lo)).unwrap();
        writeln!(s, "hi {}", join(&self.hi)).unwrap();
        writeln!(
            s,
            "res {}",
            self.res
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        )
        .unwrap();
        writeln!(
            s,
            "components {}",
            self.comps
                .iter()
                .map(|c| label(c))
                .collect::<Vec<_>>()
                .join(" ")
        )
        .unwrap();
        for i in 0..self.num_nodes() {
            let row: Vec<f64> = self.values.iter().map(|v| v[i]).collect();
            writeln!(s, "{}", join(&row)).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let mut header = BTreeMap::new();
        for key in ["gridform", "dim", "degree", "lo", "hi", "res", "components"] {
            let line = lines
                .next()
                .ok_or_else(|| Error::Invalid(format!("missing `{key}` line")))?;
            let (k, rest) = line.split_once(' ').unwrap_or((line, ""));
            if k != key {
                return Err(Error::Invalid(format!("expected `{key}`, found `{k}`")));
            }
            header.insert(key, rest.trim().to_string());
        }
        let bad = |k: &str| Error::Invalid(format!("bad `{k}` line"));
        if header["gridform"] != "1" {
            return Err(Error::Invalid(format!(
                "unsupported grid form version {}",
                header["gridform"]
            )));
        }
        let floats = |k: &str| -> Result<Vec<f64>> {
            header[k]
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| bad(k)))
                .collect()
        };
        let dim: usize = header["dim"].parse().map_err(|_| bad("dim"))?;
        let degree: usize = header["degree"].parse().map_err(|_| bad("degree"))?;
        let lo = floats("lo")?;
        let hi = floats("hi")?;
        let res: Vec<usize> = header["res"]
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| bad("res")))
            .collect::<Result<_>>()?;
        if lo.len() != dim {
            return Err(bad("lo"));
        }
        let mut g = GridForm::zeros(&lo, &hi, &res, degree)?;
        let comps: Vec<MultiIndex> = header["components"]
            .split_whitespace()
            .map(parse_label)
            .collect::<Result<_>>()?;
        if comps != g.comps {
            return Err(bad("components"));
        }
        for i in 0..g.num_nodes() {
            let line = lines
                .next()
                .ok_or_else(|| Error::Invalid(format!("missing node record {i}")))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|v| {
                    v.parse()
                        .map_err(|_| Error::Invalid(format!("bad node record {i}")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != comps.len() || vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!("bad node record {i}")));
            }
            for (c, v) in vals.into_iter().enumerate() {
                g.values[c][i] = v;
            }
        }
        if lines.next().is_some() {
            return Err(Error::Invalid("trailing node records".into()));
        }
        Ok(g)
    }
}

/// The bump `exp(−1/(1 − |x/ε|²))` on `|x| < ε`, normalized to unit mass on
/// the grid it is sampled on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Mollifier {
    pub radius: f64,
}

impl Mollifier {
    pub fn new(radius: f64) -> Self {
        Self { radius }
    }

    /// Unnormalized profile at offset `x`.
    pub fn profile(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum::<f64>() / (self.radius * self.radius);
        if r2 >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - r2)).exp()
        }
    }
}

/// A compactly supported form sampled on a stencil of grid offsets,
/// with weights that already include the cell volume.
#[derive(Clone, Debug)]
pub struct KernelForm {
    step: Vec<f64>,
    half: Vec<usize>,
    degree: usize,
    comps: Vec<MultiIndex>,
    weights: Vec<Vec<f64>>,
}

impl KernelForm {
    /// `φ_ε · β` on the stencil of grid steps `step`, with `φ_ε` normalized
    /// so that its discrete mass is 1.
    pub fn mollified(m: &Mollifier, step: &[f64], beta: &PolyForm) -> Self {
        let n = step.len();
        let half: Vec<usize> = step
            .iter()
            .map(|h| (m.radius / h).floor() as usize)
            .collect();
        let size: Vec<usize> = half.iter().map(|k| 2 * k + 1).collect();
        let total: usize = size.iter().product();
        let offsets: Vec<Vec<f64>> = (0..total)
            .map(|mut i| {
                let mut o = vec![0.0; n];
                for a in (0..n).rev() {
                    o[a] = (i % size[a]) as f64 - half[a] as f64;
                    i /= size[a];
                }
                o.iter().zip(step).map(|(k, h)| k * h).collect()
            })
            .collect();
        let raw: Vec<f64> = offsets.iter().map(|o| m.profile(o)).collect();
        let mass: f64 = raw.iter().sum();
        let comps = multi_indices(n, beta.degree());
        let weights = comps
            .iter()
            .map(|c| {
                let p = beta.coeff(c).to_float();
                offsets
                    .iter()
                    .zip(&raw)
                    .map(|(o, w)| w / mass * p.eval(o))
                    .collect()
            })
            .collect();
        Self {
            step: step.to_vec(),
            half,
            degree: beta.degree(),
            comps,
            weights,
        }
    }

    /// The mollifier itself as a 0-form kernel.
    pub fn mollifier(m: &Mollifier, step: &[f64]) -> Self {
        Self::mollified(m, step, &PolyForm::constant(step.len(), qi(1)))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Discrete mass of a component.
    pub fn mass(&self, idx: &[usize]) -> f64 {
        self.comps
            .iter()
            .position(|c| c == idx)
            .map_or(0.0, |i| self.weights[i].iter().sum())
    }

    /// Largest `|offset|` carrying a nonzero weight.
    pub fn support_radius(&self) -> f64 {
        let n = self.step.len();
        let size: Vec<usize> = self.half.iter().map(|k| 2 * k + 1).collect();
        let mut r: f64 = 0.0;
        for w in &self.weights {
            for (mut i, v) in w.iter().enumerate() {
                if *v == 0.0 {
                    continue;
                }
                let mut d2 = 0.0;
                for a in (0..n).rev() {
                    let k = (i % size[a]) as f64 - self.half[a] as f64;
                    i /= size[a];
                    d2 += (k * self.step[a]).powi(2);
                }
                r = r.max(d2.sqrt());
            }
        }
        r
    }
}

/// Which factor's values are summed in grid order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Order {
    GridFirst,
    KernelFirst,
}

fn convolve_impl(alpha: &GridForm, beta: &KernelForm, order: Order) -> Result<GridForm> {
    let n = alpha.dim();
    let h = alpha.step();
    if beta.step.len() != n
        || h.iter()
            .zip(&beta.step)
            .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs())
    {
        return Err(Error::Invalid(
            "kernel sampled with a different grid step".into(),
        ));
    }
    let res_out: Vec<usize> = alpha
        .res
        .iter()
        .zip(&beta.half)
        .map(|(r, k)| r.saturating_sub(2 * k))
        .collect();
    if res_out.iter().any(|&r| r < 4) {
        let side = (0..n)
            .map(|a| alpha.hi[a] - alpha.lo[a])
            .fold(f64::INFINITY, f64::min);
        let radius = (0..n)
            .map(|a| beta.half[a] as f64 * h[a])
            .fold(0.0, f64::max);
        return Err(Error::RadiusTooLarge { radius, side });
    }
    let lo: Vec<f64> = (0..n)
        .map(|a| alpha.lo[a] + beta.half[a] as f64 * h[a])
        .collect();
    let hi: Vec<f64> = (0..n)
        .map(|a| alpha.hi[a] - beta.half[a] as f64 * h[a])
        .collect();
    let deg = alpha.degree + beta.degree;
    let mut out = if deg <= n {
        GridForm::zeros(&lo, &hi, &res_out, deg)?
    } else {
        let mut z = GridForm::zeros(&lo, &hi, &res_out, 0)?;
        z.degree = deg;
        z.comps.clear();
        z.values.clear();
        return Ok(z);
    };
    let st = alpha.strides();
    let size: Vec<usize> = beta.half.iter().map(|k| 2 * k + 1).collect();
    let total: usize = size.iter().product();
    // grid offset (in nodes) of every stencil entry
    let offs: Vec<Vec<isize>> = (0..total)
        .map(|mut i| {
            let mut o = vec![0isize; n];
            for a in (0..n).rev() {
                o[a] = (i % size[a]) as isize - beta.half[a] as isize;
                i /= size[a];
            }
            o
        })
        .collect();
    for (ia, ca) in alpha.comps.iter().enumerate() {
        for (ib, cb) in beta.comps.iter().enumerate() {
            let mut full = ca.clone();
            full.extend_from_slice(cb);
            let Some((sorted, sign)) = sort_with_sign(full) else {
                continue;
            };
            let j = out
                .comps
                .iter()
                .position(|x| *x == sorted)
                .expect("dense layout");
            let a_vals = &alpha.values[ia];
            let w = &beta.weights[ib];
            let field: Vec<f64> = (0..out.num_nodes())
                .into_par_iter()
                .map(|p| {
                    let m = out.multi(p);
                    // node of α under the output node
                    let base: Vec<isize> = m
                        .iter()
                        .zip(&beta.half)
                        .map(|(x, k)| (x + k) as isize)
                        .collect();
                    let term = |s: usize| {
                        let idx: isize = base
                            .iter()
                            .zip(&offs[s])
                            .zip(&st)
                            .map(|((b, o), stride)| (b - o) * *stride as isize)
                            .sum();
                        a_vals[idx as usize] * w[s]
                    };
                    match order {
                        Order::KernelFirst => (0..total).map(term).sum::<f64>(),
                        // ascending grid nodes z = x − o, i.e. descending stencil
                        Order::GridFirst => (0..total).rev().map(term).sum::<f64>(),
                    }
                })
                .collect();
            let sgn = sign as f64;
            for (o, v) in out.values[j].iter_mut().zip(field) {
                *o += sgn * v;
            }
        }
    }
    Ok(out)
}

/// `α * β = Σ (a_I * b_J) dx_I ∧ dx_J` on the inset sub-box where the
/// stencil fits.
pub fn form_convolve(alpha: &GridForm, beta: &KernelForm) -> Result<GridForm> {
    convolve_impl(alpha, beta, Order::KernelFirst)
}

/// `β * α = Σ (b_J * a_I) dx_J ∧ dx_I`, summed over grid nodes rather than
/// stencil entries.
pub fn form_convolve_reversed(beta: &KernelForm, alpha: &GridForm) -> Result<GridForm> {
    let g = convolve_impl(alpha, beta, Order::GridFirst)?;
    // dx_J ∧ dx_I = (−1)^{jk} dx_I ∧ dx_J
    let sign = if (alpha.degree * beta.degree) % 2 == 0 {
        1.0
    } else {
        -1.0
    };
    Ok(g.scale(sign))
}

/// `ω_ε = ω * φ_ε`, on the ε-inset sub-box.
pub fn convolve(omega: &GridForm, m: &Mollifier) -> Result<GridForm> {
    let side = (0..omega.dim())
        .map(|a| omega.hi[a] - omega.lo[a])
        .fold(f64::INFINITY, f64::min);
    if !(m.radius > 0.0) || m.radius >= side / 2.0 {
        return Err(Error::RadiusTooLarge {
            radius: m.radius,
            side,
        });
    }
    form_convolve(omega, &KernelForm::mollifier(m, &omega.step()))
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub pass: bool,
    pub step: f64,
    pub bound: f64,
    /// `max |α * β − (−1)^{jk} β * α|`.
    pub commute_residual: f64,
    /// `max |d_h(α * β) − (dα) * β|`.
    pub derivative_residual: f64,
}

/// Residuals of the commutation and derivative identities. When the exact
/// `dα` is supplied (sampled on the same grid) the derivative residual
/// measures the second-order differencing error; otherwise `d_h α` is used.
pub fn check_convolution_identities(
    alpha: &GridForm,
    d_alpha: Option<&GridForm>,
    beta: &KernelForm,
    c: f64,
) -> Result<IdentityReport> {
    let ab = form_convolve(alpha, beta)?;
    let ba = form_convolve_reversed(beta, alpha)?;
    let sign = if (alpha.degree * beta.degree) % 2 == 0 {
        1.0
    } else {
        -1.0
    };
    let commute = ab.sub(&ba.scale(sign))?.max_abs();
    let lhs = ab.exterior_derivative();
    let da = match d_alpha {
        Some(d) => d.clone(),
        None => alpha.exterior_derivative(),
    };
    let rhs = form_convolve(&da, beta)?;
    let deriv = if lhs.comps.is_empty() {
        0.0
    } else {
        lhs.sub(&rhs)?.max_abs()
    };
    let h = alpha.step().into_iter().fold(0.0, f64::max);
    let bound = c * h * h;
    Ok(IdentityReport {
        pass: commute <= bound && deriv <= bound,
        step: h,
        bound,
        commute_residual: commute,
        derivative_residual: deriv,
    })
}

/// Least-squares slope of `log r` against `log h`.
pub fn convergence_order(steps: &[f64], residuals: &[f64]) -> f64 {
    let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakDerivativeReport {
    pub pass: bool,
    pub tol: f64,
    pub residual: f64,
    /// Residual per test form.
    pub per_test: Vec<f64>,
}

/// `Π ((x_i − a_i)(b_i − x_i))²`, vanishing to second order on the box
/// boundary.
pub fn box_bump(lo: &[Q], hi: &[Q]) -> Polynomial {
    let n = lo.len();
    let mut out = Polynomial::one(n);
    for i in 0..n {
        let x = Polynomial::var(n, i);
        let a = &x - &Polynomial::constant(n, lo[i].clone());
        let b = &Polynomial::constant(n, hi[i].clone()) - &x;
        out = &out * &(&a * &b).pow(2);
    }
    out
}

/// Test `(n−k−1)`-forms `bump · Σ_J p_J dx_J` with random quadratic `p_J`.
pub fn test_forms(lo: &[Q], hi: &[Q], degree: usize, count: usize, seed: u64) -> Vec<PolyForm> {
    let n = lo.len();
    let bump = box_bump(lo, hi);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exps: Vec<Vec<u32>> = monomials_up_to(n, 2);
    (0..count)
        .map(|_| {
            let terms = multi_indices(n, degree)
                .into_iter()
                .map(|idx| {
                    let p = Polynomial::from_terms(
                        n,
                        exps.iter().map(|e| {
                            (e.clone(), Q::new(rng.gen_range(-4i64..=4).into(), 4.into()))
                        }),
                    );
                    (idx, &bump * &p)
                })
                .collect::<Vec<_>>();
            PolyForm::from_terms(n, degree, terms).expect("consistent")
        })
        .collect()
}

fn monomials_up_to(n: usize, d: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0; n]];
    for _ in 0..d {
        let mut next = out.clone();
        for e in &out {
            for i in 0..n {
                let mut f = e.clone();
                f[i] += 1;
                if !next.contains(&f) {
                    next.push(f);
                }
            }
        }
        out = next;
    }
    out
}

/// `max_φ |∫ d̄ω ∧ φ − (−1)^{k+1} ∫ ω ∧ dφ|`, integrating over the top
/// strata (which must tile the box `[lo, hi]`) with exact-order quadrature.
pub fn weak_derivative_residual(
    omega: &StratifiedForm,
    candidate: &StratifiedForm,
    lo: &[Q],
    hi: &[Q],
    count: usize,
    seed: u64,
    tol: f64,
) -> Result<WeakDerivativeReport> {
    let n = omega.ambient_dim();
    let k = omega.degree();
    if candidate.degree() != k + 1 {
        return Err(Error::DegreeMismatch {
            form: candidate.degree(),
            cell: k + 1,
        });
    }
    if k >= n {
        return Ok(WeakDerivativeReport {
            pass: true,
            tol,
            residual: 0.0,
            per_test: vec![],
        });
    }
    let strat = omega.stratification();
    let tops: Vec<_> = strat.strata_of_dim(n).collect();
    let sign = if (k + 1) % 2 == 0 { 1.0 } else { -1.0 };
    let per_test: Vec<f64> = test_forms(lo, hi, n - k - 1, count, seed)
        .par_iter()
        .map(|phi| {
            let dphi = phi.exterior_derivative();
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for s in &tops {
                let a = candidate.component_or_zero(&s.id).wedge(phi)?;
                let b = omega.component_or_zero(&s.id).wedge(&dphi)?;
                lhs += integrate_cell_order(&a, &s.cell, required_order(&a, &s.cell))?;
                rhs += integrate_cell_order(&b, &s.cell, required_order(&b, &s.cell))?;
            }
            Ok((lhs - sign * rhs).abs())
        })
        .collect::<Result<_>>()?;
    let residual = per_test.iter().copied().fold(0.0, f64::max);
    Ok(WeakDerivativeReport {
        pass: residual <= tol,
        tol,
        residual,
        per_test,
    })
}

/// Closest-point projection onto a stratum, parametrized by `s ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub enum Projection {
    /// Segment from `a` to `b`.
    Segment { a: Vec<f64>, b: Vec<f64> },
    /// Arc `y = c x²` of a parabola in the plane for `x ∈ [x0, x1]`.
    Parabola { c: f64, x0: f64, x1: f64 },
}

impl Projection {
    /// Parameter `s` of the closest point (unclamped) and the point itself.
    pub fn project(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match self {
            Projection::Segment { a, b } => {
                let d: Vec<f64> = b.iter().zip(a).map(|(p, q)| p - q).collect();
                let dd: f64 = d.iter().map(|v| v * v).sum();
                let s = x
                    .iter()
                    .zip(a)
                    .zip(&d)
                    .map(|((p, q), v)| (p - q) * v)
                    .sum::<f64>()
                    / dd;
                let sc = s.clamp(0.0, 1.0);
                (s, a.iter().zip(&d).map(|(p, v)| p + sc * v).collect())
            }
            Projection::Parabola { c, x0, x1 } => {
                // stationary points of (u − x)² + (c u² − y)²
                let (px, py) = (x[0], x[1]);
                let mut u = px;
                for _ in 0..60 {
                    let g = (u - px) + 2.0 * c * u * (c * u * u - py);
                    let dg = 1.0 + 2.0 * c * (3.0 * c * u * u - py);
                    if dg.abs() < 1e-300 {
                        break;
                    }
                    let step = g / dg;
                    u -= step;
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                let s = (u - x0) / (x1 - x0);
                let uc = u.clamp(*x0, *x1);
                (s, vec![uc, c * uc * uc])
            }
        }
    }
}

/// Tube width along the stratum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Width {
    Constant(f64),
    /// `4 ρ₀ s (1 − s)`, vanishing at both ends.
    Taper(f64),
}

impl Width {
    pub fn at(&self, s: f64) -> f64 {
        match *self {
            Width::Constant(r) => r,
            Width::Taper(r) => 4.0 * r * s * (1.0 - s),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TubeSpec {
    pub projection: Projection,
    pub width: Width,
    /// Constant in the decay audit `|γ(π x)| ≤ C (1 + sup_fiber |dφ_S|)^{-2}`.
    pub decay_constant: f64,
}

/// `e^{−1/u} / (e^{−1/u} + e^{−1/(1−u)})`, smooth from 0 to 1 on `[0, 1]`.
fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

impl TubeSpec {
    /// Cutoff `φ_S`: 1 where `d < ρ/2`, 0 where `d > 3ρ/4` or outside the
    /// open stratum's normal slab.
    pub fn cutoff(&self, x: &[f64]) -> f64 {
        let (s, p) = self.projection.project(x);
        if !(s > 0.0 && s < 1.0) {
            return 0.0;
        }
        let rho = self.width.at(s);
        if rho <= 0.0 {
            return 0.0;
        }
        let d = x
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        1.0 - smooth_step((d - rho / 2.0) / (rho / 4.0))
    }

    pub fn cutoff_gradient(&self, x: &[f64]) -> Vec<f64> {
        let h = 1e-7;
        (0..x.len())
            .map(|i| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += h;
                b[i] -= h;
                (self.cutoff(&a) - self.cutoff(&b)) / (2.0 * h)
            })
            .collect()
    }

    /// `dπ` at `x` (rows: outputs), by central differences.
    pub fn projection_differential(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = x.len();
        let h = 1e-7;
        let mut j = vec![vec![0.0; n]; n];
        for c in 0..n {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[c] += h;
            b[c] -= h;
            let pa = self.projection.project(&a).1;
            let pb = self.projection.project(&b).1;
            for r in 0..n {
                j[r][c] = (pa[r] - pb[r]) / (2.0 * h);
            }
        }
        j
    }

    /// Normal direction at the stratum point with parameter `s`.
    fn fiber(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        match &self.projection {
            Projection::Segment { a, b } => {
                let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect();
                let d: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
                // any unit vector orthogonal to d; in the plane, the rotation
                let mut nrm = vec![0.0; d.len()];
                if d.len() >= 2 {
                    nrm[0] = -d[1];
                    nrm[1] = d[0];
                }
                let l = nrm.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                (p, nrm.iter().map(|v| v / l).collect())
            }
            Projection::Parabola { c, x0, x1 } => {
                let u = x0 + s * (x1 - x0);
                let p = vec![u, c * u * u];
                let t = [1.0, 2.0 * c * u];
                let l = (t[0] * t[0] + t[1] * t[1]).sqrt();
                (p, vec![-t[1] / l, t[0] / l])
            }
        }
    }

    /// `sup |dφ_S|` along the normal fiber over parameter `s`.
    pub fn fiber_gradient_sup(&self, s: f64) -> f64 {
        let rho = self.width.at(s);
        if rho <= 0.0 {
            return 0.0;
        }
        let (p, nrm) = self.fiber(s);
        (0..=32)
            .map(|i| {
                let d = rho * (0.5 + 0.25 * i as f64 / 32.0);
                let x: Vec<f64> = p.iter().zip(&nrm).map(|(a, v)| a + d * v).collect();
                self.cutoff_gradient(&x)
                    .iter()
                    .map(|g| g * g)
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// `γ̂ = φ_S · π*γ` inside the tube, 0 outside.
#[derive(Clone, Debug)]
pub struct TubeExtension {
    pub gamma: PolyForm,
    pub spec: TubeSpec,
    d_gamma: PolyForm,
}

fn pullback_at(form: &PolyForm, y: &[f64], jac: &[Vec<f64>]) -> BTreeMap<MultiIndex, f64> {
    let n = jac.first().map_or(0, |r| r.len());
    let mut out = BTreeMap::new();
    for idx in multi_indices(n, form.degree()) {
        let vs: Vec<Vec<f64>> = idx
            .iter()
            .map(|&i| jac.iter().map(|row| row[i]).collect())
            .collect();
        let v = form.evaluate_on_vectors(y, &vs).unwrap_or(0.0);
        if v != 0.0 {
            out.insert(idx, v);
        }
    }
    out
}

impl TubeExtension {
    /// Coefficients of `γ̂` at `x`.
    pub fn value(&self, x: &[f64]) -> BTreeMap<MultiIndex, f64> {
        let phi = self.spec.cutoff(x);
        if phi == 0.0 {
            return BTreeMap::new();
        }
        let (_, p) = self.spec.projection.project(x);
        let jac = self.spec.projection_differential(x);
        pullback_at(&self.gamma, &p, &jac)
            .into_iter()
            .map(|(k, v)| (k, phi * v))
            .collect()
    }

    /// Coefficients of `dγ̂ = dφ_S ∧ π*γ + φ_S π*dγ` at `x`.
    pub fn derivative(&self, x: &[f64]) -> BTreeMap<MultiIndex, f64> {
        let phi = self.spec.cutoff(x);
        let grad = self.spec.cutoff_gradient(x);
        if phi == 0.0 && grad.iter().all(|g| *g == 0.0) {
            return BTreeMap::new();
        }
        let (_, p) = self.spec.projection.project(x);
        let jac = self.spec.projection_differential(x);
        let pg = pullback_at(&self.gamma, &p, &jac);
        let pdg = pullback_at(&self.d_gamma, &p, &jac);
        let mut out: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        for (v, g) in grad.iter().enumerate() {
            for (idx, c) in &pg {
                let mut full = vec![v];
                full.extend_from_slice(idx);
                if let Some((sorted, sign)) = sort_with_sign(full) {
                    *out.entry(sorted).or_default() += sign as f64 * g * c;
                }
            }
        }
        for (idx, c) in pdg {
            *out.entry(idx).or_default() += phi * c;
        }
        out
    }
}

/// Audits the decay bound at `samples` parameters along the stratum and
/// returns the extension.
pub fn tube_extension(gamma: &PolyForm, spec: TubeSpec, samples: usize) -> Result<TubeExtension> {
    for i in 1..samples.max(2) {
        let s = i as f64 / samples.max(2) as f64;
        let (p, _) = spec.fiber(s);
        let value = gamma
            .coefficients_at(&p)
            .values()
            .map(|v: &f64| v * v)
            .sum::<f64>()
            .sqrt();
        let bound = spec.decay_constant * (1.0 + spec.fiber_gradient_sup(s)).powi(-2);
        if value > bound {
            return Err(Error::DecayAuditFailed {
                point: p,
                value,
                bound,
            });
        }
    }
    Ok(TubeExtension {
        d_gamma: gamma.exterior_derivative(),
        gamma: gamma.clone(),
        spec,
    })
}

/// Euclidean norm of a coefficient map.
pub fn coefficient_norm(c: &BTreeMap<MultiIndex, f64>) -> f64 {
    c.values().map(|v| v * v).sum::<f64>().sqrt()
}

/// Exact value of a rational as a float, for box corners.
pub fn box_to_f64(v: &[Q]) -> Vec<f64> {
    v.iter().map(q_to_f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(res: usize, degree: usize, f: impl Fn(&[f64]) -> Vec<f64> + Sync) -> GridForm {
        GridForm::from_fn(&[0.0, 0.0], &[1.0, 1.0], &[res, res], degree, f).unwrap()
    }

    #[test]
    fn sign_flip_across_axis_in_dy_is_weakly_closed() {
        use crate::fixtures::split_plane_form;
        use crate::scalar::qi;
        let lo = [qi(-1), qi(-1)];
        let hi = [qi(1), qi(1)];
        let zero = split_plane_form(&PolyForm::zero(2, 2), false);
        // dy on top, -dy below is d|y|
        let w = split_plane_form(&PolyForm::basis(2, &[1]), true);
        let r = weak_derivative_residual(&w, &zero, &lo, &hi, 8, 3, 1e-9).unwrap();
        assert!(r.pass, "{}", r.residual);
    }

    #[test]
    fn dump_round_trip() {
        let g = grid(5, 1, |x| vec![x[0].sin(), x[1] * 3.0 - 0.1]);
        let text = g.to_text();
        assert_eq!(GridForm::from_text(&text).unwrap(), g);
        assert!(GridForm::from_text(&text.replace("res 5 5", "res 5 6")).is_err());
    }

    #[test]
    fn mollifier_mass_and_support() {
        let m = Mollifier::new(0.1);
        let k = KernelForm::mollifier(&m, &[1.0 / 63.0, 1.0 / 63.0]);
        assert!((k.mass(&[]) - 1.0).abs() < 1e-10);
        assert!(k.support_radius() < 0.1);
    }

    #[test]
    fn constant_and_linear_preserved() {
        let m = Mollifier::new(0.1);
        let c = grid(64, 0, |_| vec![2.5]);
        let cs = convolve(&c, &m).unwrap();
        assert!(c.max_diff_on(&cs).unwrap() < 1e-10);
        let l = grid(64, 0, |x| vec![x[0]]);
        let ls = convolve(&l, &m).unwrap();
        assert!(l.max_diff_on(&ls).unwrap() < 1e-10);
    }

    #[test]
    fn radius_too_large() {
        let c = grid(16, 0, |_| vec![1.0]);
        assert!(matches!(
            convolve(&c, &Mollifier::new(0.6)),
            Err(Error::RadiusTooLarge { .. })
        ));
    }

    #[test]
    fn discrete_d_squared_is_small() {
        let g = grid(32, 0, |x| vec![x[0] * x[0] * x[1]]);
        let dd = g.exterior_derivative().exterior_derivative();
        assert!(dd.max_abs() < 1e-9);
    }

    #[test]
    fn zero_pair_has_zero_residual() {
        let z = grid(32, 1, |_| vec![0.0, 0.0]);
        let k = KernelForm::mollifier(&Mollifier::new(0.1), &z.step());
        let r = check_convolution_identities(&z, None, &k, 10.0).unwrap();
        assert_eq!(r.commute_residual, 0.0);
        assert_eq!(r.derivative_residual, 0.0);
    }

    #[test]
    fn tube_cutoff_regions() {
        let spec = TubeSpec {
            projection: Projection::Segment {
                a: vec![0.0, 0.0],
                b: vec![1.0, 0.0],
            },
            width: Width::Constant(0.2),
            decay_constant: 1.0,
        };
        assert_eq!(spec.cutoff(&[0.5, 0.05]), 1.0);
        assert_eq!(spec.cutoff(&[0.5, 0.16]), 0.0);
        assert_eq!(spec.cutoff(&[1.5, 0.0]), 0.0);
        let mid = spec.cutoff(&[0.5, 0.125]);
        assert!(mid > 0.0 && mid < 1.0);
    }
}
