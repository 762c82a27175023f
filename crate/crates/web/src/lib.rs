//! Browser bindings for three interactive views: mollifier smoothing of a
//! sampled 0-form, the Whitney 1-form of an edge cochain on a fan disk, and
//! frames of the lifted retraction of the triangle band.
//!
//! Everything is computed by the plain Rust functions below; the
//! `#[wasm_bindgen]` wrappers only convert errors to strings for JS.

use std::sync::Arc;

use wasm_bindgen::prelude::*;

use strataforms::cohomology::Cochain;
use strataforms::complex::SimplicialComplex;
use strataforms::fixtures::{fan_disk, triangle_band};
use strataforms::forms::PolyForm;
use strataforms::homotopy::{lift_retraction, Delimiter, LiftCell, Retraction, Target};
use strataforms::smoothing::{convolve, GridForm, Mollifier};
use strataforms::whitney::{elementary_form, Triangulation};
use strataforms::{Polynomial, Q};

/// A scalar field on a `res × res` grid over `[lo, hi]²`, x index slowest.
#[wasm_bindgen]
#[derive(Clone, Debug)]
pub struct Field {
    lo: f64,
    hi: f64,
    res: usize,
    values: Vec<f64>,
}

#[wasm_bindgen]
impl Field {
    #[wasm_bindgen(getter)]
    pub fn lo(&self) -> f64 {
        self.lo
    }
    #[wasm_bindgen(getter)]
    pub fn hi(&self) -> f64 {
        self.hi
    }
    #[wasm_bindgen(getter)]
    pub fn res(&self) -> usize {
        self.res
    }
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }
}

impl Field {
    fn from_grid(g: &GridForm) -> Self {
        Field {
            lo: g.lo()[0],
            hi: g.hi()[0],
            res: g.res()[0],
            values: g.values(&[]).expect("0-form").to_vec(),
        }
    }
}

fn preset(name: &str) -> Result<fn(f64, f64) -> f64, String> {
    Ok(match name {
        "step" => |x, _| if x > 0.0 { 1.0 } else { 0.0 },
        "disk" => |x, y| if x * x + y * y < 0.36 { 1.0 } else { 0.0 },
        "checker" => |x, y| if (x > 0.0) == (y > 0.0) { 1.0 } else { 0.0 },
        "ramp" => |x, y| 0.5 + 0.25 * (x + y),
        _ => return Err(format!("unknown preset `{name}`")),
    })
}

/// The preset sampled on `[-1, 1]²` and its mollification with radius
/// `eps` on the inset square.
pub fn smooth_preset(name: &str, res: usize, eps: f64) -> Result<(Field, Field), String> {
    let f = preset(name)?;
    let g = GridForm::from_fn(&[-1.0, -1.0], &[1.0, 1.0], &[res, res], 0, |x| {
        vec![f(x[0], x[1])]
    })
    .map_err(|e| e.to_string())?;
    let s = convolve(&g, &Mollifier::new(eps)).map_err(|e| e.to_string())?;
    Ok((Field::from_grid(&g), Field::from_grid(&s)))
}

#[wasm_bindgen(js_name = smoothPreset)]
pub fn smooth_preset_js(name: &str, res: usize, eps: f64) -> Result<Vec<Field>, String> {
    smooth_preset(name, res, eps).map(|(a, b)| vec![a, b])
}

/// Whitney 1-forms of every edge of a fan disk, kept per triangle in
/// ambient coordinates.
#[wasm_bindgen]
pub struct WhitneyDemo {
    complex: SimplicialComplex,
    tris: Vec<Triangle>,
    /// `[edge][triangle]` local 1-form of the edge's indicator.
    pieces: Vec<Vec<PolyForm>>,
}

struct Triangle {
    verts: Vec<usize>,
    origin: [f64; 2],
    /// `J = [v1 − v0, v2 − v0]`, row-major.
    jac: [f64; 4],
}

impl Triangle {
    fn local(&self, x: [f64; 2]) -> [f64; 2] {
        let [a, b, c, d] = self.jac;
        let det = a * d - b * c;
        let (px, py) = (x[0] - self.origin[0], x[1] - self.origin[1]);
        [(d * px - b * py) / det, (a * py - c * px) / det]
    }

    fn contains(&self, u: [f64; 2]) -> bool {
        u[0] >= -1e-12 && u[1] >= -1e-12 && u[0] + u[1] <= 1.0 + 1e-12
    }

    /// Ambient covector `J^{-T} a` of a local covector `a`.
    fn push(&self, a: [f64; 2]) -> [f64; 2] {
        let [j00, j01, j10, j11] = self.jac;
        let det = j00 * j11 - j01 * j10;
        [
            (j11 * a[0] - j10 * a[1]) / det,
            (j00 * a[1] - j01 * a[0]) / det,
        ]
    }
}

fn point_f64(p: &[Q]) -> [f64; 2] {
    use strataforms::scalar::Scalar;
    [p[0].as_f64(), p[1].as_f64()]
}

impl WhitneyDemo {
    pub fn with_sectors(m: usize) -> Result<Self, String> {
        if m < 3 {
            return Err("a fan disk needs at least 3 sectors".into());
        }
        let complex = fan_disk(m);
        let tri = Triangulation::new(complex.clone()).map_err(|e| e.to_string())?;
        let pts = complex.points();
        let tris: Vec<Triangle> = tri
            .maximal_simplices()
            .iter()
            .map(|t| {
                let [o, a, b] = [
                    point_f64(&pts[t[0]]),
                    point_f64(&pts[t[1]]),
                    point_f64(&pts[t[2]]),
                ];
                Triangle {
                    verts: t.clone(),
                    origin: o,
                    jac: [a[0] - o[0], b[0] - o[0], a[1] - o[1], b[1] - o[1]],
                }
            })
            .collect();
        let pieces = complex
            .simplices(1)
            .iter()
            .map(|e| {
                let phi =
                    elementary_form(&tri, &Cochain::indicator(e)).map_err(|e| e.to_string())?;
                Ok(tris
                    .iter()
                    .map(|t| phi.piece(&t.verts).expect("piece per triangle").clone())
                    .collect())
            })
            .collect::<Result<_, String>>()?;
        Ok(Self {
            complex,
            tris,
            pieces,
        })
    }

    /// Value of `Σ c_e φ_e` at `x`, or `None` outside the disk.
    pub fn eval(&self, cochain: &[f64], x: [f64; 2]) -> Option<[f64; 2]> {
        let (k, u) = self
            .tris
            .iter()
            .enumerate()
            .map(|(k, t)| (k, t.local(x)))
            .find(|(k, u)| self.tris[*k].contains(*u))?;
        let mut a = [0.0; 2];
        for (e, c) in cochain.iter().enumerate().filter(|(_, c)| **c != 0.0) {
            let w = &self.pieces[e][k];
            for (i, ai) in a.iter_mut().enumerate() {
                *ai += c * w.coeff(&[i]).eval_f64(&u);
            }
        }
        Some(self.tris[k].push(a))
    }
}

#[wasm_bindgen]
impl WhitneyDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(sectors: usize) -> Result<WhitneyDemo, String> {
        Self::with_sectors(sectors)
    }

    /// Vertex coordinates, flattened `x, y` pairs.
    pub fn points(&self) -> Vec<f64> {
        self.complex
            .points()
            .iter()
            .flat_map(|p| point_f64(p))
            .collect()
    }

    /// Edges as flattened vertex pairs, in cochain order.
    pub fn edges(&self) -> Vec<u32> {
        self.complex
            .simplices(1)
            .iter()
            .flat_map(|e| e.iter().map(|&v| v as u32))
            .collect()
    }

    /// `x, y, u, v` quadruples on an `n × n` grid over `[-1, 1]²`, for grid
    /// points inside the disk.
    pub fn field(&self, cochain: &[f64], n: usize) -> Result<Vec<f64>, String> {
        if cochain.len() != self.pieces.len() {
            return Err(format!("expected {} edge values", self.pieces.len()));
        }
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let x = [
                    -1.0 + 2.0 * (i as f64 + 0.5) / n as f64,
                    -1.0 + 2.0 * (j as f64 + 0.5) / n as f64,
                ];
                if let Some(v) = self.eval(cochain, x) {
                    out.extend([x[0], x[1], v[0], v[1]]);
                }
            }
        }
        Ok(out)
    }
}

/// The retraction of the band `0 < y < x < 1` obtained by lifting the cone
/// at `0` of `[0, 1]` between `θ_lo = 0` and `θ_hi = x`.
pub fn band_retraction() -> Retraction {
    let zero = || Q::from_integer(0.into());
    let base = Retraction::cone_unchecked(&[zero()], None);
    let samples: Vec<Vec<f64>> = (1..=16).map(|i| vec![i as f64 / 16.0]).collect();
    lift_retraction(
        base,
        Delimiter::Poly(Polynomial::zero(1)),
        Delimiter::Poly(Polynomial::var(1, 0)),
        LiftCell::Band,
        &samples,
        Some(Arc::new(triangle_band())),
        Target::Point(vec![zero(), zero()]),
    )
    .expect("0 < x on the samples")
}

/// Images under `r(·, t)` of the points `(i/n, (j/n)·(i/n))` of a grid on
/// the band, flattened `x, y` pairs with `j` fastest.
pub fn band_frame(t: f64, n: usize) -> Vec<f64> {
    let r = band_retraction();
    let mut out = Vec::with_capacity(2 * (n + 1) * (n + 1));
    for i in 0..=n {
        let x = i as f64 / n as f64;
        for j in 0..=n {
            let y = j as f64 / n as f64 * x;
            out.extend(r.eval_f64(&[x, y], t.clamp(0.0, 1.0)));
        }
    }
    out
}

#[wasm_bindgen(js_name = bandFrame)]
pub fn band_frame_js(t: f64, n: usize) -> Vec<f64> {
    band_frame(t, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_is_reproduced_by_smoothing() {
        let (orig, sm) = smooth_preset("ramp", 41, 0.2).unwrap();
        assert!(sm.res < orig.res);
        let h = (sm.hi - sm.lo) / (sm.res - 1) as f64;
        for i in 0..sm.res {
            for j in 0..sm.res {
                let (x, y) = (sm.lo + i as f64 * h, sm.lo + j as f64 * h);
                assert!((sm.values[i * sm.res + j] - (0.5 + 0.25 * (x + y))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn smoothed_step_is_monotone_in_x() {
        let (_, sm) = smooth_preset("step", 51, 0.3).unwrap();
        let col: Vec<f64> = (0..sm.res)
            .map(|i| sm.values[i * sm.res + sm.res / 2])
            .collect();
        assert!(col.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(col.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
        assert!(col[0] < 1e-12 && col[sm.res - 1] > 1.0 - 1e-12);
    }

    #[test]
    fn bad_inputs_are_reported() {
        assert!(smooth_preset("nope", 21, 0.1).is_err());
        assert!(smooth_preset("step", 21, 1.5).is_err());
        assert!(WhitneyDemo::with_sectors(2).is_err());
    }

    #[test]
    fn whitney_field_matches_barycentric_formula() {
        let w = WhitneyDemo::with_sectors(6).unwrap();
        let pts: Vec<[f64; 2]> = w.points().chunks(2).map(|p| [p[0], p[1]]).collect();
        let edges: Vec<[usize; 2]> = w
            .edges()
            .chunks(2)
            .map(|e| [e[0] as usize, e[1] as usize])
            .collect();
        // the spoke 0 → 1 and a point inside the triangle (0, 1, 2)
        let k = edges.iter().position(|e| *e == [0, 1]).unwrap();
        let mut c = vec![0.0; edges.len()];
        c[k] = 1.0;
        let (p0, p1, p2) = (pts[0], pts[1], pts[2]);
        let x = [
            (p0[0] + p1[0] + p2[0]) / 3.0 + 0.05,
            (p0[1] + p1[1] + p2[1]) / 3.0 - 0.02,
        ];
        // λ_i from Cramer's rule, ∇λ_i from the inverse of the edge matrix
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let grad1 = [(p2[1] - p0[1]) / det, -(p2[0] - p0[0]) / det];
        let grad2 = [-(p1[1] - p0[1]) / det, (p1[0] - p0[0]) / det];
        let grad0 = [-grad1[0] - grad2[0], -grad1[1] - grad2[1]];
        let l1 = grad1[0] * (x[0] - p0[0]) + grad1[1] * (x[1] - p0[1]);
        let l2 = grad2[0] * (x[0] - p0[0]) + grad2[1] * (x[1] - p0[1]);
        let l0 = 1.0 - l1 - l2;
        let expect = [l0 * grad1[0] - l1 * grad0[0], l0 * grad1[1] - l1 * grad0[1]];
        let got = w.eval(&c, x).unwrap();
        assert!((got[0] - expect[0]).abs() < 1e-12 && (got[1] - expect[1]).abs() < 1e-12);
        assert!(w.eval(&c, [2.0, 2.0]).is_none());
    }

    #[test]
    fn whitney_field_length_and_tangential_continuity() {
        let w = WhitneyDemo::with_sectors(5).unwrap();
        let ne = w.edges().len() / 2;
        assert!(w.field(&[1.0], 8).is_err());
        let c: Vec<f64> = (0..ne).map(|i| (i as f64).sin()).collect();
        assert_eq!(w.field(&c, 10).unwrap().len() % 4, 0);
        // across the spoke 0 → 1, tangential components agree
        let pts = w.points();
        let dir = [pts[2] - pts[0], pts[3] - pts[1]];
        let mid = [0.5 * dir[0], 0.5 * dir[1]];
        let nrm = [-dir[1] * 1e-7, dir[0] * 1e-7];
        let a = w.eval(&c, [mid[0] + nrm[0], mid[1] + nrm[1]]).unwrap();
        let b = w.eval(&c, [mid[0] - nrm[0], mid[1] - nrm[1]]).unwrap();
        let ta = a[0] * dir[0] + a[1] * dir[1];
        let tb = b[0] * dir[0] + b[1] * dir[1];
        assert!((ta - tb).abs() < 1e-5, "{ta} vs {tb}");
    }

    #[test]
    fn band_frames_keep_the_fibre_ratio() {
        let n = 6;
        let id = band_frame(1.0, n);
        let half = band_frame(0.5, n);
        let end = band_frame(0.0, n);
        for i in 1..=n {
            for j in 0..=n {
                let k = 2 * (i * (n + 1) + j);
                let x = i as f64 / n as f64;
                assert!(
                    (id[k] - x).abs() < 1e-12
                        && (id[k + 1] - j as f64 / n as f64 * x).abs() < 1e-12
                );
                // y / x is preserved while x shrinks
                assert!((half[k] - 0.5 * x).abs() < 1e-12);
                assert!((half[k + 1] / half[k] - j as f64 / n as f64).abs() < 1e-12);
                assert!(end[k].abs() < 1e-12 && end[k + 1].abs() < 1e-12);
            }
        }
    }
}
