//! Parametrized cells over the reference simplex or box, and catalogues of
//! cells with their faces and registered refinements.

use std::collections::BTreeMap;

use super::rules::DomainKind;
use crate::error::{Error, Result};
use crate::forms::{FloatMap, PolyMap};
use crate::poly::Polynomial;
use crate::scalar::{qi, Q};

/// A map `σ : A → ℝⁿ` from a reference domain, with orientation and faces.
#[derive(Clone, Debug)]
pub struct ParametrizedCell {
    pub id: String,
    pub kind: DomainKind,
    pub map: PolyMap,
    pub orientation: i8,
    /// Face cell ids with their induced signs, in reference-facet order.
    pub faces: Vec<(String, i8)>,
    fmap: FloatMap,
}

impl PartialEq for ParametrizedCell {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.kind == other.kind
            && self.map == other.map
            && self.orientation == other.orientation
            && self.faces == other.faces
    }
}

impl ParametrizedCell {
    pub fn new(id: impl Into<String>, kind: DomainKind, map: PolyMap) -> Self {
        let fmap = map.to_float();
        Self {
            id: id.into(),
            kind,
            map,
            orientation: 1,
            faces: Vec::new(),
            fmap,
        }
    }

    /// Affine simplex through the given vertices, `u ↦ v_0 + Σ u_i (v_i − v_0)`.
    pub fn affine_simplex(id: impl Into<String>, vertices: &[Vec<Q>]) -> Self {
        let origin = &vertices[0];
        let cols: Vec<Vec<Q>> = vertices[1..]
            .iter()
            .map(|v| v.iter().zip(origin).map(|(a, b)| a - b).collect())
            .collect();
        Self::new(id, DomainKind::Simplex, PolyMap::affine(origin, &cols))
    }

    /// Axis-aligned box `Π [lo_i, hi_i]` embedded in its own ambient space.
    pub fn axis_box(id: impl Into<String>, lo: &[Q], hi: &[Q]) -> Self {
        let cols: Vec<Vec<Q>> = (0..lo.len())
            .map(|j| {
                (0..lo.len())
                    .map(|i| if i == j { &hi[i] - &lo[i] } else { qi(0) })
                    .collect()
            })
            .collect();
        Self::new(id, DomainKind::Cube, PolyMap::affine(lo, &cols))
    }

    /// Cell consisting of a single point.
    pub fn point(id: impl Into<String>, p: &[Q]) -> Self {
        Self::new(id, DomainKind::Simplex, PolyMap::constant(0, p))
    }

    pub fn with_orientation(mut self, o: i8) -> Self {
        self.orientation = o;
        self
    }

    pub fn with_faces(mut self, faces: Vec<(String, i8)>) -> Self {
        self.faces = faces;
        self
    }

    pub fn dim(&self) -> usize {
        self.map.source_dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.map.target_dim()
    }

    pub fn float_map(&self) -> &FloatMap {
        &self.fmap
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        self.fmap.eval(u)
    }

    pub fn num_facets(&self) -> usize {
        facet_count(self.kind, self.dim())
    }

    /// Restriction of the map to reference facet `i`.
    pub fn facet_restriction(&self, i: usize) -> PolyMap {
        let (inc, _) = facet_inclusion(self.kind, self.dim(), i);
        self.map
            .compose(&inc)
            .expect("facet inclusion matches cell dimension")
    }

    /// Barycentre of the reference domain.
    /// Facets as cells `{id}/f{i}` with their boundary signs.
    pub fn facet_cells(&self) -> Vec<(ParametrizedCell, i8)> {
        (0..self.num_facets())
            .map(|i| {
                let (inc, sign) = facet_inclusion(self.kind, self.dim(), i);
                let map = self.map.compose(&inc).expect("facet map composes");
                (
                    ParametrizedCell::new(format!("{}/f{i}", self.id), self.kind, map),
                    sign,
                )
            })
            .collect()
    }

    pub fn reference_center(&self) -> Vec<f64> {
        let k = self.dim();
        match self.kind {
            DomainKind::Simplex => vec![1.0 / (k as f64 + 1.0); k],
            DomainKind::Cube => vec![0.5; k],
        }
    }

    /// Whether `u` lies in the closed reference domain, up to `tol`.
    pub fn in_reference(&self, u: &[f64], tol: f64) -> bool {
        match self.kind {
            DomainKind::Simplex => {
                u.iter().all(|&x| x >= -tol) && u.iter().sum::<f64>() <= 1.0 + tol
            }
            DomainKind::Cube => u.iter().all(|&x| x >= -tol && x <= 1.0 + tol),
        }
    }

    /// Distance of `u` to the boundary of the reference domain (negative
    /// outside).
    pub fn reference_depth(&self, u: &[f64]) -> f64 {
        if u.is_empty() {
            return f64::INFINITY;
        }
        match self.kind {
            DomainKind::Simplex => {
                let m = u.iter().cloned().fold(f64::INFINITY, f64::min);
                m.min((1.0 - u.iter().sum::<f64>()) / (u.len() as f64).sqrt())
            }
            DomainKind::Cube => u
                .iter()
                .map(|&x| x.min(1.0 - x))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn project_reference(&self, u: &mut [f64]) {
        match self.kind {
            DomainKind::Cube => u.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0)),
            DomainKind::Simplex => project_to_simplex(u),
        }
    }

    /// Closest point of the closed image to `x`: returns the reference point
    /// and the ambient distance.
    pub fn closest_point(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let k = self.dim();
        let dist = |u: &[f64]| -> f64 {
            self.fmap
                .eval(u)
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        if k == 0 {
            return (vec![], dist(&[]));
        }
        // coarse lattice search
        let m = match k {
            1 => 32,
            2 => 16,
            3 => 8,
            _ => 5,
        };
        let mut best = self.reference_center();
        let mut best_d = dist(&best);
        let mut idx = vec![0usize; k];
        loop {
            let u: Vec<f64> = idx.iter().map(|&i| i as f64 / m as f64).collect();
            if self.in_reference(&u, 1e-12) {
                let d = dist(&u);
                if d < best_d {
                    best_d = d;
                    best = u;
                }
            }
            let mut carry = true;
            for j in (0..k).rev() {
                if carry {
                    idx[j] += 1;
                    if idx[j] > m {
                        idx[j] = 0;
                    } else {
                        carry = false;
                    }
                }
            }
            if carry {
                break;
            }
        }
        // projected Gauss–Newton with step halving
        let mut u = best;
        let mut d = best_d;
        for _ in 0..60 {
            if d < 1e-15 {
                break;
            }
            let fx = self.fmap.eval(&u);
            let r: Vec<f64> = fx.iter().zip(x).map(|(a, b)| a - b).collect();
            let j = self.fmap.jacobian(&u);
            let jm = nalgebra::DMatrix::from_fn(j.len(), k, |a, b| j[a][b]);
            let rv = nalgebra::DVector::from_vec(r);
            let jtj = jm.transpose() * &jm;
            let jtr = jm.transpose() * rv;
            let step = match (jtj.clone() + nalgebra::DMatrix::identity(k, k) * 1e-14)
                .lu()
                .solve(&jtr)
            {
                Some(s) => s,
                None => break,
            };
            let mut lambda = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let mut cand: Vec<f64> = u
                    .iter()
                    .zip(step.iter())
                    .map(|(a, s)| a - lambda * s)
                    .collect();
                self.project_reference(&mut cand);
                let dc = dist(&cand);
                if dc < d {
                    u = cand;
                    d = dc;
                    improved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !improved {
                break;
            }
        }
        (u, d)
    }

    /// Reference points on a lattice of the closed facet `i`, at most
    /// `budget` of them.
    pub fn facet_samples(&self, i: usize, budget: usize) -> Vec<Vec<f64>> {
        let k = self.dim();
        if k == 0 {
            return vec![];
        }
        let (inc, _) = facet_inclusion(self.kind, k, i);
        let finc = inc.to_float();
        reference_lattice(self.kind, k - 1, budget, true)
            .into_iter()
            .map(|v| finc.eval(&v))
            .collect()
    }

    /// Rank of the differential at `u`.
    pub fn rank_at(&self, u: &[f64]) -> usize {
        let j = self.fmap.jacobian(u);
        if self.dim() == 0 {
            return 0;
        }
        let m = nalgebra::DMatrix::from_fn(j.len(), self.dim(), |a, b| j[a][b]);
        let scale = m.abs().max().max(1e-300);
        m.svd(false, false)
            .singular_values
            .iter()
            .filter(|s| **s > 1e-10 * scale)
            .count()
    }
}

/// Euclidean projection onto `{u ≥ 0, Σu ≤ 1}`.
pub fn project_to_simplex(u: &mut [f64]) {
    let clipped: Vec<f64> = u.iter().map(|x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= 1.0 {
        u.copy_from_slice(&clipped);
        return;
    }
    // projection onto the face Σu = 1, u ≥ 0
    let mut s: Vec<f64> = u.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, v) in s.iter().enumerate() {
        acc += v;
        let t = (acc - 1.0) / (i as f64 + 1.0);
        if v - t > 0.0 {
            theta = t;
        }
    }
    for x in u.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Deterministic lattice of about `budget` points in the reference domain of
/// dimension `k`; `closed` includes the boundary, otherwise the points are
/// strictly interior.
pub fn reference_lattice(kind: DomainKind, k: usize, budget: usize, closed: bool) -> Vec<Vec<f64>> {
    if k == 0 {
        return vec![vec![]];
    }
    let per = match kind {
        DomainKind::Cube => (budget as f64).powf(1.0 / k as f64).floor().max(2.0) as usize,
        // the simplex keeps about 1/k! of the cube lattice
        DomainKind::Simplex => {
            let fact: f64 = (1..=k).map(|x| x as f64).product();
            ((budget as f64 * fact).powf(1.0 / k as f64).floor().max(2.0)) as usize
        }
    };
    let coord = |i: usize| -> f64 {
        if closed {
            i as f64 / (per - 1) as f64
        } else {
            (i as f64 + 0.5) / per as f64
        }
    };
    let mut out = Vec::new();
    let mut idx = vec![0usize; k];
    loop {
        let u: Vec<f64> = idx.iter().map(|&i| coord(i)).collect();
        let inside = match kind {
            DomainKind::Cube => true,
            DomainKind::Simplex => {
                if closed {
                    u.iter().sum::<f64>() <= 1.0 + 1e-12
                } else {
                    u.iter().sum::<f64>() < 1.0 - 0.25 / per as f64
                }
            }
        };
        if inside {
            out.push(u);
        }
        let mut j = k;
        loop {
            if j == 0 {
                return out;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < per {
                break;
            }
            idx[j] = 0;
        }
    }
}

pub fn facet_count(kind: DomainKind, k: usize) -> usize {
    match (kind, k) {
        (_, 0) => 0,
        (DomainKind::Simplex, k) => k + 1,
        (DomainKind::Cube, k) => 2 * k,
    }
}

/// Inclusion of the reference domain of facet `i` into the `k`-dimensional
/// reference domain, with the facet's boundary sign.
///
/// Simplex facet `i` omits vertex `e_i` (with `e_0 = 0`) and is parametrized
/// affinely from the remaining vertices in order; its sign is `(−1)^i`.
/// Box facet `2j + s` is `u_j = s`, with sign `(−1)^{j+1+s}`.
pub fn facet_inclusion(kind: DomainKind, k: usize, i: usize) -> (PolyMap, i8) {
    assert!(k >= 1 && i < facet_count(kind, k));
    match kind {
        DomainKind::Simplex => {
            let verts: Vec<Vec<Q>> = (0..=k)
                .filter(|&v| v != i)
                .map(|v| {
                    (0..k)
                        .map(|c| if c + 1 == v { qi(1) } else { qi(0) })
                        .collect()
                })
                .collect();
            let origin = verts[0].clone();
            let cols: Vec<Vec<Q>> = verts[1..]
                .iter()
                .map(|v| v.iter().zip(&origin).map(|(a, b)| a - b).collect())
                .collect();
            let sign = if i % 2 == 0 { 1 } else { -1 };
            (PolyMap::affine(&origin, &cols), sign)
        }
        DomainKind::Cube => {
            let j = i / 2;
            let s = i % 2;
            let comps: Vec<Polynomial> = (0..k)
                .map(|c| {
                    if c == j {
                        Polynomial::constant(k - 1, qi(s as i64))
                    } else {
                        let src = if c < j { c } else { c - 1 };
                        Polynomial::var(k - 1, src)
                    }
                })
                .collect();
            let sign = if (j + 1 + s) % 2 == 0 { 1 } else { -1 };
            (PolyMap::new(k - 1, comps).unwrap(), sign)
        }
    }
}

/// Affine map of the reference domain onto itself shrinking toward the
/// barycentre by the factor `1 − ε`.
pub fn shrink_map(kind: DomainKind, k: usize, eps: &Q) -> PolyMap {
    let f = qi(1) - eps;
    let c = match kind {
        DomainKind::Simplex => Q::new(1.into(), ((k + 1) as i64).into()),
        DomainKind::Cube => Q::new(1.into(), 2.into()),
    };
    let origin: Vec<Q> = (0..k).map(|_| &c * eps).collect();
    let cols: Vec<Vec<Q>> = (0..k)
        .map(|j| {
            (0..k)
                .map(|i| if i == j { f.clone() } else { qi(0) })
                .collect()
        })
        .collect();
    PolyMap::affine(&origin, &cols)
}

/// Registered cells plus refinements `cell ↦ Σ sign·piece`.
#[derive(Clone, Debug, Default)]
pub struct CellCatalogue {
    cells: BTreeMap<String, ParametrizedCell>,
    refinements: BTreeMap<String, Vec<(String, i8)>>,
}

impl CellCatalogue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, cell: ParametrizedCell) {
        self.cells.insert(cell.id.clone(), cell);
    }

    pub fn get(&self, id: &str) -> Result<&ParametrizedCell> {
        self.cells
            .get(id)
            .ok_or_else(|| Error::UnknownCell(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.cells.contains_key(id)
    }

    pub fn cells(&self) -> impl Iterator<Item = &ParametrizedCell> {
        self.cells.values()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Declares that `cell` is the sum of the oriented `pieces`.
    pub fn register_refinement(&mut self, cell: &str, pieces: Vec<(String, i8)>) -> Result<()> {
        let c = self.get(cell)?;
        for (p, _) in &pieces {
            let pc = self.get(p)?;
            if pc.dim() != c.dim() {
                return Err(Error::DimensionMismatch {
                    expected: c.dim(),
                    found: pc.dim(),
                });
            }
        }
        self.refinements.insert(cell.to_string(), pieces);
        Ok(())
    }

    pub fn refinement(&self, cell: &str) -> Option<&[(String, i8)]> {
        self.refinements.get(cell).map(|v| v.as_slice())
    }

    pub fn refinements(&self) -> impl Iterator<Item = (&String, &Vec<(String, i8)>)> {
        self.refinements.iter()
    }

    /// Whether two catalogues register the same cells under the same ids.
    pub fn same_cells(&self, other: &CellCatalogue) -> bool {
        self.cells.len() == other.cells.len()
            && self
                .cells
                .iter()
                .all(|(k, v)| other.cells.get(k).is_some_and(|w| w == v))
    }

    /// Audits rank and face agreement at sample points; returns the list of
    /// problems found.
    pub fn audit(&self, samples: usize, tol: f64) -> Vec<String> {
        let mut problems = Vec::new();
        for cell in self.cells.values() {
            let k = cell.dim();
            for u in reference_lattice(cell.kind, k, samples, false) {
                if cell.rank_at(&u) < k {
                    problems.push(format!("cell `{}` has rank < {k} at {u:?}", cell.id));
                    break;
                }
            }
            if cell.faces.is_empty() {
                continue;
            }
            if cell.faces.len() != cell.num_facets() {
                problems.push(format!(
                    "cell `{}` lists {} faces",
                    cell.id,
                    cell.faces.len()
                ));
                continue;
            }
            for (i, (fid, _)) in cell.faces.iter().enumerate() {
                let Some(face) = self.cells.get(fid) else {
                    problems.push(format!("face `{fid}` of `{}` is not registered", cell.id));
                    continue;
                };
                let restricted = cell.facet_restriction(i).to_float();
                for v in reference_lattice(face.kind, k - 1, samples, true) {
                    let a = restricted.eval(&v);
                    let b = face.eval(&v);
                    let d: f64 = a
                        .iter()
                        .zip(&b)
                        .map(|(x, y)| (x - y).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    if d > tol {
                        problems.push(format!(
                            "face `{fid}` of `{}` disagrees with the facet restriction at {v:?}",
                            cell.id
                        ));
                        break;
                    }
                }
            }
        }
        problems
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;

    #[test]
    fn facet_restrictions_of_triangle() {
        let tri = ParametrizedCell::affine_simplex(
            "t",
            &[vec![qi(0), qi(0)], vec![qi(2), qi(0)], vec![qi(0), qi(2)]],
        );
        // facet 0 runs from v1 to v2
        let f0 = tri.facet_restriction(0).to_float();
        assert_eq!(f0.eval(&[0.0]), vec![2.0, 0.0]);
        assert_eq!(f0.eval(&[1.0]), vec![0.0, 2.0]);
        let (_, s1) = facet_inclusion(DomainKind::Simplex, 2, 1);
        assert_eq!(s1, -1);
    }

    #[test]
    fn box_facet_signs_follow_counterclockwise_boundary() {
        let signs: Vec<i8> = (0..4)
            .map(|i| facet_inclusion(DomainKind::Cube, 2, i).1)
            .collect();
        assert_eq!(signs, vec![-1, 1, 1, -1]);
    }

    #[test]
    fn closest_point_on_segment() {
        let seg = ParametrizedCell::affine_simplex("e", &[vec![qi(0), qi(0)], vec![qi(1), qi(0)]]);
        let (u, d) = seg.closest_point(&[0.3, 0.4]);
        assert!((u[0] - 0.3).abs() < 1e-12);
        assert!((d - 0.4).abs() < 1e-12);
        let (u, d) = seg.closest_point(&[2.0, 0.0]);
        assert!((u[0] - 1.0).abs() < 1e-12);
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closest_point_on_curved_cell() {
        let t = Polynomial::var(1, 0);
        let map = PolyMap::new(1, vec![t.clone(), &t * &t]).unwrap();
        let c = ParametrizedCell::new("p", DomainKind::Simplex, map);
        let (u, d) = c.closest_point(&[0.5, 0.25]);
        assert!(d < 1e-12);
        assert!((u[0] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn simplex_projection() {
        let mut u = vec![0.8, 0.8];
        project_to_simplex(&mut u);
        assert!((u[0] - 0.5).abs() < 1e-15 && (u[1] - 0.5).abs() < 1e-15);
        let mut u = vec![-0.2, 0.3];
        project_to_simplex(&mut u);
        assert_eq!(u, vec![0.0, 0.3]);
    }

    #[test]
    fn shrink_keeps_barycentre() {
        let m = shrink_map(DomainKind::Simplex, 2, &q(1, 4)).to_float();
        let c = m.eval(&[1.0 / 3.0, 1.0 / 3.0]);
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-15);
    }
}
