//! Standard complexes, stratifications and random form generators used by
//! the tests, the command-line tool and the demo.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use crate::complex::{simplex_id, Chain, SimplicialComplex, Stratification, Stratum};
use crate::error::Result;
use crate::forms::{multi_indices, PolyForm, StratifiedForm};
use crate::poly::Polynomial;
use crate::quadrature::{CellCatalogue, DomainKind, ParametrizedCell};
use crate::scalar::{q, qi, Q};

fn pt(c: &[i64]) -> Vec<Q> {
    c.iter().map(|&v| qi(v)).collect()
}

/// Rational point on the unit circle near angle `2π i / m`, from the
/// parametrization `((1 − s²)/(1 + s²), 2s/(1 + s²))` with `s ≈ tan(θ/2)`
/// rounded to a multiple of `1/64`.
pub fn circle_point(i: usize, m: usize) -> Vec<Q> {
    let theta = 2.0 * std::f64::consts::PI * (i % m) as f64 / m as f64;
    if (theta - std::f64::consts::PI).abs() < 1e-12 {
        return vec![qi(-1), qi(0)];
    }
    let s = q(((theta / 2.0).tan() * 64.0).round() as i64, 64);
    let s2 = &s * &s;
    let den = &s2 + qi(1);
    vec![(qi(1) - &s2) / &den, (&s * qi(2)) / &den]
}

/// Boundary of a triangle.
pub fn triangle_boundary() -> SimplicialComplex {
    SimplicialComplex::new(
        vec![pt(&[0, 0]), pt(&[1, 0]), pt(&[0, 1])],
        &[vec![0, 1], vec![1, 2], vec![0, 2]],
    )
    .expect("valid complex")
}

/// Closed polygon through `m` rational circle points.
pub fn polygonal_circle(m: usize) -> SimplicialComplex {
    let pts = (0..m).map(|i| circle_point(i, m)).collect();
    let edges: Vec<Vec<usize>> = (0..m).map(|i| vec![i, (i + 1) % m]).collect();
    SimplicialComplex::new(pts, &edges).expect("valid complex")
}

/// Disk made of `m` triangles around a centre vertex.
pub fn fan_disk(m: usize) -> SimplicialComplex {
    let mut pts = vec![pt(&[0, 0])];
    pts.extend((0..m).map(|i| circle_point(i, m)));
    let tris: Vec<Vec<usize>> = (0..m).map(|i| vec![0, 1 + i, 1 + (i + 1) % m]).collect();
    SimplicialComplex::new(pts, &tris).expect("valid complex")
}

/// Two-ring disk mesh with 20 triangles: a centre, 5 inner and 10 outer
/// vertices.
pub fn disk20() -> SimplicialComplex {
    let mut pts = vec![pt(&[0, 0])];
    let inner = |i: usize| 1 + i % 5;
    let outer = |j: usize| 6 + j % 10;
    for i in 0..5 {
        pts.push(
            circle_point(2 * i, 10)
                .iter()
                .map(|c| c * q(1, 2))
                .collect(),
        );
    }
    for j in 0..10 {
        pts.push(circle_point(j, 10));
    }
    let mut tris = Vec::new();
    for i in 0..5 {
        tris.push(vec![0, inner(i), inner(i + 1)]);
        tris.push(vec![inner(i), outer(2 * i), outer(2 * i + 1)]);
        tris.push(vec![inner(i), outer(2 * i + 1), outer(2 * i + 2)]);
        tris.push(vec![inner(i), outer(2 * i + 2), inner(i + 1)]);
    }
    SimplicialComplex::new(pts, &tris).expect("valid complex")
}

/// Boundary of the octahedron with vertices `±e_i`.
pub fn octahedron() -> SimplicialComplex {
    let pts = vec![
        pt(&[1, 0, 0]),
        pt(&[-1, 0, 0]),
        pt(&[0, 1, 0]),
        pt(&[0, -1, 0]),
        pt(&[0, 0, 1]),
        pt(&[0, 0, -1]),
    ];
    let mut tris = Vec::new();
    for x in [0, 1] {
        for y in [2, 3] {
            for z in [4, 5] {
                tris.push(vec![x, y, z]);
            }
        }
    }
    SimplicialComplex::new(pts, &tris).expect("valid complex")
}

/// Flat torus `S¹ × S¹ ⊂ ℝ⁴` on a 3 × 3 grid of rational circle points,
/// each square cut along its diagonal.
pub fn torus3x3() -> SimplicialComplex {
    let c = [
        vec![qi(1), qi(0)],
        vec![q(-3, 5), q(4, 5)],
        vec![q(-3, 5), q(-4, 5)],
    ];
    let id = |i: usize, j: usize| 3 * (i % 3) + j % 3;
    let mut pts = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            let mut p = c[i].clone();
            p.extend(c[j].iter().cloned());
            pts.push(p);
        }
    }
    let mut tris = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            tris.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            tris.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    SimplicialComplex::new(pts, &tris).expect("valid complex")
}

/// Unit square cut along the diagonal `x = y` into two triangles.
pub fn two_triangle_square() -> SimplicialComplex {
    SimplicialComplex::new(
        vec![pt(&[0, 0]), pt(&[1, 0]), pt(&[1, 1]), pt(&[0, 1])],
        &[vec![0, 1, 2], vec![0, 2, 3]],
    )
    .expect("valid complex")
}

/// Standard 3-simplex cut by the plane `x = y` through the midpoint of the
/// edge `e₁e₂`.
pub fn split_tetrahedron_complex() -> SimplicialComplex {
    SimplicialComplex::new(
        vec![
            pt(&[0, 0, 0]),
            pt(&[1, 0, 0]),
            pt(&[0, 1, 0]),
            pt(&[0, 0, 1]),
            vec![q(1, 2), q(1, 2), qi(0)],
        ],
        &[vec![0, 1, 4, 3], vec![0, 4, 2, 3]],
    )
    .expect("valid complex")
}

/// Open unit square with its 4 open edges and 4 corners; `drop_top`
/// omits the edge `y = 1`.
fn square_strata(drop_top: bool) -> Stratification {
    let sq = ParametrizedCell::axis_box("square", &pt(&[0, 0]), &pt(&[1, 1]));
    let corners = [
        ("v00", [0, 0]),
        ("v10", [1, 0]),
        ("v11", [1, 1]),
        ("v01", [0, 1]),
    ];
    let edges = [
        ("bottom", [0, 0], [1, 0], ["v00", "v10"]),
        ("right", [1, 0], [1, 1], ["v10", "v11"]),
        ("top", [0, 1], [1, 1], ["v01", "v11"]),
        ("left", [0, 0], [0, 1], ["v00", "v01"]),
    ];
    let mut strata = Vec::new();
    let mut adj: Vec<&str> = corners.iter().map(|c| c.0).collect();
    for (id, c) in corners {
        strata.push(Stratum::new(id, ParametrizedCell::point(id, &pt(&c))));
    }
    for (id, a, b, ends) in edges {
        if drop_top && id == "top" {
            continue;
        }
        adj.push(id);
        let cell = ParametrizedCell::affine_simplex(id, &[pt(&a), pt(&b)]);
        strata.push(Stratum::new(id, cell).with_adjacency(ends));
    }
    strata.push(Stratum::new("square", sq).with_adjacency(adj));
    Stratification::new(2, strata, CellCatalogue::new()).expect("valid stratification")
}

/// `{open unit square, its 4 open edges, 4 corners}`.
pub fn unit_square() -> Stratification {
    square_strata(false)
}

/// The unit square with the top edge missing.
pub fn square_missing_edge() -> Stratification {
    square_strata(true)
}

/// A stratification from a complex together with one top cell covering
/// it, refined into the complex's top simplices; used for Stokes checks.
#[derive(Clone, Debug)]
pub struct SplitDomain {
    pub complex: SimplicialComplex,
    pub strat: Arc<Stratification>,
    /// Catalogue holding the covering cell, its facets and their
    /// refinements.
    pub catalogue: CellCatalogue,
    /// The covering cell as a chain.
    pub sigma: Chain,
    /// Polynomial whose zero set separates the top strata.
    pub interface: Polynomial,
}

/// Reference coordinates of `x` in an affine cell, if it lies in the cell.
fn affine_coordinates(cell: &ParametrizedCell, x: &[Q]) -> Option<Vec<f64>> {
    let k = cell.dim();
    let zero = vec![qi(0); k];
    let origin = cell.map.eval(&zero);
    let jac = cell.map.jacobian_at(&zero);
    let n = origin.len();
    let w = nalgebra::DMatrix::from_fn(n, k, |r, c| crate::scalar::q_to_f64(&jac[r][c]));
    let b = nalgebra::DVector::from_fn(n, |r, _| crate::scalar::q_to_f64(&(&x[r] - &origin[r])));
    let wt = w.transpose();
    let u = (&wt * &w).try_inverse()? * (&wt * &b);
    if (&w * &u - &b).norm() > 1e-12 {
        return None;
    }
    let u: Vec<f64> = u.iter().copied().collect();
    cell.in_reference(&u, 1e-12).then_some(u)
}

/// Top-dimensional simplices of `k` of the cell's dimension lying inside the
/// affine cell, each with its orientation relative to the cell.
pub fn refine_by_complex(cell: &ParametrizedCell, k: &SimplicialComplex) -> Vec<(String, i8)> {
    let d = cell.dim();
    let zero = vec![qi(0); d];
    let jac = cell.map.jacobian_at(&zero);
    let mut out = Vec::new();
    for s in k.simplices(d) {
        let inside = s
            .iter()
            .all(|&v| affine_coordinates(cell, &k.points()[v]).is_some());
        if !inside {
            continue;
        }
        let pc = k.simplex_cell(s);
        let pj = pc.map.jacobian_at(&zero);
        // sign of det(Wᵀ P)
        let m = nalgebra::DMatrix::from_fn(d, d, |r, c| {
            (0..jac.len())
                .map(|i| crate::scalar::q_to_f64(&jac[i][r]) * crate::scalar::q_to_f64(&pj[i][c]))
                .sum::<f64>()
        });
        let det = m.determinant();
        if det.abs() > 1e-14 {
            out.push((simplex_id(s), if det > 0.0 { 1 } else { -1 }));
        }
    }
    out
}

fn split_domain(
    complex: SimplicialComplex,
    cover: ParametrizedCell,
    interface: Polynomial,
) -> SplitDomain {
    let strat = Stratification::from_complex(&complex).expect("complex stratifies");
    let mut catalogue = complex.to_catalogue();
    let facets = cover.facet_cells();
    let mut faces = Vec::new();
    for (fc, sign) in facets {
        let pieces = refine_by_complex(&fc, &complex);
        faces.push((fc.id.clone(), sign));
        catalogue.insert(fc.clone());
        catalogue
            .register_refinement(&fc.id, pieces)
            .expect("fresh refinement");
    }
    let cover = cover.with_faces(faces);
    let pieces = refine_by_complex(&cover, &complex);
    catalogue.insert(cover.clone());
    catalogue
        .register_refinement(&cover.id, pieces)
        .expect("fresh refinement");
    SplitDomain {
        complex,
        strat: Arc::new(strat),
        catalogue,
        sigma: Chain::cell(cover.dim(), cover.id.clone()),
        interface,
    }
}

/// The unit square as one cell over the diagonal split.
pub fn split_square() -> SplitDomain {
    let cover = ParametrizedCell::axis_box("square", &pt(&[0, 0]), &pt(&[1, 1]));
    let x = Polynomial::var(2, 0);
    let y = Polynomial::var(2, 1);
    split_domain(two_triangle_square(), cover, &x - &y)
}

/// The standard 3-simplex as one cell over its split by `x = y`.
pub fn split_tetrahedron() -> SplitDomain {
    let cover = ParametrizedCell::affine_simplex(
        "tet",
        &[
            pt(&[0, 0, 0]),
            pt(&[1, 0, 0]),
            pt(&[0, 1, 0]),
            pt(&[0, 0, 1]),
        ],
    );
    let x = Polynomial::var(3, 0);
    let y = Polynomial::var(3, 1);
    split_domain(split_tetrahedron_complex(), cover, &x - &y)
}

impl SplitDomain {
    pub fn top_strata(&self) -> Vec<String> {
        let n = self.strat.dim();
        self.strat.strata_of_dim(n).map(|s| s.id.clone()).collect()
    }

    /// A stratified form equal to `base` on the first top stratum and to
    /// `base + h·η + dh ∧ ξ` (with `h` the interface polynomial) on the
    /// others, so tangential components agree along the interface.
    pub fn matched_form(
        &self,
        base: &PolyForm,
        eta: &PolyForm,
        xi: &PolyForm,
    ) -> Result<StratifiedForm> {
        let h = &self.interface;
        let bump = eta.mul_function(h).add(
            &PolyForm::function(h.clone())
                .exterior_derivative()
                .wedge(xi)?,
        )?;
        let mut given = BTreeMap::new();
        for (i, id) in self.top_strata().into_iter().enumerate() {
            let w = if i == 0 {
                base.clone()
            } else {
                base.add(&bump)?
            };
            given.insert(id, w);
        }
        StratifiedForm::from_partial(self.strat.clone(), base.degree(), given)
    }

    /// A random matched stratified `k`-form with coefficients of degree
    /// `≤ deg`.
    pub fn random_form<R: Rng>(&self, k: usize, deg: u32, rng: &mut R) -> Result<StratifiedForm> {
        let n = self.strat.ambient_dim();
        let base = random_form(n, k, deg, rng);
        let eta = random_form(n, k, deg.saturating_sub(1), rng);
        let xi = if k == 0 {
            PolyForm::zero(n, 0)
        } else {
            random_form(n, k - 1, deg, rng)
        };
        self.matched_form(&base, &eta, &xi)
    }
}

/// Random polynomial in `n` variables of total degree `≤ deg` with
/// coefficients in `{−2, −7/4, …, 2}`, about half of them zero.
pub fn random_polynomial<R: Rng>(n: usize, deg: u32, rng: &mut R) -> Polynomial {
    let mut terms = Vec::new();
    let mut e = vec![0u32; n];
    loop {
        if e.iter().sum::<u32>() <= deg && rng.gen_bool(0.5) {
            terms.push((e.clone(), q(rng.gen_range(-8..=8), 4)));
        }
        // next exponent in the box [0, deg]^n
        let mut i = 0;
        loop {
            if i == n {
                return Polynomial::from_terms(n, terms);
            }
            e[i] += 1;
            if e[i] <= deg {
                break;
            }
            e[i] = 0;
            i += 1;
        }
    }
}

/// Random `k`-form on `ℝⁿ` with coefficients from [`random_polynomial`].
pub fn random_form<R: Rng>(n: usize, k: usize, deg: u32, rng: &mut R) -> PolyForm {
    let terms: Vec<_> = multi_indices(n, k)
        .into_iter()
        .map(|idx| (idx, random_polynomial(n, deg, rng)))
        .collect();
    PolyForm::from_terms(n, k, terms).expect("valid indices")
}

/// Random closed `k`-form `dη` (for `k ≥ 1`) or a random constant
/// (for `k = 0`).
pub fn random_closed_form<R: Rng>(n: usize, k: usize, deg: u32, rng: &mut R) -> PolyForm {
    if k == 0 {
        return PolyForm::constant(n, q(rng.gen_range(-8..=8), 4));
    }
    random_form(n, k - 1, deg + 1, rng).exterior_derivative()
}

fn open_simplex(id: &str, verts: &[Vec<Q>], adj: &[&str]) -> Stratum {
    let cell = if verts.len() == 1 {
        ParametrizedCell::point(id, &verts[0])
    } else {
        ParametrizedCell::affine_simplex(id, verts)
    };
    Stratum::new(id, cell).with_adjacency(adj.iter().copied())
}

/// Window `(−1, 1) × [0, 1)` of the closed upper half-plane:
/// `{y > 0} ∪ {y = 0, x < 0} ∪ {y = 0, x > 0} ∪ {0}`.
pub fn half_plane() -> Stratification {
    let upper = ParametrizedCell::axis_box("upper", &pt(&[-1, 0]), &pt(&[1, 1]));
    let strata = vec![
        open_simplex("origin", &[pt(&[0, 0])], &[]),
        open_simplex("neg_axis", &[pt(&[0, 0]), pt(&[-1, 0])], &["origin"]),
        open_simplex("pos_axis", &[pt(&[0, 0]), pt(&[1, 0])], &["origin"]),
        Stratum::new("upper", upper).with_adjacency(["origin", "neg_axis", "pos_axis"]),
    ];
    Stratification::new(2, strata, CellCatalogue::new()).expect("valid stratification")
}

/// Open triangle `0 < y < x < 1` with the open edges `y = 0` and `y = x`
/// and the origin; the edge `x = 1` is left out.
pub fn triangle_band() -> Stratification {
    let o = pt(&[0, 0]);
    let a = pt(&[1, 0]);
    let b = pt(&[1, 1]);
    let strata = vec![
        open_simplex("origin", &[o.clone()], &[]),
        open_simplex("floor", &[o.clone(), a.clone()], &["origin"]),
        open_simplex("diagonal", &[o.clone(), b.clone()], &["origin"]),
        open_simplex("band", &[o, a, b], &["origin", "floor", "diagonal"]),
    ];
    Stratification::new(2, strata, CellCatalogue::new()).expect("valid stratification")
}

/// Sector `{1 < x + y < 2, x > 0, y > 0}` between two lines; not invariant
/// under scaling towards the origin.
pub fn annular_sector() -> Stratification {
    let u = Polynomial::var(2, 0);
    let v = Polynomial::var(2, 1);
    let one = Polynomial::one(2);
    let r = &one + &u;
    // (u, v) ↦ (1 + u)(1 − v, v)
    let map = crate::forms::PolyMap::new(2, vec![&r * &(&one - &v), &r * &v]).expect("valid map");
    let cell = ParametrizedCell::new("sector", DomainKind::Cube, map);
    Stratification::new(2, vec![Stratum::new("sector", cell)], CellCatalogue::new())
        .expect("valid stratification")
}

/// Square annulus `[−2, 2]² ∖ (−1, 1)²` tiled by four rectangles in a
/// pinwheel, with the four interface segments between them.
pub fn pinwheel_annulus() -> Stratification {
    let rects = [
        ("east", [1, -2], [2, 1]),
        ("north", [-1, 1], [2, 2]),
        ("west", [-2, -1], [-1, 2]),
        ("south", [-2, -2], [1, -1]),
    ];
    let seams = [
        ("seam_en", [1, 1], [2, 1], ["east", "north"]),
        ("seam_nw", [-1, 1], [-1, 2], ["north", "west"]),
        ("seam_ws", [-2, -1], [-1, -1], ["west", "south"]),
        ("seam_se", [1, -2], [1, -1], ["south", "east"]),
    ];
    let mut strata = Vec::new();
    for (id, a, b, _) in seams {
        strata.push(open_simplex(id, &[pt(&a), pt(&b)], &[]));
    }
    for (id, lo, hi) in rects {
        let adj: Vec<&str> = seams
            .iter()
            .filter(|s| s.3.contains(&id))
            .map(|s| s.0)
            .collect();
        strata.push(
            Stratum::new(id, ParametrizedCell::axis_box(id, &pt(&lo), &pt(&hi)))
                .with_adjacency(adj),
        );
    }
    Stratification::new(2, strata, CellCatalogue::new()).expect("valid stratification")
}

/// Closed 1-form on [`pinwheel_annulus`] with period `−3/2` around the
/// hole: `dy/2` on the north and west rectangles, 0 elsewhere.
pub fn pinwheel_form() -> StratifiedForm {
    let strat = Arc::new(pinwheel_annulus());
    let half_dy = PolyForm::basis(2, &[1]).scale(&q(1, 2));
    let zero = PolyForm::zero(2, 1);
    let mut comps = BTreeMap::new();
    for s in strat.strata() {
        let w = match s.id.as_str() {
            "north" | "west" | "seam_nw" => half_dy.clone(),
            _ => zero.clone(),
        };
        comps.insert(s.id.clone(), w);
    }
    StratifiedForm::new(strat, 1, comps).expect("valid form")
}

/// The square `[−1, 1]²` as a cone over its boundary: four open triangles
/// with apex 0, four spokes and the apex (the outer edges are left out).
pub fn cone_over_square() -> Stratification {
    let corners = [pt(&[1, 1]), pt(&[-1, 1]), pt(&[-1, -1]), pt(&[1, -1])];
    let o = pt(&[0, 0]);
    let mut strata = vec![open_simplex("apex", &[o.clone()], &[])];
    let spoke = |i: usize| format!("spoke{i}");
    for (i, c) in corners.iter().enumerate() {
        strata.push(open_simplex(&spoke(i), &[o.clone(), c.clone()], &["apex"]));
    }
    for i in 0..4 {
        let j = (i + 1) % 4;
        let (a, b) = (spoke(i), spoke(j));
        strata.push(open_simplex(
            &format!("wedge{i}"),
            &[o.clone(), corners[i].clone(), corners[j].clone()],
            &["apex", &a, &b],
        ));
    }
    Stratification::new(2, strata, CellCatalogue::new()).expect("valid stratification")
}

/// Box `[−1, 1]²` split along `y = 0`: the two closed halves and the
/// interface segment.
pub fn split_plane() -> Stratification {
    let strata = vec![
        open_simplex("axis", &[pt(&[-1, 0]), pt(&[1, 0])], &[]),
        Stratum::new(
            "upper",
            ParametrizedCell::axis_box("upper", &pt(&[-1, 0]), &pt(&[1, 1])),
        )
        .with_adjacency(["axis"]),
        Stratum::new(
            "lower",
            ParametrizedCell::axis_box("lower", &pt(&[-1, -1]), &pt(&[1, 0])),
        )
        .with_adjacency(["axis"]),
    ];
    Stratification::new(2, strata, CellCatalogue::new()).expect("valid stratification")
}

/// `w` on the upper half of [`split_plane`] and on the axis; `−w` on the
/// lower half when `flip`, else `w`.
pub fn split_plane_form(w: &PolyForm, flip: bool) -> StratifiedForm {
    let strat = Arc::new(split_plane());
    let mut comps = BTreeMap::new();
    comps.insert("upper".to_string(), w.clone());
    comps.insert("lower".to_string(), if flip { w.neg() } else { w.clone() });
    comps.insert("axis".to_string(), w.clone());
    StratifiedForm::new(strat, w.degree(), comps).expect("valid form")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::validate_frontier;

    #[test]
    fn circle_points_are_on_the_circle() {
        for i in 0..12 {
            let p = circle_point(i, 12);
            assert_eq!(&p[0] * &p[0] + &p[1] * &p[1], qi(1));
        }
    }

    #[test]
    fn euler_characteristics() {
        assert_eq!(polygonal_circle(12).euler_characteristic(), 0);
        assert_eq!(disk20().euler_characteristic(), 1);
        assert_eq!(disk20().count(2), 20);
        assert_eq!(octahedron().euler_characteristic(), 2);
        assert_eq!(torus3x3().euler_characteristic(), 0);
        assert_eq!(fan_disk(6).count(2), 6);
    }

    #[test]
    fn square_frontier() {
        assert!(validate_frontier(&unit_square(), 64, 1e-9).pass);
        let bad = validate_frontier(&square_missing_edge(), 64, 1e-9);
        assert!(!bad.pass);
        assert!(bad.failures().all(|f| (f.point[1] - 1.0).abs() < 1e-9));
    }

    #[test]
    fn split_refinements() {
        let sq = split_square();
        assert_eq!(sq.catalogue.refinement("square").unwrap().len(), 2);
        let tet = split_tetrahedron();
        let r = tet.catalogue.refinement("tet").unwrap();
        assert_eq!(r.len(), 2);
        let pieces = Chain::from_terms(3, r.iter().map(|(id, s)| (id.clone(), qi(*s as i64))));
        let vol = PolyForm::basis(3, &[0, 1, 2]);
        let v = crate::quadrature::integrate_chain(&vol, &pieces, &tet.catalogue, 2).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-14);
    }
}
