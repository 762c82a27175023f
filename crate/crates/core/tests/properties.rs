use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use strataforms::cohomology::{
    betti, coboundary, reconstruct, solve_primitive, split_functional, Cochain,
};
use strataforms::complex::{
    boundary, refine_common, validate_frontier, Chain, SimplicialComplex, Stratification,
};
use strataforms::fixtures::{
    disk20, fan_disk, half_plane, random_closed_form, random_form, random_polynomial,
    split_plane_form, split_square, triangle_band,
};
use strataforms::forms::{check_graph_closed, Multivector, PolyForm, PolyMap, StratifiedForm};
use strataforms::homotopy::{
    audit_contract, cone_retraction, homotopy_operator, lift_retraction, pullback_at_zero,
    tau_invariance, Delimiter, LiftCell, Retraction, Target,
};
use strataforms::linalg::{rank, QMatrix};
use strataforms::quadrature::{
    integrate_cell_exact, integrate_cell_order, integrate_chain, stokes_residual, DomainKind,
    ParametrizedCell,
};
use strataforms::scalar::{q, q_to_f64, qi};
use strataforms::smoothing::{
    convolve, tube_extension, weak_derivative_residual, GridForm, Mollifier, Projection, TubeSpec,
    Width,
};
use strataforms::whitney::{
    check_commute, derham_quadrature, elementary_form, to_stratified, Triangulation,
};
use strataforms::{Polynomial, Q};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_abstract(r: &mut ChaCha8Rng, max_simplices: usize) -> SimplicialComplex {
    loop {
        let nv = r.gen_range(2..=12);
        let gens: Vec<Vec<usize>> = (0..r.gen_range(1..=16))
            .map(|_| {
                let d = r.gen_range(0..=3usize).min(nv - 1);
                let mut s: Vec<usize> = Vec::new();
                while s.len() < d + 1 {
                    let v = r.gen_range(0..nv);
                    if !s.contains(&v) {
                        s.push(v);
                    }
                }
                s
            })
            .collect();
        let k = SimplicialComplex::abstract_complex(nv, &gens).unwrap();
        if k.total_count() <= max_simplices {
            return k;
        }
    }
}

fn random_affine_simplex(r: &mut ChaCha8Rng, n: usize) -> ParametrizedCell {
    loop {
        let verts: Vec<Vec<Q>> = (0..=n)
            .map(|_| (0..n).map(|_| q(r.gen_range(-6..=6), 3)).collect())
            .collect();
        let c = ParametrizedCell::affine_simplex("c", &verts);
        if c.rank_at(&vec![0.2; n]) == n {
            return c;
        }
    }
}

fn wedge(a: &PolyForm, b: &PolyForm) -> PolyForm {
    a.wedge(b).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn boundary_squared_vanishes(seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = random_abstract(&mut r, 200);
        let cat = k.to_catalogue();
        let d = k.dim().unwrap();
        prop_assume!(d >= 2);
        let deg = r.gen_range(2..=d);
        let c = Chain::from_terms(
            deg,
            k.simplices(deg).iter().map(|s| (strataforms::complex::simplex_id(s), qi(r.gen_range(-3..=3)))),
        );
        let dd = boundary(&boundary(&c, &cat).unwrap(), &cat).unwrap();
        prop_assert!(dd.is_zero());
    }

    #[test]
    fn star_contains_and_is_cofaces(seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = random_abstract(&mut r, 200);
        let d = r.gen_range(0..=k.dim().unwrap());
        let sig = k.simplices(d)[r.gen_range(0..k.count(d))].clone();
        let st = k.star(&sig).unwrap();
        prop_assert!(st.contains(&sig));
        for t in &st {
            prop_assert!(sig.iter().all(|v| t.contains(v)));
        }
    }

    #[test]
    fn frontier_survives_refinement(m in 3usize..10) {
        let s = Stratification::from_complex(&fan_disk(m)).unwrap();
        let common = refine_common(&s, &s).unwrap();
        if validate_frontier(&common, 16, 1e-9).pass {
            prop_assert!(validate_frontier(&s, 16, 1e-9).pass);
        }
    }

    #[test]
    fn wedge_graded_commutative_and_associative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=4);
        let (k, l, m) = (r.gen_range(0..=n), r.gen_range(0..=n), r.gen_range(0..=n));
        let a = random_form(n, k, r.gen_range(0..=3), &mut r);
        let b = random_form(n, l, r.gen_range(0..=3), &mut r);
        let c = random_form(n, m, r.gen_range(0..=2), &mut r);
        let sign = if (k * l) % 2 == 0 { qi(1) } else { qi(-1) };
        prop_assert_eq!(wedge(&a, &b), wedge(&b, &a).scale(&sign));
        prop_assert_eq!(wedge(&wedge(&a, &b), &c), wedge(&a, &wedge(&b, &c)));
    }

    #[test]
    fn wedge_norm_bound(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(2..=4);
        let k = r.gen_range(1..n);
        let l = r.gen_range(1..=n - k);
        let a = random_form(n, k, 2, &mut r);
        let b = random_form(n, l, 2, &mut r);
        let ab = wedge(&a, &b);
        let fact: f64 = (1..=(k + l)).map(|i| i as f64).product();
        for _ in 0..8 {
            let x: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
            let vs: Vec<Vec<f64>> = (0..k + l).map(|_| (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
            let xi = Multivector::from_vectors(n, &vs);
            let norm = xi.norm();
            if norm < 1e-6 {
                continue;
            }
            let v = ab.evaluate(&x, &xi).unwrap().abs() / norm;
            let na: f64 = a.coefficients_at(&x).values().map(|c: &f64| c * c).sum::<f64>().sqrt();
            let nb: f64 = b.coefficients_at(&x).values().map(|c: &f64| c * c).sum::<f64>().sqrt();
            prop_assert!(v <= fact * na * nb + 1e-9);
        }
    }

    #[test]
    fn pullback_commutes_with_d(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = r.gen_range(1..=3);
        let n = r.gen_range(1..=3);
        let f = PolyMap::new(m, (0..n).map(|_| random_polynomial(m, 2, &mut r)).collect()).unwrap();
        let w = random_form(n, r.gen_range(0..=n), 2, &mut r);
        let lhs = w.pullback(&f).unwrap().exterior_derivative();
        let rhs = w.exterior_derivative().pullback(&f).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn leibniz_rule(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=4);
        let k = r.gen_range(0..=n);
        let a = random_form(n, k, 3, &mut r);
        let b = random_form(n, r.gen_range(0..=n), 3, &mut r);
        let sign = if k % 2 == 0 { qi(1) } else { qi(-1) };
        let lhs = wedge(&a, &b).exterior_derivative();
        let rhs = wedge(&a.exterior_derivative(), &b)
            .add(&wedge(&a, &b.exterior_derivative()).scale(&sign))
            .unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn graph_closed_survives_refinement(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dom = split_square();
        let w = dom.random_form(1, 2, &mut r).unwrap();
        prop_assert!(check_graph_closed(&w, None, 8, 1e-9).unwrap().pass);
        let refined = Arc::new(refine_common(&dom.strat, &dom.strat).unwrap());
        let comps: BTreeMap<String, PolyForm> = w.components().clone();
        let v = StratifiedForm::new(refined, 1, comps).unwrap();
        prop_assert!(check_graph_closed(&v, None, 8, 1e-9).unwrap().pass);
    }

    #[test]
    fn integral_independent_of_refinement(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dom = split_square();
        let w = random_form(2, 2, 3, &mut r);
        let whole = integrate_cell_order(&w, dom.catalogue.get("square").unwrap(), 4).unwrap();
        let pieces = Chain::from_terms(
            2,
            dom.catalogue.refinement("square").unwrap().iter().map(|(id, s)| (id.clone(), qi(*s as i64))),
        );
        let split = integrate_chain(&w, &pieces, &dom.catalogue, 4).unwrap();
        prop_assert!((whole - split).abs() <= 1e-12 * whole.abs().max(1.0));
    }

    #[test]
    fn quadrature_matches_exact_and_orientation(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=3);
        let c = random_affine_simplex(&mut r, n);
        let w = random_form(n, n, r.gen_range(0..=4), &mut r);
        let exact = q_to_f64(&integrate_cell_exact(&w, &c).unwrap());
        let num = integrate_cell_order(&w, &c, w.coefficient_degree() as usize).unwrap();
        prop_assert!((exact - num).abs() <= 1e-12 * exact.abs().max(1.0));
        let rev = c.clone().with_orientation(-1);
        prop_assert_eq!(integrate_cell_order(&w, &rev, 6).unwrap(), -integrate_cell_order(&w, &c, 6).unwrap());
    }

    #[test]
    fn stokes_for_global_forms(seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = disk20();
        let strat = Arc::new(Stratification::from_complex(&k).unwrap());
        let w = StratifiedForm::global(strat, &random_form(2, 1, 3, &mut r)).unwrap();
        let sigma = Chain::from_terms(
            2,
            k.simplices(2).iter().map(|s| (strataforms::complex::simplex_id(s), qi(r.gen_range(-2..=2)))),
        );
        let rep = stokes_residual(&w, &sigma, &k.to_catalogue(), 4, &[0.5], 1e-10).unwrap();
        prop_assert!(rep.pass, "{:?}", rep.limit_residual);
    }

    #[test]
    fn euler_and_primitives(seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = random_abstract(&mut r, 120);
        prop_assert_eq!(betti(&k).euler_characteristic(), k.euler_characteristic());
        let deg = r.gen_range(0..=k.dim().unwrap());
        let g = Cochain::from_values(deg, k.simplices(deg).iter().map(|s| (s.clone(), qi(r.gen_range(-3..=3)))));
        let dg = coboundary(&g, &k).unwrap();
        if dg.degree() <= k.dim().unwrap() {
            let h = solve_primitive(&dg, &k).unwrap();
            prop_assert_eq!(coboundary(&h, &k).unwrap(), dg);
        }
    }

    #[test]
    fn split_reconstructs(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=6);
        let mut mat = |rows: usize| -> QMatrix {
            loop {
                let m: QMatrix = (0..rows).map(|_| (0..n).map(|_| qi(r.gen_range(-2..=2))).collect()).collect();
                if rank(&m) == rows {
                    return m;
                }
            }
        };
        let p1 = mat(n / 2);
        let p2 = mat(n - n / 2);
        let g1: Vec<Q> = (0..p1.len()).map(|i| qi(i as i64 - 1)).collect();
        let g2: Vec<Q> = (0..p2.len()).map(|i| q(i as i64 + 1, 2)).collect();
        let f = reconstruct(n, &p1, &p2, &g1, &g2);
        let (h1, h2) = split_functional(n, &p1, &p2, &f).unwrap();
        prop_assert_eq!(reconstruct(n, &p1, &p2, &h1, &h2), f);
    }

    #[test]
    fn whitney_commutes_and_inverts(seed in any::<u64>(), m in 3usize..9) {
        let mut r = rng(seed);
        let tri = Triangulation::new(fan_disk(m)).unwrap();
        let deg = r.gen_range(0..=2);
        let f = Cochain::from_values(
            deg,
            tri.complex().simplices(deg).iter().map(|s| (s.clone(), q(r.gen_range(-4..=4), 2))),
        );
        prop_assert!(check_commute(&tri, &f).unwrap() == Q::from_integer(0.into()));
        let phi = elementary_form(&tri, &f).unwrap();
        let back = derham_quadrature(&tri, &phi, 6).unwrap();
        for (s, v) in tri.complex().simplices(deg).iter().zip(&back) {
            prop_assert!((q_to_f64(&f.get(s)) - v).abs() <= 1e-10);
        }
        let st = to_stratified(&tri, &phi).unwrap();
        prop_assert!(check_graph_closed(&st, None, 4, 1e-9).unwrap().pass);
    }

    #[test]
    fn homotopy_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=3);
        let k = r.gen_range(1..=n);
        let p: Vec<Q> = (0..n).map(|_| q(r.gen_range(-3..=3), 2)).collect();
        let cone = Retraction::cone_unchecked(&p, None);
        let w = random_closed_form(n, k, 2, &mut r);
        let lhs = homotopy_operator(&w, &cone).unwrap().exterior_derivative();
        prop_assert_eq!(lhs, w.sub(&pullback_at_zero(&w, &cone).unwrap()).unwrap());
    }

    #[test]
    fn lifted_tau_invariance(a in 1i64..5, b in 1i64..5, seed in any::<u64>()) {
        // band between θ_lo = −a x² and θ_hi = b x over (0, 1]
        let mut r = rng(seed);
        let x = Polynomial::var(1, 0);
        let lo = Delimiter::Poly(x.pow(2).scale(&qi(-a)));
        let hi = Delimiter::Poly(x.scale(&qi(b)));
        let base = Retraction::cone_unchecked(&[qi(0)], None);
        let lift = lift_retraction(base, lo, hi, LiftCell::Band, &[vec![0.5]], None, Target::Strata(vec![])).unwrap();
        let pts: Vec<Vec<Q>> = (0..20)
            .map(|_| {
                let x = q(r.gen_range(1..=16), 16);
                let t = q(r.gen_range(0..=16), 16);
                let y = &t * &x * qi(b) - (qi(1) - &t) * &x * &x * qi(a);
                vec![x, y]
            })
            .collect();
        let times: Vec<Q> = (1..=8).map(|i| q(i, 8)).collect();
        prop_assert!(tau_invariance(&lift, &pts, &times).unwrap() == Q::from_integer(0.into()));
    }

    #[test]
    fn smoothing_keeps_constants(c in -5.0f64..5.0, eps in 0.05f64..0.3, res in 16usize..48) {
        let g = GridForm::from_fn(&[0.0, 0.0], &[1.0, 1.0], &[res, res], 0, |_| vec![c]).unwrap();
        let s = convolve(&g, &Mollifier::new(eps)).unwrap();
        prop_assert!(g.max_diff_on(&s).unwrap() <= 1e-10 * c.abs().max(1.0));
    }

    #[test]
    fn tube_extension_is_local(seed in any::<u64>()) {
        let mut r = rng(seed);
        let spec = TubeSpec {
            projection: Projection::Segment { a: vec![0.0, 0.0], b: vec![1.0, 0.0] },
            width: Width::Constant(0.2),
            // |dx| = 1 is far above (1 + |dφ_S|)^{-2} for this width
            decay_constant: 1e4,
        };
        let ext = tube_extension(&PolyForm::basis(2, &[0]), spec, 16).unwrap();
        for _ in 0..64 {
            let x = vec![r.gen_range(-0.5..1.5), r.gen_range(-0.5..0.5)];
            let (s, p) = ext.spec.projection.project(&x);
            let d = ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt();
            if !(0.0..=1.0).contains(&s) || d > 0.75 * 0.2 {
                prop_assert!(ext.value(&x).is_empty());
            }
        }
    }

    #[test]
    fn weak_residual_of_exact_pairs(seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = r.gen_range(0..=1);
        let w = random_form(2, k, 3, &mut r);
        let omega = split_plane_form(&w, false);
        let dw = split_plane_form(&w.exterior_derivative(), false);
        let lo = [qi(-1), qi(-1)];
        let hi = [qi(1), qi(1)];
        let rep = weak_derivative_residual(&omega, &dw, &lo, &hi, 4, seed, 1e-6).unwrap();
        prop_assert!(rep.pass, "{}", rep.residual);
    }
}

#[test]
fn contract_audits() {
    let cone = cone_retraction(&[qi(0), qi(0)], Arc::new(half_plane()), 16).unwrap();
    assert!(audit_contract(&cone, 16, 1e-9).unwrap().pass);
    let base = Retraction::cone_unchecked(&[qi(0)], None);
    let lift = lift_retraction(
        base,
        Delimiter::Poly(Polynomial::zero(1)),
        Delimiter::Poly(Polynomial::var(1, 0)),
        LiftCell::Band,
        &[vec![0.5]],
        Some(Arc::new(triangle_band())),
        Target::Point(vec![qi(0), qi(0)]),
    )
    .unwrap();
    assert!(audit_contract(&lift, 16, 1e-9).unwrap().pass);
    let _ = DomainKind::Simplex;
}
