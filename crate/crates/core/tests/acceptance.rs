//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::sync::Arc;
use std::time::Instant;

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use strataforms::cohomology::{betti, reconstruct, split_functional, Cochain};
use strataforms::complex::{simplex_id, Chain, SimplicialComplex};
use strataforms::fixtures::{
    disk20, octahedron, polygonal_circle, random_closed_form, random_form, split_plane_form,
    split_square, split_tetrahedron, torus3x3, triangle_band, SplitDomain,
};
use strataforms::forms::{PolyForm, StratifiedForm};
use strataforms::homotopy::{
    band_points, check_semidifferentiable, default_t_seq, dyadic_times, homotopy_operator,
    lift_retraction, lipschitz_estimate, pullback_at_zero, tau_invariance, Delimiter, LiftCell,
    Retraction, Target,
};
use strataforms::linalg::{kernel_basis, rank, QMatrix};
use strataforms::quadrature::{integrate_chain, integrate_stratified_exact, stokes_residual};
use strataforms::scalar::{q, q_to_f64, qi};
use strataforms::smoothing::{
    check_convolution_identities, convergence_order, convolve, test_forms,
    weak_derivative_residual, GridForm, KernelForm, Mollifier,
};
use strataforms::whitney::{check_commute, pairing_matrix, pairing_rank, Triangulation};
use strataforms::{Polynomial, Q};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn stokes_batch(
    dom: &SplitDomain,
    k: usize,
    count: usize,
    rng: &mut ChaCha8Rng,
    worst: &mut f64,
) -> bool {
    let mut ok = true;
    for _ in 0..count {
        let deg = rng.gen_range(1..=3);
        let w = dom.random_form(k, deg, rng).expect("matched form");
        // integrand degree ≤ deg on affine pieces
        let order = deg as usize + 1;
        let rep = stokes_residual(&w, &dom.sigma, &dom.catalogue, order, &[0.25, 0.125], 1e-9)
            .expect("stokes");
        // exact rational oracle for ∫_σ dω
        let exact =
            integrate_stratified_exact(&w.exterior_derivative(), &dom.sigma, &dom.catalogue)
                .expect("exact");
        let gap = (rep.integral_d_omega - q_to_f64(&exact)).abs();
        *worst = worst.max(rep.limit_residual).max(gap);
        ok &= rep.limit_residual <= 1e-9 && gap <= 1e-9;
    }
    ok
}

fn c1_stokes() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0;
    let sq = split_square();
    let tet = split_tetrahedron();
    let mut ok = stokes_batch(&sq, 1, 20, &mut rng, &mut worst);
    ok &= stokes_batch(&tet, 2, 20, &mut rng, &mut worst);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        ok && secs < 10.0,
        format!("40 forms, max residual {worst:.2e}, {secs:.2}s"),
    )
}

fn random_cochain(k: &SimplicialComplex, deg: usize, rng: &mut ChaCha8Rng) -> Cochain {
    Cochain::from_values(
        deg,
        k.simplices(deg)
            .iter()
            .map(|s| (s.clone(), q(rng.gen_range(-6..=6), rng.gen_range(1..=4)))),
    )
}

fn c2_whitney() -> Outcome {
    let tri = Triangulation::new(disk20()).expect("mesh");
    let mut worst: f64 = 0.0;
    for deg in 0..=2 {
        let m = pairing_matrix(&tri, deg).expect("pairing");
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - e).abs());
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut commute_ok = true;
    for i in 0..10 {
        let f = random_cochain(tri.complex(), i % 2, &mut rng);
        commute_ok &= check_commute(&tri, &f).expect("commute").is_zero();
    }
    outcome(
        worst <= 1e-10 && commute_ok,
        format!("max |M − I| = {worst:.2e}, dφ = φd exact on 10 cochains: {commute_ok}"),
    )
}

fn shoelace(k: &SimplicialComplex, m: usize) -> Q {
    let p = k.points();
    (0..m)
        .map(|i| {
            let (a, b) = (&p[i], &p[(i + 1) % m]);
            &a[0] * &b[1] - &b[0] * &a[1]
        })
        .sum()
}

fn c3_derham() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, k) in [
        ("circle", polygonal_circle(12)),
        ("torus", torus3x3()),
        ("sphere", octahedron()),
    ] {
        let b = betti(&k);
        let tri = Triangulation::new(k.clone()).expect("mesh");
        let dim = k.dim().unwrap_or(0);
        let ranks: Vec<usize> = (0..=dim)
            .map(|d| pairing_rank(&tri, d).expect("rank").0)
            .collect();
        let expect: Vec<usize> = (0..=dim).map(|d| b.get(d)).collect();
        ok &= ranks == expect;
        notes.push(format!("{name} {ranks:?}/{expect:?}"));
    }
    let m = 12;
    let k = polygonal_circle(m);
    let cycle = Chain::from_terms(
        1,
        (0..m).map(|i| {
            let (a, b) = (i, (i + 1) % m);
            if a < b {
                (simplex_id(&[a, b]), qi(1))
            } else {
                (simplex_id(&[b, a]), qi(-1))
            }
        }),
    );
    let x = Polynomial::var(2, 0);
    let y = Polynomial::var(2, 1);
    let w = PolyForm::term(x, &[1])
        .sub(&PolyForm::term(y, &[0]))
        .unwrap();
    let period = integrate_chain(&w, &cycle, &k.to_catalogue(), 4).expect("period");
    let exact = shoelace(&k, m);
    let gap = (period - q_to_f64(&exact)).abs();
    ok &= gap <= 1e-10;
    notes.push(format!("period gap {gap:.2e}"));
    outcome(ok, notes.join(", "))
}

fn c4_poincare() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut closed_ok = 0;
    let mut open_ok = 0;
    for _ in 0..20 {
        let n = rng.gen_range(1..=4);
        let k = rng.gen_range(1..=n.min(3));
        let p: Vec<Q> = (0..n).map(|_| q(rng.gen_range(-4..=4), 3)).collect();
        let r = Retraction::cone_unchecked(&p, None);
        let rhs = |w: &PolyForm| w.sub(&pullback_at_zero(w, &r).unwrap()).unwrap();
        let w = random_closed_form(n, k, rng.gen_range(0..=2), &mut rng);
        if homotopy_operator(&w, &r).unwrap().exterior_derivative() == rhs(&w) {
            closed_ok += 1;
        }
        let v = random_form(n, k, rng.gen_range(1..=3), &mut rng);
        let mut lhs = homotopy_operator(&v, &r).unwrap().exterior_derivative();
        if k < n {
            lhs = lhs
                .add(&homotopy_operator(&v.exterior_derivative(), &r).unwrap())
                .unwrap();
        }
        if lhs == rhs(&v) {
            open_ok += 1;
        }
    }
    outcome(
        closed_ok == 20 && open_ok == 20,
        format!("closed {closed_ok}/20, dK + Kd {open_ok}/20"),
    )
}

fn c5_lift() -> Outcome {
    let base = Retraction::cone_unchecked(&[qi(0)], None);
    let samples: Vec<Vec<f64>> = (1..=64).map(|i| vec![i as f64 / 64.0]).collect();
    let r = lift_retraction(
        base,
        Delimiter::Poly(Polynomial::zero(1)),
        Delimiter::Poly(Polynomial::var(1, 0)),
        LiftCell::Band,
        &samples,
        Some(Arc::new(triangle_band())),
        Target::Point(vec![qi(0), qi(0)]),
    )
    .expect("lift");
    let pts: Vec<Vec<Q>> = band_points(46).into_iter().take(1000).collect();
    let tau = tau_invariance(&r, &pts, &dyadic_times(11)).expect("τ");
    let a = lipschitz_estimate(&r, 1000, 5).expect("lipschitz");
    let b = lipschitz_estimate(&r, 2000, 5).expect("lipschitz");
    let drift = (a.estimate - b.estimate).abs() / b.estimate;
    let sd = check_semidifferentiable(&r, 256, &default_t_seq(), 1e-4).expect("semidiff");
    let pass = tau.is_zero() && pts.len() == 1000 && drift <= 0.05 && sd.pass;
    outcome(
        pass,
        format!(
            "τ drift {} on {} points, lipschitz {:.4} → {:.4} ({:.2}%), semidiff monotone {} final {:.3e} (tol {:.0e})",
            tau,
            pts.len(),
            a.estimate,
            b.estimate,
            100.0 * drift,
            sd.monotone,
            sd.final_residual,
            sd.tol
        ),
    )
}

fn smooth_field(res: usize) -> (GridForm, GridForm) {
    let lo = [0.0, 0.0];
    let hi = [1.0, 1.0];
    let a = GridForm::from_fn(&lo, &hi, &[res, res], 1, |x| {
        vec![(2.0 * x[0] + x[1]).sin(), (x[0] - 3.0 * x[1]).cos()]
    })
    .unwrap();
    // d(a0 dx + a1 dy) = (∂x a1 − ∂y a0) dx∧dy
    let da = GridForm::from_fn(&lo, &hi, &[res, res], 2, |x| {
        vec![-(x[0] - 3.0 * x[1]).sin() - (2.0 * x[0] + x[1]).cos()]
    })
    .unwrap();
    (a, da)
}

fn c6_mollifier() -> Outcome {
    let start = Instant::now();
    let m = Mollifier::new(0.1);
    let mut steps = Vec::new();
    let mut residuals = Vec::new();
    for res in [64, 128, 256] {
        let (a, da) = smooth_field(res);
        let k = KernelForm::mollifier(&m, &a.step());
        let rep = check_convolution_identities(&a, Some(&da), &k, 10.0).unwrap();
        steps.push(rep.step);
        residuals.push(rep.derivative_residual);
    }
    let slope = convergence_order(&steps, &residuals);
    let c =
        GridForm::from_fn(&[0.0, 0.0], &[1.0, 1.0], &[64, 64], 1, |_| vec![1.5, -0.25]).unwrap();
    let keep = c.max_diff_on(&convolve(&c, &m).unwrap()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        slope >= 1.9 && keep <= 1e-10 && secs < 60.0,
        format!(
            "residuals {:.2e} {:.2e} {:.2e}, order {slope:.3}, constant drift {keep:.1e}, {secs:.1}s",
            residuals[0], residuals[1], residuals[2]
        ),
    )
}

fn random_surjection(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> QMatrix {
    loop {
        let m: QMatrix = (0..rows)
            .map(|_| (0..cols).map(|_| qi(rng.gen_range(-3..=3))).collect())
            .collect();
        if rank(&m) == rows {
            return m;
        }
    }
}

fn c7_split() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut exact = 0;
    let mut rejected = 0;
    let mut violating = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=8);
        let m1 = rng.gen_range(0..=n);
        let m2 = rng.gen_range(0..=n);
        let p1 = random_surjection(m1, n, &mut rng);
        let p2 = random_surjection(m2, n, &mut rng);
        let h1: Vec<Q> = (0..m1)
            .map(|_| q(rng.gen_range(-5..=5), rng.gen_range(1..=3)))
            .collect();
        let h2: Vec<Q> = (0..m2)
            .map(|_| q(rng.gen_range(-5..=5), rng.gen_range(1..=3)))
            .collect();
        let f = reconstruct(n, &p1, &p2, &h1, &h2);
        if let Ok((g1, g2)) = split_functional(n, &p1, &p2, &f) {
            if reconstruct(n, &p1, &p2, &g1, &g2) == f {
                exact += 1;
            }
        }
        // a functional that is nonzero on ker φ1 ∩ ker φ2
        let psi: QMatrix = p1.iter().chain(&p2).cloned().collect();
        if let Some(v) = kernel_basis(&psi, n).into_iter().next() {
            violating += 1;
            if split_functional(n, &p1, &p2, &v).is_err() {
                rejected += 1;
            }
        }
    }
    outcome(
        exact == 100 && rejected == violating,
        format!("exact {exact}/100, rejected {rejected}/{violating} violating instances"),
    )
}

/// Dense Gaussian elimination over the rationals with partial pivoting on
/// the first nonzero entry, independent of the library's elimination.
fn oracle_rank(mut m: Vec<Vec<Q>>) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let piv = m[r][c].clone();
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = &m[i][c] / &piv;
                for j in c..cols {
                    let d = &f * &m[r][j];
                    m[i][j] -= d;
                }
            }
        }
        r += 1;
    }
    r
}

fn oracle_betti(k: &SimplicialComplex) -> Vec<usize> {
    let dim = k.dim().unwrap_or(0);
    let bd = |d: usize| -> usize {
        if d == 0 || d > dim {
            return 0;
        }
        let rows = k.simplices(d - 1);
        let cols = k.simplices(d);
        let m: Vec<Vec<Q>> = rows
            .iter()
            .map(|f| {
                cols.iter()
                    .map(|s| {
                        for i in 0..s.len() {
                            let mut g = s.clone();
                            g.remove(i);
                            if &g == f {
                                return if i % 2 == 0 { Q::one() } else { -Q::one() };
                            }
                        }
                        Q::zero()
                    })
                    .collect()
            })
            .collect();
        oracle_rank(m)
    };
    (0..=dim).map(|d| k.count(d) - bd(d) - bd(d + 1)).collect()
}

fn random_complex(rng: &mut ChaCha8Rng) -> SimplicialComplex {
    loop {
        let nv = rng.gen_range(1..=14);
        let gens: Vec<Vec<usize>> = (0..rng.gen_range(1..=24))
            .map(|_| {
                let d = rng.gen_range(0..=3usize).min(nv - 1);
                let mut s: Vec<usize> = Vec::new();
                while s.len() < d + 1 {
                    let v = rng.gen_range(0..nv);
                    if !s.contains(&v) {
                        s.push(v);
                    }
                }
                s
            })
            .collect();
        let k = SimplicialComplex::abstract_complex(nv, &gens).expect("complex");
        if k.total_count() <= 300 {
            return k;
        }
    }
}

fn c8_betti() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut agree = 0;
    let mut euler = 0;
    let mut largest = 0;
    for _ in 0..50 {
        let k = random_complex(&mut rng);
        largest = largest.max(k.total_count());
        let b = betti(&k);
        let dim = k.dim().unwrap_or(0);
        let ours: Vec<usize> = (0..=dim).map(|d| b.get(d)).collect();
        if ours == oracle_betti(&k) {
            agree += 1;
        }
        if b.euler_characteristic() == k.euler_characteristic() {
            euler += 1;
        }
    }
    outcome(
        agree == 50 && euler == 50,
        format!("oracle agreement {agree}/50, Euler identity {euler}/50, largest complex {largest} simplices"),
    )
}

/// `∫_{−1}^{1} p(x, 0) dx` exactly, monomial by monomial.
fn line_integral_on_axis(p: &Polynomial) -> Q {
    p.terms()
        .filter(|(e, _)| e[1] == 0)
        .map(|(e, c)| {
            if e[0] % 2 == 0 {
                c * q(2, e[0] as i64 + 1)
            } else {
                Q::zero()
            }
        })
        .sum()
}

fn c9_weak_derivative() -> Outcome {
    let lo = [qi(-1), qi(-1)];
    let hi = [qi(1), qi(1)];
    let dx = PolyForm::basis(2, &[0]);
    let zero2 = split_plane_form(&PolyForm::zero(2, 2), false);
    let (count, seed, tol) = (12, 9, 1e-6);
    let matched: StratifiedForm = split_plane_form(&dx, false);
    let good = weak_derivative_residual(&matched, &zero2, &lo, &hi, count, seed, tol).unwrap();
    let broken = split_plane_form(&dx, true);
    let bad = weak_derivative_residual(&broken, &zero2, &lo, &hi, count, seed, tol).unwrap();
    // jump term 2 |∫ φ(x, 0) dx| per test function
    let oracle: Vec<f64> = test_forms(&lo, &hi, 0, count, seed)
        .iter()
        .map(|phi| q_to_f64(&(line_integral_on_axis(&phi.coeff(&[])) * qi(2)).abs()))
        .collect();
    let agree = bad
        .per_test
        .iter()
        .zip(&oracle)
        .all(|(a, b)| (a - b).abs() <= 1e-9 * b.max(1.0));
    outcome(
        good.pass && !bad.pass && bad.residual >= 10.0 * tol && agree,
        format!(
            "matched {:.2e}, mismatched {:.3e} (oracle {:.3e}, agree {agree})",
            good.residual,
            bad.residual,
            oracle.iter().copied().fold(0.0, f64::max)
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 stokes chain map", c1_stokes),
        ("2 whitney duality", c2_whitney),
        ("3 de rham pairing rank", c3_derham),
        ("4 poincare homotopy identity", c4_poincare),
        ("5 lift contract", c5_lift),
        ("6 mollifier identities", c6_mollifier),
        ("7 functional splitting", c7_split),
        ("8 betti oracle", c8_betti),
        ("9 weak derivative detector", c9_weak_derivative),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        println!(
            "{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
