use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use strataforms::Polynomial;

fn projects() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("projects")
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
    report: Value,
}

fn run_at(project: &Path, args: &[&str]) -> Run {
    let report = Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!(
        "report-{}-{}.json",
        project.file_stem().unwrap().to_string_lossy(),
        args.join("_").replace(['/', ' ', ','], "-")
    ));
    let _ = std::fs::remove_file(&report);
    let out = Command::new(env!("CARGO_BIN_EXE_strataforms"))
        .args(args)
        .arg("--project")
        .arg(project)
        .arg("--report")
        .arg(&report)
        .env_remove("STRATAFORMS_JOBS")
        .output()
        .expect("binary runs");
    let report = std::fs::read_to_string(&report)
        .ok()
        .map(|t| serde_json::from_str(&t).expect("report is JSON"))
        .unwrap_or(Value::Null);
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into(),
        stderr: String::from_utf8_lossy(&out.stderr).into(),
        report,
    }
}

fn run(project: &str, args: &[&str]) -> Run {
    run_at(&projects().join(project), args)
}

fn temp_project(name: &str, body: &Value) -> PathBuf {
    let p = Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("{name}.json"));
    std::fs::write(&p, serde_json::to_string_pretty(body).unwrap()).unwrap();
    p
}

fn check<'a>(r: &'a Run, name: &str) -> &'a Value {
    r.report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check `{name}` in {}", r.stdout))
}

fn rational(s: &str) -> f64 {
    match s.split_once('/') {
        Some((a, b)) => a.parse::<f64>().unwrap() / b.parse::<f64>().unwrap(),
        None => s.parse().unwrap(),
    }
}

/// Rank over GF(p) by Gaussian elimination.
fn rank_mod_p(mut m: Vec<Vec<i64>>) -> usize {
    const P: i64 = 1_000_003;
    let inv = |a: i64| {
        let (mut r, mut b, mut e) = (1i64, a.rem_euclid(P), P - 2);
        while e > 0 {
            if e & 1 == 1 {
                r = r * b % P;
            }
            b = b * b % P;
            e >>= 1;
        }
        r
    };
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..m.len()).find(|&i| m[i][c].rem_euclid(P) != 0) else {
            continue;
        };
        m.swap(rank, piv);
        let f = inv(m[rank][c]);
        for i in 0..m.len() {
            if i != rank && m[i][c].rem_euclid(P) != 0 {
                let k = m[i][c] * f % P;
                for j in 0..cols {
                    m[i][j] = (m[i][j] - k * m[rank][j]).rem_euclid(P);
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Betti numbers from the generating simplices, by ranks of boundary
/// matrices mod p.
fn betti_oracle(gens: &[Vec<usize>]) -> Vec<usize> {
    let mut faces: Vec<std::collections::BTreeSet<Vec<usize>>> = Vec::new();
    for g in gens {
        let mut g = g.clone();
        g.sort();
        let n = g.len();
        for mask in 1u32..(1 << n) {
            let f: Vec<usize> = (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| g[i])
                .collect();
            let d = f.len() - 1;
            if faces.len() <= d {
                faces.resize(d + 1, Default::default());
            }
            faces[d].insert(f);
        }
    }
    let lists: Vec<Vec<Vec<usize>>> = faces.iter().map(|s| s.iter().cloned().collect()).collect();
    let rank_d = |d: usize| -> usize {
        if d == 0 || d >= lists.len() {
            return 0;
        }
        let m: Vec<Vec<i64>> = lists[d - 1]
            .iter()
            .map(|f| {
                lists[d]
                    .iter()
                    .map(|s| {
                        match (0..s.len()).find(|&i| {
                            let mut t = s.clone();
                            t.remove(i);
                            &t == f
                        }) {
                            Some(i) if i % 2 == 0 => 1,
                            Some(_) => -1,
                            None => 0,
                        }
                    })
                    .collect()
            })
            .collect();
        rank_mod_p(m)
    };
    (0..lists.len())
        .map(|d| lists[d].len() - rank_d(d) - rank_d(d + 1))
        .collect()
}

fn project_json(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(projects().join(name)).unwrap()).unwrap()
}

#[test]
fn well_formed_square_validates() {
    let r = run("square.json", &["validate"]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    assert!(r.stdout.contains("PASS frontier unit_square"));
    assert_eq!(r.report["pass"], true);
    assert!(r.report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["pass"] == true));
}

#[test]
fn missing_edge_fails_frontier_with_witness() {
    let r = run("missing_edge.json", &["validate"]);
    assert_eq!(r.code, 1);
    let c = check(&r, "frontier open_top");
    assert_eq!(c["pass"], false);
    let w = &c["witness"];
    assert_eq!(w["stratum"], "square");
    // the witness lies on the dropped edge y = 1
    let p = w["point"].as_array().unwrap();
    assert_eq!(p[1].as_f64().unwrap(), 1.0);
    assert!(w["distance"].as_f64().unwrap() > 1e-9);
}

#[test]
fn mismatched_form_fails_continuity_at_reported_point() {
    let r = run("split_square.json", &["validate"]);
    assert_eq!(r.code, 1);
    assert_eq!(check(&r, "continuity matched")["pass"], true);
    let c = check(&r, "continuity broken");
    assert_eq!(c["pass"], false);
    let w = &c["witness"];
    let p: Vec<f64> = w["point"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!(
        (p[0] - p[1]).abs() < 1e-12,
        "witness off the interface: {p:?}"
    );
    // y dx against −y dx on the unit tangent (1, 1)/√2 of the diagonal
    let expect = 2.0 * p[1] / 2f64.sqrt();
    assert!((w["discrepancy"].as_f64().unwrap() - expect).abs() < 1e-9);
    assert!(r.stdout.contains("FAIL continuity broken"));
}

#[test]
fn stokes_on_the_unit_square() {
    let r = run("square.json", &["stokes"]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    let rep = &check(&r, "stokes x_dy on square")["details"]["report"];
    assert!((rep["integral_d_omega"].as_f64().unwrap() - 1.0).abs() <= 1e-10);
    assert!((rep["integral_boundary"].as_f64().unwrap() - 1.0).abs() <= 1e-10);
    assert!(rep["limit_residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn stokes_split_square_matched_and_broken() {
    let r = run("split_square.json", &["stokes"]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    let r = run(
        "split_square.json",
        &["stokes", "--form", "broken", "--chain", "square"],
    );
    assert_eq!(r.code, 1);
    let c = check(&r, "stokes broken on square");
    // jump of the tangential part along t ↦ (t, t): y dx − (−y dx) = 2t dt
    let jump = 1.0;
    let res = c["witness"]["residual"].as_f64().unwrap();
    assert!((res - jump).abs() <= 1e-10, "residual {res}");
}

#[test]
fn betti_tables_match_rank_oracle() {
    let r = run("closed_surfaces.json", &["betti"]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    let proj = project_json("closed_surfaces.json");
    for k in proj["complexes"].as_array().unwrap() {
        let id = k["id"].as_str().unwrap();
        let gens: Vec<Vec<usize>> = serde_json::from_value(k["simplices"].clone()).unwrap();
        let got: Vec<usize> =
            serde_json::from_value(check(&r, &format!("betti {id}"))["details"]["betti"].clone())
                .unwrap();
        assert_eq!(got, betti_oracle(&gens), "{id}");
    }
    let r = run("circle.json", &["betti"]);
    let got: Vec<usize> =
        serde_json::from_value(check(&r, "betti circle")["details"]["betti"].clone()).unwrap();
    assert_eq!(got, vec![1, 1]);
}

#[test]
fn wrong_expected_betti_fails() {
    let mut p = project_json("closed_surfaces.json");
    p["complexes"][0]["expect_betti"] = serde_json::json!([1, 1, 1]);
    let path = temp_project("wrong_betti", &p);
    let r = run_at(&path, &["betti"]);
    assert_eq!(r.code, 1);
    let c = check(&r, "betti octahedron");
    assert_eq!(c["witness"]["degree"], 1);
}

#[test]
fn derham_circle_period_matches_shoelace() {
    let r = run("circle.json", &["derham"]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    let c = check(&r, "derham periods circle");
    assert_eq!(c["details"]["rank"], 1);
    let proj = project_json("circle.json");
    let pts: Vec<(f64, f64)> = proj["complexes"][0]["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| {
            let f = |v: &Value| match v {
                Value::String(s) => rational(s),
                v => v.as_f64().unwrap(),
            };
            (f(&p[0]), f(&p[1]))
        })
        .collect();
    let m = pts.len();
    let shoelace: f64 = (0..m)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % m]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    let period = rational(c["details"]["periods"][0][0].as_str().unwrap());
    // the cycle basis is defined up to sign
    assert!(
        (period.abs() - shoelace.abs()).abs() <= 1e-10,
        "{period} vs {shoelace}"
    );
}

#[test]
fn derham_ranks_on_torus_and_sphere() {
    let r = run("closed_surfaces.json", &["derham"]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    let t: Vec<usize> =
        serde_json::from_value(check(&r, "derham rank torus")["details"]["ranks"].clone()).unwrap();
    assert_eq!(t, vec![1, 2, 1]);
    let s: Vec<usize> =
        serde_json::from_value(check(&r, "derham rank octahedron")["details"]["ranks"].clone())
            .unwrap();
    assert_eq!(s, vec![1, 0, 1]);
}

#[test]
fn derham_contractible_disk_has_rank_zero() {
    let body = serde_json::json!({
        "version": 1,
        "complexes": [{ "id": "disk", "points": [[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1]],
                        "simplices": [[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1]] }],
        "stratifications": [{ "id": "disk_strata", "complex": "disk" }],
        "forms": [{ "id": "rot", "on": "disk_strata", "degree": 1, "global": { "dx": "-y", "dy": "x" } },
                  { "id": "exact", "on": "disk_strata", "degree": 1, "global": { "dx": "2*x", "dy": "1" } }],
        "checks": { "derham": [{ "complex": "disk", "forms": ["exact"], "expect_rank": 0 }] }
    });
    let r = run_at(&temp_project("disk", &body), &["derham"]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    let ranks: Vec<usize> =
        serde_json::from_value(check(&r, "derham rank disk")["details"]["ranks"].clone()).unwrap();
    assert_eq!(ranks, vec![1, 0, 0]);
    assert_eq!(check(&r, "derham periods disk")["details"]["rank"], 0);

    // a non-closed form in the declared basis is reported
    let mut bad = body.clone();
    bad["checks"]["derham"][0]["forms"] = serde_json::json!(["rot"]);
    let r = run_at(&temp_project("disk_rot", &bad), &["derham"]);
    assert_eq!(r.code, 1);
    assert_eq!(
        check(&r, "derham periods disk")["witness"]["not_closed"][0],
        "rot"
    );
}

/// `dγ` by central differences of the reported primitive.
fn fd_exterior_derivative_2d(gamma: &serde_json::Map<String, Value>, x: [f64; 2]) -> f64 {
    let comp = |label: &str, p: [f64; 2]| {
        gamma
            .get(label)
            .map(|v| {
                Polynomial::parse(2, v.as_str().unwrap())
                    .unwrap()
                    .eval_f64(&p)
            })
            .unwrap_or(0.0)
    };
    let h = 1e-4;
    let dy_dx = (comp("dx1", [x[0] + h, x[1]]) - comp("dx1", [x[0] - h, x[1]])) / (2.0 * h);
    let dx_dy = (comp("dx0", [x[0], x[1] + h]) - comp("dx0", [x[0], x[1] - h])) / (2.0 * h);
    dy_dx - dx_dy
}

#[test]
fn poincare_primitive_differentiates_back() {
    let r = run("cone_window.json", &["poincare"]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    let c = check(&r, "poincare area by to_origin");
    let gamma = c["details"]["primitive"]["upper"].as_object().unwrap();
    for x in [[0.3, 0.4], [-0.7, 0.2], [0.05, 0.9]] {
        let lhs = fd_exterior_derivative_2d(gamma, x);
        let rhs = 1.0 + x[0] * x[1];
        assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
    }
}

#[test]
fn poincare_on_non_invariant_domain_fails_with_witness() {
    let body = serde_json::json!({
        "version": 1,
        "stratifications": [{ "id": "sector", "dim": 2, "strata": [
            { "id": "sector", "cell": { "map": { "kind": "box", "dim": 2,
              "components": ["(1 + x0)*(1 - x1)", "(1 + x0)*x1"] } } }
        ] }],
        "forms": [{ "id": "area", "on": "sector", "degree": 2, "global": { "dx^dy": "1" } }],
        "retractions": [{ "kind": "cone", "id": "to_origin", "point": [0, 0], "domain": "sector" }],
        "checks": { "poincare": [{ "form": "area", "retraction": "to_origin" }] }
    });
    let r = run_at(&temp_project("sector", &body), &["poincare"]);
    assert_eq!(r.code, 1);
    let c = check(&r, "poincare area by to_origin");
    assert_eq!(c["witness"]["stratum"], "sector");
    let p: Vec<f64> = serde_json::from_value(c["witness"]["point"].clone()).unwrap();
    // r_t moved the sample out of {1 < x + y < 2}
    let s = p[0] + p[1];
    assert!(
        !(1.0..=2.0).contains(&s) || p[0] < 0.0 || p[1] < 0.0,
        "{p:?}"
    );
}

#[test]
fn lifted_retraction_passes_audit() {
    let r = run("cone_window.json", &["validate"]);
    assert_eq!(check(&r, "retraction band_lift")["pass"], true);
    assert_eq!(check(&r, "retraction to_origin")["pass"], true);
    // the windows are open at their outer edges
    assert_eq!(check(&r, "frontier triangle_band")["pass"], false);
}

#[test]
fn smoothing_preserves_constants_and_reports_large_radius() {
    let body = serde_json::json!({
        "version": 1,
        "grids": [{ "id": "const", "lo": [0, 0], "hi": [1, 1], "res": [41, 41], "degree": 1,
                    "components": { "dx": "3/2", "dy": "-2" } }],
        "checks": { "smooth": [{ "grid": "const", "eps": [0.2, 0.1] }] }
    });
    let r = run_at(&temp_project("const_grid", &body), &["smooth"]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    for c in r.report["checks"].as_array().unwrap() {
        assert!(c["details"]["sup_difference"].as_f64().unwrap() <= 1e-10);
    }
    let r = run_at(
        &temp_project("const_grid", &body),
        &["smooth", "--grid", "const", "--eps", "0.6"],
    );
    assert_eq!(r.code, 1);
    let c = check(&r, "smooth const eps=0.6");
    assert_eq!(c["witness"]["eps"], 0.6);
}

#[test]
fn smoothing_example_converges() {
    let r = run("smooth.json", &["smooth"]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    let diffs: Vec<f64> = r.report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["details"]["sup_difference"].as_f64().unwrap())
        .collect();
    assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");
}

#[test]
fn grid_dump_file_is_read_relative_to_project() {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("dump_project");
    std::fs::create_dir_all(&dir).unwrap();
    let g =
        strataforms::smoothing::GridForm::from_fn(&[0.0, 0.0], &[1.0, 1.0], &[33, 33], 0, |x| {
            vec![x[0] + 2.0 * x[1]]
        })
        .unwrap();
    std::fs::write(dir.join("f.grid"), g.to_text()).unwrap();
    let body = serde_json::json!({
        "version": 1,
        "grids": [{ "id": "f", "file": "f.grid" }],
        "checks": { "smooth": [{ "grid": "f", "eps": [0.1] }] }
    });
    let path = dir.join("p.json");
    std::fs::write(&path, serde_json::to_string(&body).unwrap()).unwrap();
    let r = run_at(&path, &["smooth"]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    // affine functions are reproduced by an even kernel
    assert!(
        r.report["checks"][0]["details"]["sup_difference"]
            .as_f64()
            .unwrap()
            < 1e-12
    );
}

#[test]
fn reports_are_byte_identical_on_rerun() {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR"));
    let mut texts = Vec::new();
    for (i, jobs) in ["1", "3"].iter().enumerate() {
        let path = dir.join(format!("det-{i}.json"));
        let st = Command::new(env!("CARGO_BIN_EXE_strataforms"))
            .args(["derham", "--seed", "7", "--project"])
            .arg(projects().join("closed_surfaces.json"))
            .arg("--report")
            .arg(&path)
            .env("STRATAFORMS_JOBS", jobs)
            .output()
            .unwrap();
        assert!(st.status.success());
        texts.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn version_mismatch_and_bad_references_are_rejected() {
    let mut p = project_json("square.json");
    p["version"] = serde_json::json!(2);
    let r = run_at(&temp_project("v2", &p), &["validate"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("version"), "{}", r.stderr);

    let mut p = project_json("square.json");
    p["forms"][0]["on"] = serde_json::json!("nowhere");
    let r = run_at(&temp_project("badref", &p), &["validate"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("nowhere"), "{}", r.stderr);
}

#[test]
fn overrides_reach_the_report() {
    let r = run(
        "square.json",
        &[
            "stokes",
            "--tol",
            "1e-6",
            "--seed",
            "11",
            "--quad-order",
            "6",
        ],
    );
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    assert_eq!(r.report["tol"], 1e-6);
    assert_eq!(r.report["seed"], 11);
    assert_eq!(check(&r, "stokes x_dy on square")["details"]["order"], 6);
}

#[test]
fn schema_covers_shipped_projects() {
    let schema: Value = serde_json::from_str(
        &std::fs::read_to_string(
            Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/project.schema.json"),
        )
        .unwrap(),
    )
    .unwrap();
    let top: Vec<&String> = schema["properties"].as_object().unwrap().keys().collect();
    for entry in std::fs::read_dir(projects()).unwrap() {
        let p: Value =
            serde_json::from_str(&std::fs::read_to_string(entry.unwrap().path()).unwrap()).unwrap();
        for k in p.as_object().unwrap().keys() {
            assert!(top.contains(&k), "key `{k}` missing from schema");
        }
    }
}

#[test]
fn term_lists_and_text_give_the_same_form() {
    let mut p = project_json("square.json");
    p["forms"][0]["global"] = serde_json::json!({ "dy": [[[1, 0], 1, 1]] });
    let r = run_at(&temp_project("square_terms", &p), &["stokes"]);
    let text = run("square.json", &["stokes"]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    assert_eq!(r.report["checks"], text.report["checks"]);

    p["forms"][0]["global"] = serde_json::json!({ "dy": [[[1], 1, 1]] });
    assert_eq!(
        run_at(&temp_project("square_terms_bad", &p), &["stokes"]).code,
        2
    );
    p["forms"][0]["global"] = serde_json::json!({ "dy": [[[1, 0], 1, 0]] });
    assert_eq!(
        run_at(&temp_project("square_terms_zero", &p), &["stokes"]).code,
        2
    );
}
