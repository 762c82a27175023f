use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use strataforms::cohomology::{betti, cocycle_basis, cycle_basis, Cochain};
use strataforms::complex::{simplex_id, validate_frontier, Chain};
use strataforms::forms::{check_graph_closed, component_label, StratifiedForm};
use strataforms::homotopy::{audit_contract, poincare_primitive};
use strataforms::linalg::rank;
use strataforms::quadrature::{integrate_stratified_exact, required_order, stokes_residual};
use strataforms::scalar::{q_to_f64, qi};
use strataforms::smoothing::{check_convolution_identities, convolve, KernelForm, Mollifier};
use strataforms::whitney::{check_commute, pairing_rank, Triangulation};
use strataforms::Error;

use crate::project::{parse_terms, DerhamCheck, PoincareCheck, Project, SmoothCheck, StokesCheck};
use crate::report::{error_witness, Check};

pub struct Ctx<'a> {
    pub project: &'a Project,
    pub tol: f64,
    pub seed: u64,
    pub quad_order: Option<usize>,
}

fn form_text(w: &StratifiedForm) -> BTreeMap<String, BTreeMap<String, String>> {
    w.components()
        .iter()
        .map(|(s, f)| {
            let terms = f
                .coeffs()
                .iter()
                .map(|(idx, p)| (component_label(idx), p.to_string()))
                .collect();
            (s.clone(), terms)
        })
        .collect()
}

pub fn validate(ctx: &Ctx) -> Vec<Check> {
    let p = ctx.project;
    let run = &p.file.run;
    let mut out = Vec::new();
    for (id, e) in &p.strats {
        let rep = validate_frontier(&e.strat, run.samples, ctx.tol);
        let bad: Vec<_> = rep.failures().collect();
        let check = Check::new(
            format!("frontier {id}"),
            rep.pass,
            format!(
                "{} boundary samples, {} off the frontier",
                rep.samples.len(),
                bad.len()
            ),
        );
        let witness = bad.first().map(|s| {
            json!({ "stratum": s.stratum, "facet": s.facet, "point": s.point,
                    "nearest": s.nearest, "distance": s.distance })
        });
        out.push(check.witness(witness.unwrap_or_default()));
    }
    for (id, w) in &p.forms {
        let name = format!("continuity {id}");
        match check_graph_closed(w, None, run.samples, ctx.tol) {
            Ok(rep) => {
                let worst = rep.worst();
                let mut check = Check::new(
                    name,
                    rep.pass,
                    format!(
                        "max discrepancy {:.3e} over {} samples",
                        rep.max_discrepancy,
                        rep.samples.len()
                    ),
                );
                if let Some(s) = worst {
                    check = check.witness(json!({ "pair": s.pair, "point": s.point,
                        "multivector": s.multivector, "discrepancy": s.discrepancy }));
                }
                out.push(check);
            }
            Err(e) => out.push(Check::error(name, &e)),
        }
        if let Some(b) = w.audit_bound(run.audit_samples) {
            out.push(
                Check::new(
                    format!("bound {id}"),
                    b.pass,
                    format!(
                        "sup estimate {:.6e} against bound {:.6e}",
                        b.estimate, b.bound
                    ),
                )
                .witness(json!({ "form": id, "estimate": b.estimate })),
            );
        }
    }
    for (id, c) in &p.chains {
        let problems = c.catalogue.audit(run.samples, ctx.tol);
        let check = Check::new(
            format!("cells {id}"),
            problems.is_empty(),
            format!("{} cells, {} problems", c.catalogue.len(), problems.len()),
        );
        out.push(check.witness(json!({ "problem": problems.first() })));
    }
    for (id, r) in &p.retractions {
        let name = format!("retraction {id}");
        match r {
            Err(e) => out.push(Check::error(name, e)),
            Ok(r) if r.domain.is_none() => {
                out.push(Check::new(name, true, "no domain declared, audit skipped"))
            }
            Ok(r) => match audit_contract(r, run.audit_samples, ctx.tol) {
                Ok(a) => out.push(
                    Check::new(
                        name,
                        a.pass,
                        format!(
                            "{} samples, {} contract failures",
                            a.samples,
                            a.failures.len()
                        ),
                    )
                    .witness(json!({ "failure": a.failures.first() })),
                ),
                Err(e) => out.push(Check::error(name, &e)),
            },
        }
    }
    out
}

pub fn betti_cmd(ctx: &Ctx) -> Vec<Check> {
    let p = ctx.project;
    p.file
        .complexes
        .iter()
        .map(|spec| {
            let k = &p.complexes[&spec.id];
            let b = betti(k);
            let euler_ok = b.euler_characteristic() == k.euler_characteristic();
            let expect_ok = spec.expect_betti.as_ref().is_none_or(|e| {
                (0..e.len().max(b.betti.len())).all(|d| e.get(d).copied().unwrap_or(0) == b.get(d))
            });
            let mismatch = spec.expect_betti.as_ref().and_then(|e| {
                (0..e.len().max(b.betti.len()))
                    .find(|&d| e.get(d).copied().unwrap_or(0) != b.get(d))
            });
            Check::new(
                format!("betti {}", spec.id),
                euler_ok && expect_ok,
                format!("b = {:?}, χ = {}", b.betti, k.euler_characteristic()),
            )
            .witness(json!({ "complex": spec.id, "degree": mismatch, "euler_identity": euler_ok }))
            .details(json!({ "betti": b.betti, "f_vector": k.f_vector(),
                             "euler_characteristic": k.euler_characteristic() }))
        })
        .collect()
}

fn auto_order(ctx: &Ctx, w: &StratifiedForm, chain: &crate::project::ChainEntry) -> usize {
    let dw = w.exterior_derivative();
    let cells = chain
        .catalogue
        .cells()
        .chain(w.stratification().catalogue().cells());
    let mut order = 1;
    for cell in cells {
        for f in w.components().values().chain(dw.components().values()) {
            order = order.max(required_order(f, cell));
        }
    }
    ctx.quad_order
        .or(ctx.project.file.run.quad_order)
        .unwrap_or(order)
}

pub fn stokes(ctx: &Ctx, req: &StokesCheck) -> Result<Check, Error> {
    let p = ctx.project;
    let w = p
        .forms
        .get(&req.form)
        .ok_or_else(|| Error::Invalid(format!("unknown form `{}`", req.form)))?;
    let c = p
        .chains
        .get(&req.chain)
        .ok_or_else(|| Error::Invalid(format!("unknown chain `{}`", req.chain)))?;
    let form_strat = p
        .file
        .forms
        .iter()
        .find(|f| f.id == req.form)
        .map(|f| &f.on);
    if form_strat != Some(&c.on) {
        return Err(Error::Invalid(format!(
            "form `{}` and chain `{}` live on different stratifications",
            req.form, req.chain
        )));
    }
    let name = format!("stokes {} on {}", req.form, req.chain);
    let order = auto_order(ctx, w, c);
    let rep = match stokes_residual(w, &c.chain, &c.catalogue, order, &p.file.run.eps, ctx.tol) {
        Ok(r) => r,
        Err(e) => return Ok(Check::error(name, &e)),
    };
    let worst = rep
        .per_eps
        .iter()
        .max_by(|a, b| a.residual.total_cmp(&b.residual));
    let summary = format!(
        "∫dω = {:.12}, ∫∂ω = {:.12}, residual {:.3e} (order {order})",
        rep.integral_d_omega, rep.integral_boundary, rep.limit_residual
    );
    Ok(Check::new(name, rep.pass, summary)
        .witness(
            json!({ "form": req.form, "chain": req.chain, "residual": rep.limit_residual,
                         "eps": worst.map(|e| e.eps), "eps_residual": worst.map(|e| e.residual) }),
        )
        .details(json!({ "order": order, "report": rep })))
}

fn random_cochain(
    k: &strataforms::complex::SimplicialComplex,
    d: usize,
    rng: &mut ChaCha8Rng,
) -> Cochain {
    Cochain::from_values(
        d,
        k.simplices(d)
            .iter()
            .map(|s| (s.clone(), qi(rng.gen_range(-3..=3))))
            .collect::<Vec<_>>(),
    )
}

pub fn derham(ctx: &Ctx, req: &DerhamCheck) -> Result<Vec<Check>, Error> {
    let p = ctx.project;
    let k = p
        .complexes
        .get(&req.complex)
        .ok_or_else(|| Error::Invalid(format!("unknown complex `{}`", req.complex)))?;
    let tri = Triangulation::new(k.clone())?;
    let b = betti(k);
    let top = k.dim().unwrap_or(0);
    let mut out = Vec::new();

    let mut ranks = Vec::new();
    for d in 0..=top {
        ranks.push(pairing_rank(&tri, d)?.0);
    }
    let expect: Vec<usize> = (0..=top).map(|d| b.get(d)).collect();
    let bad = (0..=top).find(|&d| ranks[d] != expect[d]);
    out.push(
        Check::new(
            format!("derham rank {}", req.complex),
            bad.is_none(),
            format!("pairing ranks {ranks:?}, betti {expect:?}"),
        )
        .witness(json!({ "complex": req.complex, "degree": bad }))
        .details(json!({ "ranks": ranks, "betti": expect })),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut cochains: Vec<Cochain> = Vec::new();
    for d in 0..=top {
        cochains.extend(cocycle_basis(k, d).into_iter().filter(|c| !c.is_zero()));
        for _ in 0..2 {
            cochains.push(random_cochain(k, d, &mut rng));
        }
    }
    for m in &req.cochains {
        let mut vals = Vec::new();
        let mut deg = None;
        for (sid, v) in m {
            let s: Vec<usize> = sid
                .strip_prefix('s')
                .map(|r| r.split('_').filter_map(|t| t.parse().ok()).collect())
                .unwrap_or_default();
            if s.is_empty() || !k.contains(&s) {
                return Err(Error::Invalid(format!(
                    "unknown simplex `{sid}` in `{}`",
                    req.complex
                )));
            }
            deg = Some(s.len() - 1);
            vals.push((s, v.to_q()?));
        }
        if let Some(d) = deg {
            cochains.push(Cochain::from_values(d, vals));
        }
    }
    let mut worst = (0.0, None);
    for (i, f) in cochains.iter().enumerate() {
        let r = q_to_f64(&check_commute(&tri, f)?);
        if r > worst.0 || worst.1.is_none() {
            worst = (r, Some(i));
        }
    }
    out.push(
        Check::new(
            format!("derham chain map {}", req.complex),
            worst.0 == 0.0,
            format!("max |dφ(f) − φ(df)| = {:e} over {} cochains", worst.0, cochains.len()),
        )
        .witness(json!({ "complex": req.complex,
                         "cochain": worst.1.map(|i| cochains[i].values().iter()
                             .map(|(s, v)| (simplex_id(s), v.to_string())).collect::<BTreeMap<_, _>>()) })),
    );

    if !req.forms.is_empty() {
        let forms = req
            .forms
            .iter()
            .map(|id| {
                p.forms
                    .get(id)
                    .map(|w| (id, w))
                    .ok_or_else(|| Error::Invalid(format!("unknown form `{id}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let deg = forms[0].1.degree();
        for (id, w) in &forms {
            let on = p
                .file
                .forms
                .iter()
                .find(|f| &f.id == *id)
                .map(|f| f.on.as_str());
            let from_k =
                on.and_then(|s| p.strats[s].complex.as_deref()) == Some(req.complex.as_str());
            if !from_k || w.degree() != deg {
                return Err(Error::Invalid(format!(
                    "form `{id}` must have degree {deg} on a stratification of `{}`",
                    req.complex
                )));
            }
        }
        let not_closed: Vec<&String> = forms
            .iter()
            .filter(|(_, w)| !w.is_closed())
            .map(|(id, _)| *id)
            .collect();
        let cat = k.to_catalogue();
        let cycles: Vec<Chain> = cycle_basis(k, deg)
            .into_iter()
            .map(|v| {
                Chain::from_terms(
                    deg,
                    k.simplices(deg)
                        .iter()
                        .zip(v)
                        .map(|(s, a)| (simplex_id(s), a)),
                )
            })
            .collect();
        let mut periods = Vec::new();
        for (_, w) in &forms {
            let row = cycles
                .iter()
                .map(|c| integrate_stratified_exact(w, c, &cat))
                .collect::<Result<Vec<_>, _>>()?;
            periods.push(row);
        }
        let r = if cycles.is_empty() { 0 } else { rank(&periods) };
        let bk = b.get(deg);
        let rank_ok = r <= bk && req.expect_rank.is_none_or(|e| e == r);
        let text: Vec<Vec<String>> = periods
            .iter()
            .map(|row| row.iter().map(|v| v.to_string()).collect())
            .collect();
        out.push(
            Check::new(
                format!("derham periods {}", req.complex),
                rank_ok && not_closed.is_empty(),
                format!(
                    "degree {deg}: rank {r} of {} forms against {} cycles, b = {bk}",
                    forms.len(),
                    cycles.len()
                ),
            )
            .witness(
                json!({ "complex": req.complex, "rank": r, "expected": req.expect_rank,
                             "not_closed": not_closed }),
            )
            .details(json!({ "periods": text, "rank": r, "betti": bk })),
        );
    }
    Ok(out)
}

pub fn poincare(ctx: &Ctx, req: &PoincareCheck) -> Result<Check, Error> {
    let p = ctx.project;
    let w = p
        .forms
        .get(&req.form)
        .ok_or_else(|| Error::Invalid(format!("unknown form `{}`", req.form)))?;
    let name = format!("poincare {} by {}", req.form, req.retraction);
    let r = match p.retractions.get(&req.retraction) {
        Some(Ok(r)) => r,
        Some(Err(e)) => return Ok(Check::error(name, e)),
        None => {
            return Err(Error::Invalid(format!(
                "unknown retraction `{}`",
                req.retraction
            )))
        }
    };
    let gp = req
        .gamma_prime
        .as_ref()
        .map(|t| parse_terms(w.ambient_dim(), w.degree() - 1, t))
        .transpose()?;
    let res = match poincare_primitive(w, r, gp.as_ref(), p.file.run.audit_samples) {
        Ok(r) => r,
        Err(e) => return Ok(Check::error(name, &e)),
    };
    let pass = res.audit.pass && res.symbolic_failures.is_empty() && res.continuity.pass;
    let witness = if let Some(s) = res.symbolic_failures.first() {
        json!({ "stratum": s })
    } else if let Some(f) = res.audit.failures.first() {
        json!({ "audit": f })
    } else {
        let s = res.continuity.worst();
        json!({ "pair": s.map(|s| &s.pair), "point": s.map(|s| &s.point),
                "discrepancy": s.map(|s| s.discrepancy) })
    };
    Ok(Check::new(
        name,
        pass,
        format!(
            "dγ = ω on {} strata, audit {}, continuity {:.3e}",
            w.components().len() - res.symbolic_failures.len(),
            if res.audit.pass { "ok" } else { "failed" },
            res.continuity.max_discrepancy
        ),
    )
    .witness(witness)
    .details(json!({ "primitive": form_text(&res.primitive),
                     "symbolic_failures": res.symbolic_failures,
                     "audit_failures": res.audit.failures })))
}

pub fn smooth(ctx: &Ctx, req: &SmoothCheck) -> Result<Vec<Check>, Error> {
    let p = ctx.project;
    let g = p
        .grids
        .get(&req.grid)
        .ok_or_else(|| Error::Invalid(format!("unknown grid `{}`", req.grid)))?;
    let c = p.file.run.identity_constant;
    let mut out = Vec::new();
    for &eps in &req.eps {
        let name = format!("smooth {} eps={eps}", req.grid);
        let m = Mollifier::new(eps);
        let smoothed = match convolve(&g.form, &m) {
            Ok(s) => s,
            Err(e) => {
                out.push(Check::error(name, &e));
                continue;
            }
        };
        let diff = g.form.max_diff_on(&smoothed)?;
        let k = KernelForm::mollifier(&m, &g.form.step());
        let id = match check_convolution_identities(&g.form, g.exact_d.as_ref(), &k, c) {
            Ok(r) => r,
            Err(e) => {
                out.push(Check::error(name, &e).witness(error_witness(&e)));
                continue;
            }
        };
        out.push(
            Check::new(
                name,
                id.pass,
                format!(
                    "sup |ω_ε − ω| = {diff:.3e}, commute {:.3e}, derivative {:.3e} (bound {:.3e})",
                    id.commute_residual, id.derivative_residual, id.bound
                ),
            )
            .witness(json!({ "grid": req.grid, "eps": eps }))
            .details(json!({ "sup_difference": diff, "identities": id,
                             "output_res": smoothed.res() })),
        );
    }
    Ok(out)
}
