use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use super::simplicial::{simplex_id, SimplicialComplex};
use crate::error::{Error, Result};
use crate::quadrature::{reference_lattice, CellCatalogue, ParametrizedCell};

/// One stratum: a parametrized cell whose image is the stratum's closure.
#[derive(Clone, Debug, PartialEq)]
pub struct Stratum {
    pub id: String,
    pub cell: ParametrizedCell,
    /// Strata `S'` with `S' ≤ S`.
    pub adjacency: BTreeSet<String>,
    /// Catalogue cells whose (open) union is the stratum.
    pub support: Vec<String>,
}

impl Stratum {
    pub fn new(id: impl Into<String>, cell: ParametrizedCell) -> Self {
        Self {
            id: id.into(),
            cell,
            adjacency: BTreeSet::new(),
            support: Vec::new(),
        }
    }

    pub fn with_adjacency<I, S>(mut self, adj: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.adjacency = adj.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_support(mut self, support: Vec<String>) -> Self {
        self.support = support;
        self
    }

    pub fn dim(&self) -> usize {
        self.cell.dim()
    }
}

/// A finite family of disjoint strata on a shared cell catalogue.
#[derive(Clone, Debug)]
pub struct Stratification {
    ambient_dim: usize,
    strata: Vec<Stratum>,
    catalogue: CellCatalogue,
    by_id: HashMap<String, usize>,
}

impl Stratification {
    /// Strata with an empty support are their own single cell, which is
    /// registered in the catalogue if absent.
    pub fn new(
        ambient_dim: usize,
        strata: Vec<Stratum>,
        mut catalogue: CellCatalogue,
    ) -> Result<Self> {
        let mut strata = strata;
        for s in strata.iter_mut() {
            if s.cell.ambient_dim() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim,
                    found: s.cell.ambient_dim(),
                });
            }
            if s.support.is_empty() {
                s.support = vec![s.cell.id.clone()];
                match catalogue.get(&s.cell.id) {
                    Ok(c) if c.map != s.cell.map => {
                        return Err(Error::IncompatibleCatalogue(format!(
                            "stratum `{}` and catalogue cell `{}` differ",
                            s.id, s.cell.id
                        )))
                    }
                    Ok(_) => {}
                    Err(_) => catalogue.insert(s.cell.clone()),
                }
            }
            for c in &s.support {
                let cell = catalogue.get(c)?;
                if cell.dim() > s.dim() {
                    return Err(Error::Invalid(format!(
                        "support cell `{c}` is larger than stratum `{}`",
                        s.id
                    )));
                }
            }
        }
        strata.sort_by(|a, b| (a.dim(), &a.id).cmp(&(b.dim(), &b.id)));
        let mut by_id = HashMap::new();
        for (i, s) in strata.iter().enumerate() {
            if by_id.insert(s.id.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate stratum id `{}`", s.id)));
            }
        }
        for s in &strata {
            for a in &s.adjacency {
                let Some(&j) = by_id.get(a) else {
                    return Err(Error::Invalid(format!(
                        "stratum `{}` lists unknown adjacent stratum `{a}`",
                        s.id
                    )));
                };
                if strata[j].dim() >= s.dim() {
                    return Err(Error::Invalid(format!(
                        "adjacent stratum `{a}` is not of lower dimension than `{}`",
                        s.id
                    )));
                }
            }
        }
        Ok(Self {
            ambient_dim,
            strata,
            catalogue,
            by_id,
        })
    }

    /// Every simplex as an open stratum, adjacent to all its proper faces.
    pub fn from_complex(k: &SimplicialComplex) -> Result<Self> {
        let cat = k.to_catalogue();
        let mut strata = Vec::new();
        for d in 0..=k.dim().unwrap_or(0) {
            for s in k.simplices(d) {
                let mut adj = BTreeSet::new();
                let n = s.len();
                for mask in 1u64..(1u64 << n) - 1 {
                    let f: Vec<usize> = (0..n)
                        .filter(|i| mask >> i & 1 == 1)
                        .map(|i| s[i])
                        .collect();
                    adj.insert(simplex_id(&f));
                }
                let mut st = Stratum::new(simplex_id(s), k.simplex_cell(s));
                st.adjacency = adj;
                strata.push(st);
            }
        }
        Self::new(k.ambient_dim(), strata, cat)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    pub fn catalogue(&self) -> &CellCatalogue {
        &self.catalogue
    }

    pub fn catalogue_mut(&mut self) -> &mut CellCatalogue {
        &mut self.catalogue
    }

    pub fn get(&self, id: &str) -> Option<&Stratum> {
        self.by_id.get(id).map(|&i| &self.strata[i])
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    /// Highest stratum dimension.
    pub fn dim(&self) -> usize {
        self.strata.iter().map(|s| s.dim()).max().unwrap_or(0)
    }

    /// Strata of dimension `k`.
    pub fn strata_of_dim(&self, k: usize) -> impl Iterator<Item = &Stratum> {
        self.strata.iter().filter(move |s| s.dim() == k)
    }

    /// Distance from `x` to the closure of stratum `i`.
    pub fn distance_to(&self, i: usize, x: &[f64]) -> f64 {
        self.strata[i].cell.closest_point(x).1
    }

    /// The stratum containing `x`: the lowest-dimensional stratum whose
    /// closure is within `tol` of `x` (ties go to the nearer one).
    pub fn classify(&self, x: &[f64], tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64, usize)> = None;
        for (i, s) in self.strata.iter().enumerate() {
            if let Some((d, _, _)) = best {
                if s.dim() > d {
                    break;
                }
            }
            let dist = self.distance_to(i, x);
            if dist <= tol {
                match best {
                    Some((_, bd, _)) if bd <= dist => {}
                    _ => best = Some((s.dim(), dist, i)),
                }
            }
        }
        best.map(|(_, _, i)| i)
    }

    /// Owner stratum of every support cell.
    pub fn support_owners(&self) -> Result<BTreeMap<String, usize>> {
        let mut owners = BTreeMap::new();
        for (i, s) in self.strata.iter().enumerate() {
            for c in &s.support {
                if let Some(j) = owners.insert(c.clone(), i) {
                    return Err(Error::Invalid(format!(
                        "cell `{c}` supports both `{}` and `{}`",
                        self.strata[j].id, s.id
                    )));
                }
            }
        }
        Ok(owners)
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FrontierSample {
    pub stratum: String,
    pub facet: usize,
    pub point: Vec<f64>,
    pub nearest: Option<String>,
    pub distance: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FrontierReport {
    pub pass: bool,
    pub samples: Vec<FrontierSample>,
}

impl FrontierReport {
    pub fn failures(&self) -> impl Iterator<Item = &FrontierSample> {
        self.samples.iter().filter(|s| !s.ok)
    }
}

/// Samples the boundary of every stratum and checks that each sample lies
/// within `tol` of a lower-dimensional stratum listed in its adjacency.
pub fn validate_frontier(sigma: &Stratification, samples: usize, tol: f64) -> FrontierReport {
    let mut out = Vec::new();
    for s in sigma.strata() {
        for facet in 0..s.cell.num_facets() {
            for u in s.cell.facet_samples(facet, samples) {
                let p = s.cell.eval(&u);
                let mut nearest: Option<(f64, usize)> = None;
                let mut ok = false;
                for (j, t) in sigma.strata().iter().enumerate() {
                    if t.dim() >= s.dim() {
                        continue;
                    }
                    let d = sigma.distance_to(j, &p);
                    if nearest.is_none_or(|(bd, _)| d < bd) {
                        nearest = Some((d, j));
                    }
                    if d <= tol && s.adjacency.contains(&t.id) {
                        ok = true;
                    }
                }
                out.push(FrontierSample {
                    stratum: s.id.clone(),
                    facet,
                    point: p,
                    nearest: nearest.map(|(_, j)| sigma.strata()[j].id.clone()),
                    distance: nearest.map(|(d, _)| d).unwrap_or(f64::INFINITY),
                    ok,
                });
            }
        }
    }
    FrontierReport {
        pass: out.iter().all(|s| s.ok),
        samples: out,
    }
}

/// Closure of `cell` under the registered face relation.
fn face_closure(cat: &CellCatalogue, cell: &str, out: &mut BTreeSet<String>) {
    if !out.insert(cell.to_string()) {
        return;
    }
    if let Ok(c) = cat.get(cell) {
        for (f, _) in &c.faces {
            face_closure(cat, f, out);
        }
    }
}

/// Common refinement of two stratifications registered on the same cell
/// catalogue. Output strata are the nonempty intersections `S ∩ S'`, each
/// of which must be a single catalogue cell or coincide with an input
/// stratum.
pub fn refine_common(a: &Stratification, b: &Stratification) -> Result<Stratification> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::IncompatibleCatalogue(
            "ambient dimensions differ".into(),
        ));
    }
    let oa = a.support_owners()?;
    let ob = b.support_owners()?;
    let ka: BTreeSet<&String> = oa.keys().collect();
    let kb: BTreeSet<&String> = ob.keys().collect();
    if ka != kb {
        return Err(Error::IncompatibleCatalogue(
            "the two stratifications cover different catalogue cells".into(),
        ));
    }
    for id in &ka {
        let ca = a.catalogue().get(id)?;
        let cb = b
            .catalogue()
            .get(id)
            .map_err(|_| Error::IncompatibleCatalogue(format!("cell `{id}` missing")))?;
        if ca.map != cb.map {
            return Err(Error::IncompatibleCatalogue(format!(
                "cell `{id}` is registered differently"
            )));
        }
    }
    let mut groups: BTreeMap<(usize, usize), Vec<String>> = BTreeMap::new();
    for (c, &i) in &oa {
        groups.entry((i, ob[c])).or_default().push(c.clone());
    }
    let cat = a.catalogue().clone();
    let mut strata = Vec::new();
    let mut members: Vec<Vec<String>> = Vec::new();
    let mut used = BTreeSet::new();
    for ((i, j), cells) in &groups {
        let (sa, sb) = (&a.strata()[*i], &b.strata()[*j]);
        let set: BTreeSet<&String> = cells.iter().collect();
        let same = |s: &Stratum| s.support.iter().collect::<BTreeSet<_>>() == set;
        let (id, cell) = if same(sa) {
            (sa.id.clone(), sa.cell.clone())
        } else if same(sb) {
            (sb.id.clone(), sb.cell.clone())
        } else if cells.len() == 1 {
            (cells[0].clone(), cat.get(&cells[0])?.clone())
        } else {
            return Err(Error::IncompatibleCatalogue(format!(
                "intersection of `{}` and `{}` is not a single registered cell",
                sa.id, sb.id
            )));
        };
        let mut uid = id.clone();
        let mut n = 1;
        while !used.insert(uid.clone()) {
            uid = format!("{id}#{n}");
            n += 1;
        }
        strata.push(Stratum::new(uid, cell).with_support(cells.clone()));
        members.push(cells.clone());
    }
    // adjacency from the face relation of the catalogue
    let closures: Vec<BTreeSet<String>> = members
        .iter()
        .map(|cells| {
            let mut out = BTreeSet::new();
            for c in cells {
                face_closure(&cat, c, &mut out);
            }
            out
        })
        .collect();
    let ids: Vec<String> = strata.iter().map(|s| s.id.clone()).collect();
    let dims: Vec<usize> = strata.iter().map(|s| s.dim()).collect();
    for (t, st) in strata.iter_mut().enumerate() {
        for (s, cells) in members.iter().enumerate() {
            if dims[s] < dims[t] && cells.iter().any(|c| closures[t].contains(c)) {
                st.adjacency.insert(ids[s].clone());
            }
        }
    }
    Stratification::new(a.ambient_dim(), strata, cat)
}

/// Interior sample points of a cell, for membership audits.
pub fn interior_samples(cell: &ParametrizedCell, budget: usize) -> Vec<Vec<f64>> {
    reference_lattice(cell.kind, cell.dim(), budget, false)
}
