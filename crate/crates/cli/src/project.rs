//! Project file schema and its resolution into library objects.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use strataforms::complex::{Chain, SimplicialComplex, Stratification, Stratum};
use strataforms::fixtures::refine_by_complex;
use strataforms::forms::{parse_component_label, PolyForm, PolyMap, StratifiedForm};
use strataforms::homotopy::{
    cone_retraction, lift_retraction, Delimiter, LiftCell, Retraction, Target,
};
use strataforms::quadrature::{CellCatalogue, DomainKind, ParametrizedCell};
use strataforms::scalar::qi;
use strataforms::smoothing::GridForm;
use strataforms::{Error, Polynomial, Q};

/// Major version of the file format, tied to the tool's major version.
pub const FORMAT_MAJOR: &str = env!("CARGO_PKG_VERSION_MAJOR");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectFile {
    pub version: u64,
    #[serde(default)]
    pub complexes: Vec<ComplexSpec>,
    #[serde(default)]
    pub stratifications: Vec<StratificationSpec>,
    #[serde(default)]
    pub forms: Vec<FormSpec>,
    #[serde(default)]
    pub chains: Vec<ChainSpec>,
    #[serde(default)]
    pub retractions: Vec<RetractionSpec>,
    #[serde(default)]
    pub grids: Vec<GridSpec>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub checks: Checks,
}

/// An exact number: a JSON integer, a JSON decimal, or a string such as
/// `"3/5"` or `"-0.125"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Number {
    pub fn to_q(&self) -> Result<Q, Error> {
        let text = match self {
            Number::Int(v) => v.to_string(),
            Number::Float(v) => v.to_string(),
            Number::Text(s) => s.clone(),
        };
        let p = Polynomial::parse(0, &text)?;
        Ok(p.constant_term())
    }
}

/// A polynomial: text such as `"2x^2*y - 1/2"`, or a list of
/// `[exponents, numerator, denominator]` terms.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum PolySpec {
    Text(String),
    Terms(Vec<(Vec<u32>, Number, Number)>),
}

impl PolySpec {
    pub fn to_poly(&self, nvars: usize) -> Result<Polynomial, Error> {
        match self {
            PolySpec::Text(s) => Polynomial::parse(nvars, s),
            PolySpec::Terms(terms) => {
                let mut out = Vec::with_capacity(terms.len());
                for (e, num, den) in terms {
                    if e.len() != nvars {
                        return Err(Error::DimensionMismatch {
                            expected: nvars,
                            found: e.len(),
                        });
                    }
                    let den = den.to_q()?;
                    if den == qi(0) {
                        return Err(Error::Invalid("zero denominator".into()));
                    }
                    out.push((e.clone(), num.to_q()? / den));
                }
                Ok(Polynomial::from_terms(nvars, out))
            }
        }
    }
}

fn point(v: &[Number]) -> Result<Vec<Q>, Error> {
    v.iter().map(Number::to_q).collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexSpec {
    pub id: String,
    /// Vertex coordinates; omit for an abstract complex.
    #[serde(default)]
    pub points: Option<Vec<Vec<Number>>>,
    /// Vertex count of an abstract complex.
    #[serde(default)]
    pub vertices: Option<usize>,
    pub simplices: Vec<Vec<usize>>,
    #[serde(default)]
    pub expect_betti: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Simplex,
    Box,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Point(Vec<Number>),
    Simplex(Vec<Vec<Number>>),
    Box {
        lo: Vec<Number>,
        hi: Vec<Number>,
    },
    /// Polynomial map from the reference domain; reference coordinates are
    /// the variables `x0, …, x{dim-1}`.
    Map {
        kind: Kind,
        dim: usize,
        components: Vec<PolySpec>,
    },
}

#[derive(Clone, Debug, Deserialize)]
pub struct CellSpec {
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default)]
    pub orientation: Option<i8>,
}

impl CellSpec {
    pub fn build(&self, id: &str) -> Result<ParametrizedCell, Error> {
        let cell = match &self.shape {
            Shape::Point(p) => ParametrizedCell::point(id, &point(p)?),
            Shape::Simplex(vs) => {
                let verts = vs.iter().map(|v| point(v)).collect::<Result<Vec<_>, _>>()?;
                if verts.is_empty() {
                    return Err(Error::Invalid(format!("cell `{id}` has no vertices")));
                }
                if verts.len() == 1 {
                    ParametrizedCell::point(id, &verts[0])
                } else {
                    ParametrizedCell::affine_simplex(id, &verts)
                }
            }
            Shape::Box { lo, hi } => {
                let (lo, hi) = (point(lo)?, point(hi)?);
                if lo.len() != hi.len() {
                    return Err(Error::DimensionMismatch {
                        expected: lo.len(),
                        found: hi.len(),
                    });
                }
                ParametrizedCell::axis_box(id, &lo, &hi)
            }
            Shape::Map {
                kind,
                dim,
                components,
            } => {
                let comps = components
                    .iter()
                    .map(|c| c.to_poly(*dim))
                    .collect::<Result<Vec<_>, _>>()?;
                let kind = match kind {
                    Kind::Simplex => DomainKind::Simplex,
                    Kind::Box => DomainKind::Cube,
                };
                ParametrizedCell::new(id, kind, PolyMap::new(*dim, comps)?)
            }
        };
        Ok(match self.orientation {
            Some(o) if o == 1 || o == -1 => cell.with_orientation(o),
            Some(o) => {
                return Err(Error::Invalid(format!(
                    "orientation {o} of `{id}` is not ±1"
                )))
            }
            None => cell,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumSpec {
    pub id: String,
    pub cell: CellSpec,
    /// Lower-dimensional strata in the closure.
    #[serde(default)]
    pub adjacent: Vec<String>,
}

/// Either the open simplices of a complex or an explicit list of strata.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratificationSpec {
    pub id: String,
    #[serde(default)]
    pub complex: Option<String>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub strata: Vec<StratumSpec>,
}

/// Components are maps from basis labels (`dx^dy`, `dx0^dx2`, `1`) to
/// polynomial text.
pub type FormTerms = BTreeMap<String, PolySpec>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    pub id: String,
    /// Stratification id.
    pub on: String,
    pub degree: usize,
    /// One ambient form on every stratum.
    #[serde(default)]
    pub global: Option<FormTerms>,
    /// Per-stratum forms; strata left out inherit from an adjacent higher
    /// stratum.
    #[serde(default)]
    pub components: BTreeMap<String, FormTerms>,
    #[serde(default)]
    pub bound: Option<Number>,
}

#[derive(Debug, Deserialize)]
pub struct NamedCell {
    pub id: String,
    #[serde(flatten)]
    pub cell: CellSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub id: String,
    /// Stratification id; its strata and catalogue cells may be referenced.
    pub on: String,
    /// Extra cells; their facets are registered as `{id}/f{i}`.
    #[serde(default)]
    pub cells: Vec<NamedCell>,
    /// `[cell id, coefficient]` pairs.
    pub terms: Vec<(String, Number)>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSpec {
    Point(Vec<Number>),
    Strata(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum DelimiterSpec {
    Poly(PolySpec),
    Step { step: StepSpec },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSpec {
    pub axis: usize,
    pub at: Number,
    pub below: PolySpec,
    pub above: PolySpec,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKindSpec {
    Band,
    Graph,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RetractionSpec {
    /// `r(x,t) = p + t(x − p)`, audited for stratum invariance when a
    /// domain is given.
    Cone {
        id: String,
        point: Vec<Number>,
        #[serde(default)]
        domain: Option<String>,
    },
    /// Components in the variables `x0, …, x{n-1}` and time `x{n}`.
    Polynomial {
        id: String,
        map: Vec<PolySpec>,
        #[serde(default)]
        domain: Option<String>,
        target: TargetSpec,
    },
    /// Lift of a retraction of the base `ℝ^{n-1}` to a band or graph cell
    /// delimited by functions of the base variables.
    Lift {
        id: String,
        base: String,
        lo: DelimiterSpec,
        #[serde(default)]
        hi: Option<DelimiterSpec>,
        cell: CellKindSpec,
        /// Base points where the delimiters must not cross.
        #[serde(default)]
        base_samples: Vec<Vec<f64>>,
        #[serde(default)]
        domain: Option<String>,
        target: TargetSpec,
    },
}

impl RetractionSpec {
    pub fn id(&self) -> &str {
        match self {
            RetractionSpec::Cone { id, .. }
            | RetractionSpec::Polynomial { id, .. }
            | RetractionSpec::Lift { id, .. } => id,
        }
    }
}

/// A sampled form: either polynomial components sampled on the grid or a
/// text dump read from `file` (relative to the project file).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub id: String,
    #[serde(default)]
    pub lo: Vec<f64>,
    #[serde(default)]
    pub hi: Vec<f64>,
    #[serde(default)]
    pub res: Vec<usize>,
    #[serde(default)]
    pub degree: usize,
    #[serde(default)]
    pub components: Option<FormTerms>,
    #[serde(default)]
    pub file: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tol: f64,
    pub quad_order: Option<usize>,
    /// Boundary samples per facet for frontier and continuity checks.
    pub samples: usize,
    /// Sample budget of retraction audits.
    pub audit_samples: usize,
    pub seed: u64,
    /// Shrink parameters of the Stokes check.
    pub eps: Vec<f64>,
    /// Constant `C` in the `C h²` bound of the mollifier identities.
    pub identity_constant: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            quad_order: None,
            samples: 16,
            audit_samples: 64,
            seed: 0,
            eps: vec![0.25, 0.125],
            identity_constant: 10.0,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    pub stokes: Vec<StokesCheck>,
    pub derham: Vec<DerhamCheck>,
    pub poincare: Vec<PoincareCheck>,
    pub smooth: Vec<SmoothCheck>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StokesCheck {
    pub form: String,
    pub chain: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerhamCheck {
    pub complex: String,
    /// Closed forms on a stratification of `complex`, all of one degree.
    #[serde(default)]
    pub forms: Vec<String>,
    #[serde(default)]
    pub expect_rank: Option<usize>,
    /// Extra closed cochains as `{simplex id: value}` maps.
    #[serde(default)]
    pub cochains: Vec<BTreeMap<String, Number>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareCheck {
    pub form: String,
    pub retraction: String,
    /// Primitive of `ω` restricted to the target, when it is not a point.
    #[serde(default)]
    pub gamma_prime: Option<FormTerms>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothCheck {
    pub grid: String,
    pub eps: Vec<f64>,
}

pub struct StratEntry {
    pub strat: Arc<Stratification>,
    pub complex: Option<String>,
}

pub struct ChainEntry {
    pub chain: Chain,
    pub catalogue: CellCatalogue,
    pub on: String,
}

pub struct GridEntry {
    pub form: GridForm,
    /// Exact derivative sampled on the same grid, for polynomial grids.
    pub exact_d: Option<GridForm>,
}

/// A project with every cross-reference resolved.
pub struct Project {
    pub file: ProjectFile,
    pub complexes: BTreeMap<String, SimplicialComplex>,
    pub strats: BTreeMap<String, StratEntry>,
    pub forms: BTreeMap<String, StratifiedForm>,
    pub chains: BTreeMap<String, ChainEntry>,
    /// Construction errors of audited retractions are kept as check
    /// outcomes rather than load failures.
    pub retractions: BTreeMap<String, Result<Retraction, Error>>,
    pub grids: BTreeMap<String, GridEntry>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

fn unique<'a>(kind: &str, ids: impl Iterator<Item = &'a str>) -> Result<(), Error> {
    let mut seen = std::collections::BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(invalid(format!("duplicate {kind} id `{id}`")));
        }
    }
    Ok(())
}

pub fn parse_terms(dim: usize, degree: usize, terms: &FormTerms) -> Result<PolyForm, Error> {
    let parsed = terms
        .iter()
        .map(|(l, p)| Ok((parse_component_label(l)?, p.to_poly(dim)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    PolyForm::from_terms(dim, degree, parsed)
}

fn target(t: &TargetSpec) -> Result<Target, Error> {
    Ok(match t {
        TargetSpec::Point(p) => Target::Point(point(p)?),
        TargetSpec::Strata(s) => Target::Strata(s.clone()),
    })
}

fn delimiter(d: &DelimiterSpec, n: usize) -> Result<Delimiter, Error> {
    Ok(match d {
        DelimiterSpec::Poly(p) => Delimiter::Poly(p.to_poly(n)?),
        DelimiterSpec::Step { step } => Delimiter::Step {
            axis: step.axis,
            at: step.at.to_q()?,
            below: step.below.to_poly(n)?,
            above: step.above.to_poly(n)?,
        },
    })
}

impl Project {
    pub fn load(path: &Path) -> Result<Project, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let file: ProjectFile =
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Project::resolve(file, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn resolve(file: ProjectFile, base_dir: &Path) -> Result<Project, Error> {
        if file.version.to_string() != FORMAT_MAJOR {
            return Err(invalid(format!(
                "project version {} does not match tool major version {FORMAT_MAJOR}",
                file.version
            )));
        }
        unique("complex", file.complexes.iter().map(|c| c.id.as_str()))?;
        unique(
            "stratification",
            file.stratifications.iter().map(|c| c.id.as_str()),
        )?;
        unique("form", file.forms.iter().map(|c| c.id.as_str()))?;
        unique("chain", file.chains.iter().map(|c| c.id.as_str()))?;
        unique("retraction", file.retractions.iter().map(|c| c.id()))?;
        unique("grid", file.grids.iter().map(|c| c.id.as_str()))?;

        let mut complexes = BTreeMap::new();
        for c in &file.complexes {
            let k = match (&c.points, c.vertices) {
                (Some(p), None) => {
                    let pts = p.iter().map(|v| point(v)).collect::<Result<Vec<_>, _>>()?;
                    SimplicialComplex::new(pts, &c.simplices)?
                }
                (None, Some(n)) => SimplicialComplex::abstract_complex(n, &c.simplices)?,
                _ => {
                    return Err(invalid(format!(
                        "complex `{}` needs exactly one of `points` and `vertices`",
                        c.id
                    )))
                }
            };
            complexes.insert(c.id.clone(), k);
        }

        let mut strats = BTreeMap::new();
        for s in &file.stratifications {
            let entry = match &s.complex {
                Some(kid) => {
                    if !s.strata.is_empty() {
                        return Err(invalid(format!(
                            "stratification `{}` gives both a complex and strata",
                            s.id
                        )));
                    }
                    let k = complexes
                        .get(kid)
                        .ok_or_else(|| invalid(format!("unknown complex `{kid}` in `{}`", s.id)))?;
                    if k.ambient_dim() == 0 {
                        return Err(invalid(format!("complex `{kid}` has no coordinates")));
                    }
                    StratEntry {
                        strat: Arc::new(Stratification::from_complex(k)?),
                        complex: Some(kid.clone()),
                    }
                }
                None => {
                    let dim = s
                        .dim
                        .ok_or_else(|| invalid(format!("stratification `{}` needs `dim`", s.id)))?;
                    let strata = s
                        .strata
                        .iter()
                        .map(|st| {
                            Ok(Stratum::new(st.id.clone(), st.cell.build(&st.id)?)
                                .with_adjacency(st.adjacent.iter().cloned()))
                        })
                        .collect::<Result<Vec<_>, Error>>()?;
                    StratEntry {
                        strat: Arc::new(Stratification::new(dim, strata, CellCatalogue::new())?),
                        complex: None,
                    }
                }
            };
            strats.insert(s.id.clone(), entry);
        }

        let strat_of = |id: &str, who: &str| {
            strats
                .get(id)
                .ok_or_else(|| invalid(format!("unknown stratification `{id}` in `{who}`")))
        };

        let mut forms = BTreeMap::new();
        for f in &file.forms {
            let strat = strat_of(&f.on, &f.id)?.strat.clone();
            let n = strat.ambient_dim();
            let form = match (&f.global, f.components.is_empty()) {
                (Some(g), true) => StratifiedForm::global(strat, &parse_terms(n, f.degree, g)?)?,
                (None, false) => {
                    let mut given = BTreeMap::new();
                    for (sid, terms) in &f.components {
                        if strat.get(sid).is_none() {
                            return Err(invalid(format!(
                                "form `{}` names unknown stratum `{sid}`",
                                f.id
                            )));
                        }
                        given.insert(sid.clone(), parse_terms(n, f.degree, terms)?);
                    }
                    StratifiedForm::from_partial(strat, f.degree, given)?
                }
                _ => {
                    return Err(invalid(format!(
                        "form `{}` needs exactly one of `global` and `components`",
                        f.id
                    )))
                }
            };
            let form = match &f.bound {
                Some(b) => form.with_bound(b.to_q()?),
                None => form,
            };
            forms.insert(f.id.clone(), form);
        }

        let mut chains = BTreeMap::new();
        for c in &file.chains {
            let entry = strat_of(&c.on, &c.id)?;
            let complex = entry.complex.as_ref().map(|k| &complexes[k]);
            chains.insert(c.id.clone(), build_chain(c, &entry.strat, complex)?);
        }

        let mut retractions: BTreeMap<String, Result<Retraction, Error>> = BTreeMap::new();
        for r in &file.retractions {
            let domain = |d: &Option<String>| -> Result<Option<Arc<Stratification>>, Error> {
                d.as_ref()
                    .map(|id| strat_of(id, r.id()).map(|e| e.strat.clone()))
                    .transpose()
            };
            let built = match r {
                RetractionSpec::Cone {
                    point: p,
                    domain: d,
                    ..
                } => {
                    let p = point(p)?;
                    match domain(d)? {
                        Some(dom) => cone_retraction(&p, dom, file.run.audit_samples),
                        None => Ok(Retraction::cone_unchecked(&p, None)),
                    }
                }
                RetractionSpec::Polynomial {
                    map,
                    domain: d,
                    target: t,
                    ..
                } => {
                    let n = map.len();
                    let comps = map
                        .iter()
                        .map(|m| m.to_poly(n + 1))
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(Retraction::polynomial(
                        PolyMap::new(n + 1, comps)?,
                        domain(d)?,
                        target(t)?,
                    )?)
                }
                RetractionSpec::Lift {
                    id,
                    base,
                    lo,
                    hi,
                    cell,
                    base_samples,
                    domain: d,
                    target: t,
                } => {
                    let base = match retractions.get(base) {
                        Some(Ok(b)) => b.clone(),
                        Some(Err(e)) => {
                            return Err(invalid(format!("base `{base}` of `{id}` failed: {e}")))
                        }
                        None => {
                            return Err(invalid(format!(
                                "unknown base retraction `{base}` in `{id}` (declare it first)"
                            )))
                        }
                    };
                    let n = base.dim();
                    let lo = delimiter(lo, n)?;
                    let (hi, cell) = match (cell, hi) {
                        (CellKindSpec::Band, Some(h)) => (delimiter(h, n)?, LiftCell::Band),
                        (CellKindSpec::Band, None) => {
                            return Err(invalid(format!("band lift `{id}` needs `hi`")))
                        }
                        (CellKindSpec::Graph, _) => (lo.clone(), LiftCell::Graph),
                    };
                    lift_retraction(base, lo, hi, cell, base_samples, domain(d)?, target(t)?)
                }
            };
            retractions.insert(r.id().to_string(), built);
        }

        let mut grids = BTreeMap::new();
        for g in &file.grids {
            let entry = match (&g.components, &g.file) {
                (Some(terms), None) => {
                    let n = g.lo.len();
                    let w = parse_terms(n, g.degree, terms)?;
                    let form = GridForm::sample(&g.lo, &g.hi, &g.res, &w)?;
                    let exact_d = if g.degree < n {
                        Some(GridForm::sample(
                            &g.lo,
                            &g.hi,
                            &g.res,
                            &w.exterior_derivative(),
                        )?)
                    } else {
                        None
                    };
                    GridEntry { form, exact_d }
                }
                (None, Some(f)) => {
                    let p = base_dir.join(f);
                    let text = std::fs::read_to_string(&p)
                        .map_err(|e| invalid(format!("cannot read {}: {e}", p.display())))?;
                    GridEntry {
                        form: GridForm::from_text(&text)?,
                        exact_d: None,
                    }
                }
                _ => {
                    return Err(invalid(format!(
                        "grid `{}` needs exactly one of `components` and `file`",
                        g.id
                    )))
                }
            };
            grids.insert(g.id.clone(), entry);
        }

        Ok(Project {
            file,
            complexes,
            strats,
            forms,
            chains,
            retractions,
            grids,
        })
    }
}

/// Registers the chain's own cells and their facets; on a stratification
/// built from a complex, cells covering several simplices are refined into
/// them.
fn build_chain(
    c: &ChainSpec,
    strat: &Stratification,
    complex: Option<&SimplicialComplex>,
) -> Result<ChainEntry, Error> {
    let mut cat = complex.map_or_else(CellCatalogue::new, |k| k.to_catalogue());
    let add_with_facets = |cell: ParametrizedCell, cat: &mut CellCatalogue| -> Result<(), Error> {
        let facets = cell.facet_cells();
        let cell = if cell.faces.is_empty() && cell.dim() > 0 {
            cell.with_faces(facets.iter().map(|(f, s)| (f.id.clone(), *s)).collect())
        } else {
            cell
        };
        let mut fresh = vec![cell];
        if fresh[0].faces.iter().all(|(f, _)| f.contains('/')) {
            fresh.extend(facets.into_iter().map(|(f, _)| f));
        }
        for cell in fresh {
            if let Some(k) = complex {
                if strat.get(&cell.id).is_none() {
                    let pieces = refine_by_complex(&cell, k);
                    if !pieces.is_empty() {
                        cat.insert(cell.clone());
                        cat.register_refinement(&cell.id, pieces)?;
                        continue;
                    }
                }
            }
            cat.insert(cell);
        }
        Ok(())
    };
    for nc in &c.cells {
        if strat.get(&nc.id).is_some() || strat.catalogue().contains(&nc.id) {
            return Err(invalid(format!(
                "chain `{}` redefines cell `{}` of its stratification",
                c.id, nc.id
            )));
        }
        add_with_facets(nc.cell.build(&nc.id)?, &mut cat)?;
    }
    let mut degree = None;
    let mut terms = Vec::new();
    for (id, a) in &c.terms {
        let cell = if let Ok(cell) = cat.get(id) {
            cell.clone()
        } else if let Ok(cell) = strat.catalogue().get(id) {
            let cell = cell.clone();
            if cell.faces.is_empty() && cell.dim() > 0 {
                add_with_facets(cell.clone(), &mut cat)?;
            }
            cell
        } else {
            return Err(invalid(format!(
                "chain `{}` names unknown cell `{id}`",
                c.id
            )));
        };
        match degree {
            None => degree = Some(cell.dim()),
            Some(d) if d != cell.dim() => {
                return Err(invalid(format!("chain `{}` mixes cell dimensions", c.id)))
            }
            _ => {}
        }
        terms.push((id.clone(), a.to_q()?));
    }
    let degree = degree.ok_or_else(|| invalid(format!("chain `{}` is empty", c.id)))?;
    Ok(ChainEntry {
        chain: Chain::from_terms(degree, terms),
        catalogue: cat,
        on: c.on.clone(),
    })
}
