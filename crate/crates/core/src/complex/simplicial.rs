use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::linalg::QMatrix;
use crate::quadrature::{CellCatalogue, ParametrizedCell};
use crate::scalar::{qi, Q};

/// Cell id used for the simplex with the given (sorted) vertices.
pub fn simplex_id(vertices: &[usize]) -> String {
    let parts: Vec<String> = vertices.iter().map(|v| v.to_string()).collect();
    format!("s{}", parts.join("_"))
}

/// An oriented simplex: the orientation is the order of `vertices`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Simplex {
    vertices: Vec<usize>,
}

impl Simplex {
    pub fn new(vertices: Vec<usize>) -> Result<Self> {
        let set: BTreeSet<_> = vertices.iter().collect();
        if set.len() != vertices.len() || vertices.is_empty() {
            return Err(Error::InvalidSimplex(vertices));
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    /// Vertices in increasing order together with the permutation sign.
    pub fn canonical(&self) -> (Vec<usize>, i64) {
        crate::forms::sort_with_sign(self.vertices.clone()).expect("vertices are distinct")
    }

    pub fn id(&self) -> String {
        simplex_id(&self.vertices)
    }

    /// Faces `(−1)^i [v_0 … v̂_i … v_k]`.
    pub fn faces(&self) -> Vec<(Simplex, i64)> {
        if self.vertices.len() < 2 {
            return vec![];
        }
        (0..self.vertices.len())
            .map(|i| {
                let mut v = self.vertices.clone();
                v.remove(i);
                (Simplex { vertices: v }, if i % 2 == 0 { 1 } else { -1 })
            })
            .collect()
    }
}

/// A finite simplicial complex with rational vertex coordinates. Simplices
/// are stored with increasing vertex lists, graded by dimension.
#[derive(Clone, Debug)]
pub struct SimplicialComplex {
    points: Vec<Vec<Q>>,
    simplices: Vec<Vec<Vec<usize>>>,
    index: HashMap<Vec<usize>, usize>,
}

impl SimplicialComplex {
    /// The closure of `generators` under taking faces.
    pub fn new(points: Vec<Vec<Q>>, generators: &[Vec<usize>]) -> Result<Self> {
        if let Some(p) = points.first() {
            let n = p.len();
            if let Some(bad) = points.iter().find(|q| q.len() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: bad.len(),
                });
            }
        }
        let mut all: BTreeSet<Vec<usize>> = BTreeSet::new();
        for g in generators {
            let s = Simplex::new(g.clone())?;
            if g.iter().any(|&v| v >= points.len()) {
                return Err(Error::InvalidSimplex(g.clone()));
            }
            let (sorted, _) = s.canonical();
            let k = sorted.len();
            // every nonempty subset
            for mask in 1u64..(1u64 << k) {
                let sub: Vec<usize> = (0..k)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| sorted[i])
                    .collect();
                all.insert(sub);
            }
        }
        let top = all.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut simplices = vec![Vec::new(); top];
        for s in all {
            simplices[s.len() - 1].push(s);
        }
        for layer in simplices.iter_mut() {
            layer.sort();
        }
        let mut index = HashMap::new();
        for layer in &simplices {
            for (i, s) in layer.iter().enumerate() {
                index.insert(s.clone(), i);
            }
        }
        Ok(Self {
            points,
            simplices,
            index,
        })
    }

    /// A complex without geometry (all points in ℝ⁰).
    pub fn abstract_complex(num_vertices: usize, generators: &[Vec<usize>]) -> Result<Self> {
        Self::new(vec![vec![]; num_vertices], generators)
    }

    pub fn points(&self) -> &[Vec<Q>] {
        &self.points
    }

    pub fn ambient_dim(&self) -> usize {
        self.points.first().map(|p| p.len()).unwrap_or(0)
    }

    pub fn num_vertices(&self) -> usize {
        self.points.len()
    }

    /// Dimension of the complex; `None` when empty.
    pub fn dim(&self) -> Option<usize> {
        self.simplices.len().checked_sub(1)
    }

    /// `k`-simplices as increasing vertex lists, in lexicographic order.
    pub fn simplices(&self, k: usize) -> &[Vec<usize>] {
        self.simplices.get(k).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn count(&self, k: usize) -> usize {
        self.simplices(k).len()
    }

    pub fn total_count(&self) -> usize {
        self.simplices.iter().map(|l| l.len()).sum()
    }

    /// Position of the (sorted) simplex within its dimension layer.
    pub fn index_of(&self, vertices: &[usize]) -> Option<usize> {
        self.index.get(vertices).copied()
    }

    pub fn contains(&self, vertices: &[usize]) -> bool {
        let mut v = vertices.to_vec();
        v.sort_unstable();
        self.index.contains_key(&v)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.simplices
            .iter()
            .enumerate()
            .map(|(k, l)| {
                if k % 2 == 0 {
                    l.len() as i64
                } else {
                    -(l.len() as i64)
                }
            })
            .sum()
    }

    /// Simplices not contained in a larger one.
    pub fn maximal_simplices(&self) -> Vec<Vec<usize>> {
        let mut covered: BTreeSet<Vec<usize>> = BTreeSet::new();
        for layer in self.simplices.iter().skip(1) {
            for s in layer {
                for i in 0..s.len() {
                    let mut f = s.clone();
                    f.remove(i);
                    covered.insert(f);
                }
            }
        }
        self.simplices
            .iter()
            .flatten()
            .filter(|s| !covered.contains(*s))
            .cloned()
            .collect()
    }

    /// Matrix of `∂_k`: rows are (k−1)-simplices, columns k-simplices.
    pub fn boundary_matrix(&self, k: usize) -> QMatrix {
        let rows = if k == 0 { 0 } else { self.count(k - 1) };
        let cols = self.count(k);
        let mut m = vec![vec![qi(0); cols]; rows];
        if k == 0 {
            return m;
        }
        for (j, s) in self.simplices(k).iter().enumerate() {
            for i in 0..s.len() {
                let mut f = s.clone();
                f.remove(i);
                let r = self.index[&f];
                m[r][j] = qi(if i % 2 == 0 { 1 } else { -1 });
            }
        }
        m
    }

    /// Every simplex having `sigma` as a face, `sigma` included.
    pub fn star(&self, sigma: &[usize]) -> Result<Vec<Vec<usize>>> {
        let mut s = sigma.to_vec();
        s.sort_unstable();
        if !self.index.contains_key(&s) {
            return Err(Error::NotInComplex(sigma.to_vec()));
        }
        Ok(self
            .simplices
            .iter()
            .skip(s.len() - 1)
            .flatten()
            .filter(|t| s.iter().all(|v| t.binary_search(v).is_ok()))
            .cloned()
            .collect())
    }

    /// Affine cells for every simplex, with faces registered.
    pub fn to_catalogue(&self) -> CellCatalogue {
        let mut cat = CellCatalogue::new();
        for layer in &self.simplices {
            for s in layer {
                cat.insert(self.simplex_cell(s));
            }
        }
        cat
    }

    pub fn simplex_cell(&self, s: &[usize]) -> ParametrizedCell {
        let verts: Vec<Vec<Q>> = s.iter().map(|&v| self.points[v].clone()).collect();
        let cell = if s.len() == 1 {
            ParametrizedCell::point(simplex_id(s), &verts[0])
        } else {
            ParametrizedCell::affine_simplex(simplex_id(s), &verts)
        };
        let faces = if s.len() > 1 {
            (0..s.len())
                .map(|i| {
                    let mut f = s.to_vec();
                    f.remove(i);
                    (simplex_id(&f), if i % 2 == 0 { 1 } else { -1 })
                })
                .collect()
        } else {
            vec![]
        };
        cell.with_faces(faces)
    }

    /// Number of simplices per dimension.
    pub fn f_vector(&self) -> Vec<usize> {
        self.simplices.iter().map(|l| l.len()).collect()
    }

    /// Incidence `simplex ↦ faces` keyed by sorted vertex list.
    pub fn face_map(&self) -> BTreeMap<Vec<usize>, Vec<Vec<usize>>> {
        let mut out = BTreeMap::new();
        for s in self.simplices.iter().flatten() {
            let faces = (0..s.len())
                .filter(|_| s.len() > 1)
                .map(|i| {
                    let mut f = s.clone();
                    f.remove(i);
                    f
                })
                .collect();
            out.insert(s.clone(), faces);
        }
        out
    }
}
