use std::collections::BTreeMap;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::quadrature::CellCatalogue;
use crate::scalar::{qi, Q};

/// Formal rational combination of `degree`-dimensional cells, by cell id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chain {
    degree: usize,
    terms: BTreeMap<String, Q>,
}

impl Chain {
    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn cell(degree: usize, id: impl Into<String>) -> Self {
        let mut c = Self::zero(degree);
        c.add_term(id, qi(1));
        c
    }

    pub fn from_terms(degree: usize, terms: impl IntoIterator<Item = (String, Q)>) -> Self {
        let mut c = Self::zero(degree);
        for (id, a) in terms {
            c.add_term(id, a);
        }
        c
    }

    pub fn add_term(&mut self, id: impl Into<String>, a: Q) {
        let id = id.into();
        let v = self.terms.remove(&id).unwrap_or_else(Q::zero) + a;
        if !v.is_zero() {
            self.terms.insert(id, v);
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> &BTreeMap<String, Q> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Chain) -> Chain {
        assert_eq!(self.degree, other.degree, "chains of different degree");
        let mut out = self.clone();
        for (id, a) in &other.terms {
            out.add_term(id.clone(), a.clone());
        }
        out
    }

    pub fn scale(&self, a: &Q) -> Chain {
        Chain::from_terms(
            self.degree,
            self.terms.iter().map(|(id, c)| (id.clone(), c * a)),
        )
    }

    pub fn neg(&self) -> Chain {
        self.scale(&qi(-1))
    }

    /// Checks that every referenced cell is registered with the chain's
    /// degree.
    pub fn check(&self, cat: &CellCatalogue) -> Result<()> {
        for id in self.terms.keys() {
            let c = cat.get(id)?;
            if c.dim() != self.degree {
                return Err(Error::DegreeMismatch {
                    form: self.degree,
                    cell: c.dim(),
                });
            }
        }
        Ok(())
    }
}

/// `∂c = Σ_j a_j Σ_i s_i (face_i σ_j)`, using the faces registered on each
/// cell. Orientations of the cell and of its faces are folded into the
/// signs.
pub fn boundary(c: &Chain, cat: &CellCatalogue) -> Result<Chain> {
    if c.degree == 0 {
        return Err(Error::Invalid("boundary of a 0-chain".into()));
    }
    let mut out = Chain::zero(c.degree - 1);
    for (id, a) in &c.terms {
        let cell = cat.get(id)?;
        if cell.faces.is_empty() || cell.faces.len() != cell.num_facets() {
            return Err(Error::MissingFace(format!("{id}: faces not declared")));
        }
        for (fid, s) in &cell.faces {
            let face = cat.get(fid).map_err(|_| Error::MissingFace(fid.clone()))?;
            let sign = *s as i64 * cell.orientation as i64 * face.orientation as i64;
            out.add_term(fid.clone(), a * qi(sign));
        }
    }
    Ok(out)
}
