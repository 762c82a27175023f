//! Sparse multivariate polynomials with exact rational coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::scalar::{qi, Scalar, Q};

/// Exponent multi-index of a monomial.
pub type Exponent = Vec<u32>;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Exponent, Q>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, Q::one())
    }

    pub fn constant(nvars: usize, c: Q) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    /// The coordinate function `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable {i} out of range for {nvars} variables");
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, Q::one());
        p
    }

    pub fn monomial(exponent: Exponent, c: Q) -> Self {
        let mut p = Self::zero(exponent.len());
        p.add_term(exponent, c);
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Exponent, Q)>) -> Self {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            assert_eq!(e.len(), nvars, "exponent length must equal variable count");
            p.add_term(e, c);
        }
        p
    }

    /// Affine polynomial `c0 + Σ c_i x_i`.
    pub fn affine(c0: Q, linear: &[Q]) -> Self {
        let n = linear.len();
        let mut p = Self::constant(n, c0);
        for (i, c) in linear.iter().enumerate() {
            let mut e = vec![0; n];
            e[i] = 1;
            p.add_term(e, c.clone());
        }
        p
    }

    fn add_term(&mut self, e: Exponent, c: Q) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get() + c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &Q)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|e| e[var]).max().unwrap_or(0)
    }

    pub fn constant_term(&self) -> Q {
        self.terms
            .get(&vec![0; self.nvars])
            .cloned()
            .unwrap_or_else(Q::zero)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&k| k == 0))
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars);
        }
        Self {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.nvars);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    pub fn derivative(&self, var: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[var] -= 1;
            out.add_term(e2, c * qi(e[var] as i64));
        }
        out
    }

    /// Antiderivative in `var` with zero constant of integration.
    pub fn antiderivative(&self, var: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            e2[var] += 1;
            let d = qi(e2[var] as i64);
            out.add_term(e2, c / d);
        }
        out
    }

    /// Definite integral of `var` over `[0, 1]`; the variable is kept (with
    /// exponent zero everywhere) so the variable count is unchanged.
    pub fn integrate_unit_interval(&self, var: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            e2[var] = 0;
            out.add_term(e2, c / qi(e[var] as i64 + 1));
        }
        out
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> S {
        assert_eq!(x.len(), self.nvars, "point dimension must match variables");
        let maxdeg: Vec<u32> = (0..self.nvars).map(|i| self.degree_in(i)).collect();
        let powers: Vec<Vec<S>> = x
            .iter()
            .zip(&maxdeg)
            .map(|(xi, &d)| {
                let mut v = Vec::with_capacity(d as usize + 1);
                v.push(S::s_one());
                for k in 1..=d as usize {
                    let next = v[k - 1].clone() * xi.clone();
                    v.push(next);
                }
                v
            })
            .collect();
        let mut acc = S::s_zero();
        for (e, c) in &self.terms {
            let mut t = S::from_q(c);
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    t = t * powers[i][k as usize].clone();
                }
            }
            acc = acc + t;
        }
        acc
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.eval::<f64>(x)
    }

    /// Substitutes polynomial `subs[i]` for variable `i`. All substitutes must
    /// share one variable count, which becomes the variable count of the result.
    pub fn compose(&self, subs: &[Polynomial]) -> Polynomial {
        assert_eq!(subs.len(), self.nvars, "one substitute per variable");
        let m = subs.first().map(|p| p.nvars).unwrap_or(0);
        let maxdeg: Vec<u32> = (0..self.nvars).map(|i| self.degree_in(i)).collect();
        let powers: Vec<Vec<Polynomial>> = subs
            .iter()
            .zip(&maxdeg)
            .map(|(s, &d)| {
                assert_eq!(s.nvars, m, "substitutes must share variable count");
                let mut v = vec![Polynomial::one(m)];
                for k in 1..=d as usize {
                    let next = &v[k - 1] * s;
                    v.push(next);
                }
                v
            })
            .collect();
        let mut out = Polynomial::zero(m);
        for (e, c) in &self.terms {
            let mut t = Polynomial::constant(m, c.clone());
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    t = &t * &powers[i][k as usize];
                }
            }
            out = &out + &t;
        }
        out
    }

    /// Re-embeds into `nvars` variables by mapping variable `i` to `map[i]`.
    pub fn remap_vars(&self, nvars: usize, map: &[usize]) -> Polynomial {
        assert_eq!(map.len(), self.nvars);
        let mut out = Polynomial::zero(nvars);
        for (e, c) in &self.terms {
            let mut e2 = vec![0; nvars];
            for (i, &k) in e.iter().enumerate() {
                e2[map[i]] += k;
            }
            out.add_term(e2, c.clone());
        }
        out
    }

    /// Appends `extra` unused variables.
    pub fn extend_vars(&self, extra: usize) -> Polynomial {
        let map: Vec<usize> = (0..self.nvars).collect();
        self.remap_vars(self.nvars + extra, &map)
    }

    /// Drops variable `var`, which must not occur.
    pub fn drop_var(&self, var: usize) -> Polynomial {
        assert_eq!(self.degree_in(var), 0, "dropped variable must not occur");
        let mut out = Polynomial::zero(self.nvars - 1);
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            e2.remove(var);
            out.add_term(e2, c.clone());
        }
        out
    }

    /// Largest absolute coefficient, as a float.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms
            .values()
            .map(|c| crate::scalar::q_to_f64(c).abs())
            .fold(0.0, f64::max)
    }

    /// Floating-point copy for repeated evaluation.
    pub fn to_float(&self) -> FloatPoly {
        FloatPoly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.clone(), crate::scalar::q_to_f64(c)))
                .collect(),
        }
    }
}

/// A polynomial with `f64` coefficients, used on hot evaluation paths.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatPoly {
    nvars: usize,
    terms: Vec<(Exponent, f64)>,
}

impl FloatPoly {
    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut t = *c;
            for (xi, &k) in x.iter().zip(e) {
                if k > 0 {
                    t *= xi.powi(k as i32);
                }
            }
            acc += t;
        }
        acc
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "·x{i}")?,
                    _ => write!(f, "·x{i}^{k}")?,
                }
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars, "variable count mismatch");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars, "variable count mismatch");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), -c.clone());
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.clone(), -c.clone()))
                .collect(),
        }
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars, "variable count mismatch");
        let mut out = Polynomial::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                let e: Exponent = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Polynomial {
    /// Parses `s` as a polynomial in `nvars` variables.
    ///
    /// Variables are `x0, x1, …` or the aliases `x, y, z, w` for the first
    /// four. Coefficients are integers or decimals, `/` divides by a
    /// constant, `*` or `·` multiplies and `^` takes integer powers.
    pub fn parse(nvars: usize, s: &str) -> Result<Polynomial, crate::Error> {
        let mut p = Parser {
            chars: s.chars().filter(|c| !c.is_whitespace()).collect(),
            pos: 0,
            nvars,
            src: s,
        };
        let out = p.expr()?;
        if p.pos != p.chars.len() {
            return Err(p.err("trailing input"));
        }
        Ok(out)
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    nvars: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn err(&self, what: &str) -> crate::Error {
        crate::Error::Invalid(format!(
            "{what} at offset {} in polynomial `{}`",
            self.pos, self.src
        ))
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Polynomial, crate::Error> {
        let mut acc = Polynomial::zero(self.nvars);
        let mut first = true;
        loop {
            let neg = match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    false
                }
                Some('-') => {
                    self.pos += 1;
                    true
                }
                _ if first => false,
                _ => return Ok(acc),
            };
            first = false;
            let t = self.term()?;
            acc = if neg { &acc - &t } else { &acc + &t };
        }
    }

    fn term(&mut self) -> Result<Polynomial, crate::Error> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some('*') | Some('·') => {
                    self.pos += 1;
                    acc = &acc * &self.power()?;
                }
                Some('/') => {
                    self.pos += 1;
                    let d = self.power()?;
                    if !d.is_constant() || d.constant_term().is_zero() {
                        return Err(self.err("division by a non-constant or zero"));
                    }
                    acc = acc.scale(&(Q::one() / d.constant_term()));
                }
                // implicit product such as `2x` or `x(y+1)`
                Some(c) if c == '(' || c.is_ascii_alphabetic() => acc = &acc * &self.power()?,
                _ => return Ok(acc),
            }
        }
    }

    fn power(&mut self) -> Result<Polynomial, crate::Error> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            let k: u32 = self.chars[start..self.pos]
                .iter()
                .collect::<String>()
                .parse()
                .map_err(|_| self.err("expected exponent"))?;
            return Ok(base.pow(k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Polynomial, crate::Error> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some('-') => {
                self.pos += 1;
                Ok(-&self.power()?)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
                    self.pos += 1;
                }
                let lit: String = self.chars[start..self.pos].iter().collect();
                let (int, frac) = lit.split_once('.').unwrap_or((&lit, ""));
                let digits = format!("{int}{frac}");
                let n: num_bigint::BigInt = digits.parse().map_err(|_| self.err("bad number"))?;
                let d = num_bigint::BigInt::from(10u32).pow(frac.len() as u32);
                Ok(Polynomial::constant(self.nvars, Q::new(n, d)))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                self.pos += 1;
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
                let idx: String = self.chars[start..self.pos].iter().collect();
                let i = match (c, idx.is_empty()) {
                    ('x', false) => idx.parse::<usize>().map_err(|_| self.err("bad variable"))?,
                    ('x', true) => 0,
                    ('y', true) => 1,
                    ('z', true) => 2,
                    ('w', true) => 3,
                    _ => return Err(self.err("unknown variable")),
                };
                if i >= self.nvars {
                    return Err(self.err("variable index out of range"));
                }
                Ok(Polynomial::var(self.nvars, i))
            }
            _ => Err(self.err("expected a term")),
        }
    }
}

/// Serialized form: list of `(exponent, numerator, denominator)` records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialRecord {
    pub nvars: usize,
    pub terms: Vec<(Exponent, Integer, Integer)>,
}

/// Integer carried either as a JSON number or a decimal string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Integer {
    Small(i64),
    Big(String),
}

impl Integer {
    pub fn to_bigint(&self) -> Result<num_bigint::BigInt, crate::Error> {
        match self {
            Integer::Small(v) => Ok((*v).into()),
            Integer::Big(s) => s
                .parse()
                .map_err(|_| crate::Error::Invalid(format!("bad integer `{s}`"))),
        }
    }

    pub fn from_bigint(v: &num_bigint::BigInt) -> Self {
        use num_traits::ToPrimitive;
        match v.to_i64() {
            Some(x) => Integer::Small(x),
            None => Integer::Big(v.to_string()),
        }
    }
}

impl PolynomialRecord {
    pub fn from_poly(p: &Polynomial) -> Self {
        Self {
            nvars: p.nvars,
            terms: p
                .terms
                .iter()
                .map(|(e, c)| {
                    (
                        e.clone(),
                        Integer::from_bigint(c.numer()),
                        Integer::from_bigint(c.denom()),
                    )
                })
                .collect(),
        }
    }

    pub fn to_poly(&self) -> Result<Polynomial, crate::Error> {
        let mut p = Polynomial::zero(self.nvars);
        for (e, n, d) in &self.terms {
            if e.len() != self.nvars {
                return Err(crate::Error::Invalid(format!(
                    "exponent {e:?} has wrong length for {} variables",
                    self.nvars
                )));
            }
            let d = d.to_bigint()?;
            if d.is_zero() {
                return Err(crate::Error::Invalid("zero denominator".into()));
            }
            p.add_term(e.clone(), Q::new(n.to_bigint()?, d));
        }
        Ok(p)
    }
}
