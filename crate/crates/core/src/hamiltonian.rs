//! Exact polynomial Hamiltonians `H(q, p)` and the canonical vector field
//! `f = J^{-1} ∇H = (∂H/∂p, -∂H/∂q)`, variables ordered `(q_1..q_d, p_1..p_d)`.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::Index;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::UniPoly;
use crate::real::parse_rational;

/// Sparse multivariate polynomial with rational coefficients and dense exponent tuples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiPoly {
    num_vars: usize,
    terms: BTreeMap<Vec<u32>, BigRational>,
}

impl MultiPoly {
    pub fn zero(num_vars: usize) -> Self {
        assert!(num_vars > 0, "a polynomial needs at least one variable");
        MultiPoly {
            num_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(num_vars: usize, c: BigRational) -> Self {
        let mut p = Self::zero(num_vars);
        p.add_term(vec![0; num_vars], c);
        p
    }

    /// The coordinate function `x_i`.
    pub fn var(num_vars: usize, i: usize) -> Self {
        let mut e = vec![0; num_vars];
        e[i] = 1;
        let mut p = Self::zero(num_vars);
        p.add_term(e, BigRational::one());
        p
    }

    /// Build from `(exponents, coefficient)` pairs, collecting like terms.
    pub fn from_terms(
        num_vars: usize,
        terms: impl IntoIterator<Item = (Vec<u32>, BigRational)>,
    ) -> Result<Self> {
        let mut p = Self::zero(num_vars);
        for (e, c) in terms {
            if e.len() != num_vars {
                return Err(Error::DimensionMismatch {
                    expected: num_vars,
                    got: e.len(),
                });
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    fn add_term(&mut self, exps: Vec<u32>, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(exps) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &BigRational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `None` is the sentinel for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&k| k as usize).sum())
            .max()
    }

    pub fn eval(&self, x: &RationalVec) -> Result<BigRational> {
        self.check_len(x.len())?;
        let mut acc = BigRational::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &k) in x.iter().zip(e) {
                if k > 0 {
                    t *= num_traits::pow(xi.clone(), k as usize);
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                got: n,
            });
        }
        Ok(())
    }

    pub fn partial(&self, i: usize) -> MultiPoly {
        let mut out = Self::zero(self.num_vars);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut d = e.clone();
            d[i] -= 1;
            out.add_term(d, c * BigRational::from_integer(BigInt::from(e[i])));
        }
        out
    }

    pub fn gradient(&self) -> Vec<MultiPoly> {
        (0..self.num_vars).map(|i| self.partial(i)).collect()
    }

    pub fn scale(&self, k: &BigRational) -> MultiPoly {
        let mut out = Self::zero(self.num_vars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * k);
        }
        out
    }

    pub fn add(&self, other: &MultiPoly) -> MultiPoly {
        assert_eq!(self.num_vars, other.num_vars);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn mul(&self, other: &MultiPoly) -> MultiPoly {
        assert_eq!(self.num_vars, other.num_vars);
        let mut out = Self::zero(self.num_vars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    /// Restriction to the line `y0 + ξ (y1 - y0)` as a polynomial in ξ.
    pub fn on_segment(&self, y0: &RationalVec, y1: &RationalVec) -> Result<UniPoly> {
        self.check_len(y0.len())?;
        self.check_len(y1.len())?;
        let lines: Vec<UniPoly> = y0
            .iter()
            .zip(y1.iter())
            .map(|(a, b)| UniPoly::new(vec![a.clone(), b - a]))
            .collect();
        let mut acc = UniPoly::zero();
        for (e, c) in &self.terms {
            let mut t = UniPoly::constant(c.clone());
            for (line, &k) in lines.iter().zip(e) {
                for _ in 0..k {
                    t = &t * line;
                }
            }
            acc = &acc + &t;
        }
        Ok(acc)
    }

    pub fn to_float(&self) -> FloatPoly {
        FloatPoly {
            num_vars: self.num_vars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.clone(), c.to_f64().unwrap_or(f64::NAN)))
                .collect(),
        }
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(e, c)| {
                let vars: Vec<String> = e
                    .iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .map(|(i, &k)| if k == 1 { format!("x{}", i + 1) } else { format!("x{}^{k}", i + 1) })
                    .collect();
                if vars.is_empty() {
                    c.to_string()
                } else {
                    format!("({c})*{}", vars.join("*"))
                }
            })
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

/// Fixed-length vector of exact rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalVec(Vec<BigRational>);

impl RationalVec {
    pub fn new(entries: Vec<BigRational>) -> Self {
        RationalVec(entries)
    }

    pub fn from_i64(entries: &[i64]) -> Self {
        RationalVec(entries.iter().map(|&v| BigRational::from_integer(v.into())).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, BigRational> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[BigRational] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()
    }
}

impl Index<usize> for RationalVec {
    type Output = BigRational;
    fn index(&self, i: usize) -> &BigRational {
        &self.0[i]
    }
}

/// Canonical Hamiltonian system in `2d` variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HamiltonianSystem {
    half_dim: usize,
    h: MultiPoly,
}

impl HamiltonianSystem {
    pub fn new(half_dim: usize, h: MultiPoly) -> Result<Self> {
        if half_dim == 0 {
            return Err(Error::InvalidInput("half_dim must be positive".into()));
        }
        if h.num_vars() != 2 * half_dim {
            return Err(Error::DimensionMismatch {
                expected: 2 * half_dim,
                got: h.num_vars(),
            });
        }
        Ok(HamiltonianSystem { half_dim, h })
    }

    pub fn half_dim(&self) -> usize {
        self.half_dim
    }

    pub fn dim(&self) -> usize {
        2 * self.half_dim
    }

    pub fn hamiltonian(&self) -> &MultiPoly {
        &self.h
    }

    pub fn degree(&self) -> usize {
        self.h.degree().unwrap_or(0)
    }

    /// `f = J^{-1} ∇H`.
    pub fn vector_field(&self) -> Vec<MultiPoly> {
        vector_field(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: HamiltonianJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        doc.to_system()
    }

    pub fn to_json(&self) -> HamiltonianJson {
        HamiltonianJson {
            half_dim: self.half_dim,
            terms: self
                .h
                .terms()
                .map(|(e, c)| TermJson {
                    exponents: e.clone(),
                    coeff: Coeff::Text(c.to_string()),
                })
                .collect(),
        }
    }
}

pub fn vector_field(sys: &HamiltonianSystem) -> Vec<MultiPoly> {
    let d = sys.half_dim;
    let grad = sys.h.gradient();
    let mut f: Vec<MultiPoly> = grad[d..].to_vec();
    f.extend(grad[..d].iter().map(|g| g.scale(&-BigRational::one())));
    f
}

/// `∫_0^1 f((1-ξ) y0 + ξ y1) dξ`, exactly.
pub fn line_average(f: &[MultiPoly], y0: &RationalVec, y1: &RationalVec) -> Result<RationalVec> {
    if y0.len() != y1.len() {
        return Err(Error::DimensionMismatch {
            expected: y0.len(),
            got: y1.len(),
        });
    }
    f.iter()
        .map(|fi| Ok(fi.on_segment(y0, y1)?.integrate_unit()))
        .collect::<Result<Vec<_>>>()
        .map(RationalVec)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianJson {
    pub half_dim: usize,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub exponents: Vec<u32>,
    pub coeff: Coeff,
}

/// A coefficient given either as an integer or as a `"num/den"` / decimal string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coeff {
    Int(i64),
    Text(String),
}

impl Coeff {
    pub fn to_rational(&self) -> Result<BigRational> {
        match self {
            Coeff::Int(v) => Ok(BigRational::from_integer((*v).into())),
            Coeff::Text(s) => parse_rational(s),
        }
    }
}

impl HamiltonianJson {
    pub fn to_system(&self) -> Result<HamiltonianSystem> {
        let n = 2 * self.half_dim;
        let terms = self
            .terms
            .iter()
            .map(|t| Ok((t.exponents.clone(), t.coeff.to_rational()?)))
            .collect::<Result<Vec<_>>>()?;
        HamiltonianSystem::new(self.half_dim, MultiPoly::from_terms(n.max(1), terms)?)
    }
}

/// Double-precision copy of a [`MultiPoly`] for time stepping.
#[derive(Clone, Debug)]
pub struct FloatPoly {
    num_vars: usize,
    terms: Vec<(Vec<u32>, f64)>,
}

impl FloatPoly {
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, xi)| xi.powi(k as i32)).product::<f64>())
            .sum()
    }

    /// `∫_0^1 ξ^shift p(a + ξ (b - a)) dξ` by expanding each term in ξ.
    pub fn segment_moment(&self, a: &[f64], b: &[f64], shift: usize) -> f64 {
        let mut total = 0.0;
        let mut poly = Vec::with_capacity(16);
        for (e, c) in &self.terms {
            poly.clear();
            poly.push(*c);
            for (i, &k) in e.iter().enumerate() {
                let (lo, d) = (a[i], b[i] - a[i]);
                for _ in 0..k {
                    poly.push(0.0);
                    for j in (1..poly.len()).rev() {
                        poly[j] = poly[j] * lo + poly[j - 1] * d;
                    }
                    poly[0] *= lo;
                }
            }
            total += poly
                .iter()
                .enumerate()
                .map(|(j, v)| v / (j + shift + 1) as f64)
                .sum::<f64>();
        }
        total
    }

    pub fn partial(&self, i: usize) -> FloatPoly {
        FloatPoly {
            num_vars: self.num_vars,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e[i] > 0)
                .map(|(e, c)| {
                    let mut d = e.clone();
                    d[i] -= 1;
                    (d, c * e[i] as f64)
                })
                .collect(),
        }
    }
}
