//! Multivariate polynomials with rational coefficients and a weight vector.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::padic::{ord_rat, parse_rational, AbsValue, PadicVector, PrimeCtx, Valuation};

pub type MultiIndex = Vec<u32>;

/// `Σ c_k ξ^k` over `Q`, together with weights `w` and the prime.
///
/// Zero coefficients are never stored. The weighted degree of `ξ^k` is `⟨k, w⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPoly {
    terms: BTreeMap<MultiIndex, BigRational>,
    weights: Vec<u32>,
    ctx: PrimeCtx,
}

impl WeightedPoly {
    pub fn new<I>(weights: Vec<u32>, ctx: PrimeCtx, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, BigRational)>,
    {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("need at least one variable".into()));
        }
        if weights.contains(&0) {
            return Err(Error::InvalidWeights("weights must be positive".into()));
        }
        let n = weights.len();
        let mut map: BTreeMap<MultiIndex, BigRational> = BTreeMap::new();
        for (k, c) in terms {
            if k.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: k.len() });
            }
            *map.entry(k).or_insert_with(BigRational::zero) += c;
        }
        map.retain(|_, c| !c.is_zero());
        Ok(WeightedPoly { terms: map, weights, ctx })
    }

    /// Convenience constructor from integer coefficients.
    pub fn from_int_terms(weights: &[u32], ctx: PrimeCtx, terms: &[(&[u32], i64)]) -> Result<Self> {
        WeightedPoly::new(
            weights.to_vec(),
            ctx,
            terms
                .iter()
                .map(|(k, c)| (k.to_vec(), BigRational::from_integer(BigInt::from(*c)))),
        )
    }

    pub fn zero(weights: Vec<u32>, ctx: PrimeCtx) -> Self {
        WeightedPoly { terms: BTreeMap::new(), weights, ctx }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn ctx(&self) -> PrimeCtx {
        self.ctx
    }

    pub fn terms(&self) -> &BTreeMap<MultiIndex, BigRational> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|k| k.iter().all(|&e| e == 0))
    }

    pub fn coeff(&self, k: &[u32]) -> BigRational {
        self.terms.get(k).cloned().unwrap_or_else(BigRational::zero)
    }

    /// `⟨k, w⟩`.
    pub fn weighted_degree(&self, k: &[u32]) -> u64 {
        k.iter().zip(&self.weights).map(|(&a, &w)| a as u64 * w as u64).sum()
    }

    pub fn max_weighted_degree(&self) -> Option<u64> {
        self.terms.keys().map(|k| self.weighted_degree(k)).max()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|k| k.iter().sum()).max().unwrap_or(0)
    }

    fn max_exponents(&self) -> Vec<u32> {
        let mut m = vec![0; self.dim()];
        for k in self.terms.keys() {
            for (a, &e) in m.iter_mut().zip(k) {
                *a = (*a).max(e);
            }
        }
        m
    }

    /// Exact evaluation at rational coordinates.
    pub fn eval_coords(&self, x: &[BigRational]) -> BigRational {
        assert_eq!(x.len(), self.dim());
        let maxe = self.max_exponents();
        let powers: Vec<Vec<BigRational>> = x
            .iter()
            .zip(&maxe)
            .map(|(xi, &m)| {
                let mut v = Vec::with_capacity(m as usize + 1);
                v.push(BigRational::one());
                for j in 0..m as usize {
                    let next = &v[j] * xi;
                    v.push(next);
                }
                v
            })
            .collect();
        let mut acc = BigRational::zero();
        for (k, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in k.iter().enumerate() {
                if e > 0 {
                    t *= &powers[i][e as usize];
                }
            }
            acc += t;
        }
        acc
    }

    pub fn eval(&self, x: &PadicVector) -> BigRational {
        self.eval_coords(x.coords())
    }

    pub fn abs_at(&self, x: &PadicVector) -> AbsValue {
        AbsValue(ord_rat(&self.eval(x), self.ctx.p()))
    }

    /// Coefficients of `g(η) = f(center + s·η)` as a map from multi-index.
    pub fn shift_expand(&self, center: &[BigRational], s: &BigRational) -> BTreeMap<MultiIndex, BigRational> {
        let n = self.dim();
        let maxe = self.max_exponents();
        // binomial expansions (c_i + s η_i)^e, for e up to the max exponent
        let expansions: Vec<Vec<Vec<BigRational>>> = (0..n)
            .map(|i| {
                let mut rows: Vec<Vec<BigRational>> = vec![vec![BigRational::one()]];
                for e in 1..=maxe[i] as usize {
                    let prev = &rows[e - 1];
                    let mut row = vec![BigRational::zero(); e + 1];
                    for (j, a) in prev.iter().enumerate() {
                        row[j] += a * &center[i];
                        row[j + 1] += a * s;
                    }
                    rows.push(row);
                }
                rows
            })
            .collect();
        let mut out: BTreeMap<MultiIndex, BigRational> = BTreeMap::new();
        for (k, c) in &self.terms {
            let mut partial: Vec<(MultiIndex, BigRational)> = vec![(vec![0; n], c.clone())];
            for i in 0..n {
                let row = &expansions[i][k[i] as usize];
                let mut next = Vec::with_capacity(partial.len() * row.len());
                for (idx, coef) in &partial {
                    for (j, b) in row.iter().enumerate() {
                        if b.is_zero() {
                            continue;
                        }
                        let mut idx2 = idx.clone();
                        idx2[i] = j as u32;
                        next.push((idx2, coef * b));
                    }
                }
                partial = next;
            }
            for (idx, coef) in partial {
                *out.entry(idx).or_insert_with(BigRational::zero) += coef;
            }
        }
        out.retain(|_, c| !c.is_zero());
        out
    }

    /// Minimum coefficient valuation (the content exponent); `None` for zero.
    pub fn content_ord(&self) -> Option<i64> {
        self.terms.values().filter_map(|c| ord_rat(c, self.ctx.p()).finite()).min()
    }

    /// Rescales by `p^s` so that all coefficients lie in `Z_p` with at least one
    /// unit; returns the rescaled polynomial and `s`.
    pub fn normalize_to_zp(&self) -> (WeightedPoly, i64) {
        let s = match self.content_ord() {
            Some(v) => -v,
            None => return (self.clone(), 0),
        };
        (self.scale(&self.ctx.pow(s)), s)
    }

    pub fn scale(&self, c: &BigRational) -> WeightedPoly {
        WeightedPoly::new(
            self.weights.clone(),
            self.ctx,
            self.terms.iter().map(|(k, v)| (k.clone(), v * c)),
        )
        .expect("same shape")
    }

    pub fn add(&self, other: &WeightedPoly) -> WeightedPoly {
        assert_eq!(self.weights, other.weights);
        WeightedPoly::new(
            self.weights.clone(),
            self.ctx,
            self.terms.iter().chain(other.terms.iter()).map(|(k, v)| (k.clone(), v.clone())),
        )
        .expect("same shape")
    }

    pub fn mul(&self, other: &WeightedPoly) -> WeightedPoly {
        assert_eq!(self.weights, other.weights);
        let mut out = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let k = a.iter().zip(b).map(|(x, y)| x + y).collect();
                out.push((k, ca * cb));
            }
        }
        WeightedPoly::new(self.weights.clone(), self.ctx, out).expect("same shape")
    }

    pub fn pow(&self, e: u32) -> WeightedPoly {
        let mut acc = WeightedPoly::new(
            self.weights.clone(),
            self.ctx,
            [(vec![0; self.dim()], BigRational::one())],
        )
        .expect("shape");
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Same terms in `n + 1` variables with the new variable of weight `w`.
    pub fn with_extra_variable(&self, w: u32) -> Result<WeightedPoly> {
        let mut weights = self.weights.clone();
        weights.push(w);
        WeightedPoly::new(
            weights,
            self.ctx,
            self.terms.iter().map(|(k, c)| {
                let mut k2 = k.clone();
                k2.push(0);
                (k2, c.clone())
            }),
        )
    }

    /// Drops every term that involves a variable outside `keep`
    /// (equivalently, sets those variables to zero).
    pub fn restrict_to(&self, keep: &[bool]) -> WeightedPoly {
        WeightedPoly::new(
            self.weights.clone(),
            self.ctx,
            self.terms
                .iter()
                .filter(|(k, _)| k.iter().zip(keep).all(|(&e, &kp)| kp || e == 0))
                .map(|(k, c)| (k.clone(), c.clone())),
        )
        .expect("shape")
    }

    /// `∂f/∂ξ_i`.
    pub fn derivative(&self, i: usize) -> WeightedPoly {
        WeightedPoly::new(
            self.weights.clone(),
            self.ctx,
            self.terms.iter().filter(|(k, _)| k[i] > 0).map(|(k, c)| {
                let mut k2 = k.clone();
                k2[i] -= 1;
                (k2, c * BigRational::from_integer(BigInt::from(k[i])))
            }),
        )
        .expect("shape")
    }

    /// Parses text such as `"x1^2 - 3*x2^2 + 1/2*x1*x2"`. Variables are `x1..xn`
    /// (`xi1`, `ξ1` also accepted).
    pub fn parse(text: &str, weights: Vec<u32>, ctx: PrimeCtx) -> Result<WeightedPoly> {
        let n = weights.len();
        let err = |m: &str| Error::Invalid(format!("polynomial '{text}': {m}"));
        let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if cleaned.is_empty() {
            return Err(err("empty"));
        }
        // split into signed terms
        let mut pieces: Vec<(bool, String)> = Vec::new();
        let mut cur = String::new();
        let mut neg = false;
        for (i, ch) in cleaned.chars().enumerate() {
            if (ch == '+' || ch == '-') && i > 0 && !cur.ends_with('^') {
                pieces.push((neg, std::mem::take(&mut cur)));
                neg = ch == '-';
            } else if (ch == '+' || ch == '-') && i == 0 {
                neg = ch == '-';
            } else {
                cur.push(ch);
            }
        }
        pieces.push((neg, cur));
        let mut terms = Vec::new();
        for (neg, piece) in pieces {
            if piece.is_empty() {
                return Err(err("dangling sign"));
            }
            let mut coeff = BigRational::one();
            let mut k = vec![0u32; n];
            for factor in piece.split('*') {
                let (base, exp) = match factor.split_once('^') {
                    Some((b, e)) => (b, e.parse::<u32>().map_err(|_| err("bad exponent"))?),
                    None => (factor, 1),
                };
                let var = base
                    .strip_prefix("xi")
                    .or_else(|| base.strip_prefix('ξ'))
                    .or_else(|| base.strip_prefix('x'));
                match var {
                    Some(idx) => {
                        let i: usize = idx.parse().map_err(|_| err("bad variable"))?;
                        if i == 0 || i > n {
                            return Err(err("variable index out of range"));
                        }
                        k[i - 1] += exp;
                    }
                    None => {
                        let c = parse_rational(base)?;
                        coeff *= num_traits::pow(c, exp as usize);
                    }
                }
            }
            if neg {
                coeff = -coeff;
            }
            terms.push((k, coeff));
        }
        WeightedPoly::new(weights, ctx, terms)
    }
}

impl fmt::Display for WeightedPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (k, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            for (j, &e) in k.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*x{}", j + 1)?,
                    _ => write!(f, "*x{}^{}", j + 1, e)?,
                }
            }
        }
        Ok(())
    }
}

/// Minimum valuation over the non-constant coefficients of an expansion.
pub(crate) fn min_nonconstant_ord(expansion: &BTreeMap<MultiIndex, BigRational>, p: u64) -> Valuation {
    expansion
        .iter()
        .filter(|(k, _)| k.iter().any(|&e| e > 0))
        .map(|(_, c)| ord_rat(c, p))
        .min()
        .unwrap_or(Valuation::Infinity)
}
