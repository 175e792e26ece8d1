//! Exact p-adic arithmetic on rationals.
//!
//! Every quantity handled by the crate is a rational number viewed inside
//! `Q_p`, so valuations, absolute values and residues are computed exactly.
//! Floating point only appears when the additive character is evaluated.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// The prime `p`, validated on construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrimeCtx {
    p: u64,
}

impl PrimeCtx {
    pub fn new(p: u64) -> Result<Self> {
        if p < 2 || !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        Ok(PrimeCtx { p })
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn big(&self) -> BigInt {
        BigInt::from(self.p)
    }

    /// `p^e` as an exact rational, for any sign of `e`.
    pub fn pow(&self, e: i64) -> BigRational {
        let base = num_traits::pow(self.big(), e.unsigned_abs() as usize);
        if e >= 0 {
            BigRational::from_integer(base)
        } else {
            BigRational::new(BigInt::one(), base)
        }
    }

    pub fn pow_int(&self, e: u32) -> BigInt {
        num_traits::pow(self.big(), e as usize)
    }

    /// `p^e` as `u64`, or `None` on overflow.
    pub fn pow_u64(&self, e: u32) -> Option<u64> {
        self.p.checked_pow(e)
    }

    pub fn pow_f64(&self, e: f64) -> f64 {
        (self.p as f64).powf(e)
    }
}

fn is_prime(n: u64) -> bool {
    if n < 4 {
        return n >= 2;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// `ord_p(x)` for `x` in `Z ∪ {+∞}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Valuation {
    Finite(i64),
    Infinity,
}

impl Valuation {
    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinity => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Valuation::Infinity)
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinity => write!(f, "+inf"),
        }
    }
}

/// Exact p-adic absolute value `p^{-ord}`; zero when the valuation is infinite.
///
/// Ordering follows the real value, so `AbsValue` of a larger valuation is smaller.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AbsValue(pub Valuation);

impl AbsValue {
    pub const ZERO: AbsValue = AbsValue(Valuation::Infinity);

    pub fn from_ord(ord: i64) -> Self {
        AbsValue(Valuation::Finite(ord))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_infinite()
    }

    /// The exponent `e` with `|x|_p = p^{-e}`, `None` for zero.
    pub fn ord(&self) -> Option<i64> {
        self.0.finite()
    }

    pub fn to_rational(&self, ctx: PrimeCtx) -> BigRational {
        match self.0 {
            Valuation::Finite(e) => ctx.pow(-e),
            Valuation::Infinity => BigRational::zero(),
        }
    }

    pub fn to_f64(&self, ctx: PrimeCtx) -> f64 {
        match self.0 {
            Valuation::Finite(e) => ctx.pow_f64(-e as f64),
            Valuation::Infinity => 0.0,
        }
    }
}

impl Ord for AbsValue {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.cmp(&self.0)
    }
}

impl PartialOrd for AbsValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Mul for AbsValue {
    type Output = AbsValue;
    // exponents add
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: AbsValue) -> AbsValue {
        match (self.0, rhs.0) {
            (Valuation::Finite(a), Valuation::Finite(b)) => AbsValue::from_ord(a + b),
            _ => AbsValue::ZERO,
        }
    }
}

/// `ord_p` of a nonzero integer.
pub fn ord_int(x: &BigInt, p: u64) -> u64 {
    debug_assert!(!x.is_zero());
    let pb = BigInt::from(p);
    let mut v = 0;
    let mut cur = x.clone();
    loop {
        let (q, r) = cur.div_rem(&pb);
        if !r.is_zero() {
            return v;
        }
        v += 1;
        cur = q;
    }
}

/// `ord_p` of a rational.
pub fn ord_rat(x: &BigRational, p: u64) -> Valuation {
    if x.is_zero() {
        return Valuation::Infinity;
    }
    Valuation::Finite(ord_int(x.numer(), p) as i64 - ord_int(x.denom(), p) as i64)
}

/// Modular inverse of `a` modulo `m` (`gcd(a, m) = 1` assumed).
pub fn mod_inverse(a: &BigInt, m: &BigInt) -> BigInt {
    let e = a.mod_floor(m).extended_gcd(m);
    debug_assert!(e.gcd.is_one());
    e.x.mod_floor(m)
}

/// Residue of a p-integral rational modulo `p^k`, in `[0, p^k)`.
///
/// Returns `None` when `x` is not in `Z_p`.
pub fn residue(x: &BigRational, ctx: PrimeCtx, k: u32) -> Option<BigInt> {
    if k == 0 {
        return Some(BigInt::zero());
    }
    if let Valuation::Finite(v) = ord_rat(x, ctx.p()) {
        if v < 0 {
            return None;
        }
    }
    let m = ctx.pow_int(k);
    let den_inv = mod_inverse(x.denom(), &m);
    Some((x.numer().mod_floor(&m) * den_inv).mod_floor(&m))
}

/// `residue` truncated to `u64`; panics if `p^k` overflows.
pub fn residue_u64(x: &BigRational, ctx: PrimeCtx, k: u32) -> Option<u64> {
    residue(x, ctx, k).map(|r| r.to_u64().expect("residue fits in u64"))
}

/// Fractional part `{x}_p ∈ [0,1)` with `x - {x}_p ∈ Z_p`.
pub fn fractional_part_rat(x: &BigRational, ctx: PrimeCtx) -> BigRational {
    let m = match ord_rat(x, ctx.p()) {
        Valuation::Finite(v) if v < 0 => (-v) as u32,
        _ => return BigRational::zero(),
    };
    // x = a / (b p^m) with gcd(b, p) = 1
    let pm = ctx.pow_int(m);
    let b = x.denom() / &pm;
    let r = (x.numer().mod_floor(&pm) * mod_inverse(&b, &pm)).mod_floor(&pm);
    BigRational::new(r, pm)
}

/// Value of the additive character, with its exact phase.
#[derive(Clone, Debug, PartialEq)]
pub struct Character {
    /// Exact phase in `[0, 1)`; the character value is `exp(2πi·phase)`.
    pub phase: BigRational,
    pub value: Complex64,
}

pub fn phase_to_complex(phase: &BigRational) -> Complex64 {
    let t = phase.to_f64().unwrap_or(0.0);
    Complex64::from_polar(1.0, std::f64::consts::TAU * t)
}

/// An exact rational regarded as an element of `Q_p`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PadicScalar {
    value: BigRational,
    ctx: PrimeCtx,
}

impl PadicScalar {
    pub fn new(value: BigRational, ctx: PrimeCtx) -> Self {
        PadicScalar { value, ctx }
    }

    pub fn from_int(v: i64, ctx: PrimeCtx) -> Self {
        PadicScalar::new(BigRational::from_integer(BigInt::from(v)), ctx)
    }

    pub fn from_frac(num: i64, den: i64, ctx: PrimeCtx) -> Self {
        PadicScalar::new(BigRational::new(num.into(), den.into()), ctx)
    }

    pub fn parse(s: &str, ctx: PrimeCtx) -> Result<Self> {
        Ok(PadicScalar::new(parse_rational(s)?, ctx))
    }

    pub fn value(&self) -> &BigRational {
        &self.value
    }

    pub fn into_value(self) -> BigRational {
        self.value
    }

    pub fn ctx(&self) -> PrimeCtx {
        self.ctx
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn valuation(&self) -> Valuation {
        ord_rat(&self.value, self.ctx.p())
    }

    pub fn abs_p(&self) -> AbsValue {
        AbsValue(self.valuation())
    }

    pub fn fractional_part(&self) -> BigRational {
        fractional_part_rat(&self.value, self.ctx)
    }

    /// `Ψ(x) = exp(2πi {x}_p)`.
    pub fn character(&self) -> Character {
        let phase = self.fractional_part();
        let value = phase_to_complex(&phase);
        Character { phase, value }
    }
}

impl fmt::Display for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

macro_rules! scalar_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<&PadicScalar> for &PadicScalar {
            type Output = PadicScalar;
            fn $m(self, rhs: &PadicScalar) -> PadicScalar {
                assert_eq!(self.ctx, rhs.ctx, "mixed primes");
                PadicScalar::new((&self.value).$m(&rhs.value), self.ctx)
            }
        }
        impl $tr for PadicScalar {
            type Output = PadicScalar;
            fn $m(self, rhs: PadicScalar) -> PadicScalar {
                (&self).$m(&rhs)
            }
        }
    };
}

scalar_binop!(Add, add);
scalar_binop!(Sub, sub);
scalar_binop!(Mul, mul);

impl Neg for PadicScalar {
    type Output = PadicScalar;
    fn neg(self) -> PadicScalar {
        PadicScalar::new(-self.value, self.ctx)
    }
}

/// Parses `"a"`, `"-a"`, or `"a/b"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let err = || Error::ParseRational(s.to_string());
    let t = s.trim();
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let n: BigInt = num.parse().map_err(|_| err())?;
    let d: BigInt = den.parse().map_err(|_| err())?;
    if d.is_zero() {
        return Err(err());
    }
    Ok(BigRational::new(n, d))
}

/// Formats a rational as `"num/den"` (or `"num"` for integers).
pub fn format_rational(x: &BigRational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// A point of `Q_p^n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PadicVector {
    coords: Vec<BigRational>,
    ctx: PrimeCtx,
}

impl PadicVector {
    pub fn new(coords: Vec<BigRational>, ctx: PrimeCtx) -> Self {
        assert!(!coords.is_empty(), "PadicVector needs n >= 1");
        PadicVector { coords, ctx }
    }

    pub fn zero(n: usize, ctx: PrimeCtx) -> Self {
        PadicVector::new(vec![BigRational::zero(); n], ctx)
    }

    pub fn from_ints(v: &[i64], ctx: PrimeCtx) -> Self {
        PadicVector::new(
            v.iter().map(|&x| BigRational::from_integer(x.into())).collect(),
            ctx,
        )
    }

    pub fn from_fracs(v: &[(i64, i64)], ctx: PrimeCtx) -> Self {
        PadicVector::new(
            v.iter().map(|&(a, b)| BigRational::new(a.into(), b.into())).collect(),
            ctx,
        )
    }

    pub fn parse(v: &[String], ctx: PrimeCtx) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::Invalid("empty vector".into()));
        }
        Ok(PadicVector::new(
            v.iter().map(|s| parse_rational(s)).collect::<Result<_>>()?,
            ctx,
        ))
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn ctx(&self) -> PrimeCtx {
        self.ctx
    }

    pub fn coords(&self) -> &[BigRational] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> PadicScalar {
        PadicScalar::new(self.coords[i].clone(), self.ctx)
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(Zero::is_zero)
    }

    /// `‖x‖_p = max_i |x_i|_p`.
    pub fn norm(&self) -> AbsValue {
        self.coords
            .iter()
            .map(|c| AbsValue(ord_rat(c, self.ctx.p())))
            .max()
            .unwrap_or(AbsValue::ZERO)
    }

    /// `x·y = Σ x_i y_i`.
    pub fn dot(&self, other: &PadicVector) -> BigRational {
        assert_eq!(self.dim(), other.dim());
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a * b)
            .fold(BigRational::zero(), |acc, t| acc + t)
    }

    pub fn add(&self, other: &PadicVector) -> PadicVector {
        assert_eq!(self.dim(), other.dim());
        PadicVector::new(
            self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect(),
            self.ctx,
        )
    }

    pub fn sub(&self, other: &PadicVector) -> PadicVector {
        assert_eq!(self.dim(), other.dim());
        PadicVector::new(
            self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect(),
            self.ctx,
        )
    }

    pub fn scale(&self, s: &BigRational) -> PadicVector {
        PadicVector::new(self.coords.iter().map(|a| a * s).collect(), self.ctx)
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.coords.iter().map(format_rational).collect()
    }
}

impl fmt::Display for PadicVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// The ball `center + (p^level Z_p)^n`, of radius `p^{-level}`.
#[derive(Clone, Debug)]
pub struct Ball {
    center: PadicVector,
    level: i64,
}

impl Ball {
    pub fn new(center: PadicVector, level: i64) -> Self {
        Ball { center, level }
    }

    /// `{‖x‖_p ≤ p^radius_exp}` centered at the origin.
    pub fn around_zero(n: usize, ctx: PrimeCtx, radius_exp: i64) -> Self {
        Ball::new(PadicVector::zero(n, ctx), -radius_exp)
    }

    pub fn center(&self) -> &PadicVector {
        &self.center
    }

    pub fn level(&self) -> i64 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn ctx(&self) -> PrimeCtx {
        self.center.ctx()
    }

    pub fn contains(&self, x: &PadicVector) -> bool {
        let p = self.ctx().p();
        self.center
            .coords()
            .iter()
            .zip(x.coords())
            .all(|(c, xi)| ord_rat(&(xi - c), p) >= Valuation::Finite(self.level))
    }

    /// True when `other ⊆ self`.
    pub fn contains_ball(&self, other: &Ball) -> bool {
        other.level >= self.level && self.contains(&other.center)
    }

    pub fn is_disjoint(&self, other: &Ball) -> bool {
        !(self.contains_ball(other) || other.contains_ball(self))
    }

    /// Haar measure `p^{-level·n}`.
    pub fn measure(&self) -> BigRational {
        self.ctx().pow(-self.level * self.dim() as i64)
    }

    pub fn measure_f64(&self) -> f64 {
        self.ctx().pow_f64(-(self.level as f64) * self.dim() as f64)
    }

    /// True when coordinate `i` of the ball contains `0`, i.e. `|x_i|_p` is not
    /// constant on the ball.
    pub fn coordinate_touches_zero(&self, i: usize) -> bool {
        ord_rat(&self.center.coords()[i], self.ctx().p()) >= Valuation::Finite(self.level)
    }

    pub fn contains_origin(&self) -> bool {
        (0..self.dim()).all(|i| self.coordinate_touches_zero(i))
    }

    /// Ball with the same point set and the canonical center whose coordinates
    /// lie in `[0, p^level)` and have no p-adic digits at positions `≥ level`.
    pub fn canonical(&self) -> Ball {
        let ctx = self.ctx();
        let pl = ctx.pow(self.level);
        let pinv = ctx.pow(-self.level);
        let coords = self
            .center
            .coords()
            .iter()
            .map(|c| fractional_part_rat(&(c * &pinv), ctx) * &pl)
            .collect();
        Ball::new(PadicVector::new(coords, ctx), self.level)
    }

    /// The `p^n` children at level `level + 1`, centers `center + p^level·digits`,
    /// first coordinate varying fastest.
    pub fn subdivide(&self) -> Vec<Ball> {
        let ctx = self.ctx();
        let p = ctx.p() as usize;
        let n = self.dim();
        let step = ctx.pow(self.level);
        let count = p.pow(n as u32);
        let mut out = Vec::with_capacity(count);
        for idx in 0..count {
            let mut rem = idx;
            let coords = self
                .center
                .coords()
                .iter()
                .map(|c| {
                    let digit = rem % p;
                    rem /= p;
                    c + &step * BigRational::from_integer(BigInt::from(digit))
                })
                .collect();
            out.push(Ball::new(PadicVector::new(coords, ctx), self.level + 1));
        }
        out
    }
}

impl PartialEq for Ball {
    fn eq(&self, other: &Self) -> bool {
        self.level == other.level && self.contains(&other.center)
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + (p^{} Z_p)^{}", self.center, self.level, self.dim())
    }
}
