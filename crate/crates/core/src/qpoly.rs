//! Quasi-homogeneity, canonical form, orthant decomposition and the
//! quasiellipticity certificate.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::padic::{format_rational, ord_rat, residue, Ball, PadicVector, PrimeCtx, Valuation};
use crate::poly::{MultiIndex, WeightedPoly};
use crate::symbol::{certify_nonvanishing, Nonvanishing};

/// Evidence that a polynomial is not quasielliptic, or that refinement gave up.
#[derive(Clone, Debug, PartialEq)]
pub enum NonQeWitness {
    /// A term whose weighted degree differs from the top degree `d`.
    Inhomogeneous { term: MultiIndex, degree: u64, d: u64 },
    /// A nonzero point with `f(root) = 0` exactly.
    Root(PadicVector),
    /// A residue class containing a nonzero root (Hensel), no rational root found.
    RootClass(Ball),
    /// Refinement reached the depth cap without deciding.
    Inconclusive { depth: i64, ball: Ball },
}

impl NonQeWitness {
    pub fn kind(&self) -> &'static str {
        match self {
            NonQeWitness::Inhomogeneous { .. } => "inhomogeneous",
            NonQeWitness::Root(_) => "root",
            NonQeWitness::RootClass(_) => "root_class",
            NonQeWitness::Inconclusive { .. } => "inconclusive",
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            NonQeWitness::Inhomogeneous { term, degree, d } => {
                json!({"kind": self.kind(), "term": term, "weighted_degree": degree, "d": d})
            }
            NonQeWitness::Root(x) => json!({"kind": self.kind(), "root": x.to_strings()}),
            NonQeWitness::RootClass(b) => {
                json!({"kind": self.kind(), "center": b.center().to_strings(), "level": b.level()})
            }
            NonQeWitness::Inconclusive { depth, ball } => json!({
                "kind": self.kind(),
                "depth": depth,
                "center": ball.center().to_strings(),
                "level": ball.level()
            }),
        }
    }
}

/// Returns the common weighted degree, or the first term whose degree differs
/// from the maximal one.
pub fn check_quasihomogeneous(f: &WeightedPoly) -> Result<std::result::Result<u64, NonQeWitness>> {
    if f.is_constant() {
        return Err(Error::ConstantPolynomial);
    }
    let d = f.max_weighted_degree().expect("non-constant");
    for k in f.terms().keys() {
        let deg = f.weighted_degree(k);
        if deg != d {
            return Ok(Err(NonQeWitness::Inhomogeneous { term: k.clone(), degree: deg, d }));
        }
    }
    Ok(Ok(d))
}

/// `f = Σ c_i ξ_i^{d/w_i} + h`.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalForm {
    pub d: u64,
    /// `(i, c_i, d/w_i)` for every variable.
    pub pure_powers: Vec<(usize, BigRational, u32)>,
    pub remainder: WeightedPoly,
}

impl CanonicalForm {
    /// Re-sums the pure powers and the remainder.
    pub fn reassemble(&self) -> WeightedPoly {
        let n = self.remainder.dim();
        let extra = self.pure_powers.iter().map(|(i, c, a)| {
            let mut k = vec![0; n];
            k[*i] = *a;
            (k, c.clone())
        });
        let terms: Vec<_> = self
            .remainder
            .terms()
            .iter()
            .map(|(k, c)| (k.clone(), c.clone()))
            .chain(extra)
            .collect();
        WeightedPoly::new(self.remainder.weights().to_vec(), self.remainder.ctx(), terms).expect("shape")
    }
}

/// Splits off the pure powers. A variable without a pure-power term gives the
/// root witness `e_i`, since every other term vanishes there.
pub fn canonical_form(f: &WeightedPoly, d: u64) -> std::result::Result<CanonicalForm, NonQeWitness> {
    let n = f.dim();
    let mut pure = Vec::with_capacity(n);
    for i in 0..n {
        let w = f.weights()[i] as u64;
        let coeff = if d.is_multiple_of(w) {
            let mut k = vec![0; n];
            k[i] = (d / w) as u32;
            f.terms().get(&k).cloned()
        } else {
            None
        };
        match coeff {
            Some(c) => pure.push((i, c, (d / w) as u32)),
            None => {
                let mut e = vec![BigRational::zero(); n];
                e[i] = BigRational::one();
                return Err(NonQeWitness::Root(PadicVector::new(e, f.ctx())));
            }
        }
    }
    let remainder = WeightedPoly::new(
        f.weights().to_vec(),
        f.ctx(),
        f.terms()
            .iter()
            .filter(|(k, _)| k.iter().filter(|&&e| e > 0).count() != 1)
            .map(|(k, c)| (k.clone(), c.clone())),
    )
    .expect("shape");
    Ok(CanonicalForm { d, pure_powers: pure, remainder })
}

/// Sign vector `j ∈ {-1, 1}^n`; `j_i = -1` marks coordinates with `ord < 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Orthant {
    signs: Vec<i8>,
}

impl Orthant {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.is_empty() || signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Invalid("orthant signs must be ±1".into()));
        }
        Ok(Orthant { signs })
    }

    /// All `2^n` orthants, ordered by bitmask (bit `i` set means `j_i = -1`).
    pub fn all(n: usize) -> Vec<Orthant> {
        (0..1usize << n)
            .map(|mask| Orthant {
                signs: (0..n).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect(),
            })
            .collect()
    }

    /// The orthant containing `x`.
    pub fn of(x: &PadicVector) -> Orthant {
        let p = x.ctx().p();
        Orthant {
            signs: x
                .coords()
                .iter()
                .map(|c| if ord_rat(c, p) < Valuation::Finite(0) { -1 } else { 1 })
                .collect(),
        }
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn dim(&self) -> usize {
        self.signs.len()
    }

    pub fn is_all_positive(&self) -> bool {
        self.signs.iter().all(|&s| s == 1)
    }

    pub fn negative_mask(&self) -> Vec<bool> {
        self.signs.iter().map(|&s| s == -1).collect()
    }

    pub fn contains(&self, x: &PadicVector) -> bool {
        Orthant::of(x) == *self
    }
}

/// `d(l, j)`: scales coordinate `i` by `p^{l w_i}` when `j_i = -1`, or every
/// coordinate when `j = (1, …, 1)`.
pub fn dilate(l: i64, j: &Orthant, weights: &[u32], x: &PadicVector) -> PadicVector {
    let ctx = x.ctx();
    let all = j.is_all_positive();
    let coords = x
        .coords()
        .iter()
        .zip(weights)
        .zip(j.signs())
        .map(|((c, &w), &s)| if all || s == -1 { c * ctx.pow(l * w as i64) } else { c.clone() })
        .collect();
    PadicVector::new(coords, ctx)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Membership {
    Inside,
    Outside,
    Straddle,
}

/// Classifies a ball of `Z_p^n` against `{η : ∃ i ∈ active, ord η_i ≤ w_i - 1}`.
pub(crate) fn classify(ball: &Ball, weights: &[u32], active: &[bool]) -> Membership {
    let p = ball.ctx().p();
    let m = ball.level();
    let mut straddle = false;
    for (i, c) in ball.center().coords().iter().enumerate() {
        if !active[i] {
            continue;
        }
        let w = weights[i] as i64;
        match ord_rat(c, p) {
            Valuation::Finite(v) if v < m => {
                if v < w {
                    return Membership::Inside;
                }
            }
            _ => {
                if m < w {
                    straddle = true;
                }
            }
        }
    }
    if straddle {
        Membership::Straddle
    } else {
        Membership::Outside
    }
}

/// Coarsest ball cover of `{η ∈ Z_p^n : ∃ i ∈ active, ord η_i ≤ w_i - 1}`.
pub fn domain_cover(weights: &[u32], active: &[bool], ctx: PrimeCtx) -> Vec<Ball> {
    let n = weights.len();
    let mut out = Vec::new();
    let mut stack = vec![Ball::around_zero(n, ctx, 0)];
    let mut next = Vec::new();
    while !stack.is_empty() {
        for b in stack.drain(..) {
            match classify(&b, weights, active) {
                Membership::Inside => out.push(b),
                Membership::Outside => {}
                Membership::Straddle => next.extend(b.subdivide()),
            }
        }
        std::mem::swap(&mut stack, &mut next);
    }
    out
}

fn orthant_active(j: &Orthant) -> Vec<bool> {
    if j.is_all_positive() {
        vec![true; j.dim()]
    } else {
        j.negative_mask()
    }
}

/// Coarse cover of `U_{n,j}` (or `V_n` when `j = (1, …, 1)`).
pub fn fundamental_cover(j: &Orthant, weights: &[u32], ctx: PrimeCtx) -> Vec<Ball> {
    domain_cover(weights, &orthant_active(j), ctx)
}

/// Residue classes at level `k` whose union is `U_{n,j}` (resp. `V_n`).
pub fn fundamental_domain(j: &Orthant, weights: &[u32], ctx: PrimeCtx, k: i64) -> Result<Vec<Ball>> {
    let min = *weights.iter().max().expect("nonempty") as i64;
    if k < min {
        return Err(Error::DepthTooSmall { depth: k, min });
    }
    if j.dim() != weights.len() {
        return Err(Error::DimensionMismatch { expected: weights.len(), got: j.dim() });
    }
    let mut out = Vec::new();
    for b in fundamental_cover(j, weights, ctx) {
        let mut layer = vec![b];
        while layer[0].level() < k {
            layer = layer.iter().flat_map(|b| b.subdivide()).collect();
        }
        out.extend(layer);
    }
    Ok(out)
}

/// Lower bound `|f| ≥ p^{-m}` on one fundamental domain.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainBound {
    pub orthant: Orthant,
    pub m: i64,
    pub cells: usize,
    /// A cell on which `|f| = p^{-m}`.
    pub extremal: Ball,
}

/// Certificate that `f` is quasielliptic.
#[derive(Clone, Debug, PartialEq)]
pub struct QeCertificate {
    poly: WeightedPoly,
    pub degree: u64,
    pub pure_powers: Vec<(usize, BigRational, u32)>,
    /// `s` with `p^s f` having coefficients in `Z_p`, at least one a unit.
    pub normalization: i64,
    /// Bounds for the normalized polynomial; the last entry is `V_n`.
    pub domain_bounds: Vec<DomainBound>,
    pub refinement_depth: i64,
}

impl QeCertificate {
    pub fn poly(&self) -> &WeightedPoly {
        &self.poly
    }

    pub fn weights(&self) -> &[u32] {
        self.poly.weights()
    }

    pub fn ctx(&self) -> PrimeCtx {
        self.poly.ctx()
    }

    pub fn dim(&self) -> usize {
        self.poly.dim()
    }

    /// `d / w_i` for each coordinate.
    pub fn exponents(&self) -> Vec<u64> {
        self.weights().iter().map(|&w| self.degree / w as u64).collect()
    }

    pub fn max_weight(&self) -> u32 {
        *self.weights().iter().max().expect("nonempty")
    }

    pub fn to_json(&self) -> Value {
        json!({
            "status": "certified",
            "degree": self.degree,
            "weights": self.weights(),
            "normalization": self.normalization,
            "pure_powers": self.pure_powers.iter().map(|(i, c, a)| json!({
                "variable": i + 1,
                "coeff": format_rational(c),
                "exponent": a
            })).collect::<Vec<_>>(),
            "domain_bounds": self.domain_bounds.iter().map(|b| json!({
                "orthant": b.orthant.signs(),
                "M": b.m,
                "cells": b.cells,
                "extremal_center": b.extremal.center().to_strings(),
                "extremal_level": b.extremal.level()
            })).collect::<Vec<_>>(),
            "refinement_depth": self.refinement_depth,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Certification {
    Certified(Box<QeCertificate>),
    Witness(NonQeWitness),
}

impl Certification {
    pub fn certificate(&self) -> Option<&QeCertificate> {
        match self {
            Certification::Certified(c) => Some(c),
            Certification::Witness(_) => None,
        }
    }

    pub fn witness(&self) -> Option<&NonQeWitness> {
        match self {
            Certification::Witness(w) => Some(w),
            Certification::Certified(_) => None,
        }
    }

    pub fn into_certificate(self) -> Result<QeCertificate> {
        match self {
            Certification::Certified(c) => Ok(*c),
            Certification::Witness(w) => Err(Error::NotCertified(w.to_json().to_string())),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Certification::Certified(c) => c.to_json(),
            Certification::Witness(w) => json!({"status": "witness", "witness": w.to_json()}),
        }
    }
}

/// Default absolute refinement level for certification.
pub fn default_depth_cap(weights: &[u32]) -> i64 {
    3 * *weights.iter().max().expect("nonempty") as i64 + 4
}

pub const DEFAULT_CELL_BUDGET: usize = 2_000_000;

/// Decides quasiellipticity: homogeneity, pure powers, then nonvanishing on
/// `V_n` and on every `U_{n,j}`.
pub fn certify_quasielliptic(f: &WeightedPoly, depth_cap: Option<i64>, cell_budget: usize) -> Result<Certification> {
    let d = match check_quasihomogeneous(f)? {
        Ok(d) => d,
        Err(w) => return Ok(Certification::Witness(w)),
    };
    let canon = match canonical_form(f, d) {
        Ok(c) => c,
        Err(w) => return Ok(Certification::Witness(w)),
    };
    let cap = depth_cap.unwrap_or_else(|| default_depth_cap(f.weights()));
    let (fnorm, s) = f.normalize_to_zp();
    let n = f.dim();
    let ctx = f.ctx();
    let mut orthants: Vec<Orthant> = Orthant::all(n).into_iter().filter(|j| !j.is_all_positive()).collect();
    // V_n first: it alone decides whether f has a nonzero root.
    orthants.insert(0, Orthant::new(vec![1; n])?);
    let mut bounds = Vec::new();
    let mut depth = 0;
    for j in &orthants {
        let cover = fundamental_cover(j, f.weights(), ctx);
        match certify_nonvanishing(&fnorm, &cover, cap, cell_budget)? {
            Nonvanishing::Certified(c) => {
                depth = depth.max(c.depth);
                bounds.push(DomainBound {
                    orthant: j.clone(),
                    m: c.m,
                    cells: c.cells.len(),
                    extremal: c.extremal.clone(),
                });
            }
            Nonvanishing::Root(x) => return Ok(Certification::Witness(NonQeWitness::Root(x))),
            Nonvanishing::RootClass(b) => return Ok(Certification::Witness(NonQeWitness::RootClass(b))),
            Nonvanishing::Inconclusive { depth, ball } => {
                return Ok(Certification::Witness(NonQeWitness::Inconclusive { depth, ball }))
            }
        }
    }
    // keep V_n last
    let v = bounds.remove(0);
    bounds.push(v);
    Ok(Certification::Certified(Box::new(QeCertificate {
        poly: f.clone(),
        degree: d,
        pure_powers: canon.pure_powers,
        normalization: s,
        domain_bounds: bounds,
        refinement_depth: depth,
    })))
}

/// True when `tau ∈ (Q_p^×)^m`: `m | ord(tau)` and the unit part is an
/// `m`-th power modulo `p^{2 v_p(m) + 1}`.
pub fn is_mth_power(tau: &BigRational, m: u32, ctx: PrimeCtx) -> bool {
    assert!(m >= 1);
    let v = match ord_rat(tau, ctx.p()) {
        Valuation::Finite(v) => v,
        Valuation::Infinity => return false,
    };
    if v.rem_euclid(m as i64) != 0 {
        return false;
    }
    let unit = tau * ctx.pow(-v);
    let vm = crate::padic::ord_int(&BigInt::from(m), ctx.p()) as u32;
    let k = 2 * vm + 1;
    let modulus = ctx.pow_int(k);
    let target = residue(&unit, ctx, k).expect("unit is p-integral");
    let mut x = BigInt::one();
    while x < modulus {
        if !x.is_multiple_of(&ctx.big()) && x.modpow(&BigInt::from(m), &modulus) == target {
            return true;
        }
        x += 1;
    }
    false
}

/// `f^a - τ ξ_{n+1}^d`, quasielliptic of degree `d·a` for weights `(w, a)`
/// when `gcd(a, d) > 1` and `τ` is not a `gcd(a, d)`-th power.
pub fn quasielliptic_extension(f: &WeightedPoly, d: u64, a: u32, tau: &BigRational) -> Result<WeightedPoly> {
    let g = (a as u64).gcd(&d);
    if g <= 1 {
        return Err(Error::Precondition(format!("gcd({a}, {d}) must exceed 1")));
    }
    if tau.is_zero() || is_mth_power(tau, g as u32, f.ctx()) {
        return Err(Error::Precondition(format!(
            "{} must not be a {g}-th power in Q_{}",
            format_rational(tau),
            f.ctx().p()
        )));
    }
    let lifted = f.with_extra_variable(a)?;
    let powered = lifted.pow(a);
    let n = f.dim();
    let mut k = vec![0u32; n + 1];
    k[n] = d as u32;
    let tail = WeightedPoly::new(lifted.weights().to_vec(), f.ctx(), [(k, -tau.clone())])?;
    Ok(powered.add(&tail))
}

/// Rational `a/b ≡ r (mod m)` with `|a|, |b| ≤ sqrt(m/2)`, if one exists.
pub(crate) fn rational_reconstruction(r: &BigInt, m: &BigInt) -> Option<BigRational> {
    let bound = (m / BigInt::from(2)).sqrt();
    let (mut r0, mut r1) = (m.clone(), r.mod_floor(m));
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while r1 > bound {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        let t2 = &t0 - &q * &t1;
        r0 = std::mem::replace(&mut r1, r2);
        t0 = std::mem::replace(&mut t1, t2);
    }
    if t1.is_zero() || t1.abs() > bound || !r1.gcd(&t1).is_one() {
        return None;
    }
    Some(BigRational::new(r1, t1))
}

/// Coordinate `i` along which Hensel's lemma places a root of `f` inside
/// `ball`: `ord f(c) > 2 ord ∂_i f(c)` and `ord f(c) - ord ∂_i f(c) ≥ level`.
/// `f` must have `Z_p` coefficients and the ball must lie in `Z_p^n`.
pub(crate) fn hensel_coordinate(f: &WeightedPoly, partials: &[WeightedPoly], ball: &Ball) -> Option<usize> {
    let p = f.ctx().p();
    let fc = match ord_rat(&f.eval(ball.center()), p) {
        Valuation::Finite(v) => v,
        Valuation::Infinity => return None,
    };
    for (i, df) in partials.iter().enumerate() {
        if let Valuation::Finite(dv) = ord_rat(&df.eval(ball.center()), p) {
            if fc > 2 * dv && fc - dv >= ball.level() {
                return Some(i);
            }
        }
    }
    None
}

fn symmetric_rep(c: &BigRational, ctx: PrimeCtx, level: i64) -> Option<BigRational> {
    if level <= 0 {
        return None;
    }
    let r = residue(c, ctx, level as u32)?;
    let m = ctx.pow_int(level as u32);
    let half = &m / BigInt::from(2);
    let s = if r > half { r - m } else { r };
    Some(BigRational::from_integer(s))
}

/// Tries to turn a Hensel ball into an exact rational root: for small
/// representatives of the other coordinates, Newton-lift coordinate `i`
/// modulo `p^N`, reconstruct a rational and check `f = 0` exactly.
pub(crate) fn exact_root_in_ball(f: &WeightedPoly, ball: &Ball, i: usize) -> Option<PadicVector> {
    let ctx = f.ctx();
    let n = f.dim();
    let center = ball.center();
    let mut choices: Vec<Vec<BigRational>> = Vec::with_capacity(n);
    for (k, c) in center.coords().iter().enumerate() {
        let mut opts = vec![c.clone()];
        if k != i {
            if let Some(s) = symmetric_rep(c, ctx, ball.level()) {
                if s != *c {
                    opts.insert(0, s);
                }
            }
        }
        choices.push(opts);
    }
    let combos: usize = choices.iter().map(|c| c.len()).product();
    let precision: u32 = 64;
    let modulus = ctx.pow_int(precision);
    let modr = BigRational::from_integer(modulus.clone());
    for idx in 0..combos {
        let mut rem = idx;
        let mut x: Vec<BigRational> = choices
            .iter()
            .map(|opts| {
                let v = opts[rem % opts.len()].clone();
                rem /= opts.len();
                v
            })
            .collect();
        let start = x.clone();
        // Newton iteration in coordinate i, reduced mod p^N each step
        let df = f.derivative(i);
        let mut ok = true;
        for _ in 0..8 {
            let fx = f.eval_coords(&x);
            if fx.is_zero() {
                break;
            }
            let dfx = df.eval_coords(&x);
            if dfx.is_zero() {
                ok = false;
                break;
            }
            let next = &x[i] - fx / dfx;
            match residue(&next, ctx, precision) {
                Some(r) => x[i] = BigRational::from_integer(r),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let candidates: Vec<BigRational> = {
            let mut v = vec![x[i].clone()];
            if let Some(r) = residue(&x[i], ctx, precision) {
                if let Some(q) = rational_reconstruction(&r, &modulus) {
                    v.insert(0, q);
                }
                v.push(BigRational::from_integer(r) - &modr);
            }
            v
        };
        for cand in candidates {
            let mut y = start.clone();
            y[i] = cand;
            let pv = PadicVector::new(y, ctx);
            if !pv.is_zero() && f.eval(&pv).is_zero() && ball.contains(&pv) {
                return Some(pv);
            }
        }
    }
    None
}
