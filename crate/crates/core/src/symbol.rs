//! Ball refinement for `|f|_p`, symbol tables, the weight `Ξ` and the
//! certified constants `A₀`, `A₁`, `M`, `R`, `M₀`.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::padic::{format_rational, ord_rat, AbsValue, Ball, PadicVector, PrimeCtx, Valuation};
use crate::poly::{min_nonconstant_ord, MultiIndex, WeightedPoly};
use crate::qpoly::{
    domain_cover, exact_root_in_ball, hensel_coordinate, QeCertificate,
};

/// `(d, w, p)`: everything needed to evaluate `Ξ(ξ) = Σ |ξ_i|^{d/w_i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolMeta {
    pub d: u64,
    pub weights: Vec<u32>,
    pub ctx: PrimeCtx,
}

impl SymbolMeta {
    pub fn new(d: u64, weights: Vec<u32>, ctx: PrimeCtx) -> Result<Self> {
        if weights.is_empty() || weights.contains(&0) {
            return Err(Error::InvalidWeights("weights must be positive".into()));
        }
        if let Some(w) = weights.iter().find(|&&w| !d.is_multiple_of(w as u64)) {
            return Err(Error::InvalidWeights(format!("{d}/{w} is not an integer")));
        }
        Ok(SymbolMeta { d, weights, ctx })
    }

    pub fn from_certificate(cert: &QeCertificate) -> Self {
        SymbolMeta { d: cert.degree, weights: cert.weights().to_vec(), ctx: cert.ctx() }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn exponents(&self) -> Vec<u64> {
        self.weights.iter().map(|&w| self.d / w as u64).collect()
    }

    pub fn max_weight(&self) -> u32 {
        *self.weights.iter().max().expect("nonempty")
    }

    pub fn min_weight(&self) -> u32 {
        *self.weights.iter().min().expect("nonempty")
    }

    /// Exact `Ξ(ξ)`.
    pub fn xi(&self, x: &PadicVector) -> BigRational {
        x.coords()
            .iter()
            .zip(self.exponents())
            .map(|(c, a)| match ord_rat(c, self.ctx.p()) {
                Valuation::Finite(v) => self.ctx.pow(-v * a as i64),
                Valuation::Infinity => BigRational::zero(),
            })
            .fold(BigRational::zero(), |acc, t| acc + t)
    }

    /// `Ξ` from coordinate valuations (`None` for a zero coordinate).
    pub fn xi_from_ords(&self, ords: &[Option<i64>]) -> f64 {
        ords.iter()
            .zip(self.exponents())
            .map(|(o, a)| o.map_or(0.0, |v| self.ctx.pow_f64(-(v as f64) * a as f64)))
            .sum()
    }

    /// Lower bound for `Ξ` on the shell `‖ξ‖_p = p^j`.
    pub fn shell_xi_lower(&self, j: i64) -> f64 {
        let w = if j >= 0 { self.max_weight() } else { self.min_weight() };
        self.ctx.pow_f64(j as f64 * self.d as f64 / w as f64)
    }
}

/// `Ξ(ξ)` for degree `d` and weights `w`.
pub fn xi(d: u64, weights: &[u32], x: &PadicVector) -> Result<BigRational> {
    Ok(SymbolMeta::new(d, weights.to_vec(), x.ctx())?.xi(x))
}

/// Outcome of the constancy test on a ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constancy {
    /// `|σ| ≡ p^{-e}` on the ball.
    Constant(i64),
    /// Not certified constant; `|σ| ≤ p^{-sup_ord}` on the ball.
    MustSubdivide { sup_ord: Valuation },
}

/// Expands `g(η) = f(c + p^m η) - f(c)`; with `μ` its minimal coefficient
/// valuation, `|f| ≡ |f(c)|` on the ball whenever `ord f(c) < μ`.
pub fn constancy_radius(f: &WeightedPoly, ball: &Ball) -> Constancy {
    let ctx = f.ctx();
    let center = ball.center().coords();
    let v = ord_rat(&f.eval_coords(center), ctx.p());
    let expansion = f.shift_expand(center, &ctx.pow(ball.level()));
    let mu = min_nonconstant_ord(&expansion, ctx.p());
    match v {
        Valuation::Finite(e) if v < mu => Constancy::Constant(e),
        _ => Constancy::MustSubdivide { sup_ord: v.min(mu) },
    }
}

/// A function of `ξ` whose absolute value is locally constant away from its
/// zero set and can be certified ball by ball.
pub trait LocalSymbol: Sync + Send {
    fn dim(&self) -> usize;
    fn ctx(&self) -> PrimeCtx;
    fn constancy(&self, ball: &Ball) -> Constancy;
    /// `ord` of the symbol at a point, so `|σ(x)| = p^{-order}`.
    fn order_at(&self, x: &PadicVector) -> Valuation;
}

impl LocalSymbol for WeightedPoly {
    fn dim(&self) -> usize {
        WeightedPoly::dim(self)
    }
    fn ctx(&self) -> PrimeCtx {
        WeightedPoly::ctx(self)
    }
    fn constancy(&self, ball: &Ball) -> Constancy {
        constancy_radius(self, ball)
    }
    fn order_at(&self, x: &PadicVector) -> Valuation {
        ord_rat(&self.eval(x), WeightedPoly::ctx(self).p())
    }
}

/// The isotropic symbol `‖ξ‖_p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormSymbol {
    pub n: usize,
    pub ctx: PrimeCtx,
}

impl LocalSymbol for NormSymbol {
    fn dim(&self) -> usize {
        self.n
    }
    fn ctx(&self) -> PrimeCtx {
        self.ctx
    }
    fn constancy(&self, ball: &Ball) -> Constancy {
        if ball.contains_origin() {
            Constancy::MustSubdivide { sup_ord: Valuation::Finite(ball.level()) }
        } else {
            Constancy::Constant(ball.center().norm().ord().expect("nonzero center"))
        }
    }
    fn order_at(&self, x: &PadicVector) -> Valuation {
        x.norm().0
    }
}

/// Certified lower bound `|f| ≥ p^{-m}` on a domain, with its cells.
#[derive(Clone, Debug, PartialEq)]
pub struct NonvanishingCert {
    pub m: i64,
    pub cells: Vec<(Ball, i64)>,
    pub extremal: Ball,
    pub depth: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Nonvanishing {
    Certified(NonvanishingCert),
    Root(PadicVector),
    RootClass(Ball),
    Inconclusive { depth: i64, ball: Ball },
}

fn in_zp(ball: &Ball) -> bool {
    ball.level() >= 0
        && ball
            .center()
            .coords()
            .iter()
            .all(|c| ord_rat(c, ball.ctx().p()) >= Valuation::Finite(0))
}

/// Breadth-first refinement of `domain` until `|f|` is constant on every cell.
///
/// Balls with an exact zero at the center, or a Hensel-liftable root, end
/// the search with a root witness; balls still undecided at absolute level
/// `depth_cap` make the result inconclusive.
pub fn certify_nonvanishing(
    f: &WeightedPoly,
    domain: &[Ball],
    depth_cap: i64,
    cell_budget: usize,
) -> Result<Nonvanishing> {
    let (fnorm, _) = f.normalize_to_zp();
    let partials: Vec<WeightedPoly> = (0..f.dim()).map(|i| fnorm.derivative(i)).collect();
    let mut queue: VecDeque<Ball> = domain.iter().cloned().collect();
    let mut cells: Vec<(Ball, i64)> = Vec::new();
    let mut stuck: Option<Ball> = None;
    let mut root_class: Option<Ball> = None;
    let mut depth = domain.iter().map(|b| b.level()).max().unwrap_or(0);
    while let Some(b) = queue.pop_front() {
        if cells.len() + queue.len() > cell_budget {
            return Err(Error::CellBudget(cell_budget));
        }
        depth = depth.max(b.level());
        match constancy_radius(f, &b) {
            Constancy::Constant(e) => cells.push((b, e)),
            Constancy::MustSubdivide { .. } => {
                if f.eval(b.center()).is_zero() && !b.center().is_zero() {
                    return Ok(Nonvanishing::Root(b.center().clone()));
                }
                if in_zp(&b) {
                    if let Some(i) = hensel_coordinate(&fnorm, &partials, &b) {
                        if let Some(x) = exact_root_in_ball(f, &b, i) {
                            return Ok(Nonvanishing::Root(x));
                        }
                        // keep scanning the frontier for a rational root
                        if root_class.is_none() {
                            root_class = Some(b);
                        }
                        continue;
                    }
                }
                if root_class.is_some() {
                    continue;
                }
                if b.level() >= depth_cap {
                    if stuck.is_none() {
                        stuck = Some(b);
                    }
                } else {
                    queue.extend(b.subdivide());
                }
            }
        }
    }
    if let Some(ball) = root_class {
        return Ok(Nonvanishing::RootClass(ball));
    }
    if let Some(ball) = stuck {
        return Ok(Nonvanishing::Inconclusive { depth: depth_cap, ball });
    }
    let (extremal, m) = cells
        .iter()
        .max_by_key(|(_, e)| *e)
        .map(|(b, e)| (b.clone(), *e))
        .ok_or_else(|| Error::Invalid("empty domain".into()))?;
    Ok(Nonvanishing::Certified(NonvanishingCert { m, cells, extremal, depth }))
}

/// Region of `ξ`-space covered by a symbol table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// `{‖ξ‖_p ≤ p^radius}`.
    Ball { radius: i64 },
    /// `{p^lo ≤ ‖ξ‖_p ≤ p^hi}`.
    Annulus { lo: i64, hi: i64 },
}

impl Region {
    pub fn contains(&self, x: &PadicVector) -> bool {
        let o = x.norm().0;
        match *self {
            Region::Ball { radius } => o >= Valuation::Finite(-radius),
            Region::Annulus { lo, hi } => o >= Valuation::Finite(-hi) && o <= Valuation::Finite(-lo),
        }
    }

    /// Disjoint balls whose union is the region.
    pub fn cover(&self, n: usize, ctx: PrimeCtx) -> Vec<Ball> {
        match *self {
            Region::Ball { radius } => vec![Ball::around_zero(n, ctx, radius)],
            Region::Annulus { lo, hi } => {
                let mut out = Vec::new();
                for r in (lo..=hi).rev() {
                    out.extend(Ball::around_zero(n, ctx, r).subdivide().into_iter().skip(1));
                }
                out
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellValue {
    /// `|σ| ≡ p^{-e}`.
    Exact(i64),
    /// Below the value floor: `|σ| ≤ p^{-sup_ord}`.
    Unresolved { sup_ord: Valuation },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolCell {
    pub ball: Ball,
    pub value: CellValue,
}

/// Partition of a region into balls on which `|σ|` is certified constant.
#[derive(Clone, Debug)]
pub struct SymbolTable {
    pub region: Region,
    pub cells: Vec<SymbolCell>,
}

impl SymbolTable {
    pub fn max_level(&self) -> i64 {
        self.cells.iter().map(|c| c.ball.level()).max().unwrap_or(0)
    }

    pub fn unresolved(&self) -> impl Iterator<Item = &SymbolCell> {
        self.cells.iter().filter(|c| matches!(c.value, CellValue::Unresolved { .. }))
    }

    pub fn find(&self, x: &PadicVector) -> Option<&SymbolCell> {
        self.cells.iter().find(|c| c.ball.contains(x))
    }

    pub fn to_json(&self) -> Value {
        json!(self
            .cells
            .iter()
            .map(|c| {
                let (kind, e) = match c.value {
                    CellValue::Exact(e) => ("exact", json!(e)),
                    CellValue::Unresolved { sup_ord } => ("unresolved", json!(sup_ord.to_string())),
                };
                json!({
                    "center": c.ball.center().to_strings(),
                    "level": c.ball.level(),
                    "kind": kind,
                    "e": e
                })
            })
            .collect::<Vec<_>>())
    }
}

/// Levels a single ball may be refined past its starting level.
const MAX_EXTRA_LEVELS: i64 = 96;

fn refine_ball<S: LocalSymbol + ?Sized>(
    sym: &S,
    start: Ball,
    floor_ord: Option<i64>,
    counter: &AtomicUsize,
    budget: usize,
) -> Result<Vec<SymbolCell>> {
    let limit = start.level() + MAX_EXTRA_LEVELS;
    let mut out = Vec::new();
    let mut stack = vec![start];
    while let Some(b) = stack.pop() {
        match sym.constancy(&b) {
            Constancy::Constant(e) => {
                out.push(SymbolCell { ball: b, value: CellValue::Exact(e) });
                if counter.fetch_add(1, Ordering::Relaxed) + 1 > budget {
                    return Err(Error::CellBudget(budget));
                }
            }
            Constancy::MustSubdivide { sup_ord } => {
                if floor_ord.is_some_and(|f| sup_ord >= Valuation::Finite(f)) {
                    out.push(SymbolCell { ball: b, value: CellValue::Unresolved { sup_ord } });
                    if counter.fetch_add(1, Ordering::Relaxed) + 1 > budget {
                        return Err(Error::CellBudget(budget));
                    }
                } else if b.level() >= limit {
                    return Err(Error::Precondition(format!(
                        "symbol is not locally constant near {}; does it vanish in the region?",
                        b.center()
                    )));
                } else {
                    let mut ch = b.subdivide();
                    ch.reverse();
                    stack.extend(ch);
                }
            }
        }
    }
    Ok(out)
}

/// Refines every ball of `cover` into certified cells. A cell whose sup bound
/// is at most `p^{-floor_ord}` may be left unresolved.
pub fn build_table_on<S: LocalSymbol + ?Sized>(
    sym: &S,
    cover: Vec<Ball>,
    region: Region,
    floor_ord: Option<i64>,
    budget: usize,
) -> Result<SymbolTable> {
    let counter = AtomicUsize::new(0);
    let parts: Result<Vec<Vec<SymbolCell>>> = cover
        .into_par_iter()
        .map(|b| refine_ball(sym, b, floor_ord, &counter, budget))
        .collect();
    Ok(SymbolTable { region, cells: parts?.into_iter().flatten().collect() })
}

/// Symbol table of `sym` over `region`.
pub fn build_symbol_table<S: LocalSymbol + ?Sized>(
    sym: &S,
    region: Region,
    floor_ord: Option<i64>,
    budget: usize,
) -> Result<SymbolTable> {
    let cover = region.cover(sym.dim(), sym.ctx());
    build_table_on(sym, cover, region, floor_ord, budget)
}

/// Certified constants of a quasielliptic symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantsReport {
    pub a0: BigRational,
    pub a1: BigRational,
    /// A point with `|f| = A₀ Ξ`.
    pub a0_point: PadicVector,
    /// A point with `|f| = A₁ Ξ`.
    pub a1_point: PadicVector,
    /// Lower-bound exponent for the normalized restrictions `f_j`.
    pub m: i64,
    /// Extra refinement beyond `M + 1` needed by the constancy cells.
    pub r: i64,
    /// Largest partial weighted degree `a` of the cross terms, if any.
    pub sub_degree: Option<u64>,
    pub cells: usize,
}

impl ConstantsReport {
    pub fn to_json(&self) -> Value {
        json!({
            "A0": format_rational(&self.a0),
            "A1": format_rational(&self.a1),
            "A0_point": self.a0_point.to_strings(),
            "A1_point": self.a1_point.to_strings(),
            "M": self.m,
            "R": self.r,
            "a": self.sub_degree,
            "cells": self.cells,
        })
    }

    /// Checks `A₀ Ξ(ξ) ≤ |f(ξ)| ≤ A₁ Ξ(ξ)` exactly at one point.
    pub fn check_point(&self, f: &WeightedPoly, meta: &SymbolMeta, x: &PadicVector) -> bool {
        let ctx = f.ctx();
        let fx = f.abs_at(x).to_rational(ctx);
        let xi = meta.xi(x);
        &self.a0 * &xi <= fx && fx <= &self.a1 * &xi
    }
}

fn pinned_xi(ball: &Ball, meta: &SymbolMeta) -> (BigRational, BigRational, PadicVector, PadicVector) {
    let ctx = meta.ctx;
    let exps = meta.exponents();
    let mut inf = BigRational::zero();
    let mut sup = BigRational::zero();
    let mut at_inf = Vec::with_capacity(meta.dim());
    let mut at_sup = Vec::with_capacity(meta.dim());
    for (i, c) in ball.center().coords().iter().enumerate() {
        if ball.coordinate_touches_zero(i) {
            // free coordinate: |ξ_i| ranges over {0} ∪ {p^{-k} : k ≥ level}
            sup += ctx.pow(-ball.level() * exps[i] as i64);
            at_inf.push(BigRational::zero());
            at_sup.push(ctx.pow(ball.level()));
        } else {
            let v = ord_rat(c, ctx.p()).finite().expect("nonzero");
            let t = ctx.pow(-v * exps[i] as i64);
            inf += &t;
            sup += t;
            at_inf.push(c.clone());
            at_sup.push(c.clone());
        }
    }
    (inf, sup, PadicVector::new(at_inf, ctx), PadicVector::new(at_sup, ctx))
}

fn restriction_bound(fnorm: &WeightedPoly, active: &[bool], depth_cap: i64, budget: usize) -> Result<i64> {
    let g = fnorm.restrict_to(active);
    let cover = domain_cover(fnorm.weights(), active, fnorm.ctx());
    match certify_nonvanishing(&g, &cover, depth_cap, budget)? {
        Nonvanishing::Certified(c) => Ok(c.m),
        other => Err(Error::NotCertified(format!("restriction has a zero: {other:?}"))),
    }
}

/// `A₀ = inf |f|/Ξ`, `A₁ = sup |f|/Ξ` over `Q_p^n ∖ {0}`, together with `M`, `R`
/// and the cross-term degree `a`.
///
/// `|f|/Ξ` is invariant under `ξ_i ↦ p^{l w_i} ξ_i`, so the extrema over the
/// whole space are the extrema over `V_n`, taken exactly on its constancy
/// cells (`Ξ` ranges over an explicit interval on each cell, with both ends
/// attained).
pub fn estimate_constants(cert: &QeCertificate, depth_cap: Option<i64>, budget: usize) -> Result<ConstantsReport> {
    let f = cert.poly();
    let meta = SymbolMeta::from_certificate(cert);
    let ctx = f.ctx();
    let n = f.dim();
    let cap = depth_cap.unwrap_or_else(|| crate::qpoly::default_depth_cap(f.weights()));
    let (fnorm, s) = f.normalize_to_zp();
    let cover = domain_cover(f.weights(), &vec![true; n], ctx);
    let cert_v = match certify_nonvanishing(&fnorm, &cover, cap, budget)? {
        Nonvanishing::Certified(c) => c,
        other => return Err(Error::NotCertified(format!("{other:?}"))),
    };
    let mut best: Option<(BigRational, PadicVector)> = None;
    let mut worst: Option<(BigRational, PadicVector)> = None;
    for (ball, e_norm) in &cert_v.cells {
        let fv = ctx.pow(-(e_norm - s));
        let (inf, sup, p_inf, p_sup) = pinned_xi(ball, &meta);
        let lo = &fv / &sup;
        let hi = &fv / &inf;
        if best.as_ref().is_none_or(|(b, _)| lo < *b) {
            best = Some((lo, p_sup));
        }
        if worst.as_ref().is_none_or(|(w, _)| hi > *w) {
            worst = Some((hi, p_inf));
        }
    }
    let (a0, a0_point) = best.expect("nonempty cells");
    let (a1, a1_point) = worst.expect("nonempty cells");

    let mut m = cert_v.m;
    let mut sub_degree: Option<u64> = None;
    for mask in 1..(1usize << n) - 1 {
        let active: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        m = m.max(restriction_bound(&fnorm, &active, cap, budget)?);
        for k in f.terms().keys() {
            if k.iter().zip(&active).any(|(&e, &a)| !a && e > 0) {
                let partial: u64 = k
                    .iter()
                    .zip(f.weights())
                    .zip(&active)
                    .filter(|(_, &a)| a)
                    .map(|((&e, &w), _)| e as u64 * w as u64)
                    .sum();
                sub_degree = Some(sub_degree.map_or(partial, |a| a.max(partial)));
            }
        }
    }
    let r = (cert_v.depth - m - 1).max(0);
    Ok(ConstantsReport { a0, a1, a0_point, a1_point, m, r, sub_degree, cells: cert_v.cells.len() })
}

/// A bounded, locally constant coefficient `c(x)`: the value of the smallest
/// patch ball containing `x`, or `tail` outside every patch.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffFunction {
    pub tail: BigRational,
    pub patches: Vec<(Ball, BigRational)>,
}

impl CoeffFunction {
    pub fn constant(c: BigRational) -> Self {
        CoeffFunction { tail: c, patches: Vec::new() }
    }

    /// Patches must be pairwise nested or disjoint and distinct.
    pub fn validate(&self) -> Result<()> {
        for (i, (a, _)) in self.patches.iter().enumerate() {
            for (b, _) in &self.patches[i + 1..] {
                if a == b {
                    return Err(Error::Invalid(format!("duplicate patch {a}")));
                }
            }
        }
        Ok(())
    }

    pub fn value_at(&self, x: &PadicVector) -> &BigRational {
        self.patches
            .iter()
            .filter(|(b, _)| b.contains(x))
            .max_by_key(|(b, _)| b.level())
            .map(|(_, v)| v)
            .unwrap_or(&self.tail)
    }

    /// Value on a ball that lies inside one atom of the patch structure.
    pub fn value_on(&self, ball: Option<&Ball>) -> &BigRational {
        match ball {
            None => &self.tail,
            Some(b) => self
                .patches
                .iter()
                .filter(|(pb, _)| pb.contains_ball(b))
                .max_by_key(|(pb, _)| pb.level())
                .map(|(_, v)| v)
                .unwrap_or(&self.tail),
        }
    }

    /// `max |c(x)|_p` over the tail and all patch values.
    pub fn sup_norm(&self, ctx: PrimeCtx) -> AbsValue {
        let o = std::iter::once(&self.tail)
            .chain(self.patches.iter().map(|(_, v)| v))
            .map(|v| ord_rat(v, ctx.p()))
            .min()
            .unwrap_or(Valuation::Infinity);
        AbsValue(o)
    }

    pub fn is_zero(&self) -> bool {
        self.tail.is_zero() && self.patches.iter().all(|(_, v)| v.is_zero())
    }
}

/// A lower-order term `c_k(x) ξ^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerTerm {
    pub k: MultiIndex,
    pub coeff: CoeffFunction,
}

/// One atom of the patch structure in `x`-space: `ball ∖ ∪ holes`, with
/// `ball = None` meaning the whole space.
#[derive(Clone, Debug, PartialEq)]
pub struct XRegion {
    pub ball: Option<Ball>,
    pub holes: Vec<Ball>,
}

impl XRegion {
    pub fn contains(&self, x: &PadicVector) -> bool {
        self.ball.as_ref().is_none_or(|b| b.contains(x)) && !self.holes.iter().any(|h| h.contains(x))
    }

    pub fn to_json(&self) -> Value {
        let ball = |b: &Ball| json!({"center": b.center().to_strings(), "level": b.level()});
        json!({
            "ball": self.ball.as_ref().map(ball),
            "holes": self.holes.iter().map(ball).collect::<Vec<_>>(),
        })
    }
}

fn maximal_inside(balls: &[Ball], outer: Option<&Ball>) -> Vec<Ball> {
    let inside: Vec<&Ball> = balls
        .iter()
        .filter(|b| outer.is_none_or(|o| o.contains_ball(b) && o.level() < b.level()))
        .collect();
    inside
        .iter()
        .filter(|b| !inside.iter().any(|c| c.level() < b.level() && c.contains_ball(b)))
        .map(|b| (*b).clone())
        .collect()
}

/// Atoms of the patch structure of all lower terms, each with the coefficient
/// values `c_k` take on it (in the order of `lower`). Empty atoms are dropped.
pub fn x_atoms(lower: &[LowerTerm]) -> Vec<(XRegion, Vec<BigRational>)> {
    let mut balls: Vec<Ball> = Vec::new();
    for t in lower {
        for (b, _) in &t.coeff.patches {
            if !balls.iter().any(|c| c == b) {
                balls.push(b.clone());
            }
        }
    }
    let mut out = Vec::new();
    let tail_holes = maximal_inside(&balls, None);
    out.push((
        XRegion { ball: None, holes: tail_holes },
        lower.iter().map(|t| t.coeff.tail.clone()).collect(),
    ));
    for b in &balls {
        let holes = maximal_inside(&balls, Some(b));
        let covered: BigRational = holes.iter().map(|h| h.measure()).fold(BigRational::zero(), |a, m| a + m);
        if covered >= b.measure() {
            continue;
        }
        let values = lower.iter().map(|t| t.coeff.value_on(Some(b)).clone()).collect();
        out.push((XRegion { ball: Some(b.clone()), holes }, values));
    }
    out
}

/// Result of the semi-quasielliptic radius computation.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusReport {
    pub m0: i64,
    pub m: i64,
    pub sub_degree: Option<u64>,
    /// The maximum of the candidate ratios, when there are lower terms.
    pub bound: Option<BigRational>,
    /// Number of `(x-atom, ξ-cell)` pairs checked directly.
    pub verified_cells: usize,
}

impl RadiusReport {
    pub fn to_json(&self) -> Value {
        json!({
            "M0": self.m0,
            "M": self.m,
            "a": self.sub_degree,
            "bound": self.bound.as_ref().map(format_rational),
            "verified_cells": self.verified_cells,
        })
    }
}

fn floor_rat(x: &BigRational) -> BigInt {
    x.numer().div_floor(x.denom())
}

/// Sup of `|ξ^k|_p` over a ball, as an exponent (`|ξ^k| ≤ p^{-ord}`).
fn monomial_sup_ord(ball: &Ball, k: &[u32]) -> Valuation {
    let p = ball.ctx().p();
    let mut total = 0i64;
    for (i, (&e, c)) in k.iter().zip(ball.center().coords()).enumerate() {
        if e == 0 {
            continue;
        }
        let o = if ball.coordinate_touches_zero(i) {
            ball.level()
        } else {
            ord_rat(c, p).finite().expect("nonzero")
        };
        total += o * e as i64;
    }
    Valuation::Finite(total)
}

/// `M₀` for `F(ξ, x) = f(ξ) + Σ c_k(x) ξ^k`: the smallest admissible integer
/// above `(Σ w_i) · max({M/(d-a)} ∪ {(M + log_p ‖c_k‖)/(d - δ_k)})`, checked
/// directly on the shells `p^{M₀} ≤ ‖ξ‖ ≤ p^{M₀ + Σ w}` for every `x`-atom.
pub fn sq_radius_m0(
    cert: &QeCertificate,
    constants: &ConstantsReport,
    lower: &[LowerTerm],
    budget: usize,
) -> Result<RadiusReport> {
    let f = cert.poly();
    let ctx = f.ctx();
    let d = cert.degree;
    for t in lower {
        if t.k.len() != f.dim() {
            return Err(Error::DimensionMismatch { expected: f.dim(), got: t.k.len() });
        }
        t.coeff.validate()?;
        let delta = f.weighted_degree(&t.k);
        if delta >= d {
            return Err(Error::NotSemiQuasielliptic { term: t.k.clone(), degree: delta, d });
        }
    }
    let s = cert.normalization;
    let m = constants.m;
    let active: Vec<&LowerTerm> = lower.iter().filter(|t| !t.coeff.is_zero()).collect();
    let sum_w: i64 = f.weights().iter().map(|&w| w as i64).sum();
    if active.is_empty() {
        return Ok(RadiusReport { m0: 0, m, sub_degree: constants.sub_degree, bound: None, verified_cells: 0 });
    }
    let mut cands: Vec<BigRational> = Vec::new();
    let mi = BigRational::from_integer(BigInt::from(m));
    if let Some(a) = constants.sub_degree {
        cands.push(&mi / BigRational::from_integer(BigInt::from(d - a)));
    }
    for t in &active {
        // log_p of the sup-norm of p^s c_k
        let log_norm = -(t.coeff.sup_norm(ctx).ord().expect("nonzero")) - s;
        let delta = f.weighted_degree(&t.k);
        cands.push(BigRational::from_integer(BigInt::from(m + log_norm)) / BigRational::from_integer(BigInt::from(d - delta)));
    }
    let bound = cands.into_iter().max().expect("nonempty");
    let raw = floor_rat(&(&bound * BigRational::from_integer(BigInt::from(sum_w)))) + BigInt::one();
    let m0 = raw.to_i64().ok_or_else(|| Error::Invalid("M0 overflow".into()))?.max(1);

    // direct check on the shell band, termwise domination
    let region = Region::Annulus { lo: m0, hi: m0 + sum_w };
    let table = build_symbol_table(f, region, None, budget)?;
    let atoms = x_atoms(lower);
    let mut checked = 0usize;
    for (atom, values) in &atoms {
        let terms: Vec<(&MultiIndex, Valuation)> = lower
            .iter()
            .zip(values)
            .filter(|(_, v)| !v.is_zero())
            .map(|(t, v)| (&t.k, ord_rat(v, ctx.p())))
            .collect();
        for cell in &table.cells {
            let e = match cell.value {
                CellValue::Exact(e) => e,
                CellValue::Unresolved { .. } => unreachable!("no floor"),
            };
            let mut stack = vec![cell.ball.clone()];
            while let Some(b) = stack.pop() {
                let dominated = terms.iter().all(|(k, cv)| {
                    let ord = match (*cv, monomial_sup_ord(&b, k)) {
                        (Valuation::Finite(a), Valuation::Finite(c)) => a + c,
                        _ => i64::MAX,
                    };
                    ord > e
                });
                if dominated {
                    checked += 1;
                    continue;
                }
                if b.level() > cell.ball.level() + 2 * sum_w + 8 {
                    return Err(Error::VerificationFailed(format!(
                        "|F| ≠ |f| not excluded near ξ = {} on x-region {}",
                        b.center(),
                        atom.to_json()
                    )));
                }
                stack.extend(b.subdivide());
            }
        }
    }
    Ok(RadiusReport { m0, m, sub_degree: constants.sub_degree, bound: Some(bound), verified_cells: checked })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qpoly::{certify_quasielliptic, DEFAULT_CELL_BUDGET};

    fn ctx(p: u64) -> PrimeCtx {
        PrimeCtx::new(p).unwrap()
    }
    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }
    fn poly(s: &str, w: &[u32], p: u64) -> WeightedPoly {
        WeightedPoly::parse(s, w.to_vec(), ctx(p)).unwrap()
    }
    fn cert(s: &str, w: &[u32], p: u64) -> QeCertificate {
        certify_quasielliptic(&poly(s, w, p), None, DEFAULT_CELL_BUDGET)
            .unwrap()
            .into_certificate()
            .unwrap()
    }

    #[test]
    fn xi_examples() {
        let c3 = ctx(3);
        assert_eq!(xi(2, &[1, 1], &PadicVector::from_ints(&[3, 1], c3)).unwrap(), q(1, 9) + q(1, 1));
        assert_eq!(xi(2, &[1, 1], &PadicVector::zero(2, c3)).unwrap(), q(0, 1));
        let x = PadicVector::from_fracs(&[(1, 9), (3, 1)], c3);
        assert_eq!(xi(6, &[2, 3], &x).unwrap(), q(729, 1) + q(1, 9));
        assert!(xi(3, &[2, 3], &x).is_err());
    }

    #[test]
    fn constancy_examples() {
        let f = poly("x1^2", &[1], 3);
        let b = Ball::new(PadicVector::from_ints(&[1], ctx(3)), 2);
        assert_eq!(constancy_radius(&f, &b), Constancy::Constant(0));
        let g = poly("x1", &[1], 3);
        let z = Ball::around_zero(1, ctx(3), -2);
        assert!(matches!(constancy_radius(&g, &z), Constancy::MustSubdivide { .. }));
        let h = poly("x1^2 + x2^2", &[1, 1], 3);
        let b2 = Ball::new(PadicVector::from_ints(&[1, 0], ctx(3)), 1);
        assert_eq!(constancy_radius(&h, &b2), Constancy::Constant(0));
    }

    #[test]
    fn nonvanishing_examples() {
        let c = ctx(3);
        let f = poly("x1^2 + x2^2", &[1, 1], 3);
        let v = domain_cover(&[1, 1], &[true, true], c);
        match certify_nonvanishing(&f, &v, 10, 10_000).unwrap() {
            Nonvanishing::Certified(cert) => {
                assert_eq!(cert.m, 0);
                // oracle: every residue class mod 9 with a unit coordinate has |f| = 1
                for a in 0..9i64 {
                    for b in 0..9i64 {
                        if a % 3 == 0 && b % 3 == 0 {
                            continue;
                        }
                        assert_eq!(ord_rat(&q(a * a + b * b, 1), 3), Valuation::Finite(0));
                    }
                }
            }
            other => panic!("{other:?}"),
        }
        let g = poly("x1", &[1], 2);
        let units = domain_cover(&[1], &[true], ctx(2));
        match certify_nonvanishing(&g, &units, 5, 100).unwrap() {
            Nonvanishing::Certified(c) => assert_eq!(c.m, 0),
            other => panic!("{other:?}"),
        }
        let f5 = poly("x1^2 + x2^2", &[1, 1], 5);
        let v5 = domain_cover(&[1, 1], &[true, true], ctx(5));
        match certify_nonvanishing(&f5, &v5, 10, 10_000).unwrap() {
            Nonvanishing::RootClass(b) => assert_eq!(b.center(), &PadicVector::from_ints(&[2, 1], ctx(5))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn symbol_table_examples() {
        let f = poly("x1", &[1], 2);
        let t = build_symbol_table(&f, Region::Annulus { lo: 0, hi: 0 }, None, 100).unwrap();
        assert_eq!(t.cells.len(), 1);
        assert_eq!(t.cells[0].value, CellValue::Exact(0));

        let g = poly("x1^2 + x2^2", &[1, 1], 3);
        let t = build_symbol_table(&g, Region::Annulus { lo: 0, hi: 0 }, None, 100).unwrap();
        assert!(t.cells.iter().all(|c| c.ball.level() == 1 && c.value == CellValue::Exact(0)));
        assert_eq!(t.cells.len(), 8);

        let h = poly("x1^2", &[1], 3);
        let t = build_symbol_table(&h, Region::Ball { radius: 0 }, Some(6), 100).unwrap();
        let unresolved: Vec<_> = t.unresolved().collect();
        assert_eq!(unresolved.len(), 1);
        assert_eq!(unresolved[0].ball.level(), 3);
        for shell in 0..3i64 {
            let x = PadicVector::new(vec![ctx(3).pow(shell)], ctx(3));
            assert_eq!(t.find(&x).unwrap().value, CellValue::Exact(2 * shell));
        }
    }

    #[test]
    fn constants_examples() {
        let r = estimate_constants(&cert("x1", &[1], 5), None, DEFAULT_CELL_BUDGET).unwrap();
        assert_eq!((r.a0.clone(), r.a1.clone()), (q(1, 1), q(1, 1)));

        let r = estimate_constants(&cert("x1^2 + x2^2", &[1, 1], 3), None, DEFAULT_CELL_BUDGET).unwrap();
        assert_eq!(r.a0, q(1, 2));
        assert_eq!(r.a1, q(1, 1));
        // oracle: |f| = max(|ξ1|², |ξ2|²) at p = 3; enumerate valuation pairs
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        // None stands for a zero coordinate
        let vals: Vec<Option<i32>> = std::iter::once(None).chain((-4..=4).map(Some)).collect();
        for a in &vals {
            for b in &vals {
                if a.is_none() && b.is_none() {
                    continue;
                }
                let abs2 = |v: &Option<i32>| v.map_or(0.0, |v| 3f64.powi(-2 * v));
                let (x, y) = (abs2(a), abs2(b));
                let ratio = x.max(y) / (x + y);
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
        }
        assert!((lo - 0.5).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constants_for_form_with_three() {
        let f = poly("x1^2 - 3*x2^2", &[1, 1], 7);
        let r = estimate_constants(&cert("x1^2 - 3*x2^2", &[1, 1], 7), None, DEFAULT_CELL_BUDGET).unwrap();
        // oracle: brute force over residues mod 7^2 on V, valuations pinned by the class
        let meta = SymbolMeta::new(2, vec![1, 1], ctx(7)).unwrap();
        let (mut lo, mut hi) = (q(1000, 1), q(0, 1));
        for a in 0..49i64 {
            for b in 0..49i64 {
                if a % 7 == 0 && b % 7 == 0 {
                    continue;
                }
                let x = PadicVector::from_ints(&[a, b], ctx(7));
                let ratio = f.abs_at(&x).to_rational(ctx(7)) / meta.xi(&x);
                lo = lo.min(ratio.clone());
                hi = hi.max(ratio);
            }
        }
        assert_eq!(r.a0, lo);
        assert_eq!(r.a1, hi);
        assert!(r.check_point(&f, &meta, &r.a0_point));
        assert_eq!(f.abs_at(&r.a0_point).to_rational(ctx(7)), &r.a0 * meta.xi(&r.a0_point));
    }

    #[test]
    fn radius_examples() {
        let c = cert("x1^2", &[1], 3);
        let k = estimate_constants(&c, None, DEFAULT_CELL_BUDGET).unwrap();
        let zero = sq_radius_m0(&c, &k, &[], 10_000).unwrap();
        assert_eq!(zero.m0, 0);
        for value in [q(1, 3), q(1, 1)] {
            let term = LowerTerm { k: vec![0], coeff: CoeffFunction::constant(value.clone()) };
            let r = sq_radius_m0(&c, &k, &[term], 10_000).unwrap();
            assert_eq!(r.m0, 1, "c = {value}");
            // oracle: |ξ² + c| = |ξ|² exactly when |ξ|² > |c|
            for l in 1..6i64 {
                let x = ctx(3).pow(-l);
                let fx = &x * &x;
                assert_eq!(ord_rat(&(&fx + &value), 3), ord_rat(&fx, 3));
            }
        }
        let bad = LowerTerm { k: vec![2], coeff: CoeffFunction::constant(q(1, 1)) };
        assert!(matches!(sq_radius_m0(&c, &k, &[bad], 100), Err(Error::NotSemiQuasielliptic { .. })));
    }

    #[test]
    fn atoms_of_nested_patches() {
        let c = ctx(3);
        let outer = Ball::around_zero(1, c, 0);
        let inner = Ball::new(PadicVector::from_ints(&[1], c), 1);
        let coeff = CoeffFunction {
            tail: q(0, 1),
            patches: vec![(outer.clone(), q(1, 1)), (inner.clone(), q(2, 1))],
        };
        let atoms = x_atoms(&[LowerTerm { k: vec![1], coeff: coeff.clone() }]);
        assert_eq!(atoms.len(), 3);
        for x in [(1, 1), (4, 1), (2, 1), (1, 3), (0, 1)] {
            let pt = PadicVector::from_fracs(&[x], c);
            let hits: Vec<_> = atoms.iter().filter(|(r, _)| r.contains(&pt)).collect();
            assert_eq!(hits.len(), 1, "{pt}");
            assert_eq!(&hits[0].1[0], coeff.value_at(&pt));
        }
    }
}
