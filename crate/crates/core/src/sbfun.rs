//! Bruhat-Schwartz functions: Fourier transform, convolution, products,
//! the Lizorkin-type spaces and the weighted Sobolev norms.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{format_rational, ord_rat, parse_rational, residue, Ball, PadicVector, PrimeCtx, Valuation};
use crate::symbol::SymbolMeta;

/// Largest number of dense coefficients a function may hold.
pub const MAX_ENTRIES: u64 = 1 << 22;

/// Coefficient tolerance used by membership tests.
pub const COEFF_TOL: f64 = 1e-12;

/// A locally constant, compactly supported function on `Q_p^n`.
///
/// Supported in `{‖x‖_p ≤ p^L}` and constant on cosets of `(p^m Z_p)^n`.
/// Coefficients are stored densely: index `k ∈ [0, p^K)^n` with `K = L + m`
/// stands for the coset of `k · p^{-L}`, first coordinate varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct SBFunction {
    ctx: PrimeCtx,
    n: usize,
    support_exp: i64,
    const_exp: i64,
    coeffs: Vec<Complex64>,
}

fn side(ctx: PrimeCtx, k: i64) -> Result<usize> {
    let e = u32::try_from(k).map_err(|_| Error::Invalid("negative level span".into()))?;
    ctx.pow_u64(e)
        .filter(|&v| v <= MAX_ENTRIES)
        .map(|v| v as usize)
        .ok_or(Error::TooLarge { exponent: e })
}

impl SBFunction {
    pub fn zero(ctx: PrimeCtx, n: usize, support_exp: i64, const_exp: i64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("dimension must be positive".into()));
        }
        if support_exp + const_exp < 0 {
            return Err(Error::Invalid(format!(
                "support exponent {support_exp} and constancy exponent {const_exp} leave no cosets"
            )));
        }
        let s = side(ctx, support_exp + const_exp)?;
        let total = (s as u64).checked_pow(n as u32).filter(|&t| t <= MAX_ENTRIES).ok_or(Error::TooLarge {
            exponent: ((support_exp + const_exp) * n as i64) as u32,
        })?;
        Ok(SBFunction { ctx, n, support_exp, const_exp, coeffs: vec![Complex64::zero(); total as usize] })
    }

    /// Builds a function from its values on coset representatives.
    pub fn from_fn<F>(ctx: PrimeCtx, n: usize, support_exp: i64, const_exp: i64, mut f: F) -> Result<Self>
    where
        F: FnMut(&PadicVector) -> Complex64,
    {
        let mut out = SBFunction::zero(ctx, n, support_exp, const_exp)?;
        for idx in 0..out.coeffs.len() {
            let rep = out.rep(idx);
            out.coeffs[idx] = f(&rep);
        }
        Ok(out)
    }

    /// `1_B` for a ball `B`, represented at levels `(L, m)` that contain it.
    pub fn indicator(ball: &Ball, support_exp: i64, const_exp: i64) -> Result<Self> {
        let mut out = SBFunction::zero(ball.ctx(), ball.dim(), support_exp, const_exp)?;
        if ball.level() > const_exp {
            return Err(Error::Invalid("ball is finer than the constancy level".into()));
        }
        for idx in out.ball_indices(ball) {
            out.coeffs[idx] = Complex64::new(1.0, 0.0);
        }
        Ok(out)
    }

    pub fn ctx(&self) -> PrimeCtx {
        self.ctx
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `L`: support inside `{‖x‖_p ≤ p^L}`.
    pub fn support_exp(&self) -> i64 {
        self.support_exp
    }

    /// `m`: constant on cosets of `(p^m Z_p)^n`.
    pub fn const_exp(&self) -> i64 {
        self.const_exp
    }

    pub fn span(&self) -> i64 {
        self.support_exp + self.const_exp
    }

    pub fn side(&self) -> usize {
        self.ctx.pow_u64(self.span() as u32).expect("checked on construction") as usize
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Integer coordinates `k` of a linear index.
    pub fn index_coords(&self, mut idx: usize) -> Vec<u64> {
        let s = self.side();
        (0..self.n)
            .map(|_| {
                let k = idx % s;
                idx /= s;
                k as u64
            })
            .collect()
    }

    pub fn linear_index(&self, k: &[u64]) -> usize {
        let s = self.side() as u64;
        k.iter().rev().fold(0u64, |acc, &ki| acc * s + ki) as usize
    }

    /// Coset representative `k · p^{-L}` of a linear index.
    pub fn rep(&self, idx: usize) -> PadicVector {
        let scale = self.ctx.pow(-self.support_exp);
        PadicVector::new(
            self.index_coords(idx)
                .into_iter()
                .map(|k| BigRational::from_integer(BigInt::from(k)) * &scale)
                .collect(),
            self.ctx,
        )
    }

    /// The coset of a linear index as a ball.
    pub fn coset(&self, idx: usize) -> Ball {
        Ball::new(self.rep(idx), self.const_exp)
    }

    /// Linear index of the coset containing `x`, or `None` outside the support.
    pub fn index_of(&self, x: &PadicVector) -> Option<usize> {
        let scale = self.ctx.pow(self.support_exp);
        let span = self.span() as u32;
        let mut k = Vec::with_capacity(self.n);
        for c in x.coords() {
            let r = residue(&(c * &scale), self.ctx, span)?;
            k.push(r.to_u64().expect("fits"));
        }
        Some(self.linear_index(&k))
    }

    pub fn evaluate(&self, x: &PadicVector) -> Complex64 {
        self.index_of(x).map_or(Complex64::zero(), |i| self.coeffs[i])
    }

    /// Linear indices of all cosets inside `ball` (whose level must be at most `m`).
    pub fn ball_indices(&self, ball: &Ball) -> Vec<usize> {
        assert!(ball.level() <= self.const_exp, "ball finer than cosets");
        let s = self.side() as u64;
        let scale = self.ctx.pow(self.support_exp);
        let mut axes: Vec<(u64, u64)> = Vec::with_capacity(self.n);
        for c in ball.center().coords() {
            let rel = ball.level() + self.support_exp;
            if rel <= 0 {
                if ord_rat(c, self.ctx.p()) >= Valuation::Finite(ball.level()) {
                    axes.push((0, 1));
                } else {
                    return Vec::new();
                }
            } else {
                match residue(&(c * &scale), self.ctx, rel as u32) {
                    Some(r) => axes.push((r.to_u64().expect("fits"), self.ctx.pow_u64(rel as u32).expect("fits"))),
                    None => return Vec::new(),
                }
            }
        }
        let mut out = vec![0usize];
        let mut stride = 1usize;
        for (base, step) in axes {
            let vals: Vec<u64> = (base..s).step_by(step as usize).collect();
            out = out
                .iter()
                .flat_map(|&o| vals.iter().map(move |&v| o + v as usize * stride))
                .collect();
            stride *= s as usize;
        }
        out
    }

    /// Indices of the nonzero coefficients.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.coeffs.iter().enumerate().filter(|(_, c)| **c != Complex64::zero()).map(|(i, _)| i)
    }

    /// Same function represented at finer levels `(L2, m2)`, `L2 ≥ L`, `m2 ≥ m`.
    pub fn refine(&self, support_exp: i64, const_exp: i64) -> Result<SBFunction> {
        if support_exp < self.support_exp || const_exp < self.const_exp {
            return Err(Error::Invalid("refinement cannot coarsen".into()));
        }
        if support_exp == self.support_exp && const_exp == self.const_exp {
            return Ok(self.clone());
        }
        let mut out = SBFunction::zero(self.ctx, self.n, support_exp, const_exp)?;
        let shift = self.ctx.pow_u64((support_exp - self.support_exp) as u32).expect("fits");
        let old_side = self.side() as u64;
        let new_side = out.side();
        let n = self.n;
        out.coeffs.par_iter_mut().enumerate().for_each(|(idx, slot)| {
            let mut rem = idx;
            let mut old = 0u64;
            let mut stride = 1u64;
            for _ in 0..n {
                let k = (rem % new_side) as u64;
                rem /= new_side;
                if !k.is_multiple_of(shift) {
                    return;
                }
                old += ((k / shift) % old_side) * stride;
                stride *= old_side;
            }
            *slot = self.coeffs[old as usize];
        });
        Ok(out)
    }

    /// Both operands represented at common levels.
    pub fn common(&self, other: &SBFunction) -> Result<(SBFunction, SBFunction)> {
        if self.ctx != other.ctx {
            return Err(Error::PrimeMismatch(self.ctx.p(), other.ctx.p()));
        }
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        let l = self.support_exp.max(other.support_exp);
        let m = self.const_exp.max(other.const_exp);
        Ok((self.refine(l, m)?, other.refine(l, m)?))
    }

    fn zip_with(&self, other: &SBFunction, op: impl Fn(Complex64, Complex64) -> Complex64 + Sync) -> Result<SBFunction> {
        let (mut a, b) = self.common(other)?;
        a.coeffs.par_iter_mut().zip(b.coeffs.par_iter()).for_each(|(x, y)| *x = op(*x, *y));
        Ok(a)
    }

    pub fn add(&self, other: &SBFunction) -> Result<SBFunction> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SBFunction) -> Result<SBFunction> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn product(&self, other: &SBFunction) -> Result<SBFunction> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, s: Complex64) -> SBFunction {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    pub fn haar_cell(&self) -> f64 {
        self.ctx.pow_f64(-(self.const_exp as f64) * self.n as f64)
    }

    /// `∫ φ`.
    pub fn integral(&self) -> Complex64 {
        self.coeffs.iter().sum::<Complex64>() * self.haar_cell()
    }

    /// `‖φ‖²_{L²}`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.haar_cell()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `max |φ - ψ|` after bringing both to common levels.
    pub fn max_abs_diff(&self, other: &SBFunction) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    fn transform(&self, direction: FftDirection) -> SBFunction {
        let s = self.side();
        let mut data = self.coeffs.clone();
        if s > 1 {
            let mut planner = FftPlanner::<f64>::new();
            let fft = planner.plan_fft(s, direction);
            for axis in 0..self.n {
                let stride = s.pow(axis as u32);
                let block = stride * s;
                let lines: Vec<(usize, usize)> = (0..data.len() / block)
                    .flat_map(|b| (0..stride).map(move |o| (b * block, o)))
                    .collect();
                let results: Vec<(usize, usize, Vec<Complex64>)> = lines
                    .par_iter()
                    .map(|&(base, off)| {
                        let mut line: Vec<Complex64> = (0..s).map(|j| data[base + off + j * stride]).collect();
                        fft.process(&mut line);
                        (base, off, line)
                    })
                    .collect();
                for (base, off, line) in results {
                    for (j, v) in line.into_iter().enumerate() {
                        data[base + off + j * stride] = v;
                    }
                }
            }
        }
        let scale = self.haar_cell();
        data.iter_mut().for_each(|c| *c *= scale);
        SBFunction { ctx: self.ctx, n: self.n, support_exp: self.const_exp, const_exp: self.support_exp, coeffs: data }
    }

    /// `(Fφ)(ξ) = ∫ Ψ(-x·ξ) φ(x) dx`, at levels `(m, L)`.
    pub fn fourier(&self) -> SBFunction {
        self.transform(FftDirection::Forward)
    }

    /// `(F^{-1}φ)(x) = ∫ Ψ(x·ξ) φ(ξ) dξ`.
    pub fn inverse_fourier(&self) -> SBFunction {
        self.transform(FftDirection::Inverse)
    }

    /// `(φ ∗ ψ)(x) = ∫ φ(y) ψ(x - y) dy`, by direct coset sums.
    pub fn convolve(&self, other: &SBFunction) -> Result<SBFunction> {
        let (a, b) = self.common(other)?;
        let mut out = SBFunction::zero(a.ctx, a.n, a.support_exp, a.const_exp)?;
        let s = a.side();
        let n = a.n;
        let cell = a.haar_cell();
        let nz_b: Vec<(Vec<usize>, Complex64)> =
            b.support().map(|j| (b.index_coords(j).into_iter().map(|v| v as usize).collect(), b.coeffs[j])).collect();
        for i in a.support() {
            let ki = a.index_coords(i);
            let ca = a.coeffs[i] * cell;
            for (kj, cb) in &nz_b {
                let mut idx = 0usize;
                for d in (0..n).rev() {
                    idx = idx * s + (ki[d] as usize + kj[d]) % s;
                }
                out.coeffs[idx] += ca * cb;
            }
        }
        Ok(out)
    }

    /// `Fφ(0) = 0`, up to `COEFF_TOL` relative to `Σ |coeff|`.
    pub fn in_phi(&self) -> bool {
        let total: f64 = self.coeffs.iter().map(|c| c.norm()).sum();
        self.coeffs.iter().sum::<Complex64>().norm() <= COEFF_TOL * total.max(1e-300)
    }

    /// `Fφ ≡ 0` on `{‖ξ‖_p ≤ p^{m0}}`.
    pub fn in_phi_m0(&self, m0: i64) -> bool {
        let fhat = self.fourier();
        let scale = fhat.max_abs().max(1e-300);
        let ball = Ball::around_zero(self.n, self.ctx, m0.min(fhat.support_exp));
        if ball.level() > fhat.const_exp {
            return self.in_phi();
        }
        fhat.ball_indices(&ball).into_iter().all(|i| fhat.coeffs[i].norm() <= COEFF_TOL * scale)
    }

    pub fn to_json(&self) -> SBFunctionJson {
        SBFunctionJson {
            p: self.ctx.p(),
            n: self.n,
            l: self.support_exp,
            m: self.const_exp,
            coeffs: self
                .support()
                .map(|i| CoeffJson {
                    rep: self.rep(i).coords().iter().map(format_rational).collect(),
                    re: self.coeffs[i].re,
                    im: self.coeffs[i].im,
                })
                .collect(),
        }
    }

    pub fn from_json(j: &SBFunctionJson) -> Result<SBFunction> {
        let ctx = PrimeCtx::new(j.p)?;
        let mut out = SBFunction::zero(ctx, j.n, j.l, j.m)?;
        let mut seen = vec![false; out.coeffs.len()];
        for c in &j.coeffs {
            if c.rep.len() != j.n {
                return Err(Error::DimensionMismatch { expected: j.n, got: c.rep.len() });
            }
            let rep = PadicVector::new(c.rep.iter().map(|s| parse_rational(s)).collect::<Result<_>>()?, ctx);
            let idx = out
                .index_of(&rep)
                .ok_or_else(|| Error::Invalid(format!("representative {rep} outside the support")))?;
            if seen[idx] {
                return Err(Error::Invalid(format!("coset of {rep} listed twice")));
            }
            seen[idx] = true;
            out.coeffs[idx] = Complex64::new(c.re, c.im);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffJson {
    pub rep: Vec<String>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Wire format: `{p, n, L, m, coeffs: [{rep, re, im}]}`, nonzero cosets only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SBFunctionJson {
    pub p: u64,
    pub n: usize,
    #[serde(rename = "L")]
    pub l: i64,
    pub m: i64,
    pub coeffs: Vec<CoeffJson>,
}

/// Weight used in the Sobolev-type norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormVariant {
    /// `Ξ(ξ)^{2β}`; requires `φ ∈ Φ`.
    Xi,
    /// `max(1, Ξ(ξ))^{2β}`.
    MaxOneXi,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormReport {
    pub beta: f64,
    /// `‖φ‖_β`.
    pub value: f64,
    pub squared: f64,
    /// Bound on `|value - ‖φ‖_β|` from truncating the valuation sums.
    pub tail_bound: f64,
    pub variant: NormVariant,
}

/// `∫` of the weight over one coset, given the pinned coordinate valuations
/// (`None` marks a coordinate whose absolute value is free on the coset).
#[derive(Clone, Copy, Debug)]
struct CosetIntegral {
    sum: f64,
    tail_inf: f64,
    tail_sup: f64,
    tail_measure: f64,
}

fn weight(xi: f64, beta: f64, variant: NormVariant) -> f64 {
    let base = match variant {
        NormVariant::Xi => xi,
        NormVariant::MaxOneXi => xi.max(1.0),
    };
    if beta == 0.0 {
        1.0
    } else {
        base.powf(2.0 * beta)
    }
}

fn coset_integral(meta: &SymbolMeta, pinned: &[Option<i64>], level: i64, beta: f64, variant: NormVariant, depth: u32) -> CosetIntegral {
    let p = meta.ctx.p() as f64;
    let exps = meta.exponents();
    let n = pinned.len();
    let free: Vec<usize> = (0..n).filter(|&i| pinned[i].is_none()).collect();
    let pinned_xi: f64 = pinned
        .iter()
        .zip(&exps)
        .filter_map(|(o, &a)| o.map(|v| p.powf(-(v as f64) * a as f64)))
        .sum();
    let cell = p.powf(-(level as f64) * n as f64);
    if free.is_empty() {
        return CosetIntegral { sum: cell * weight(pinned_xi, beta, variant), tail_inf: 0.0, tail_sup: 0.0, tail_measure: 0.0 };
    }
    let pinned_measure = p.powf(-(level as f64) * (n - free.len()) as f64);
    let mut sum = 0.0;
    let mut ks = vec![0u32; free.len()];
    loop {
        let mut xi = pinned_xi;
        let mut meas = pinned_measure;
        for (slot, &i) in ks.iter().zip(&free) {
            let k = level as f64 + *slot as f64;
            xi += p.powf(-k * exps[i] as f64);
            meas *= (1.0 - 1.0 / p) * p.powf(-k);
        }
        sum += meas * weight(xi, beta, variant);
        let mut carry = 0;
        while carry < ks.len() {
            ks[carry] += 1;
            if ks[carry] < depth {
                break;
            }
            ks[carry] = 0;
            carry += 1;
        }
        if carry == ks.len() {
            break;
        }
    }
    let sup_xi = pinned_xi + free.iter().map(|&i| p.powf(-(level as f64) * exps[i] as f64)).sum::<f64>();
    let free_measure = p.powf(-(level as f64) * free.len() as f64);
    let inner = 1.0 - (1.0 - p.powf(-(depth as f64))).powi(free.len() as i32);
    CosetIntegral {
        sum,
        tail_inf: weight(pinned_xi, beta, variant),
        tail_sup: weight(sup_xi, beta, variant),
        tail_measure: pinned_measure * free_measure * inner,
    }
}

/// Pinned valuations of a coset `c + (p^level Z_p)^n`.
fn pinned_ords(ball: &Ball) -> Vec<Option<i64>> {
    let p = ball.ctx().p();
    ball.center()
        .coords()
        .iter()
        .enumerate()
        .map(|(i, c)| if ball.coordinate_touches_zero(i) { None } else { ord_rat(c, p).finite() })
        .collect()
}

/// Weighted integral `∫ W(ξ)^{2β} |g(ξ)|² dξ` of a function given on the
/// Fourier side, with its truncation error.
pub(crate) fn weighted_sq_integral(
    ghat: &SBFunction,
    meta: &SymbolMeta,
    beta: f64,
    variant: NormVariant,
    tol: f64,
) -> Result<(f64, f64, f64)> {
    let level = ghat.const_exp();
    let mut groups: BTreeMap<Vec<Option<i64>>, f64> = BTreeMap::new();
    for i in ghat.support() {
        let key = pinned_ords(&ghat.coset(i));
        *groups.entry(key).or_insert(0.0) += ghat.coeffs()[i].norm_sqr();
    }
    let groups: Vec<(Vec<Option<i64>>, f64)> = groups.into_iter().collect();
    let mut depth = 8u32;
    loop {
        let parts: Vec<(f64, f64, f64)> = groups
            .par_iter()
            .map(|(key, mass)| {
                let ci = coset_integral(meta, key, level, beta, variant, depth);
                (
                    mass * ci.sum,
                    mass * ci.tail_inf * ci.tail_measure,
                    mass * (ci.tail_sup - ci.tail_inf) * ci.tail_measure,
                )
            })
            .collect();
        let lower: f64 = parts.iter().map(|p| p.0 + p.1).sum();
        let spread: f64 = parts.iter().map(|p| p.2).sum();
        let value_bound = if lower > 0.0 { spread / (2.0 * lower.sqrt()) } else { spread.sqrt() };
        if value_bound <= tol || spread == 0.0 {
            return Ok((lower, spread, value_bound));
        }
        if depth > 4096 {
            return Err(Error::Tolerance { tol, reason: "valuation sums did not converge".into() });
        }
        depth *= 2;
    }
}

/// `‖φ‖_β` with weight `Ξ^{2β}` or `max(1, Ξ)^{2β}`.
pub fn norm_beta(phi: &SBFunction, beta: f64, meta: &SymbolMeta, variant: NormVariant, tol: f64) -> Result<NormReport> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::Precondition(format!("beta must be nonnegative, got {beta}")));
    }
    if phi.ctx() != meta.ctx {
        return Err(Error::PrimeMismatch(phi.ctx().p(), meta.ctx.p()));
    }
    if phi.dim() != meta.dim() {
        return Err(Error::DimensionMismatch { expected: meta.dim(), got: phi.dim() });
    }
    let mut fhat = phi.fourier();
    if variant == NormVariant::Xi {
        if !phi.in_phi() {
            return Err(Error::NotInLizorkin("the Ξ-weighted norm needs Fφ(0) = 0".into()));
        }
        if let Some(i) = fhat.index_of(&PadicVector::zero(phi.dim(), phi.ctx())) {
            fhat.coeffs_mut()[i] = Complex64::zero();
        }
    }
    let (sq, _, bound) = weighted_sq_integral(&fhat, meta, beta, variant, tol)?;
    Ok(NormReport { beta, value: sq.max(0.0).sqrt(), squared: sq, tail_bound: bound, variant })
}

/// `I(β) = ∫ max(1, Ξ(ξ))^{-2β} dξ`, finite for `β > n·max(w)/(2d)`.
pub fn i_beta(meta: &SymbolMeta, beta: f64, tol: f64) -> Result<(f64, f64)> {
    let n = meta.dim() as f64;
    let threshold = n * meta.max_weight() as f64 / (2.0 * meta.d as f64);
    if beta.is_nan() || beta <= threshold {
        return Err(Error::Divergent(format!("I(β) needs β > {threshold}, got {beta}")));
    }
    let p = meta.ctx.p() as f64;
    let exps = meta.exponents();
    let nn = meta.dim();
    let r = p.powf(n - 2.0 * beta * meta.d as f64 / meta.max_weight() as f64);
    let integrand = |xi: f64| xi.max(1.0).powf(-2.0 * beta);
    let mut outer = 4i64;
    let mut inner = 8i64;
    loop {
        // coordinate valuations v ∈ [-outer, inner], plus a bucket v > inner
        let vals: Vec<Option<i64>> = (-outer..=inner).map(Some).chain(std::iter::once(None)).collect();
        let len = vals.len();
        let count = len.pow(nn as u32);
        let (lo, hi): (f64, f64) = (0..count)
            .into_par_iter()
            .map(|mut idx| {
                let mut xi_lo = 0.0;
                let mut xi_hi = 0.0;
                let mut meas = 1.0;
                for &a in exps.iter().take(nn) {
                    let v = vals[idx % len];
                    idx /= len;
                    match v {
                        Some(v) => {
                            let t = p.powf(-(v as f64) * a as f64);
                            xi_lo += t;
                            xi_hi += t;
                            meas *= (1.0 - 1.0 / p) * p.powf(-(v as f64));
                        }
                        None => {
                            xi_hi += p.powf(-((inner + 1) as f64) * a as f64);
                            meas *= p.powf(-((inner + 1) as f64));
                        }
                    }
                }
                // integrand is decreasing in Ξ
                (meas * integrand(xi_hi), meas * integrand(xi_lo))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        let outer_tail = (1.0 - p.powf(-n)) * r.powi((outer + 1) as i32) / (1.0 - r);
        let err = (hi - lo) / 2.0 + outer_tail;
        if err <= tol {
            return Ok(((lo + hi) / 2.0, err));
        }
        if outer > 4000 {
            return Err(Error::Tolerance { tol, reason: "I(β) sum did not converge".into() });
        }
        if outer_tail > (hi - lo) / 2.0 {
            outer *= 2;
        } else {
            inner *= 2;
        }
    }
}

/// `ρ(φ, ψ) = max_β c_β t_β/(1 + t_β)` with `t_β = ‖φ - ψ‖_β` and `c_β = 2^{-β}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RhoReport {
    pub value: f64,
    pub per_beta: Vec<(f64, f64)>,
    /// Contribution bound for every β beyond the list: `2^{-max β}`.
    pub tail_bound: f64,
    pub weights: &'static str,
}

pub fn metric_rho(
    phi: &SBFunction,
    psi: &SBFunction,
    betas: &[f64],
    meta: &SymbolMeta,
    variant: NormVariant,
    tol: f64,
) -> Result<RhoReport> {
    if betas.is_empty() || betas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("beta list must be nonempty and strictly ascending".into()));
    }
    let diff = phi.sub(psi)?;
    let mut per_beta = Vec::with_capacity(betas.len());
    let mut value: f64 = 0.0;
    for &b in betas {
        let t = norm_beta(&diff, b, meta, variant, tol)?.value;
        let term = 2f64.powf(-b) * t / (1.0 + t);
        per_beta.push((b, t));
        value = value.max(term);
    }
    Ok(RhoReport { value, per_beta, tail_bound: 2f64.powf(-betas[betas.len() - 1]), weights: "c_beta = 2^-beta" })
}

/// `format_rational` of a level-scaled index, for diagnostics.
pub fn describe_coset(f: &SBFunction, idx: usize) -> String {
    let rep = f.rep(idx);
    format!("{} + (p^{} Z_p)^{}", rep, f.const_exp(), f.dim())
}
