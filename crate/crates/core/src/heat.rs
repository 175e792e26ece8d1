//! Heat kernels `Z(x,t) = ∫ Ψ(x·ξ) e^{-t|f(ξ)|^α} dξ`, truncated states,
//! Cauchy-problem evolution and regularization diagnostics.

use std::sync::Arc;

use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::padic::{Ball, PadicScalar, PadicVector, PrimeCtx};
use crate::pdo::{cell_power, multiply_cells, punctured_fourier, QSymbol, TableCache};
use crate::qpoly::DEFAULT_CELL_BUDGET;
use crate::sbfun::{norm_beta, NormVariant, SBFunction};
use crate::symbol::{CellValue, NormSymbol, Region, SymbolMeta, SymbolTable};

/// The isotropic symbol `‖ξ‖^α` of the Taibleson operator.
#[derive(Debug, Clone)]
pub struct TaiblesonSymbol {
    pub n: usize,
    pub ctx: PrimeCtx,
    pub alpha: f64,
    cache: TableCache,
}

impl TaiblesonSymbol {
    pub fn new(n: usize, ctx: PrimeCtx, alpha: f64) -> Result<Self> {
        if n == 0 || !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Precondition("Taibleson symbol needs n ≥ 1 and α > 0".into()));
        }
        Ok(TaiblesonSymbol { n, ctx, alpha, cache: TableCache::default() })
    }
}

/// A symbol driving the heat semigroup.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum HeatSymbol {
    Quasielliptic(QSymbol),
    Taibleson(TaiblesonSymbol),
}

impl HeatSymbol {
    pub fn dim(&self) -> usize {
        match self {
            HeatSymbol::Quasielliptic(q) => q.dim(),
            HeatSymbol::Taibleson(s) => s.n,
        }
    }

    pub fn ctx(&self) -> PrimeCtx {
        match self {
            HeatSymbol::Quasielliptic(q) => q.ctx(),
            HeatSymbol::Taibleson(s) => s.ctx,
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            HeatSymbol::Quasielliptic(q) => q.alpha(),
            HeatSymbol::Taibleson(s) => s.alpha,
        }
    }

    /// Weight data for the `Ξ` norms (`‖ξ‖` has `d = 1`, unit weights).
    pub fn meta(&self) -> SymbolMeta {
        match self {
            HeatSymbol::Quasielliptic(q) => q.meta(),
            HeatSymbol::Taibleson(s) => SymbolMeta { d: 1, weights: vec![1; s.n], ctx: s.ctx },
        }
    }

    /// `|f|^α` with `|f| = p^{-e}`.
    pub fn power(&self, e: i64) -> f64 {
        cell_power(self.ctx(), e, self.alpha())
    }

    /// Symbol table on `{p^lo ≤ ‖ξ‖ ≤ p^hi}`.
    pub fn table(&self, lo: i64, hi: i64) -> Result<Arc<SymbolTable>> {
        match self {
            HeatSymbol::Quasielliptic(q) => q.table(lo, hi, None),
            HeatSymbol::Taibleson(s) => s.cache.get_or_build(
                &NormSymbol { n: s.n, ctx: s.ctx },
                Region::Annulus { lo, hi },
                None,
                DEFAULT_CELL_BUDGET,
            ),
        }
    }

    /// Lower bound for `|f|` on the shell `‖ξ‖ = p^j`.
    pub fn shell_lower(&self, j: i64) -> Result<f64> {
        Ok(match self {
            HeatSymbol::Quasielliptic(q) => q.constants()?.a0.to_f64().unwrap_or(0.0) * q.meta().shell_xi_lower(j),
            HeatSymbol::Taibleson(s) => s.ctx.pow_f64(j as f64),
        })
    }

    /// Upper bound for `|f|` on the ball `‖ξ‖ ≤ p^r`.
    pub fn ball_upper(&self, r: i64) -> Result<f64> {
        Ok(match self {
            HeatSymbol::Quasielliptic(q) => {
                let meta = q.meta();
                let xi: f64 = meta.exponents().iter().map(|&a| meta.ctx.pow_f64((r * a as i64) as f64)).sum();
                q.constants()?.a1.to_f64().unwrap_or(f64::INFINITY) * xi
            }
            HeatSymbol::Taibleson(s) => s.ctx.pow_f64(r as f64),
        })
    }

    /// Label for outputs whose classical interpretation needs unit weights.
    pub fn unit_weights(&self) -> bool {
        self.meta().weights.iter().all(|&w| w == 1)
    }
}

fn check_input(sym: &HeatSymbol, phi: &SBFunction) -> Result<()> {
    if phi.ctx() != sym.ctx() {
        return Err(Error::PrimeMismatch(sym.ctx().p(), phi.ctx().p()));
    }
    if phi.dim() != sym.dim() {
        return Err(Error::DimensionMismatch { expected: sym.dim(), got: phi.dim() });
    }
    if !phi.in_phi() {
        return Err(Error::NotInLizorkin("initial data must satisfy Fφ(0) = 0".into()));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Precondition(format!("time must be a nonnegative real, got {t}")));
    }
    Ok(())
}

/// `F^{-1}(e^{-t|f|^α} Fφ₀)`; `t = 0` returns `φ₀` unchanged.
pub fn cauchy_evolve(sym: &HeatSymbol, phi0: &SBFunction, t: f64) -> Result<SBFunction> {
    check_time(t)?;
    check_input(sym, phi0)?;
    if t == 0.0 {
        return Ok(phi0.clone());
    }
    Ok(evolve_hat(sym, phi0, t)?.inverse_fourier())
}

/// Fourier side of the evolved state.
fn evolve_hat(sym: &HeatSymbol, phi0: &SBFunction, t: f64) -> Result<SBFunction> {
    let (fhat, span) = punctured_fourier(phi0, -phi0.support_exp() - 1);
    let Some((lo, hi)) = span else { return Ok(fhat) };
    let table = sym.table(lo, hi)?;
    multiply_cells(&fhat, &table, |v| match v {
        CellValue::Exact(e) => (-t * sym.power(e)).exp(),
        CellValue::Unresolved { .. } => unreachable!("tables without a floor are fully resolved"),
    })
}

/// `φ_{l,r,t}` on the Fourier side: `e^{-t|f|^α}` on `p^{1-r} ≤ ‖ξ‖ ≤ p^l`.
pub fn truncated_state_hat(sym: &HeatSymbol, l: i64, r: i64, t: f64) -> Result<SBFunction> {
    if !(l > r && r >= 1) {
        return Err(Error::Precondition(format!("truncated state needs l > r ≥ 1, got l = {l}, r = {r}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Precondition(format!("time must be positive, got {t}")));
    }
    let table = sym.table(1 - r, l)?;
    let level = table.max_level().max(r);
    let mut out = SBFunction::zero(sym.ctx(), sym.dim(), l, level)?;
    let snapshot = &out;
    let updates: Vec<(Vec<usize>, f64)> = table
        .cells
        .par_iter()
        .map(|c| {
            let v = match c.value {
                CellValue::Exact(e) => (-t * sym.power(e)).exp(),
                CellValue::Unresolved { .. } => unreachable!("tables without a floor are fully resolved"),
            };
            (snapshot.ball_indices(&c.ball), v)
        })
        .collect();
    let coeffs = out.coeffs_mut();
    for (idx, v) in updates {
        for i in idx {
            coeffs[i] = Complex64::new(v, 0.0);
        }
    }
    Ok(out)
}

/// `φ_{l,r,t}(x) = F^{-1}((1 - Ω_{-r}) Ω_l e^{-t|f|^α})`.
pub fn truncated_state(sym: &HeatSymbol, l: i64, r: i64, t: f64) -> Result<SBFunction> {
    Ok(truncated_state_hat(sym, l, r, t)?.inverse_fourier())
}

/// `φ_{r,t}`: the `l → ∞` limit, evaluated pointwise through the kernel
/// machinery with the inner ball `‖ξ‖ ≤ p^{-r}` removed.
#[derive(Debug, Clone)]
pub struct FullState<'a> {
    pub sym: &'a HeatSymbol,
    pub r: i64,
    pub t: f64,
}

impl FullState<'_> {
    pub fn evaluate(&self, x: &PadicVector, tol: f64) -> Result<HeatKernelReport> {
        let hi = outer_cutoff(self.sym, self.t, 1 - self.r, tol)?;
        kernel_on(self.sym, x, self.t, 1 - self.r, hi.0, false, hi.1)
    }
}

/// Certified value of `Z(x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatKernelReport {
    pub x: Vec<String>,
    pub t: f64,
    pub re: f64,
    pub im: f64,
    /// Certified bound on `|reported - Z(x,t)|`.
    pub tail_bound: f64,
    pub outer_bound: f64,
    pub inner_bound: f64,
    /// Shells `p^lo ≤ ‖ξ‖ ≤ p^hi` are summed cell by cell.
    pub lo: i64,
    pub hi: i64,
    pub cells: usize,
}

impl HeatKernelReport {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// `Σ_{j > hi} (1 - p^{-n}) p^{jn} e^{-t (inf_j |f|)^α}`, with the smallest
/// `hi ≥ lo` bringing it under `tol`.
fn outer_cutoff(sym: &HeatSymbol, t: f64, lo: i64, tol: f64) -> Result<(i64, f64)> {
    let n = sym.dim() as f64;
    let p = sym.ctx().p() as f64;
    let alpha = sym.alpha();
    let log_term = |j: i64| -> Result<f64> {
        let low = sym.shell_lower(j)?;
        Ok((1.0 - p.powf(-n)).ln() + j as f64 * n * p.ln() - t * low.powf(alpha))
    };
    let mut hi = lo.max(0);
    loop {
        // terms beyond hi; once the ratio drops below 1/2 it keeps dropping
        let mut sum = 0.0;
        let mut prev = log_term(hi + 1)?;
        let mut bounded = None;
        for j in hi + 1..hi + 401 {
            sum += prev.exp();
            let next = log_term(j + 1)?;
            let ratio = (next - prev).exp();
            if ratio < 0.5 {
                bounded = Some(sum + next.exp() / (1.0 - ratio));
                break;
            }
            prev = next;
        }
        if let Some(b) = bounded {
            if b <= tol {
                return Ok((hi, b));
            }
        }
        hi += 1;
        if hi > lo.max(0) + 400 {
            return Err(Error::Tolerance { tol, reason: "outer tail does not decay".into() });
        }
    }
}

/// Kernel sum over the annulus `[lo, hi]`, plus the inner ball when asked.
fn kernel_on(sym: &HeatSymbol, x: &PadicVector, t: f64, lo: i64, hi: i64, inner: bool, outer_bound: f64) -> Result<HeatKernelReport> {
    let n = sym.dim();
    let ctx = sym.ctx();
    let table = sym.table(lo, hi)?;
    let x_ord = x.norm().ord();
    let sum: Complex64 = table
        .cells
        .par_iter()
        .map(|c| {
            // ∫_B Ψ(x·ξ) dξ = Ψ(x·c) p^{-level·n} when ‖x‖ ≤ p^{level}
            let level = c.ball.level();
            if x_ord.is_some_and(|o| o < -level) {
                return Complex64::zero();
            }
            let e = match c.value {
                CellValue::Exact(e) => e,
                CellValue::Unresolved { .. } => unreachable!("tables without a floor are fully resolved"),
            };
            let ch = PadicScalar::new(x.dot(c.ball.center()), ctx).character().value;
            ch * ctx.pow_f64(-(level * n as i64) as f64) * (-t * sym.power(e)).exp()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let mut value = sum;
    let mut inner_bound = 0.0;
    if inner {
        // ‖ξ‖ ≤ p^{lo-1}: integrand within [e^{-t sup^α}, 1] of Ψ(x·ξ)
        let r = lo - 1;
        let measure = ctx.pow_f64((r * n as i64) as f64);
        if x_ord.is_none_or(|o| o >= r) {
            value += measure;
        }
        inner_bound = measure * (1.0 - (-t * sym.ball_upper(r)?.powf(sym.alpha())).exp());
    }
    Ok(HeatKernelReport {
        x: x.to_strings(),
        t,
        re: value.re,
        im: value.im,
        tail_bound: outer_bound + inner_bound,
        outer_bound,
        inner_bound,
        lo,
        hi,
        cells: table.cells.len(),
    })
}

/// `Z(x, t)` with a certified error of at most `tol`, split evenly between the
/// outer tail and the inner ball.
pub fn heat_kernel(sym: &HeatSymbol, x: &PadicVector, t: f64, tol: f64) -> Result<HeatKernelReport> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Precondition(format!("time must be positive, got {t}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    if x.dim() != sym.dim() || x.ctx() != sym.ctx() {
        return Err(Error::DimensionMismatch { expected: sym.dim(), got: x.dim() });
    }
    let n = sym.dim() as i64;
    let half = tol / 2.0;
    let mut lo = 0i64;
    loop {
        let r = lo - 1;
        let measure = sym.ctx().pow_f64((r * n) as f64);
        let bound = measure * (1.0 - (-t * sym.ball_upper(r)?.powf(sym.alpha())).exp());
        if bound <= half {
            break;
        }
        lo -= 1;
        if lo < -2000 {
            return Err(Error::Tolerance { tol, reason: "inner ball does not shrink".into() });
        }
    }
    let (hi, outer) = outer_cutoff(sym, t, lo, half)?;
    heat_kernel_between(sym, x, t, lo, hi, outer)
}

/// `Z(x, t)` summed over the shells `[lo, hi]` with the given outer bound.
pub fn heat_kernel_between(sym: &HeatSymbol, x: &PadicVector, t: f64, lo: i64, hi: i64, outer_bound: f64) -> Result<HeatKernelReport> {
    kernel_on(sym, x, t, lo, hi, true, outer_bound)
}

/// Outer tail bound for a fixed cutoff.
pub fn outer_tail(sym: &HeatSymbol, t: f64, hi: i64) -> Result<f64> {
    let n = sym.dim() as f64;
    let p = sym.ctx().p() as f64;
    let mut sum = 0.0;
    let lt = |j: i64| -> Result<f64> {
        Ok((1.0 - p.powf(-n)).ln() + j as f64 * n * p.ln() - t * sym.shell_lower(j)?.powf(sym.alpha()))
    };
    let mut prev = lt(hi + 1)?;
    for j in hi + 1..hi + 4001 {
        sum += prev.exp();
        let next = lt(j + 1)?;
        let ratio = (next - prev).exp();
        if ratio < 0.5 {
            return Ok(sum + next.exp() / (1.0 - ratio));
        }
        prev = next;
    }
    Err(Error::Tolerance { tol: 0.0, reason: "outer tail does not decay".into() })
}

/// Central-difference residual of `∂_t u + f(D;α)u = 0` on the Fourier side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub t: f64,
    pub h: f64,
    pub residual: f64,
    /// `false` when the weights are not all one: the classical solution
    /// statement then rests on kernel estimates not available here.
    pub unit_weights: bool,
}

pub fn residual_check(sym: &HeatSymbol, phi0: &SBFunction, t: f64, h: f64) -> Result<ResidualReport> {
    if !(t > h && h > 0.0) {
        return Err(Error::Precondition(format!("residual check needs t > h > 0, got t = {t}, h = {h}")));
    }
    check_input(sym, phi0)?;
    let plus = evolve_hat(sym, phi0, t + h)?;
    let minus = evolve_hat(sym, phi0, t - h)?;
    let now = evolve_hat(sym, phi0, t)?;
    let (_, span) = punctured_fourier(phi0, -phi0.support_exp() - 1);
    let Some((lo, hi)) = span else {
        return Ok(ResidualReport { t, h, residual: 0.0, unit_weights: sym.unit_weights() });
    };
    let table = sym.table(lo, hi)?;
    let applied = multiply_cells(&now, &table, |v| match v {
        CellValue::Exact(e) => sym.power(e),
        CellValue::Unresolved { .. } => unreachable!("tables without a floor are fully resolved"),
    })?;
    let residual = plus
        .coeffs()
        .par_iter()
        .zip(minus.coeffs().par_iter())
        .zip(applied.coeffs().par_iter())
        .map(|((a, b), c)| ((a - b) / (2.0 * h) + c).norm())
        .reduce(|| 0.0, f64::max);
    Ok(ResidualReport { t, h, residual, unit_weights: sym.unit_weights() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularizationRow {
    pub t: f64,
    pub beta: f64,
    pub norm: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularizationReport {
    pub rows: Vec<RegularizationRow>,
    /// Every norm is finite.
    pub finite: bool,
    /// For each β the norm does not increase along the time grid.
    pub non_increasing: bool,
    pub unit_weights: bool,
}

/// `‖u(·,t)‖_β` over a time grid and a list of `β`.
pub fn regularization_diagnostic(
    sym: &HeatSymbol,
    phi0: &SBFunction,
    times: &[f64],
    betas: &[f64],
    tol: f64,
) -> Result<RegularizationReport> {
    check_input(sym, phi0)?;
    for &t in times {
        check_time(t)?;
    }
    let meta = sym.meta();
    let mut rows = Vec::new();
    for &t in times {
        let u = cauchy_evolve(sym, phi0, t)?;
        for &b in betas {
            let r = norm_beta(&u, b, &meta, NormVariant::Xi, tol)?;
            rows.push(RegularizationRow { t, beta: b, norm: r.value, tail_bound: r.tail_bound });
        }
    }
    let finite = rows.iter().all(|r| r.norm.is_finite());
    let mut non_increasing = true;
    for &b in betas {
        let mut series: Vec<&RegularizationRow> = rows.iter().filter(|r| r.beta == b).collect();
        series.sort_by(|x, y| x.t.total_cmp(&y.t));
        for w in series.windows(2) {
            if w[1].norm > w[0].norm + w[0].tail_bound + w[1].tail_bound + 1e-12 * w[0].norm {
                non_increasing = false;
            }
        }
    }
    Ok(RegularizationReport { rows, finite, non_increasing, unit_weights: sym.unit_weights() })
}

/// `Fφ₀ = 1_{p^lo ≤ ‖ξ‖ ≤ p^hi}`, as a function of `x`.
pub fn annulus_data(n: usize, ctx: PrimeCtx, lo: i64, hi: i64) -> Result<SBFunction> {
    let mut fhat = SBFunction::zero(ctx, n, hi, 1 - lo)?;
    let outer = fhat.ball_indices(&Ball::around_zero(n, ctx, hi));
    let inner = fhat.ball_indices(&Ball::around_zero(n, ctx, lo - 1));
    for i in outer {
        fhat.coeffs_mut()[i] = Complex64::new(1.0, 0.0);
    }
    for i in inner {
        fhat.coeffs_mut()[i] = Complex64::zero();
    }
    Ok(fhat.inverse_fourier())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::WeightedPoly;
    use crate::qpoly::certify_quasielliptic;

    fn ctx(p: u64) -> PrimeCtx {
        PrimeCtx::new(p).unwrap()
    }

    fn heat(text: &str, w: &[u32], p: u64, alpha: f64) -> HeatSymbol {
        let f = WeightedPoly::parse(text, w.to_vec(), ctx(p)).unwrap();
        let cert = certify_quasielliptic(&f, None, DEFAULT_CELL_BUDGET).unwrap().into_certificate().unwrap();
        HeatSymbol::Quasielliptic(QSymbol::new(cert, alpha).unwrap())
    }

    fn shell_series(p: f64, t: f64) -> f64 {
        (-200..=200).map(|l| (1.0 - 1.0 / p) * p.powi(l) * (-t * p.powi(l)).exp()).sum()
    }

    #[test]
    fn kernel_at_origin_matches_shell_series() {
        for p in [2u64, 3] {
            let s = heat("x1", &[1], p, 1.0);
            for t in [0.1, 1.0, 10.0] {
                let r = heat_kernel(&s, &PadicVector::zero(1, ctx(p)), t, 1e-10).unwrap();
                let oracle = shell_series(p as f64, t);
                assert!((r.re - oracle).abs() < 1e-8, "p={p} t={t}: {} vs {oracle}", r.re);
                assert!(r.tail_bound <= 1e-10);
                assert!(r.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_off_origin_matches_character_sum() {
        // |x| = p^k: full shells for l ≤ -k, the shell l = 1-k contributes -p^{l-1}
        let p = 3u64;
        let pf = p as f64;
        let s = heat("x1", &[1], p, 1.0);
        for (x, k) in [((1, 3), 1i32), ((2, 1), 0), ((1, 9), 2), ((9, 1), -2)] {
            let t = 0.7;
            let r = heat_kernel(&s, &PadicVector::from_fracs(&[x], ctx(p)), t, 1e-11).unwrap();
            let mut oracle = 0.0;
            for l in -200..=-k {
                oracle += (1.0 - 1.0 / pf) * pf.powi(l) * (-t * pf.powi(l)).exp();
            }
            let l = 1 - k;
            oracle -= pf.powi(l - 1) * (-t * pf.powi(l)).exp();
            assert!((r.re - oracle).abs() < 1e-9, "x={x:?}: {} vs {oracle}", r.re);
        }
    }

    #[test]
    fn kernel_decreases_in_time() {
        let s = heat("x1^2 + x2^2", &[1, 1], 3, 1.0);
        let zero = PadicVector::zero(2, ctx(3));
        let mut prev = f64::INFINITY;
        for t in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let v = heat_kernel(&s, &zero, t, 1e-9).unwrap().re;
            assert!(v < prev && v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn inner_refinement_within_bound() {
        let s = heat("x1^2 + x2^2", &[1, 1], 3, 1.0);
        let x = PadicVector::from_fracs(&[(1, 3), (1, 1)], ctx(3));
        let hi = 6;
        let outer = outer_tail(&s, 1.0, hi).unwrap();
        let a = heat_kernel_between(&s, &x, 1.0, -3, hi, outer).unwrap();
        let b = heat_kernel_between(&s, &x, 1.0, -5, hi, outer).unwrap();
        assert!((a.value() - b.value()).norm() <= a.inner_bound);
    }

    #[test]
    fn truncated_state_examples() {
        let s = heat("x1^2 + x2^2", &[1, 1], 3, 1.0);
        let phi = truncated_state(&s, 2, 1, 1.0).unwrap();
        assert!(phi.in_phi());
        let hat = truncated_state_hat(&s, 2, 1, 1.0).unwrap();
        let f = WeightedPoly::parse("x1^2 + x2^2", vec![1, 1], ctx(3)).unwrap();
        for pt in [(1, 1, 2, 1), (1, 3, 4, 1), (1, 9, 1, 3), (5, 1, 7, 1)] {
            let xi = PadicVector::from_fracs(&[(pt.0, pt.1), (pt.2, pt.3)], ctx(3));
            let abs = f.abs_at(&xi).to_f64(ctx(3));
            assert!((hat.evaluate(&xi).re - (-abs).exp()).abs() < 1e-12);
        }
        // small t: the annulus indicator
        let tiny = truncated_state_hat(&s, 2, 1, 1e-300).unwrap();
        for (i, c) in tiny.coeffs().iter().enumerate() {
            let r = tiny.rep(i).norm().ord();
            let inside = r.is_some_and(|o| (-2..=0).contains(&o));
            assert!((c.re - if inside { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
        assert!(truncated_state(&s, 1, 1, 1.0).is_err());
    }

    #[test]
    fn evolution_examples() {
        let s = heat("x1^2 + x2^2", &[1, 1], 3, 1.0);
        let phi0 = annulus_data(2, ctx(3), 0, 1).unwrap();
        assert_eq!(cauchy_evolve(&s, &phi0, 0.0).unwrap(), phi0);
        let half = cauchy_evolve(&s, &phi0, 0.5).unwrap();
        let twice = cauchy_evolve(&s, &half, 0.5).unwrap();
        let once = cauchy_evolve(&s, &phi0, 1.0).unwrap();
        assert!(twice.max_abs_diff(&once).unwrap() < 1e-10);

        // single cell with |f| = 9
        let b = Ball::new(PadicVector::from_fracs(&[(1, 3), (1, 1)], ctx(3)), 0);
        let single = SBFunction::indicator(&b, 1, 0).unwrap().inverse_fourier();
        let u = cauchy_evolve(&s, &single, 0.3).unwrap();
        assert!(u.max_abs_diff(&single.scale(Complex64::new((-2.7f64).exp(), 0.0))).unwrap() < 1e-12);
    }

    #[test]
    fn residual_is_second_order() {
        let s = heat("x1^2 + x2^2", &[1, 1], 3, 1.0);
        let phi0 = annulus_data(2, ctx(3), 0, 1).unwrap();
        let r1 = residual_check(&s, &phi0, 0.5, 1e-3).unwrap().residual;
        let r2 = residual_check(&s, &phi0, 0.5, 5e-4).unwrap().residual;
        assert!(r1 <= 1e-4, "{r1}");
        let ratio = r1 / r2;
        assert!((ratio - 4.0).abs() <= 0.8, "{ratio}");
    }

    #[test]
    fn regularization_examples() {
        let s = heat("x1^2 + x2^2", &[1, 1], 3, 1.0);
        let phi0 = annulus_data(2, ctx(3), 0, 1).unwrap();
        let rep = regularization_diagnostic(&s, &phi0, &[0.1, 0.5, 1.0, 2.0], &[0.0, 1.0, 2.0, 3.0], 1e-10).unwrap();
        assert!(rep.finite && rep.non_increasing && rep.unit_weights);
        assert_eq!(rep.rows.len(), 16);
    }

    #[test]
    fn taibleson_variant() {
        let s = HeatSymbol::Taibleson(TaiblesonSymbol::new(1, ctx(2), 1.0).unwrap());
        let r = heat_kernel(&s, &PadicVector::zero(1, ctx(2)), 1.0, 1e-10).unwrap();
        assert!((r.re - shell_series(2.0, 1.0)).abs() < 1e-9);
        let phi = truncated_state(&s, 3, 1, 0.5).unwrap();
        assert!(phi.in_phi());
    }
}
