//! The operators `f(D;α)`, its inverse, the Taibleson operator `D_T^α` and the
//! variable-coefficient operator `F(D;α;x)`, all as Fourier multipliers.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::padic::{Ball, PadicVector, PrimeCtx};
use crate::poly::WeightedPoly;
use crate::qpoly::{QeCertificate, DEFAULT_CELL_BUDGET};
use crate::sbfun::SBFunction;
use crate::symbol::{
    build_symbol_table, estimate_constants, sq_radius_m0, x_atoms, CellValue, ConstantsReport, LocalSymbol,
    LowerTerm, NormSymbol, RadiusReport, Region, SymbolMeta, SymbolTable, XRegion,
};

/// `|σ(ξ)|^α` for a cell with `|σ| = p^{-e}`.
pub fn cell_power(ctx: PrimeCtx, e: i64, alpha: f64) -> f64 {
    ctx.pow_f64(-(e as f64) * alpha)
}

/// `(lo, hi, floor)` of a cached table.
type TableKey = (i64, i64, Option<i64>);

/// Table cache keyed by annulus bounds.
#[derive(Debug, Default)]
pub(crate) struct TableCache {
    tables: RwLock<HashMap<TableKey, Arc<SymbolTable>>>,
}

impl TableCache {
    pub(crate) fn get_or_build<S: LocalSymbol + ?Sized>(
        &self,
        sym: &S,
        region: Region,
        floor_ord: Option<i64>,
        budget: usize,
    ) -> Result<Arc<SymbolTable>> {
        let key = match region {
            Region::Annulus { lo, hi } => (lo, hi, floor_ord),
            Region::Ball { radius } => (i64::MIN, radius, floor_ord),
        };
        if let Some(t) = self.tables.read().expect("cache lock").get(&key) {
            return Ok(t.clone());
        }
        let table = Arc::new(build_symbol_table(sym, region, floor_ord, budget)?);
        self.tables.write().expect("cache lock").insert(key, table.clone());
        Ok(table)
    }
}

impl Clone for TableCache {
    fn clone(&self) -> Self {
        TableCache { tables: RwLock::new(self.tables.read().expect("cache lock").clone()) }
    }
}

/// A certified quasielliptic symbol `|f(ξ)|_p^α`.
#[derive(Debug, Clone)]
pub struct QSymbol {
    cert: QeCertificate,
    alpha: f64,
    budget: usize,
    depth_cap: Option<i64>,
    constants: OnceLock<ConstantsReport>,
    cache: TableCache,
}

impl QSymbol {
    pub fn new(cert: QeCertificate, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Precondition(format!("alpha must be a nonnegative real, got {alpha}")));
        }
        Ok(QSymbol { cert, alpha, budget: DEFAULT_CELL_BUDGET, depth_cap: None, constants: OnceLock::new(), cache: TableCache::default() })
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    /// Absolute refinement level cap used when computing the constants.
    pub fn with_depth_cap(mut self, depth_cap: Option<i64>) -> Self {
        self.depth_cap = depth_cap;
        self
    }

    pub fn poly(&self) -> &WeightedPoly {
        self.cert.poly()
    }

    pub fn certificate(&self) -> &QeCertificate {
        &self.cert
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn ctx(&self) -> PrimeCtx {
        self.cert.ctx()
    }

    pub fn dim(&self) -> usize {
        self.cert.dim()
    }

    pub fn meta(&self) -> SymbolMeta {
        SymbolMeta::from_certificate(&self.cert)
    }

    /// `A₀`, `A₁` and friends, computed on first use.
    pub fn constants(&self) -> Result<&ConstantsReport> {
        if let Some(c) = self.constants.get() {
            return Ok(c);
        }
        let c = estimate_constants(&self.cert, self.depth_cap, self.budget)?;
        Ok(self.constants.get_or_init(|| c))
    }

    /// Symbol table of `|f|` over `{p^lo ≤ ‖ξ‖ ≤ p^hi}`, cached.
    pub fn table(&self, lo: i64, hi: i64, floor_ord: Option<i64>) -> Result<Arc<SymbolTable>> {
        self.cache.get_or_build(self.cert.poly(), Region::Annulus { lo, hi }, floor_ord, self.budget)
    }

    fn check(&self, phi: &SBFunction) -> Result<()> {
        check_compatible(phi, self.dim(), self.ctx())?;
        if !phi.in_phi() {
            return Err(Error::NotInLizorkin("operator input must satisfy Fφ(0) = 0".into()));
        }
        Ok(())
    }
}

fn check_compatible(phi: &SBFunction, n: usize, ctx: PrimeCtx) -> Result<()> {
    if phi.ctx() != ctx {
        return Err(Error::PrimeMismatch(ctx.p(), phi.ctx().p()));
    }
    if phi.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: phi.dim() });
    }
    Ok(())
}

/// Fourier transform of `φ` with the ball `{‖ξ‖ ≤ p^inner}` zeroed, and the
/// annulus `(lo, hi)` that carries the rest of its support.
pub(crate) fn punctured_fourier(phi: &SBFunction, inner: i64) -> (SBFunction, Option<(i64, i64)>) {
    let mut fhat = phi.fourier();
    let inner = inner.max(-fhat.const_exp());
    let ball = Ball::around_zero(phi.dim(), phi.ctx(), inner.min(fhat.support_exp()));
    for i in fhat.ball_indices(&ball) {
        fhat.coeffs_mut()[i] = Complex64::zero();
    }
    let (lo, hi) = (inner + 1, fhat.support_exp());
    (fhat, (lo <= hi).then_some((lo, hi)))
}

/// Multiplies `F̂` cell by cell by `factor(cell value)`, refining `F̂` to the
/// table's finest level first.
pub(crate) fn multiply_cells(
    fhat: &SBFunction,
    table: &SymbolTable,
    factor: impl Fn(CellValue) -> f64 + Sync,
) -> Result<SBFunction> {
    let level = fhat.const_exp().max(table.max_level());
    let mut out = fhat.refine(fhat.support_exp(), level)?;
    let snapshot = &out;
    let updates: Vec<(Vec<usize>, f64)> = table
        .cells
        .par_iter()
        .map(|c| (snapshot.ball_indices(&c.ball), factor(c.value)))
        .collect();
    let coeffs = out.coeffs_mut();
    for (idx, f) in updates {
        for i in idx {
            coeffs[i] *= f;
        }
    }
    Ok(out)
}

fn multiplier_q(sym: &QSymbol, phi: &SBFunction, factor: impl Fn(i64) -> f64 + Sync) -> Result<SBFunction> {
    sym.check(phi)?;
    let (fhat, span) = punctured_fourier(phi, -phi.support_exp() - 1);
    let Some((lo, hi)) = span else {
        return Ok(fhat.inverse_fourier());
    };
    let table = sym.table(lo, hi, None)?;
    let out = multiply_cells(&fhat, &table, |v| match v {
        CellValue::Exact(e) => factor(e),
        CellValue::Unresolved { .. } => unreachable!("tables without a floor are fully resolved"),
    })?;
    Ok(out.inverse_fourier())
}

/// `f(D;α)φ = F^{-1}(|f|^α Fφ)` for `φ ∈ Φ`.
pub fn apply_q(sym: &QSymbol, phi: &SBFunction) -> Result<SBFunction> {
    if sym.alpha == 0.0 {
        sym.check(phi)?;
        return Ok(phi.clone());
    }
    let (ctx, a) = (sym.ctx(), sym.alpha);
    multiplier_q(sym, phi, |e| cell_power(ctx, e, a))
}

/// The unique `u ∈ Φ` with `f(D;α)u = v`.
pub fn solve_q(sym: &QSymbol, v: &SBFunction) -> Result<SBFunction> {
    if sym.alpha == 0.0 {
        sym.check(v)?;
        return Ok(v.clone());
    }
    let (ctx, a) = (sym.ctx(), sym.alpha);
    multiplier_q(sym, v, |e| 1.0 / cell_power(ctx, e, a))
}

/// `F^{-1}(e^{-t|f|^α} Fφ)`.
pub fn evolve_q(sym: &QSymbol, phi: &SBFunction, t: f64) -> Result<SBFunction> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Precondition(format!("time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        sym.check(phi)?;
        return Ok(phi.clone());
    }
    let (ctx, a) = (sym.ctx(), sym.alpha);
    multiplier_q(sym, phi, |e| (-t * cell_power(ctx, e, a)).exp())
}

fn taibleson(alpha: f64, phi: &SBFunction, sign: f64) -> Result<SBFunction> {
    if !phi.in_phi() {
        return Err(Error::NotInLizorkin("operator input must satisfy Fφ(0) = 0".into()));
    }
    if alpha == 0.0 {
        return Ok(phi.clone());
    }
    let (mut fhat, span) = punctured_fourier(phi, -phi.support_exp() - 1);
    if span.is_some() {
        let ctx = phi.ctx();
        let sym = NormSymbol { n: phi.dim(), ctx };
        let coeffs: Vec<Complex64> = (0..fhat.coeffs().len())
            .into_par_iter()
            .map(|i| {
                let c = fhat.coeffs()[i];
                if c == Complex64::zero() {
                    return c;
                }
                let e = sym.order_at(&fhat.rep(i)).finite().expect("origin coset is zero");
                c * cell_power(ctx, e, sign * alpha)
            })
            .collect();
        fhat.coeffs_mut().copy_from_slice(&coeffs);
    }
    Ok(fhat.inverse_fourier())
}

/// `D_T^α φ = F^{-1}(‖ξ‖^α Fφ)`.
pub fn apply_taibleson(alpha: f64, phi: &SBFunction) -> Result<SBFunction> {
    taibleson(alpha, phi, 1.0)
}

/// Inverse of `D_T^α` on `Φ`.
pub fn solve_taibleson(alpha: f64, v: &SBFunction) -> Result<SBFunction> {
    taibleson(alpha, v, -1.0)
}

/// `F(ξ, x) = f(ξ) + Σ c_k(x) ξ^k` with its radius `M₀`.
#[derive(Debug, Clone)]
pub struct SQSymbol {
    principal: QSymbol,
    lower: Vec<LowerTerm>,
    radius: RadiusReport,
    atoms: Vec<SQAtom>,
}

/// An `x`-region on which `F(·, x)` is one polynomial in `ξ`.
#[derive(Debug, Clone)]
pub struct SQAtom {
    pub region: XRegion,
    pub poly: WeightedPoly,
    cache: TableCache,
}

impl SQSymbol {
    pub fn new(principal: QSymbol, lower: Vec<LowerTerm>) -> Result<Self> {
        let f = principal.poly();
        for t in &lower {
            if t.k.len() != f.dim() {
                return Err(Error::DimensionMismatch { expected: f.dim(), got: t.k.len() });
            }
            t.coeff.validate()?;
        }
        let radius = sq_radius_m0(principal.certificate(), principal.constants()?, &lower, principal.budget)?;
        let atoms = x_atoms(&lower)
            .into_iter()
            .map(|(region, values)| {
                let mut terms = f.terms().clone();
                for (t, c) in lower.iter().zip(values) {
                    if c.is_zero() {
                        continue;
                    }
                    let e = terms.entry(t.k.clone()).or_insert_with(BigRational::zero);
                    *e += c;
                }
                let poly = WeightedPoly::new(f.weights().to_vec(), f.ctx(), terms)?;
                Ok(SQAtom { region, poly, cache: TableCache::default() })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SQSymbol { principal, lower, radius, atoms })
    }

    pub fn principal(&self) -> &QSymbol {
        &self.principal
    }

    pub fn lower(&self) -> &[LowerTerm] {
        &self.lower
    }

    pub fn m0(&self) -> i64 {
        self.radius.m0
    }

    pub fn radius(&self) -> &RadiusReport {
        &self.radius
    }

    pub fn atoms(&self) -> &[SQAtom] {
        &self.atoms
    }

    /// `F(ξ, x)` at a point.
    pub fn eval(&self, xi: &PadicVector, x: &PadicVector) -> BigRational {
        let atom = self.atoms.iter().find(|a| a.region.contains(x)).expect("atoms partition x-space");
        atom.poly.eval(xi)
    }

    fn check(&self, phi: &SBFunction) -> Result<()> {
        check_compatible(phi, self.principal.dim(), self.principal.ctx())?;
        if !phi.in_phi_m0(self.m0()) {
            return Err(Error::NotInLizorkin(format!("input must satisfy Fφ = 0 on ‖ξ‖ ≤ p^{}", self.m0())));
        }
        Ok(())
    }

    fn multiplier(&self, phi: &SBFunction, power: f64) -> Result<Piecewise> {
        self.check(phi)?;
        let (fhat, span) = punctured_fourier(phi, self.m0());
        let ctx = self.principal.ctx();
        let alpha = self.principal.alpha;
        let pieces = self
            .atoms
            .iter()
            .map(|atom| {
                let out = match span {
                    None => fhat.inverse_fourier(),
                    Some((lo, hi)) => {
                        let table = atom.cache.get_or_build(
                            &atom.poly,
                            Region::Annulus { lo, hi },
                            None,
                            self.principal.budget,
                        )?;
                        multiply_cells(&fhat, &table, |v| match v {
                            CellValue::Exact(e) => cell_power(ctx, e, power * alpha),
                            CellValue::Unresolved { .. } => unreachable!("tables without a floor are fully resolved"),
                        })?
                        .inverse_fourier()
                    }
                };
                Ok((atom.region.clone(), out))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Piecewise { pieces })
    }
}

/// `F(D;α;x)φ`: one function of `x` per `x`-region, each valid on its region.
#[derive(Debug, Clone)]
pub struct Piecewise {
    pub pieces: Vec<(XRegion, SBFunction)>,
}

impl Piecewise {
    pub fn evaluate(&self, x: &PadicVector) -> Complex64 {
        self.pieces
            .iter()
            .find(|(r, _)| r.contains(x))
            .map_or(Complex64::zero(), |(_, f)| f.evaluate(x))
    }

    pub fn to_json(&self) -> Value {
        json!(self
            .pieces
            .iter()
            .map(|(r, f)| json!({"region": r.to_json(), "function": f.to_json()}))
            .collect::<Vec<_>>())
    }
}

/// `F(D;α;x)φ` for `φ ∈ Φ_{M₀}`.
pub fn apply_sq(sym: &SQSymbol, phi: &SBFunction) -> Result<Piecewise> {
    sym.multiplier(phi, 1.0)
}

/// Per-region solution of `F(D;α;x)u = v` for `v ∈ Φ_{M₀}`.
pub fn solve_sq(sym: &SQSymbol, v: &SBFunction) -> Result<Piecewise> {
    sym.multiplier(v, -1.0)
}

/// Inverts a piecewise result region by region.
pub fn solve_sq_piecewise(sym: &SQSymbol, v: &Piecewise) -> Result<Piecewise> {
    if v.pieces.len() != sym.atoms.len() {
        return Err(Error::Invalid("piecewise input does not match the symbol's x-regions".into()));
    }
    let mut pieces = Vec::with_capacity(v.pieces.len());
    for (i, (region, f)) in v.pieces.iter().enumerate() {
        let solved = sym.multiplier(f, -1.0)?;
        pieces.push((region.clone(), solved.pieces[i].1.clone()));
    }
    Ok(Piecewise { pieces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::Valuation;
    use crate::qpoly::certify_quasielliptic;
    use crate::symbol::CoeffFunction;

    fn ctx(p: u64) -> PrimeCtx {
        PrimeCtx::new(p).unwrap()
    }

    fn qsym(text: &str, w: &[u32], p: u64, alpha: f64) -> QSymbol {
        let f = WeightedPoly::parse(text, w.to_vec(), ctx(p)).unwrap();
        let cert = certify_quasielliptic(&f, None, DEFAULT_CELL_BUDGET).unwrap().into_certificate().unwrap();
        QSymbol::new(cert, alpha).unwrap()
    }

    fn shell_fn(n: usize, p: u64, ord: i64, l: i64, m: i64) -> SBFunction {
        SBFunction::from_fn(ctx(p), n, l, m, |x| {
            Complex64::new(if x.norm().0 == Valuation::Finite(ord) { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap()
    }

    #[test]
    fn single_cell_multiplier() {
        let s = qsym("x1^2 + x2^2", &[1, 1], 3, 1.0);
        let b = Ball::new(PadicVector::from_fracs(&[(1, 3), (1, 1)], ctx(3)), 0);
        let fhat = SBFunction::indicator(&b, 1, 0).unwrap();
        let phi = fhat.inverse_fourier();
        let out = apply_q(&s, &phi).unwrap();
        // |f| = 9 on the cell
        assert!(out.max_abs_diff(&phi.scale(Complex64::new(9.0, 0.0))).unwrap() < 1e-12);
    }

    #[test]
    fn unit_sphere_examples() {
        let s = qsym("x1", &[1], 5, 1.0);
        let phi = shell_fn(1, 5, 0, 0, 1).inverse_fourier();
        assert!(apply_q(&s, &phi).unwrap().max_abs_diff(&phi).unwrap() < 1e-12);

        let s2 = qsym("x1^2 + x2^2", &[1, 1], 3, 0.5);
        let v = shell_fn(2, 3, 0, 0, 1).inverse_fourier();
        let u = solve_q(&s2, &v).unwrap();
        assert!(u.max_abs_diff(&v).unwrap() < 1e-12);
    }

    #[test]
    fn alpha_zero_is_identity() {
        let s = qsym("x1^2 + x2^2", &[1, 1], 3, 0.0);
        let phi = shell_fn(2, 3, -1, 1, 0).inverse_fourier();
        assert_eq!(apply_q(&s, &phi).unwrap(), phi);
        assert_eq!(solve_q(&s, &phi).unwrap(), phi);
    }

    #[test]
    fn round_trip_and_rejection() {
        let s = qsym("x1^2 + x2^2", &[1, 1], 3, 0.7);
        let fhat = SBFunction::from_fn(ctx(3), 2, 1, 1, |x| {
            if x.is_zero() || x.norm().0 >= Valuation::Finite(1) {
                Complex64::zero()
            } else {
                let a = x.coords()[0].numer().to_string().len() as f64;
                Complex64::new(a, 0.3 * a)
            }
        })
        .unwrap();
        let phi = fhat.inverse_fourier();
        let back = solve_q(&s, &apply_q(&s, &phi).unwrap()).unwrap();
        assert!(back.max_abs_diff(&phi).unwrap() < 1e-10);
        let one = SBFunction::indicator(&Ball::around_zero(2, ctx(3), 0), 0, 0).unwrap();
        assert!(matches!(apply_q(&s, &one), Err(Error::NotInLizorkin(_))));
    }

    #[test]
    fn taibleson_examples() {
        let phi = shell_fn(1, 3, -1, 1, 0).inverse_fourier();
        let out = apply_taibleson(1.5, &phi).unwrap();
        assert!(out.max_abs_diff(&phi.scale(Complex64::new(3f64.powf(1.5), 0.0))).unwrap() < 1e-12);
        assert!(solve_taibleson(1.5, &out).unwrap().max_abs_diff(&phi).unwrap() < 1e-12);
        assert_eq!(apply_taibleson(0.0, &phi).unwrap(), phi);
    }

    #[test]
    fn sq_constant_lower_term() {
        // F = ξ² + 1 at p = 3
        let principal = qsym("x1^2", &[1], 3, 1.0);
        let lower = vec![LowerTerm { k: vec![0], coeff: CoeffFunction::constant(BigRational::from_integer(1.into())) }];
        let sq = SQSymbol::new(principal.clone(), lower).unwrap();
        assert_eq!(sq.m0(), 1);
        let v = shell_fn(1, 3, -2, 2, 0).inverse_fourier();
        let u = solve_sq(&sq, &v).unwrap();
        let expect = v.scale(Complex64::new(1.0 / 81.0, 0.0));
        for (_, f) in &u.pieces {
            assert!(f.max_abs_diff(&expect).unwrap() < 1e-12);
        }
        let back = solve_sq_piecewise(&sq, &apply_sq(&sq, &v).unwrap()).unwrap();
        for (_, f) in &back.pieces {
            assert!(f.max_abs_diff(&v).unwrap() < 1e-10);
        }
        // below the radius the input is rejected
        let low = shell_fn(1, 3, 0, 0, 1).inverse_fourier();
        assert!(matches!(apply_sq(&sq, &low), Err(Error::NotInLizorkin(_))));
    }

    #[test]
    fn sq_zero_lower_terms_match_principal() {
        let principal = qsym("x1^2", &[1], 3, 1.0);
        let lower = vec![LowerTerm { k: vec![1], coeff: CoeffFunction::constant(BigRational::zero()) }];
        let sq = SQSymbol::new(principal.clone(), lower).unwrap();
        let v = shell_fn(1, 3, -2, 2, 0).inverse_fourier();
        let a = apply_sq(&sq, &v).unwrap();
        let b = apply_q(&principal, &v).unwrap();
        for (_, f) in &a.pieces {
            assert!(f.max_abs_diff(&b).unwrap() < 1e-12);
        }
    }

    #[test]
    fn sq_two_regions_agree_on_far_shell() {
        let principal = qsym("x1^2", &[1], 3, 1.0);
        let coeff = CoeffFunction {
            tail: BigRational::zero(),
            patches: vec![(Ball::around_zero(1, ctx(3), 0), BigRational::from_integer(1.into()))],
        };
        let sq = SQSymbol::new(principal.clone(), vec![LowerTerm { k: vec![0], coeff }]).unwrap();
        assert_eq!(sq.atoms().len(), 2);
        let m0 = sq.m0();
        let phi = shell_fn(1, 3, -(m0 + 1), m0 + 1, 0).inverse_fourier();
        let out = apply_sq(&sq, &phi).unwrap();
        let q = apply_q(&principal, &phi).unwrap();
        for (_, f) in &out.pieces {
            assert!(f.max_abs_diff(&q).unwrap() < 1e-12);
        }
        let x_in = PadicVector::from_ints(&[1], ctx(3));
        let x_out = PadicVector::from_fracs(&[(1, 3)], ctx(3));
        assert!((out.evaluate(&x_in) - q.evaluate(&x_in)).norm() < 1e-12);
        assert!((out.evaluate(&x_out) - q.evaluate(&x_out)).norm() < 1e-12);
    }
}
