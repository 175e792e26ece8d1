//! C ABI for `padic_pdo`.
//!
//! Objects cross the boundary as opaque handles (`PdoPoly`, `PdoSymbol`,
//! `PdoFunction`) that the caller releases with the matching `*_free`.
//! Every fallible call returns a `PdoStatus`; on failure the message is
//! available from `pdo_last_error` on the same thread. Strings returned by
//! the library are freed with `pdo_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use padic_pdo::heat::{heat_kernel, HeatSymbol};
use padic_pdo::pdo::{apply_q, evolve_q, solve_q, QSymbol};
use padic_pdo::qpoly::{certify_quasielliptic, Certification, DEFAULT_CELL_BUDGET};
use padic_pdo::sbfun::{norm_beta, NormVariant, SBFunction, SBFunctionJson};
use padic_pdo::{Error, PadicVector, PrimeCtx, WeightedPoly};

/// Result codes.
#[allow(non_camel_case_types)]
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdoStatus {
    PDO_OK = 0,
    PDO_NULL_POINTER = 1,
    PDO_INVALID_UTF8 = 2,
    PDO_INVALID_INPUT = 3,
    /// The polynomial is not quasielliptic; the witness is in `pdo_last_error`.
    PDO_NOT_CERTIFIED = 4,
    /// The function is outside the operator's domain.
    PDO_NOT_IN_DOMAIN = 5,
    PDO_PRECONDITION = 6,
    PDO_BUDGET_EXCEEDED = 7,
    PDO_TOO_LARGE = 8,
    PDO_TOLERANCE = 9,
    PDO_PANIC = 10,
    PDO_ERROR = 11,
}

/// Norm weight selector for `pdo_norm`.
#[allow(non_camel_case_types)]
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdoNormVariant {
    PDO_NORM_XI = 0,
    PDO_NORM_MAX_ONE_XI = 1,
}

/// A weighted polynomial.
pub struct PdoPoly(WeightedPoly);

/// A certified symbol `|f|^α`.
pub struct PdoSymbol(HeatSymbol);

/// A Bruhat-Schwartz function.
pub struct PdoFunction(SBFunction);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PdoStatus {
    match e {
        Error::NotPrime(_)
        | Error::DimensionMismatch { .. }
        | Error::PrimeMismatch(..)
        | Error::ConstantPolynomial
        | Error::InvalidWeights(_)
        | Error::ParseRational(_)
        | Error::Invalid(_) => PdoStatus::PDO_INVALID_INPUT,
        Error::NotCertified(_) | Error::NotSemiQuasielliptic { .. } => PdoStatus::PDO_NOT_CERTIFIED,
        Error::NotInLizorkin(_) => PdoStatus::PDO_NOT_IN_DOMAIN,
        Error::Precondition(_) | Error::DepthTooSmall { .. } | Error::Divergent(_) => PdoStatus::PDO_PRECONDITION,
        Error::CellBudget(_) => PdoStatus::PDO_BUDGET_EXCEEDED,
        Error::TooLarge { .. } => PdoStatus::PDO_TOO_LARGE,
        Error::Tolerance { .. } => PdoStatus::PDO_TOLERANCE,
        Error::VerificationFailed(_) => PdoStatus::PDO_ERROR,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (PdoStatus, String)>) -> PdoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PdoStatus::PDO_OK,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            PdoStatus::PDO_PANIC
        }
    }
}

type FfiResult<T> = Result<T, (PdoStatus, String)>;

fn lib<T>(r: padic_pdo::Result<T>) -> FfiResult<T> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

unsafe fn cstr<'a>(p: *const c_char) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err((PdoStatus::PDO_NULL_POINTER, "null string".into()));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (PdoStatus::PDO_INVALID_UTF8, "string is not UTF-8".into()))
}

unsafe fn href<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| (PdoStatus::PDO_NULL_POINTER, format!("null {what}")))
}

unsafe fn out_ptr<'a, T>(p: *mut T) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| (PdoStatus::PDO_NULL_POINTER, "null output pointer".into()))
}

fn into_cstring(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("no interior nul").into_raw()
}

unsafe fn point(coords: *const *const c_char, n: usize, ctx: PrimeCtx) -> FfiResult<PadicVector> {
    if coords.is_null() && n > 0 {
        return Err((PdoStatus::PDO_NULL_POINTER, "null coordinate array".into()));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(cstr(*coords.add(i))?.to_string());
    }
    lib(PadicVector::parse(&out, ctx))
}

/// Message of the last failed call on this thread, or null. Free with
/// `pdo_string_free`.
#[no_mangle]
pub extern "C" fn pdo_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn pdo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a polynomial such as `"x1^2 + x2^2"` over `Q_p` with `n` weights.
///
/// # Safety
/// `weights` points to `n` values, `text` is a nul-terminated string and
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pdo_poly_parse(
    p: u64,
    weights: *const u32,
    n: usize,
    text: *const c_char,
    out: *mut *mut PdoPoly,
) -> PdoStatus {
    guard(|| {
        let out = out_ptr(out)?;
        if weights.is_null() {
            return Err((PdoStatus::PDO_NULL_POINTER, "null weights".into()));
        }
        let w = std::slice::from_raw_parts(weights, n).to_vec();
        let ctx = lib(PrimeCtx::new(p))?;
        let f = lib(WeightedPoly::parse(cstr(text)?, w, ctx))?;
        *out = Box::into_raw(Box::new(PdoPoly(f)));
        Ok(())
    })
}

/// # Safety
/// `poly` must be null or a live handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn pdo_poly_free(poly: *mut PdoPoly) {
    if !poly.is_null() {
        drop(Box::from_raw(poly));
    }
}

/// Certification outcome as JSON; `*certified` is 1 for a certificate and 0
/// for a witness. A negative `depth_cap` or zero `cell_budget` selects the
/// default.
///
/// # Safety
/// Pointers must be valid; `poly` a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdo_certify_json(
    poly: *const PdoPoly,
    depth_cap: i64,
    cell_budget: usize,
    certified: *mut i32,
    json: *mut *mut c_char,
) -> PdoStatus {
    guard(|| {
        let f = &href(poly, "polynomial")?.0;
        let certified = out_ptr(certified)?;
        let json = out_ptr(json)?;
        let budget = if cell_budget == 0 { DEFAULT_CELL_BUDGET } else { cell_budget };
        let c = lib(certify_quasielliptic(f, (depth_cap >= 0).then_some(depth_cap), budget))?;
        *certified = i32::from(c.certificate().is_some());
        *json = into_cstring(c.to_json().to_string());
        Ok(())
    })
}

/// Certifies `poly` and builds the symbol `|f|^α`.
///
/// # Safety
/// `poly` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdo_symbol_new(poly: *const PdoPoly, alpha: f64, out: *mut *mut PdoSymbol) -> PdoStatus {
    guard(|| {
        let f = &href(poly, "polynomial")?.0;
        let out = out_ptr(out)?;
        match lib(certify_quasielliptic(f, None, DEFAULT_CELL_BUDGET))? {
            Certification::Certified(c) => {
                let q = lib(QSymbol::new(*c, alpha))?;
                *out = Box::into_raw(Box::new(PdoSymbol(HeatSymbol::Quasielliptic(q))));
                Ok(())
            }
            w @ Certification::Witness(_) => Err((PdoStatus::PDO_NOT_CERTIFIED, w.to_json().to_string())),
        }
    })
}

/// # Safety
/// `sym` must be null or a live handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn pdo_symbol_free(sym: *mut PdoSymbol) {
    if !sym.is_null() {
        drop(Box::from_raw(sym));
    }
}

fn qsym(sym: &PdoSymbol) -> &QSymbol {
    match &sym.0 {
        HeatSymbol::Quasielliptic(q) => q,
        HeatSymbol::Taibleson(_) => unreachable!("handles are built from polynomials"),
    }
}

/// `A₀`, `A₁` and the auxiliary exponents as JSON.
///
/// # Safety
/// `sym` must be a live handle and `json` writable.
#[no_mangle]
pub unsafe extern "C" fn pdo_symbol_constants_json(sym: *const PdoSymbol, json: *mut *mut c_char) -> PdoStatus {
    guard(|| {
        let s = href(sym, "symbol")?;
        let json = out_ptr(json)?;
        let c = lib(qsym(s).constants())?;
        *json = into_cstring(c.to_json().to_string());
        Ok(())
    })
}

/// Reads a function from `{p, n, L, m, coeffs}` JSON.
///
/// # Safety
/// `json` is a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdo_function_from_json(json: *const c_char, out: *mut *mut PdoFunction) -> PdoStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let j: SBFunctionJson =
            serde_json::from_str(cstr(json)?).map_err(|e| (PdoStatus::PDO_INVALID_INPUT, e.to_string()))?;
        *out = Box::into_raw(Box::new(PdoFunction(lib(SBFunction::from_json(&j))?)));
        Ok(())
    })
}

/// # Safety
/// `f` must be a live handle and `json` writable.
#[no_mangle]
pub unsafe extern "C" fn pdo_function_to_json(f: *const PdoFunction, json: *mut *mut c_char) -> PdoStatus {
    guard(|| {
        let f = &href(f, "function")?.0;
        let json = out_ptr(json)?;
        let s = serde_json::to_string(&f.to_json()).map_err(|e| (PdoStatus::PDO_ERROR, e.to_string()))?;
        *json = into_cstring(s);
        Ok(())
    })
}

/// # Safety
/// `f` must be null or a live handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn pdo_function_free(f: *mut PdoFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

unsafe fn map_function(
    f: *const PdoFunction,
    out: *mut *mut PdoFunction,
    op: impl FnOnce(&SBFunction) -> padic_pdo::Result<SBFunction>,
) -> PdoStatus {
    guard(|| {
        let f = &href(f, "function")?.0;
        let out = out_ptr(out)?;
        *out = Box::into_raw(Box::new(PdoFunction(lib(op(f))?)));
        Ok(())
    })
}

/// `Fφ`.
///
/// # Safety
/// `f` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdo_function_fourier(f: *const PdoFunction, out: *mut *mut PdoFunction) -> PdoStatus {
    map_function(f, out, |f| Ok(f.fourier()))
}

/// `F^{-1}φ`.
///
/// # Safety
/// `f` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdo_function_inverse_fourier(f: *const PdoFunction, out: *mut *mut PdoFunction) -> PdoStatus {
    map_function(f, out, |f| Ok(f.inverse_fourier()))
}

/// `φ(x)` at the point with rational coordinates `coords[0..n]`.
///
/// # Safety
/// `coords` points to `n` nul-terminated strings; outputs are writable.
#[no_mangle]
pub unsafe extern "C" fn pdo_function_eval(
    f: *const PdoFunction,
    coords: *const *const c_char,
    n: usize,
    re: *mut f64,
    im: *mut f64,
) -> PdoStatus {
    guard(|| {
        let f = &href(f, "function")?.0;
        let (re, im) = (out_ptr(re)?, out_ptr(im)?);
        if n != f.dim() {
            return Err((PdoStatus::PDO_INVALID_INPUT, format!("expected {} coordinates, got {n}", f.dim())));
        }
        let v = f.evaluate(&point(coords, n, f.ctx())?);
        *re = v.re;
        *im = v.im;
        Ok(())
    })
}

/// `f(D;α)φ`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdo_apply(sym: *const PdoSymbol, f: *const PdoFunction, out: *mut *mut PdoFunction) -> PdoStatus {
    let Some(s) = sym.as_ref() else {
        set_error("null symbol".into());
        return PdoStatus::PDO_NULL_POINTER;
    };
    map_function(f, out, |f| apply_q(qsym(s), f))
}

/// The `u ∈ Φ` with `f(D;α)u = v`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdo_solve(sym: *const PdoSymbol, v: *const PdoFunction, out: *mut *mut PdoFunction) -> PdoStatus {
    let Some(s) = sym.as_ref() else {
        set_error("null symbol".into());
        return PdoStatus::PDO_NULL_POINTER;
    };
    map_function(v, out, |f| solve_q(qsym(s), f))
}

/// `F^{-1}(e^{-t|f|^α} Fφ)`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdo_evolve(
    sym: *const PdoSymbol,
    f: *const PdoFunction,
    t: f64,
    out: *mut *mut PdoFunction,
) -> PdoStatus {
    let Some(s) = sym.as_ref() else {
        set_error("null symbol".into());
        return PdoStatus::PDO_NULL_POINTER;
    };
    map_function(f, out, |f| evolve_q(qsym(s), f, t))
}

/// `‖φ‖_β` with the symbol's weights, and its truncation bound.
///
/// # Safety
/// Handles must be live and outputs writable.
#[no_mangle]
pub unsafe extern "C" fn pdo_norm(
    sym: *const PdoSymbol,
    f: *const PdoFunction,
    beta: f64,
    variant: PdoNormVariant,
    tol: f64,
    value: *mut f64,
    tail_bound: *mut f64,
) -> PdoStatus {
    guard(|| {
        let s = href(sym, "symbol")?;
        let f = &href(f, "function")?.0;
        let (value, tail_bound) = (out_ptr(value)?, out_ptr(tail_bound)?);
        let v = match variant {
            PdoNormVariant::PDO_NORM_XI => NormVariant::Xi,
            PdoNormVariant::PDO_NORM_MAX_ONE_XI => NormVariant::MaxOneXi,
        };
        let r = lib(norm_beta(f, beta, &s.0.meta(), v, tol))?;
        *value = r.value;
        *tail_bound = r.tail_bound;
        Ok(())
    })
}

/// `Z(x, t)` with certified error `*tail_bound ≤ tol`.
///
/// # Safety
/// `coords` points to `n` nul-terminated strings; outputs are writable.
#[no_mangle]
pub unsafe extern "C" fn pdo_heat_kernel(
    sym: *const PdoSymbol,
    coords: *const *const c_char,
    n: usize,
    t: f64,
    tol: f64,
    re: *mut f64,
    im: *mut f64,
    tail_bound: *mut f64,
) -> PdoStatus {
    guard(|| {
        let s = href(sym, "symbol")?;
        let (re, im, tail_bound) = (out_ptr(re)?, out_ptr(im)?, out_ptr(tail_bound)?);
        if n != s.0.dim() {
            return Err((PdoStatus::PDO_INVALID_INPUT, format!("expected {} coordinates, got {n}", s.0.dim())));
        }
        let x = point(coords, n, s.0.ctx())?;
        let r = lib(heat_kernel(&s.0, &x, t, tol))?;
        *re = r.re;
        *im = r.im;
        *tail_bound = r.tail_bound;
        Ok(())
    })
}
