use std::ffi::{c_char, CStr, CString};
use std::ptr;

use padic_pdo_ffi::*;

fn take_string(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { pdo_string_free(s) };
    out
}

fn last_error() -> String {
    take_string(pdo_last_error())
}

fn poly(p: u64, w: &[u32], text: &str) -> *mut PdoPoly {
    let t = CString::new(text).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pdo_poly_parse(p, w.as_ptr(), w.len(), t.as_ptr(), &mut out) }, PdoStatus::PDO_OK);
    out
}

fn function(json: &str) -> *mut PdoFunction {
    let j = CString::new(json).unwrap();
    let mut out = ptr::null_mut();
    let st = unsafe { pdo_function_from_json(j.as_ptr(), &mut out) };
    assert_eq!(st, PdoStatus::PDO_OK, "{}", last_error());
    out
}

#[test]
fn certify_and_witness() {
    let f3 = poly(3, &[1, 1], "x1^2 + x2^2");
    let mut certified = -1;
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { pdo_certify_json(f3, -1, 0, &mut certified, &mut json) }, PdoStatus::PDO_OK);
    assert_eq!(certified, 1);
    assert!(take_string(json).contains("certified"));

    let f5 = poly(5, &[1, 1], "x1^2 + x2^2");
    let mut sym = ptr::null_mut();
    assert_eq!(unsafe { pdo_symbol_new(f5, 1.0, &mut sym) }, PdoStatus::PDO_NOT_CERTIFIED);
    assert!(sym.is_null());
    assert!(last_error().contains("root_class"));

    let mut s3 = ptr::null_mut();
    assert_eq!(unsafe { pdo_symbol_new(f3, 1.0, &mut s3) }, PdoStatus::PDO_OK);
    let mut cj = ptr::null_mut();
    assert_eq!(unsafe { pdo_symbol_constants_json(s3, &mut cj) }, PdoStatus::PDO_OK);
    let c = take_string(cj);
    assert!(c.contains("\"A0\":\"1/2\"") && c.contains("\"A1\":\"1\""), "{c}");
    unsafe {
        pdo_symbol_free(s3);
        pdo_poly_free(f3);
        pdo_poly_free(f5);
    }
}

#[test]
fn fourier_apply_and_eval() {
    // Fφ = 1 on the coset (1/3, 1) + Z_3^2, where |f| = 9
    let fhat = function(r#"{"p":3,"n":2,"L":1,"m":0,"coeffs":[{"rep":["1/3","1"],"re":1.0,"im":0.0}]}"#);
    let mut phi = ptr::null_mut();
    assert_eq!(unsafe { pdo_function_inverse_fourier(fhat, &mut phi) }, PdoStatus::PDO_OK);
    let f = poly(3, &[1, 1], "x1^2 + x2^2");
    let mut sym = ptr::null_mut();
    assert_eq!(unsafe { pdo_symbol_new(f, 1.0, &mut sym) }, PdoStatus::PDO_OK);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pdo_apply(sym, phi, &mut out) }, PdoStatus::PDO_OK);
    let coords = [CString::new("0").unwrap(), CString::new("0").unwrap()];
    let ptrs: Vec<*const c_char> = coords.iter().map(|c| c.as_ptr()).collect();
    let (mut re0, mut im0, mut re1, mut im1) = (0.0, 0.0, 0.0, 0.0);
    assert_eq!(unsafe { pdo_function_eval(phi, ptrs.as_ptr(), 2, &mut re0, &mut im0) }, PdoStatus::PDO_OK);
    assert_eq!(unsafe { pdo_function_eval(out, ptrs.as_ptr(), 2, &mut re1, &mut im1) }, PdoStatus::PDO_OK);
    assert!((re1 - 9.0 * re0).abs() < 1e-12 && (im1 - 9.0 * im0).abs() < 1e-12);

    let mut back = ptr::null_mut();
    assert_eq!(unsafe { pdo_solve(sym, out, &mut back) }, PdoStatus::PDO_OK);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { pdo_function_to_json(back, &mut json) }, PdoStatus::PDO_OK);
    assert!(take_string(json).starts_with("{\"p\":3"));

    let (mut v, mut tail) = (0.0, 0.0);
    assert_eq!(
        unsafe { pdo_norm(sym, phi, 0.0, PdoNormVariant::PDO_NORM_XI, 1e-12, &mut v, &mut tail) },
        PdoStatus::PDO_OK
    );
    assert!((v - 1.0).abs() < 1e-12);

    let mut ev = ptr::null_mut();
    assert_eq!(unsafe { pdo_evolve(sym, phi, 0.1, &mut ev) }, PdoStatus::PDO_OK);
    let (mut re2, mut im2) = (0.0, 0.0);
    assert_eq!(unsafe { pdo_function_eval(ev, ptrs.as_ptr(), 2, &mut re2, &mut im2) }, PdoStatus::PDO_OK);
    assert!((re2 - (-0.9f64).exp() * re0).abs() < 1e-12);

    unsafe {
        for h in [fhat, phi, out, back, ev] {
            pdo_function_free(h);
        }
        pdo_symbol_free(sym);
        pdo_poly_free(f);
    }
}

#[test]
fn domain_and_null_errors() {
    let one = function(r#"{"p":3,"n":1,"L":0,"m":0,"coeffs":[{"rep":["0"],"re":1.0}]}"#);
    let f = poly(3, &[1], "x1");
    let mut sym = ptr::null_mut();
    assert_eq!(unsafe { pdo_symbol_new(f, 1.0, &mut sym) }, PdoStatus::PDO_OK);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pdo_apply(sym, one, &mut out) }, PdoStatus::PDO_NOT_IN_DOMAIN);
    assert!(out.is_null());
    assert_eq!(unsafe { pdo_apply(ptr::null(), one, &mut out) }, PdoStatus::PDO_NULL_POINTER);
    let bad = CString::new("{\"p\":4}").unwrap();
    assert_eq!(unsafe { pdo_function_from_json(bad.as_ptr(), &mut out) }, PdoStatus::PDO_INVALID_INPUT);
    unsafe {
        pdo_function_free(one);
        pdo_symbol_free(sym);
        pdo_poly_free(f);
    }
}

#[test]
fn heat_kernel_at_origin() {
    let f = poly(2, &[1], "x1");
    let mut sym = ptr::null_mut();
    assert_eq!(unsafe { pdo_symbol_new(f, 1.0, &mut sym) }, PdoStatus::PDO_OK);
    let zero = CString::new("0").unwrap();
    let ptrs = [zero.as_ptr()];
    let (mut re, mut im, mut tail) = (0.0, 0.0, 0.0);
    assert_eq!(
        unsafe { pdo_heat_kernel(sym, ptrs.as_ptr(), 1, 1.0, 1e-10, &mut re, &mut im, &mut tail) },
        PdoStatus::PDO_OK
    );
    let oracle: f64 = (-200..=200).map(|l| 0.5 * 2f64.powi(l) * (-(2f64.powi(l))).exp()).sum();
    assert!((re - oracle).abs() < 1e-9 && tail <= 1e-10);
    unsafe {
        pdo_symbol_free(sym);
        pdo_poly_free(f);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/padic_pdo.h")).unwrap();
    for name in [
        "pdo_last_error",
        "pdo_string_free",
        "pdo_poly_parse",
        "pdo_poly_free",
        "pdo_certify_json",
        "pdo_symbol_new",
        "pdo_symbol_free",
        "pdo_symbol_constants_json",
        "pdo_function_from_json",
        "pdo_function_to_json",
        "pdo_function_free",
        "pdo_function_fourier",
        "pdo_function_inverse_fourier",
        "pdo_function_eval",
        "pdo_apply",
        "pdo_solve",
        "pdo_evolve",
        "pdo_norm",
        "pdo_heat_kernel",
        "PDO_NOT_CERTIFIED",
        "typedef struct PdoSymbol PdoSymbol",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_parses_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/padic_pdo.h");
    match std::process::Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header]).output() {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler on PATH; header syntax not checked"),
    }
}
