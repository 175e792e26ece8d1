#![allow(dead_code)]

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;
use padic_pdo::padic::{PadicVector, PrimeCtx};
use padic_pdo::pdo::QSymbol;
use padic_pdo::qpoly::{certify_quasielliptic, DEFAULT_CELL_BUDGET};
use padic_pdo::sbfun::SBFunction;
use padic_pdo::symbol::xi;
use padic_pdo::WeightedPoly;
use rand::Rng;

pub fn ctx(p: u64) -> PrimeCtx {
    PrimeCtx::new(p).unwrap()
}

/// `unit · p^v` as an exact rational.
pub fn scaled(unit: i64, v: i64, ctx: PrimeCtx) -> BigRational {
    BigRational::from_integer(BigInt::from(unit)) * ctx.pow(v)
}

/// A rational with `ord = v` exactly (or zero with probability `zero_prob`).
pub fn random_rational<R: Rng>(rng: &mut R, ctx: PrimeCtx, lo: i64, hi: i64, zero_prob: f64) -> BigRational {
    if rng.gen_bool(zero_prob) {
        return BigRational::zero();
    }
    let p = ctx.p() as i64;
    let unit = loop {
        let u = rng.gen_range(-5000i64..=5000);
        if u % p != 0 {
            break u;
        }
    };
    let den = loop {
        let d = rng.gen_range(1i64..=50);
        if d % p != 0 {
            break d;
        }
    };
    BigRational::new(BigInt::from(unit), BigInt::from(den)) * ctx.pow(rng.gen_range(lo..=hi))
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize, ctx: PrimeCtx, lo: i64, hi: i64) -> PadicVector {
    PadicVector::new((0..n).map(|_| random_rational(rng, ctx, lo, hi, 0.1)).collect(), ctx)
}

pub fn random_complex<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Random dense function at levels `(l, m)`.
pub fn random_function<R: Rng>(rng: &mut R, ctx: PrimeCtx, n: usize, l: i64, m: i64, density: f64) -> SBFunction {
    SBFunction::from_fn(ctx, n, l, m, |_| if rng.gen_bool(density) { random_complex(rng) } else { Complex64::zero() })
        .unwrap()
}

/// Random `φ` whose Fourier transform is supported on `p^lo ≤ ‖ξ‖ ≤ p^hi`.
pub fn random_phi_annulus<R: Rng>(rng: &mut R, ctx: PrimeCtx, n: usize, lo: i64, hi: i64, density: f64) -> SBFunction {
    SBFunction::from_fn(ctx, n, hi, 1 - lo, |xi| {
        let inside = xi.norm().ord().is_some_and(|o| -hi <= o && o <= -lo);
        if inside && rng.gen_bool(density) {
            random_complex(rng)
        } else {
            Complex64::zero()
        }
    })
    .unwrap()
    .inverse_fourier()
}

pub fn poly(text: &str, w: &[u32], p: u64) -> WeightedPoly {
    WeightedPoly::parse(text, w.to_vec(), ctx(p)).unwrap()
}

pub fn qsymbol(text: &str, w: &[u32], p: u64, alpha: f64) -> QSymbol {
    let cert = certify_quasielliptic(&poly(text, w, p), None, DEFAULT_CELL_BUDGET)
        .unwrap()
        .into_certificate()
        .unwrap();
    QSymbol::new(cert, alpha).unwrap()
}

/// `Σ_l (1 - 1/p) p^l e^{-t p^l}` summed far past both tails.
pub fn shell_series(p: f64, t: f64) -> f64 {
    (-400..=400).map(|l| (1.0 - 1.0 / p) * (l as f64 * p.ln() - t * p.powi(l)).exp()).sum()
}

/// Brute-force `inf` and `sup` of `|f|/Ξ` over integer representatives of
/// every class mod `p^depth` with a unit coordinate.
pub fn residue_ratio_bounds(text: &str, w: &[u32], p: u64, depth: u32) -> (BigRational, BigRational) {
    let f = poly(text, w, p);
    let c = ctx(p);
    let modulus = (p as i64).pow(depth);
    let d = f.max_weighted_degree().unwrap();
    let (mut lo, mut hi) = (None::<BigRational>, None::<BigRational>);
    for a in 0..modulus {
        for b in 0..modulus {
            if a % p as i64 == 0 && b % p as i64 == 0 {
                continue;
            }
            let x = PadicVector::from_ints(&[a, b], c);
            let weight = xi(d, w, &x).unwrap();
            let r = f.abs_at(&x).to_rational(c) / weight;
            lo = Some(lo.map_or(r.clone(), |v| v.min(r.clone())));
            hi = Some(hi.map_or(r.clone(), |v| v.max(r)));
        }
    }
    (lo.unwrap(), hi.unwrap())
}
