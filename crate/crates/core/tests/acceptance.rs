mod common;

use common::*;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use padic_pdo::heat::{
    annulus_data, heat_kernel, heat_kernel_between, outer_tail, regularization_diagnostic, residual_check,
    truncated_state, HeatSymbol,
};
use padic_pdo::padic::{Ball, PadicScalar, PadicVector};
use padic_pdo::pdo::{apply_q, apply_sq, solve_q, solve_sq_piecewise, QSymbol, SQSymbol};
use padic_pdo::qpoly::{certify_quasielliptic, NonQeWitness, DEFAULT_CELL_BUDGET};
use padic_pdo::sbfun::{i_beta, metric_rho, norm_beta, NormVariant, SBFunction};
use padic_pdo::symbol::{estimate_constants, CoeffFunction, LowerTerm, SymbolMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn fourier_calculus() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut inv, mut pars) = (0.0f64, 0.0f64);
    for i in 0..200 {
        let p = [2u64, 3, 5, 7][i % 4];
        let n = 1 + (i / 4) % 2;
        let span_max = if p == 7 && n == 2 { 2 } else { 4 };
        let l = rng.gen_range(-2i64..=2);
        let m = rng.gen_range((-l).max(0)..=(span_max - l).min(4));
        let phi = random_function(&mut rng, ctx(p), n, l, m, 0.6);
        let hat = phi.fourier();
        inv = inv.max(hat.inverse_fourier().max_abs_diff(&phi).map_err(|e| e.to_string())?);
        pars = pars.max((phi.l2_norm_sq() - hat.l2_norm_sq()).abs());
    }
    ensure(inv <= 1e-12, || format!("involution error {inv:e}"))?;
    ensure(pars <= 1e-10, || format!("Parseval error {pars:e}"))?;
    Ok(format!("200 functions, involution {inv:.1e}, Parseval {pars:.1e}"))
}

fn two_sided_bound() -> Check {
    let f = poly("x1^2 + x2^2", &[1, 1], 3);
    let cert = certify_quasielliptic(&f, None, DEFAULT_CELL_BUDGET)
        .map_err(|e| e.to_string())?
        .into_certificate()
        .map_err(|e| e.to_string())?;
    let k = estimate_constants(&cert, None, DEFAULT_CELL_BUDGET).map_err(|e| e.to_string())?;
    let (lo, hi) = residue_ratio_bounds("x1^2 + x2^2", &[1, 1], 3, 2);
    ensure(lo == rat(1, 2) && hi == rat(1, 1), || format!("oracle gave {lo}, {hi}"))?;
    ensure(k.a0 == lo && k.a1 == hi, || format!("A0 = {}, A1 = {}", k.a0, k.a1))?;
    let meta = SymbolMeta::from_certificate(&cert);
    let ratio = |x: &PadicVector| f.abs_at(x).to_rational(f.ctx()) / meta.xi(x);
    ensure(ratio(&k.a0_point) == k.a0 && ratio(&k.a1_point) == k.a1, || "extremal points miss".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    while checked < 10_000 {
        let x = random_vector(&mut rng, 2, f.ctx(), -6, 6);
        if x.is_zero() {
            continue;
        }
        let weight = meta.xi(&x);
        let abs = f.abs_at(&x).to_rational(f.ctx());
        ensure(&k.a0 * &weight <= abs && abs <= &k.a1 * &weight, || format!("fails at {x}"))?;
        checked += 1;
    }
    Ok("A0 = 1/2, A1 = 1 exact; 10^4 points".into())
}

fn trichotomy() -> Check {
    let run = |text: &str, p: u64| certify_quasielliptic(&poly(text, &[1, 1], p), None, DEFAULT_CELL_BUDGET);
    let a = run("x1^2 + x2^2", 3).map_err(|e| e.to_string())?;
    ensure(a.certificate().is_some(), || "p = 3 not certified".into())?;
    let b = run("x1^2 + x2^2", 5).map_err(|e| e.to_string())?;
    let target = PadicVector::from_ints(&[2, 1], ctx(5));
    match b.witness() {
        Some(NonQeWitness::RootClass(ball)) => {
            let mod5 = Ball::new(target.clone(), 1);
            ensure(ball.level() >= 1 && mod5.contains(ball.center()), || format!("root class {ball:?}"))?
        }
        Some(NonQeWitness::Root(x)) => ensure(Ball::new(target.clone(), 1).contains(x), || format!("root {x}"))?,
        other => return Err(format!("p = 5 gave {other:?}")),
    }
    let c = run("x1^2 + x2", 3).map_err(|e| e.to_string())?;
    ensure(matches!(c.witness(), Some(NonQeWitness::Inhomogeneous { .. })), || format!("{:?}", c.witness()))?;
    Ok("certificate / root class (2,1) mod 5 / inhomogeneous".into())
}

fn sq_symbol() -> Result<SQSymbol, String> {
    // ‖c‖_∞ = 1: units on two patches, 1/2 elsewhere
    let c = ctx(3);
    let coeff = CoeffFunction {
        tail: rat(1, 2),
        patches: vec![
            (Ball::new(PadicVector::from_ints(&[0, 0], c), 0), rat(1, 1)),
            (Ball::new(PadicVector::from_fracs(&[(1, 3), (0, 1)], c), 0), rat(-2, 1)),
            (Ball::new(PadicVector::from_ints(&[1, 0], c), 1), rat(5, 7)),
        ],
    };
    SQSymbol::new(qsymbol("x1^2 + x2^2", &[1, 1], 3, 1.0), vec![LowerTerm { k: vec![1, 0], coeff }])
        .map_err(|e| e.to_string())
}

fn radius() -> Check {
    let sq = sq_symbol()?;
    let m0 = sq.m0();
    let c = ctx(3);
    let f = sq.principal().poly();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let anchors = [(0, 1), (1, 3), (1, 1), (4, 1), (1, 9), (2, 3)];
    for i in 0..1000 {
        let xi = loop {
            let v = random_vector(&mut rng, 2, c, -m0 - 6, 2);
            if v.norm().ord().is_some_and(|o| o <= -m0) {
                break v;
            }
        };
        let (num, den) = anchors[i % anchors.len()];
        let x = PadicVector::new(
            vec![rat(num, den) + random_rational(&mut rng, c, -1, 3, 0.3), random_rational(&mut rng, c, -1, 2, 0.3)],
            c,
        );
        let full = PadicScalar::new(sq.eval(&xi, &x), c).abs_p();
        ensure(full == f.abs_at(&xi), || format!("xi {xi}, x {x}"))?;
    }
    Ok(format!("M0 = {m0}, 10^3 (xi, x) pairs"))
}

fn round_trips() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let base = qsymbol("x1^2 + x2^2", &[1, 1], 3, 1.0);
    for i in 0..100 {
        let alpha = [0.5, 1.0, 1.7][i % 3];
        let q = QSymbol::new(base.certificate().clone(), alpha).map_err(|e| e.to_string())?;
        let phi = random_phi_annulus(&mut rng, ctx(3), 2, -1, 1, 0.6);
        let back = solve_q(&q, &apply_q(&q, &phi).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        worst = worst.max(back.max_abs_diff(&phi).map_err(|e| e.to_string())?);
    }
    ensure(worst <= 1e-10, || format!("q round trip {worst:e}"))?;

    let sq = sq_symbol()?;
    let m0 = sq.m0();
    let mut worst_sq = 0.0f64;
    for _ in 0..100 {
        let phi = random_phi_annulus(&mut rng, ctx(3), 2, m0 + 1, m0 + 2, 0.6);
        let there = apply_sq(&sq, &phi).map_err(|e| e.to_string())?;
        let back = solve_sq_piecewise(&sq, &there).map_err(|e| e.to_string())?;
        for (_, piece) in &back.pieces {
            worst_sq = worst_sq.max(piece.max_abs_diff(&phi).map_err(|e| e.to_string())?);
        }
    }
    ensure(worst_sq <= 1e-10, || format!("sq round trip {worst_sq:e}"))?;

    let a1 = base.constants().map_err(|e| e.to_string())?.a1.to_f64().unwrap();
    let meta = base.meta();
    for alpha in [0.5, 1.0, 2.0] {
        let q = QSymbol::new(base.certificate().clone(), alpha).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let phi = random_phi_annulus(&mut rng, ctx(3), 2, -1, 1, 0.6);
            let image = apply_q(&q, &phi).map_err(|e| e.to_string())?;
            for beta in [alpha, alpha + 1.0, alpha + 2.0] {
                let lhs = norm_beta(&image, beta - alpha, &meta, NormVariant::Xi, 1e-14).map_err(|e| e.to_string())?;
                let rhs = norm_beta(&phi, beta, &meta, NormVariant::Xi, 1e-14).map_err(|e| e.to_string())?;
                ensure(lhs.value <= a1.powf(alpha) * rhs.value * (1.0 + 1e-12), || {
                    format!("boundedness fails at alpha {alpha}, beta {beta}: {} > {}", lhs.value, rhs.value)
                })?;
            }
        }
    }
    Ok(format!("q {worst:.1e}, sq {worst_sq:.1e} (M0 = {m0}); boundedness with A1^alpha"))
}

fn heat_kernel_oracle() -> Check {
    let sym = HeatSymbol::Quasielliptic(qsymbol("x1", &[1], 2, 1.0));
    let origin = PadicVector::from_ints(&[0], ctx(2));
    let mut notes = Vec::new();
    for t in [0.1, 1.0, 10.0] {
        let r = heat_kernel(&sym, &origin, t, 1e-10).map_err(|e| e.to_string())?;
        let oracle = shell_series(2.0, t);
        let err = (r.re - oracle).abs();
        ensure(err <= 1e-8 && r.im.abs() <= 1e-12, || format!("t = {t}: {} vs {oracle}", r.re))?;
        // two more levels on each side
        let outer = outer_tail(&sym, t, r.hi + 2).map_err(|e| e.to_string())?;
        let fine = heat_kernel_between(&sym, &origin, t, r.lo - 2, r.hi + 2, outer).map_err(|e| e.to_string())?;
        let moved = (fine.value() - r.value()).norm();
        ensure(moved < r.tail_bound, || format!("t = {t}: refinement moved {moved:e} > {:e}", r.tail_bound))?;
        notes.push(format!("{err:.0e}"));
    }
    Ok(format!("errors {}", notes.join(", ")))
}

fn standard_symbol() -> HeatSymbol {
    HeatSymbol::Quasielliptic(qsymbol("x1^2 + x2^2", &[1, 1], 3, 1.0))
}

fn cauchy_residual() -> Check {
    let sym = standard_symbol();
    let phi0 = annulus_data(2, ctx(3), 0, 1).map_err(|e| e.to_string())?;
    let r1 = residual_check(&sym, &phi0, 0.5, 1e-3).map_err(|e| e.to_string())?.residual;
    let r2 = residual_check(&sym, &phi0, 0.5, 5e-4).map_err(|e| e.to_string())?.residual;
    let ratio = r1 / r2;
    ensure(r1 <= 1e-4, || format!("residual {r1:e}"))?;
    ensure((ratio - 4.0).abs() <= 0.8, || format!("ratio {ratio}"))?;
    Ok(format!("residual {r1:.2e}, ratio {ratio:.3}"))
}

fn regularization() -> Check {
    let times = [0.1, 0.5, 1.0, 2.0];
    let betas = [0.0, 1.0, 2.0, 3.0];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let sym = standard_symbol();
    let meta = sym.meta();
    let data = [
        annulus_data(2, ctx(3), 0, 1).map_err(|e| e.to_string())?,
        random_phi_annulus(&mut rng, ctx(3), 2, -1, 2, 0.7),
    ];
    for phi0 in &data {
        let report = regularization_diagnostic(&sym, phi0, &times, &betas, 1e-12).map_err(|e| e.to_string())?;
        ensure(report.finite && report.non_increasing, || "diagnostic flags".into())?;
        // recheck the table independently
        for &b in &betas {
            let column: Vec<f64> = report.rows.iter().filter(|r| r.beta == b).map(|r| r.norm).collect();
            ensure(column.len() == times.len() && column.iter().all(|v| v.is_finite()), || format!("beta {b}"))?;
            ensure(column.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), || format!("beta {b}: {column:?}"))?;
            let initial = norm_beta(phi0, b, &meta, NormVariant::Xi, 1e-12).map_err(|e| e.to_string())?.value;
            ensure(column[0] <= initial * (1.0 + 1e-12), || format!("beta {b}: grows from t = 0"))?;
        }
    }
    let state = truncated_state(&sym, 2, 1, 1.0).map_err(|e| e.to_string())?;
    ensure(state.in_phi(), || "truncated state not in Phi".into())?;
    Ok("finite and non-increasing; truncated state in Phi".into())
}

fn i_beta_oracle() -> Check {
    let meta = SymbolMeta::new(1, vec![1], ctx(2)).map_err(|e| e.to_string())?;
    let (v, err) = i_beta(&meta, 1.0, 1e-14).map_err(|e| e.to_string())?;
    let oracle = 1.0 + 0.5 * 0.5 / (1.0 - 0.5);
    ensure((v - oracle).abs() <= 1e-12, || format!("I(1) = {v}"))?;
    ensure(i_beta(&meta, 0.4, 1e-12).is_err(), || "beta = 0.4 accepted".into())?;
    Ok(format!("I(1) = {v} (certified error {err:.0e}); 0.4 rejected"))
}

fn metric() -> Check {
    let meta = SymbolMeta::new(2, vec![1, 1], ctx(3)).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let betas = [0.0, 0.5, 1.0, 2.0];
    let rho = |a: &SBFunction, b: &SBFunction| {
        metric_rho(a, b, &betas, &meta, NormVariant::Xi, 1e-14).map_err(|e| e.to_string())
    };
    for _ in 0..50 {
        let mut f = || random_phi_annulus(&mut rng, ctx(3), 2, -1, 1, 0.5);
        let (a, b, c) = (f(), f(), f());
        let ab = rho(&a, &b)?;
        ensure(rho(&a, &a)?.value == 0.0, || "rho(a, a) != 0".into())?;
        ensure((ab.value - rho(&b, &a)?.value).abs() <= 1e-12, || "asymmetric".into())?;
        let (ac, bc) = (rho(&a, &c)?.value, rho(&b, &c)?.value);
        ensure(ac <= ab.value + bc + 1e-12, || format!("triangle {ac} > {} + {bc}", ab.value))?;
        let max_norm = ab.per_beta.iter().map(|&(_, n)| n).fold(0.0, f64::max);
        ensure(ab.value <= max_norm + 1e-12, || "bound fails".into())?;
        let distinct = a.max_abs_diff(&b).map_err(|e| e.to_string())? > 0.0;
        ensure(!distinct || ab.value > 0.0, || "rho vanishes on distinct functions".into())?;
    }
    Ok("50 triples".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("Fourier involution and Parseval", fourier_calculus),
        ("two-sided symbol bound and exact constants", two_sided_bound),
        ("quasiellipticity trichotomy", trichotomy),
        ("semi-quasielliptic radius", radius),
        ("operator round trips and boundedness", round_trips),
        ("heat kernel shell series and tail honesty", heat_kernel_oracle),
        ("Cauchy residual and convergence order", cauchy_residual),
        ("regularization diagnostic", regularization),
        ("I(beta) oracle and divergence guard", i_beta_oracle),
        ("metric axioms and bound", metric),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panic: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
