//! Command-line front end: a JSON problem file in, a JSON result (and an
//! optional CSV mirror) out.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::heat::{
    annulus_data, cauchy_evolve, heat_kernel, regularization_diagnostic, residual_check, truncated_state,
    HeatSymbol, TaiblesonSymbol,
};
use crate::padic::{parse_rational, Ball, PadicVector, PrimeCtx};
use crate::pdo::{apply_q, apply_sq, apply_taibleson, solve_q, solve_sq, solve_taibleson, QSymbol, SQSymbol};
use crate::poly::WeightedPoly;
use crate::qpoly::{certify_quasielliptic, Certification, DEFAULT_CELL_BUDGET};
use crate::sbfun::{i_beta, metric_rho, norm_beta, NormVariant, SBFunction, SBFunctionJson};
use crate::symbol::{build_symbol_table, CellValue, CoeffFunction, LowerTerm, NormSymbol, Region, SymbolMeta};

/// Exit status for certification witnesses and inconclusive outcomes.
pub const EXIT_WITNESS: i32 = 2;
/// Exit status for errors.
pub const EXIT_ERROR: i32 = 1;

#[derive(Parser, Debug)]
#[command(name = "padic-pdo", version, about = "Exact p-adic pseudo-differential calculus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Problem file (JSON).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Result file (JSON); stdout when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// CSV mirror of the tabular part of the result.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    /// Replaces the problem's `function` with the one in this file.
    #[arg(long, global = true)]
    pub function: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Certified tolerance for tails and sums (default 1e-10).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Deepest ball level for certification refinement.
    #[arg(long = "depth-cap", global = true)]
    pub depth_cap: Option<i64>,
    /// Maximum number of cells per refinement.
    #[arg(long = "cell-budget", global = true)]
    pub cell_budget: Option<usize>,
    /// Seed for sampled spot checks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Include symbol table cells in the output.
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Decide quasiellipticity; exit 2 with a witness otherwise.
    Certify,
    /// Certified constants A0, A1.
    Constants,
    /// Symbol table over a region.
    Table,
    /// Sobolev-type norms, I(β) and the metric ρ.
    Norms,
    /// f(D;α)φ.
    Apply,
    /// Solve f(D;α)u = v.
    Solve,
    /// Taibleson operator (or its inverse with `"inverse": true`).
    Taibleson,
    /// F(D;α;x)φ, piecewise in x.
    ApplyVar,
    /// Solve F(D;α;x)u = v, piecewise in x.
    SolveVar,
    /// Certified heat kernel values.
    HeatKernel,
    /// Cauchy problem evolution with norms along a time grid.
    Evolve,
    /// Residual, regularization and truncated-state checks.
    Diagnose,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Certify => "certify",
            Command::Constants => "constants",
            Command::Table => "table",
            Command::Norms => "norms",
            Command::Apply => "apply",
            Command::Solve => "solve",
            Command::Taibleson => "taibleson",
            Command::ApplyVar => "apply-var",
            Command::SolveVar => "solve-var",
            Command::HeatKernel => "heat-kernel",
            Command::Evolve => "evolve",
            Command::Diagnose => "diagnose",
        }
    }
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub k: Vec<u32>,
    pub c: String,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct PatchSpec {
    pub center: Vec<String>,
    pub level: i64,
    pub value: String,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct LowerSpec {
    pub k: Vec<u32>,
    #[serde(default = "zero_string")]
    pub tail: String,
    #[serde(default)]
    pub patches: Vec<PatchSpec>,
}

fn zero_string() -> String {
    "0".into()
}

/// Either explicit coefficients (on the `x` side, or on the Fourier side with
/// `fourier_side`) or `annulus: [lo, hi]` meaning `Fφ = 1_{p^lo ≤ ‖ξ‖ ≤ p^hi}`.
#[derive(Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub p: Option<u64>,
    pub n: Option<usize>,
    #[serde(rename = "L")]
    pub l: Option<i64>,
    pub m: Option<i64>,
    pub coeffs: Option<Vec<crate::sbfun::CoeffJson>>,
    #[serde(default)]
    pub fourier_side: bool,
    pub annulus: Option<(i64, i64)>,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub lo: Option<i64>,
    pub hi: Option<i64>,
    pub radius: Option<i64>,
}

/// A problem file.
#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub p: u64,
    pub n: usize,
    pub weights: Option<Vec<u32>>,
    pub polynomial: Option<String>,
    pub terms: Option<Vec<TermSpec>>,
    #[serde(default)]
    pub lower: Vec<LowerSpec>,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default)]
    pub betas: Vec<f64>,
    pub variant: Option<NormVariant>,
    pub function: Option<FunctionSpec>,
    pub other: Option<FunctionSpec>,
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default)]
    pub points: Vec<Vec<String>>,
    #[serde(default)]
    pub taibleson: bool,
    #[serde(default)]
    pub inverse: bool,
    pub region: Option<RegionSpec>,
    pub floor: Option<i64>,
    pub t: Option<f64>,
    pub h: Option<f64>,
    pub l: Option<i64>,
    pub r: Option<i64>,
    pub samples: Option<usize>,
    pub tol: Option<f64>,
    pub depth_cap: Option<i64>,
    pub cell_budget: Option<usize>,
    pub seed: Option<u64>,
}

fn one() -> f64 {
    1.0
}

/// Result of one command.
pub struct Outcome {
    pub json: Value,
    pub csv: Option<Vec<Vec<String>>>,
    pub exit: i32,
}

impl Outcome {
    fn ok(json: Value) -> Self {
        Outcome { json, csv: None, exit: 0 }
    }

    fn with_csv(json: Value, csv: Vec<Vec<String>>) -> Self {
        Outcome { json, csv: Some(csv), exit: 0 }
    }

    fn witness(json: Value) -> Self {
        Outcome { json, csv: None, exit: EXIT_WITNESS }
    }
}

/// Effective settings after merging flags over the problem file.
struct Settings {
    tol: f64,
    depth_cap: Option<i64>,
    budget: usize,
    seed: u64,
    verbose: bool,
}

impl ProblemSpec {
    pub fn ctx(&self) -> Result<PrimeCtx> {
        PrimeCtx::new(self.p)
    }

    pub fn weights(&self) -> Result<Vec<u32>> {
        let w = self.weights.clone().unwrap_or_else(|| vec![1; self.n]);
        if w.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: w.len() });
        }
        Ok(w)
    }

    pub fn poly(&self) -> Result<WeightedPoly> {
        let ctx = self.ctx()?;
        let w = self.weights()?;
        match (&self.polynomial, &self.terms) {
            (Some(text), None) => WeightedPoly::parse(text, w, ctx),
            (None, Some(terms)) => WeightedPoly::new(
                w,
                ctx,
                terms.iter().map(|t| Ok((t.k.clone(), parse_rational(&t.c)?))).collect::<Result<Vec<_>>>()?,
            ),
            (Some(_), Some(_)) => Err(Error::Invalid("give either `polynomial` or `terms`, not both".into())),
            (None, None) => Err(Error::Invalid("missing `polynomial` (or `terms`)".into())),
        }
    }

    pub fn lower_terms(&self) -> Result<Vec<LowerTerm>> {
        let ctx = self.ctx()?;
        self.lower
            .iter()
            .map(|l| {
                let patches = l
                    .patches
                    .iter()
                    .map(|p| {
                        if p.center.len() != self.n {
                            return Err(Error::DimensionMismatch { expected: self.n, got: p.center.len() });
                        }
                        Ok((Ball::new(PadicVector::parse(&p.center, ctx)?, p.level), parse_rational(&p.value)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if l.k.len() != self.n {
                    return Err(Error::DimensionMismatch { expected: self.n, got: l.k.len() });
                }
                Ok(LowerTerm { k: l.k.clone(), coeff: CoeffFunction { tail: parse_rational(&l.tail)?, patches } })
            })
            .collect()
    }

    fn build_function(&self, spec: &FunctionSpec) -> Result<SBFunction> {
        let ctx = self.ctx()?;
        if let Some((lo, hi)) = spec.annulus {
            if spec.coeffs.is_some() {
                return Err(Error::Invalid("a function has both `annulus` and `coeffs`".into()));
            }
            return annulus_data(self.n, ctx, lo, hi);
        }
        let (Some(l), Some(m), Some(coeffs)) = (spec.l, spec.m, spec.coeffs.clone()) else {
            return Err(Error::Invalid("a function needs `L`, `m` and `coeffs`, or `annulus`".into()));
        };
        let j = SBFunctionJson { p: spec.p.unwrap_or(self.p), n: spec.n.unwrap_or(self.n), l, m, coeffs };
        if j.p != self.p || j.n != self.n {
            return Err(Error::Invalid(format!(
                "function is over p = {}, n = {} but the problem is p = {}, n = {}",
                j.p, j.n, self.p, self.n
            )));
        }
        let f = SBFunction::from_json(&j)?;
        Ok(if spec.fourier_side { f.inverse_fourier() } else { f })
    }

    pub fn function(&self) -> Result<SBFunction> {
        self.build_function(self.function.as_ref().ok_or_else(|| Error::Invalid("missing `function`".into()))?)
    }

    pub fn other_function(&self) -> Result<Option<SBFunction>> {
        self.other.as_ref().map(|s| self.build_function(s)).transpose()
    }

    fn points(&self) -> Result<Vec<PadicVector>> {
        let ctx = self.ctx()?;
        if self.points.is_empty() {
            return Ok(vec![PadicVector::zero(self.n, ctx)]);
        }
        self.points
            .iter()
            .map(|p| {
                if p.len() != self.n {
                    return Err(Error::DimensionMismatch { expected: self.n, got: p.len() });
                }
                PadicVector::parse(p, ctx)
            })
            .collect()
    }

    fn meta(&self) -> Result<SymbolMeta> {
        if self.taibleson {
            return SymbolMeta::new(1, vec![1; self.n], self.ctx()?);
        }
        let f = self.poly()?;
        let d = f.max_weighted_degree().ok_or(Error::ConstantPolynomial)?;
        SymbolMeta::new(d, f.weights().to_vec(), f.ctx())
    }
}

/// Certifies the problem polynomial; `Err(outcome)` carries the witness.
fn qsymbol(spec: &ProblemSpec, s: &Settings) -> Result<std::result::Result<QSymbol, Outcome>> {
    let f = spec.poly()?;
    match certify_quasielliptic(&f, s.depth_cap, s.budget)? {
        Certification::Certified(c) => {
            Ok(Ok(QSymbol::new(*c, spec.alpha)?.with_budget(s.budget).with_depth_cap(s.depth_cap)))
        }
        w @ Certification::Witness(_) => Ok(Err(Outcome::witness(w.to_json()))),
    }
}

fn heat_symbol(spec: &ProblemSpec, s: &Settings) -> Result<std::result::Result<HeatSymbol, Outcome>> {
    if spec.taibleson {
        return Ok(Ok(HeatSymbol::Taibleson(TaiblesonSymbol::new(spec.n, spec.ctx()?, spec.alpha)?)));
    }
    Ok(qsymbol(spec, s)?.map(HeatSymbol::Quasielliptic))
}

macro_rules! certified {
    ($e:expr) => {
        match $e? {
            Ok(v) => v,
            Err(outcome) => return Ok(outcome),
        }
    };
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, ctx: PrimeCtx, span: i64) -> PadicVector {
    let p = BigInt::from(ctx.p());
    PadicVector::new(
        (0..n)
            .map(|_| {
                if rng.gen_bool(0.1) {
                    return BigRational::zero();
                }
                let v = rng.gen_range(-span..=span);
                let unit: i64 = loop {
                    let u = rng.gen_range(1..=10_000i64);
                    if u % ctx.p() as i64 != 0 {
                        break u;
                    }
                };
                let scale = if v >= 0 {
                    BigRational::from_integer(num_traits::pow(p.clone(), v as usize))
                } else {
                    BigRational::new(BigInt::from(1), num_traits::pow(p.clone(), (-v) as usize))
                };
                BigRational::from_integer(BigInt::from(unit)) * scale
            })
            .collect(),
        ctx,
    )
}

fn function_json(f: &SBFunction) -> Value {
    serde_json::to_value(f.to_json()).expect("serializable")
}

fn run_command(cmd: Command, spec: &ProblemSpec, s: &Settings) -> Result<Outcome> {
    match cmd {
        Command::Certify => {
            let f = spec.poly()?;
            let c = certify_quasielliptic(&f, s.depth_cap, s.budget)?;
            let exit = if c.certificate().is_some() { 0 } else { EXIT_WITNESS };
            Ok(Outcome { json: c.to_json(), csv: None, exit })
        }
        Command::Constants => {
            let q = certified!(qsymbol(spec, s));
            let c = q.constants()?;
            let mut out = c.to_json();
            let samples = spec.samples.unwrap_or(0);
            if samples > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
                let meta = q.meta();
                let failures = (0..samples)
                    .filter(|_| !c.check_point(q.poly(), &meta, &random_point(&mut rng, spec.n, q.ctx(), 6)))
                    .count();
                out["spot_checks"] = json!({"samples": samples, "seed": s.seed, "failures": failures});
                if failures > 0 {
                    return Err(Error::VerificationFailed(format!("{failures} sampled points violate the bounds")));
                }
            }
            Ok(Outcome::ok(out))
        }
        Command::Table => {
            let ctx = spec.ctx()?;
            let region = match &spec.region {
                Some(RegionSpec { radius: Some(r), lo: None, hi: None }) => Region::Ball { radius: *r },
                Some(RegionSpec { radius: None, lo: Some(lo), hi: Some(hi) }) if lo <= hi => {
                    Region::Annulus { lo: *lo, hi: *hi }
                }
                None => Region::Annulus { lo: 0, hi: 0 },
                _ => return Err(Error::Invalid("`region` needs `radius`, or `lo ≤ hi`".into())),
            };
            let table = if spec.taibleson {
                build_symbol_table(&NormSymbol { n: spec.n, ctx }, region, spec.floor, s.budget)?
            } else {
                build_symbol_table(&spec.poly()?, region, spec.floor, s.budget)?
            };
            let mut csv = vec![vec!["center".into(), "level".into(), "kind".into(), "e".into()]];
            for c in &table.cells {
                let (kind, e) = match c.value {
                    CellValue::Exact(e) => ("exact", e.to_string()),
                    CellValue::Unresolved { sup_ord } => ("unresolved", sup_ord.to_string()),
                };
                csv.push(vec![
                    c.ball.center().to_strings().join(" "),
                    c.ball.level().to_string(),
                    kind.into(),
                    e,
                ]);
            }
            Ok(Outcome::with_csv(
                json!({"cells": table.to_json(), "count": table.cells.len(), "unresolved": table.unresolved().count()}),
                csv,
            ))
        }
        Command::Norms => {
            let phi = spec.function()?;
            let meta = spec.meta()?;
            let variant = spec.variant.unwrap_or(NormVariant::Xi);
            let betas = if spec.betas.is_empty() { vec![0.0, 1.0, 2.0] } else { spec.betas.clone() };
            let mut norms = Vec::new();
            let mut csv = vec![vec!["beta".into(), "norm".into(), "tail_bound".into()]];
            for &b in &betas {
                let r = norm_beta(&phi, b, &meta, variant, s.tol)?;
                csv.push(vec![b.to_string(), r.value.to_string(), r.tail_bound.to_string()]);
                norms.push(serde_json::to_value(&r).expect("serializable"));
            }
            let mut out = json!({"variant": variant, "norms": norms});
            if variant == NormVariant::MaxOneXi {
                out["I_beta"] = json!(betas
                    .iter()
                    .map(|&b| match i_beta(&meta, b, s.tol) {
                        Ok((v, e)) => json!({"beta": b, "value": v, "tail_bound": e}),
                        Err(e) => json!({"beta": b, "error": e.to_string()}),
                    })
                    .collect::<Vec<_>>());
            }
            if let Some(psi) = spec.other_function()? {
                let rho = metric_rho(&phi, &psi, &betas, &meta, variant, s.tol)?;
                out["rho"] = serde_json::to_value(&rho).expect("serializable");
            }
            Ok(Outcome::with_csv(out, csv))
        }
        Command::Apply | Command::Solve => {
            let q = certified!(qsymbol(spec, s));
            let phi = spec.function()?;
            let out = if cmd == Command::Apply { apply_q(&q, &phi)? } else { solve_q(&q, &phi)? };
            let mut j = json!({"alpha": spec.alpha, "function": function_json(&out), "in_phi": out.in_phi()});
            if s.verbose {
                let hat = phi.fourier();
                if hat.support_exp() > -hat.const_exp() {
                    j["table"] = q.table(1 - hat.const_exp(), hat.support_exp(), None)?.to_json();
                }
            }
            Ok(Outcome::ok(j))
        }
        Command::Taibleson => {
            let phi = spec.function()?;
            let out = if spec.inverse { solve_taibleson(spec.alpha, &phi)? } else { apply_taibleson(spec.alpha, &phi)? };
            Ok(Outcome::ok(json!({"alpha": spec.alpha, "inverse": spec.inverse, "function": function_json(&out)})))
        }
        Command::ApplyVar | Command::SolveVar => {
            let q = certified!(qsymbol(spec, s));
            let sq = SQSymbol::new(q, spec.lower_terms()?)?;
            let phi = spec.function()?;
            let out = if cmd == Command::ApplyVar { apply_sq(&sq, &phi)? } else { solve_sq(&sq, &phi)? };
            Ok(Outcome::ok(json!({"radius": sq.radius().to_json(), "pieces": out.to_json()})))
        }
        Command::HeatKernel => {
            let hs = certified!(heat_symbol(spec, s));
            let times = if spec.times.is_empty() { vec![spec.t.unwrap_or(1.0)] } else { spec.times.clone() };
            let mut reports = Vec::new();
            let mut csv = vec![vec!["t".into(), "x".into(), "re".into(), "im".into(), "tail_bound".into()]];
            for &t in &times {
                for x in spec.points()? {
                    let r = heat_kernel(&hs, &x, t, s.tol)?;
                    csv.push(vec![
                        t.to_string(),
                        r.x.join(" "),
                        r.re.to_string(),
                        r.im.to_string(),
                        r.tail_bound.to_string(),
                    ]);
                    reports.push(serde_json::to_value(&r).expect("serializable"));
                }
            }
            let mut j = json!({"alpha": hs.alpha(), "values": reports, "unit_weights": hs.unit_weights()});
            if s.verbose {
                if let HeatSymbol::Quasielliptic(q) = &hs {
                    j["constants"] = q.constants()?.to_json();
                }
            }
            Ok(Outcome::with_csv(j, csv))
        }
        Command::Evolve => {
            let hs = certified!(heat_symbol(spec, s));
            let phi0 = spec.function()?;
            let meta = hs.meta();
            let times = if spec.times.is_empty() { vec![0.0, 0.5, 1.0] } else { spec.times.clone() };
            let betas = if spec.betas.is_empty() { vec![0.0] } else { spec.betas.clone() };
            let mut states = Vec::new();
            let mut csv = vec![vec!["t".into(), "beta".into(), "norm".into(), "tail_bound".into()]];
            for &t in &times {
                let u = cauchy_evolve(&hs, &phi0, t)?;
                let mut norms = Vec::new();
                for &b in &betas {
                    let r = norm_beta(&u, b, &meta, NormVariant::Xi, s.tol)?;
                    csv.push(vec![t.to_string(), b.to_string(), r.value.to_string(), r.tail_bound.to_string()]);
                    norms.push(json!({"beta": b, "norm": r.value, "tail_bound": r.tail_bound}));
                }
                states.push(json!({"t": t, "norms": norms, "function": function_json(&u)}));
            }
            Ok(Outcome::with_csv(json!({"alpha": hs.alpha(), "states": states, "unit_weights": hs.unit_weights()}), csv))
        }
        Command::Diagnose => {
            let hs = certified!(heat_symbol(spec, s));
            let phi0 = match &spec.function {
                Some(_) => spec.function()?,
                None => annulus_data(spec.n, spec.ctx()?, 0, 1)?,
            };
            let t = spec.t.unwrap_or(0.5);
            let h = spec.h.unwrap_or(1e-3);
            let r1 = residual_check(&hs, &phi0, t, h)?;
            let r2 = residual_check(&hs, &phi0, t, h / 2.0)?;
            let ratio = if r2.residual > 0.0 { r1.residual / r2.residual } else { f64::NAN };
            let times = if spec.times.is_empty() { vec![0.1, 0.5, 1.0, 2.0] } else { spec.times.clone() };
            let betas = if spec.betas.is_empty() { vec![0.0, 1.0, 2.0, 3.0] } else { spec.betas.clone() };
            let reg = regularization_diagnostic(&hs, &phi0, &times, &betas, s.tol)?;
            let (l, r) = (spec.l.unwrap_or(2), spec.r.unwrap_or(1));
            let state = truncated_state(&hs, l, r, t)?;
            let mut csv = vec![vec!["t".into(), "beta".into(), "norm".into(), "tail_bound".into()]];
            for row in &reg.rows {
                csv.push(vec![row.t.to_string(), row.beta.to_string(), row.norm.to_string(), row.tail_bound.to_string()]);
            }
            Ok(Outcome::with_csv(
                json!({
                    "residual": r1,
                    "residual_half_step": r2,
                    "order_ratio": ratio,
                    "regularization": reg,
                    "truncated_state": {"l": l, "r": r, "t": t, "in_phi": state.in_phi()},
                }),
                csv,
            ))
        }
    }
}

fn read_function_file(path: &PathBuf) -> Result<FunctionSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    let inner = v
        .pointer("/result/function")
        .or_else(|| v.get("function"))
        .cloned()
        .unwrap_or(v);
    serde_json::from_value(inner).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    if let Some(t) = cli.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    let path = cli.input.as_ref().ok_or_else(|| Error::Invalid("--input <file> is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    let mut spec: ProblemSpec =
        serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    if let Some(f) = &cli.function {
        spec.function = Some(read_function_file(f)?);
    }
    let settings = Settings {
        tol: cli.tol.or(spec.tol).unwrap_or(1e-10),
        depth_cap: cli.depth_cap.or(spec.depth_cap),
        budget: cli.cell_budget.or(spec.cell_budget).unwrap_or(DEFAULT_CELL_BUDGET),
        seed: cli.seed.or(spec.seed).unwrap_or(0),
        verbose: cli.verbose,
    };
    if settings.tol.is_nan() || settings.tol <= 0.0 {
        return Err(Error::Precondition("tolerance must be positive".into()));
    }
    let outcome = run_command(cli.command, &spec, &settings)?;
    let body = json!({"command": cli.command.name(), "result": outcome.json});
    let mut text = serde_json::to_string_pretty(&body).expect("serializable");
    text.push('\n');
    match &cli.output {
        Some(p) => fs::write(p, text).map_err(|e| Error::Invalid(format!("{}: {e}", p.display())))?,
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::Invalid(e.to_string()))?,
    }
    if let Some(p) = &cli.csv {
        match &outcome.csv {
            Some(rows) => {
                let mut w = csv::Writer::from_path(p).map_err(|e| Error::Invalid(format!("{}: {e}", p.display())))?;
                for row in rows {
                    w.write_record(row).map_err(|e| Error::Invalid(e.to_string()))?;
                }
                w.flush().map_err(|e| Error::Invalid(e.to_string()))?;
            }
            None => eprintln!("note: `{}` has no tabular output; --csv ignored", cli.command.name()),
        }
    }
    Ok(outcome.exit)
}
