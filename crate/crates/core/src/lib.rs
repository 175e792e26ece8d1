//! Exact p-adic pseudo-differential calculus.
//!
//! Quasielliptic symbol certification, certified two-sided symbol bounds,
//! Fourier analysis of Bruhat-Schwartz functions, Sobolev-type norms, the
//! operators `f(D;α)`, `D_T^α`, `F(D;α;x)` and p-adic heat kernels.

pub mod cli;
pub mod error;
pub mod heat;
pub mod padic;
pub mod pdo;
pub mod poly;
pub mod qpoly;
pub mod sbfun;
pub mod symbol;

pub use error::{Error, Result};
pub use padic::{AbsValue, Ball, PadicScalar, PadicVector, PrimeCtx, Valuation};
pub use poly::WeightedPoly;
