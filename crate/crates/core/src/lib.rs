//! Finite-time spectral relaxation of reversible Markov chains.
//!
//! A centered observable `g_0` evolves as `g_k = P^k g_0`. Expanding it in the
//! π-orthonormal eigenbasis of a reversible kernel `P` turns every quantity of
//! interest into a function of the modal weights `|c_i|²` and eigenvalues
//! `λ_i`. This crate computes those quantities exactly, in log-domain where
//! needed:
//!
//! - [`chain`] validates kernels and produces the spectral decomposition.
//! - [`zoo`] builds the standard example chains and synthetic spectra.
//! - [`trajectory`] holds spectral profiles and per-step modal ledgers.
//! - [`rigidity`] measures convergence onto the slowest mode.
//! - [`thermo`] provides entropy, covariance and second-law bookkeeping.
//! - [`power`] runs power iteration with observable stopping rules.
//! - [`accel`] builds Chebyshev acceleration polynomials and momentum parameters.
//! - [`first_passage`] handles absorbed chains and hitting-time tails.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accel;
pub mod chain;
pub mod error;
pub mod first_passage;
pub mod logspace;
pub mod power;
pub mod rigidity;
pub mod thermo;
pub mod trajectory;
pub mod zoo;

pub use chain::{build_chain, spectral_decomposition, ReversibleChain, SpectralDecomposition, Tolerances};
pub use error::{RelaxError, Result};
pub use trajectory::{ledger_at, Ledger, ModalLedger, Mode, SpectralProfile};
