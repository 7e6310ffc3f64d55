//! Optimal m-stopping of finite sequences and their Poisson limit models.
//!
//! An m-stopping problem chooses ordered stopping times `T_1 < … < T_m` to
//! maximize the expected value of the best of the m stopped observations,
//! `E[X_{T_1} ∨ … ∨ X_{T_m}]`.  This crate provides three independently
//! checkable engines for the problem, plus a Monte Carlo harness:
//!
//! - [`dp`] — exact backward induction for the finite-horizon problem over
//!   independent sequences; the ground-truth oracle at small and moderate `n`.
//! - [`ode`] — backward integration of the first-order ODE system satisfied
//!   by the optimal stopping curves `u^1, …, u^m` of a planar Poisson limit
//!   model; the authoritative engine for limit models.
//! - [`closed_form`] — the three explicit solution classes (scaled power
//!   tails, negative power tails, and exponential/shift families) where the
//!   stopping curves reduce to a per-level root `r_j` and a transform pair
//!   `Φ^j`/`φ^j`.
//! - [`sim`] — seeded, reproducible samplers and threshold-policy executors
//!   for both the limit model and finite discounted sequences, with
//!   confidence-interval reporting and convergence studies.
//!
//! The crate is `no_std`-compatible (with `alloc`); disable the default
//! `std` feature for embedded/pure-library use.  All public types are
//! immutable after construction and safe to share across threads.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod closed_form;
pub mod curves;
pub mod dp;
pub mod grid;
pub mod intensity;
pub mod ode;
pub mod quad;
pub mod rootfind;
pub mod sim;
pub mod stats;
pub mod types;

pub use curves::{StoppingCurveFamily, ThresholdFamily};
pub use intensity::IntensityModel;
pub use types::{Guarantee, MultiStopResult, TimePoint};
