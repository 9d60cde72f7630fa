//! Risk-neutralizing payments for truthful-in-expectation mechanisms.
//!
//! A mechanism that is truthful in expectation only promises risk-neutral
//! bidders that honesty maximizes their *expected* payoff. Replacing each
//! payment with
//!
//! ```text
//! p'_i(v) = v_i(A(v)) − E[v_i(A(v)) − p_i(v)]
//! ```
//!
//! keeps the allocation rule and every expected payment, but makes a truthful
//! bidder's payoff the same on every coin flip. By Jensen's inequality
//! truth-telling then maximizes expected utility for every non-decreasing
//! concave utility for money.
//!
//! The crate provides the transform ([`risk_transform`]), a set of mechanisms
//! to apply it to ([`mechanisms`]), utility functions ([`utility_models`]) and
//! exhaustive auditors for every incentive inequality on finite type grids
//! ([`ic_audit`]). The `examples/` directory has one runnable program per
//! capability; the `tiekit` binary exposes the same operations on JSON
//! instance files.

pub mod cli;
pub mod error;
pub mod ic_audit;
pub mod mech_core;
pub mod mechanisms;
pub mod risk_transform;
pub mod rng;
pub mod utility_models;
pub mod valuations;
pub mod welfare_opt;

pub use error::{Error, Result};
pub use mech_core::{
    expected_payoff, run, run_seeded, Allocation, Coin, CoinModel, Instance, Mechanism, Method,
    Prior, Realization,
};
pub use valuations::{CoverageValuation, Valuation};
