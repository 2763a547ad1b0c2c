//! Exact and stochastic analysis of long-range misanthrope processes on
//! finite ring lattices.
//!
//! Particles hop between sites of a ring, possibly over long distances as
//! long as the intervening sites are empty, at rates set by the occupations
//! of the departure and arrival sites, a per-site parameter, and a left-hop
//! asymmetry factor. The crate provides:
//!
//! - enumeration and ranking of the state space `Omega_{L,N}` ([`statespace`]),
//! - transition enumeration, generators, and probability currents ([`dynamics`]),
//! - exact stationary distributions with balance and product-form
//!   verification ([`exact`]),
//! - the rate-condition checkers, one-point functions, and rate
//!   constructors for the factorising families ([`factorise`]),
//! - closed forms for the discrete Hammersley process ([`had`]),
//! - kinetic Monte Carlo simulation ([`montecarlo`]).

pub mod dynamics;
pub mod error;
pub mod exact;
pub mod factorise;
pub mod had;
mod linalg;
pub mod montecarlo;
pub mod statespace;
pub mod tol;

pub use error::{Error, Result};
