//! Simulation and certification tools for Bell experiments under
//! hidden-variables models that may violate Measurement Independence.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: coplanar directions, measurement chains and the 16-pair
//!   layout combining a 12-direction chain with a CHSH quadruple.
//! - [`models`]: hidden-variables models exposing the hidden-state
//!   distribution σ and the conditional outcome distribution p_λ separately,
//!   plus the OI / PI / MI predicates.
//! - [`estimators`]: exact and Monte Carlo correlators, CHSH sums and chain
//!   statistics with Hoeffding confidence half-widths.
//! - [`theorems`]: equiprobability and signalling bounds, the sign-split
//!   sub-distribution construction, and certification reports.
//! - [`signalling`]: a bit-transmission protocol that decodes from Bob's
//!   marginal alone.

pub mod error;
pub mod estimators;
pub mod geometry;
pub mod models;
pub mod rng;
pub mod signalling;
pub mod theorems;

pub use error::{Error, Result};
pub use geometry::{angle_between, ChainSpec, Direction, Side, Theorem2PrimeLayout};
pub use models::{
    HiddenDistribution, HiddenState, HiddenVariableModel, JointDistribution, Outcome, OutcomePair,
    Setting, Source,
};
pub use rng::RngStream;
