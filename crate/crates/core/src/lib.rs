//! Cheap-talk persuasion when the sender can address more receivers than
//! she needs to persuade.
//!
//! - [`belief`]: finite beliefs, step densities on `[0, 1]` and Bayes updates.
//! - [`attainable`]: the beliefs a targeted message can induce at a given
//!   pivotal fraction, with vertex enumeration and linear optimization.
//! - [`curve`] and [`envelopes`]: exact piecewise-linear value curves, their
//!   quasiconcave and concave envelopes, and equilibrium value reports.
//! - [`games`]: election, bookie, crowdfunding, quadratic cheap talk and
//!   arbitrary finite games.
//! - [`sim`]: constructive strategies, exact posteriors, seeded simulation
//!   and equilibrium checks.
//! - [`config`] and [`commands`]: the `cheaptalk` command-line front end.

pub mod attainable;
pub mod belief;
pub mod commands;
pub mod config;
pub mod curve;
pub mod envelopes;
pub mod error;
pub mod games;
pub mod sim;

pub use error::{Error, Result};
