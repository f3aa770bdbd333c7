//! Preference-based reward learning on tabular gridworlds.
//!
//! The crate covers the whole loop: environments ([`env`]), a soft
//! Q-learning agent and exact soft value iteration ([`solver`]), one-hot MLP
//! reward models with ensembles ([`reward`]), synthetic Bradley-Terry
//! comparisons ([`preference`]), the iterated training loop ([`drlhp`]) and
//! evaluation by relearning and EPIC distance ([`eval`]). [`harness`] runs
//! seeded experiment sweeps from a config file.

pub mod drlhp;
pub mod env;
pub mod error;
pub mod eval;
pub mod harness;
pub mod preference;
pub mod reward;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
