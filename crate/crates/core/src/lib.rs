//! KL-UCB and competing index policies for stochastic multi-armed bandits,
//! together with a deterministic regret simulator and the deviation bounds
//! that back the KL-UCB confidence intervals.
//!
//! The crate is `no_std` (it needs `alloc`); file formats, parallel
//! execution and the command line live in the `klucb` crate.
//!
//! - [`divergence`]: Bernoulli, quadratic, exponential and Poisson
//!   divergences, the upper-confidence solver [`ucb_solve`] and
//!   Clopper-Pearson bounds.
//! - [`reward`]: Bernoulli, truncated exponential and Poisson arms.
//! - [`policy`]: KL-UCB, KL-UCB+, CP-UCB, KL-UCB-exp, KL-UCB-Poisson, UCB,
//!   MOSS, UCB-Tuned, UCB-V, DMED and DMED+.
//! - [`simulator`]: paired-seed Monte Carlo runs and their aggregation.
//! - [`analysis`]: Lai-Robbins constants, reference curves and deviation
//!   bound checks.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod divergence;
mod error;
pub mod policy;
pub mod reward;
pub mod rng;
pub mod simulator;

pub use divergence::{
    bernoulli_kl, clopper_pearson_ucb, exponential_kl, poisson_kl, quadratic_div, ucb_solve,
    DivergenceKind,
};
pub use error::{Error, Result};
pub use policy::{Policy, PolicyKind, PolicySpec, PolicyState};
pub use reward::ArmModel;
pub use rng::RandomStream;
pub use simulator::{run_many, run_one, AggregateStats, RunTrajectory, ScenarioConfig};
