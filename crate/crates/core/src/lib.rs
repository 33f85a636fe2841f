//! Solver and simulation toolkit for finite-horizon multi-action bandits
//! with linearly coupled actions, specialized to multi-agent patrolling.
//!
//! The pipeline: build an instance ([`crime::build_case`] or by hand),
//! compute the relaxation lower bound and multipliers ([`solver::maximize_dual`]),
//! derive movement indices ([`index::compute_indices`]), then simulate the
//! index/adapted-index/greedy/random policies at any scaling factor h
//! ([`sim::monte_carlo`]). [`oracle::exact_optimum`] solves tiny instances
//! exactly for validation.

pub mod config;
pub mod crime;
pub mod fixtures;
pub mod index;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod rng;
pub mod sim;
pub mod solver;
