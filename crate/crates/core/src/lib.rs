//! Constrained multi-objective Bayesian optimization.
//!
//! The crate compares three ways of spending a fixed budget of expensive
//! black-box evaluations on a bi-objective problem with one inequality
//! constraint (`min (f1, f2)` subject to `g <= 0`):
//!
//! * fixed surrogates: fit Gaussian processes once on a large Latin
//!   hypercube, run NSGA-II on their means, then re-evaluate a few front
//!   designs with the true function;
//! * qParEGO: Bayesian optimization with randomly weighted augmented
//!   Chebyshev scalarizations and feasibility-weighted expected improvement;
//! * qEHVI: Bayesian optimization with feasibility-weighted expected
//!   hypervolume improvement.
//!
//! Both batch criteria select `q` points greedily, conditioning the
//! surrogates on a posterior sample at each selected point.
//!
//! ```
//! use mobo::pareto::{hypervolume_2d, hypervolume_improvement};
//!
//! let front = [[1.0, 2.0], [2.0, 1.0]];
//! assert_eq!(hypervolume_2d(&front, &[3.0, 3.0]), 3.0);
//! assert!((hypervolume_improvement(&front, &[3.0, 3.0], &[1.5, 1.5]) - 0.25).abs() < 1e-12);
//! ```

pub mod acquisition;
pub mod doe;
pub mod engine;
pub mod error;
pub mod export;
pub mod gp;
pub mod moea;
pub mod pareto;
pub mod problems;
pub mod rng;
pub mod stats;

mod book;

pub use error::{Error, Result};
