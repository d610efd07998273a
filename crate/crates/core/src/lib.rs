//! Bayesian optimization restricted to low-dimensional affine subspaces.
//!
//! The search at every iteration is confined to a line or plane passing
//! through the incumbent. Two surrogate variants are supported:
//!
//! * a global Gaussian-process model trained on every observation (BOLD),
//! * a local model trained only on the observations that contribute to the
//!   current search region (BOLDUC). Contribution is measured with the kernel
//!   similarity, which for distance-monotone kernels reduces to the
//!   orthogonal distance from an observation to the subspace.
//!
//! A full-space standard BO loop, benchmark functions and an experiment
//! harness (used by the `bolduc` binary) are included.
//!
//! ```
//! use bolduc::benchmarks::Benchmark;
//! use bolduc::optimizer::{run_bolduc, RunConfig};
//! use bolduc::lsod::{LsodConfig, Strategy};
//! use bolduc::subspace::Domain;
//!
//! let bench = Benchmark::rosenbrock(4);
//! let domain = Domain::unit_centered(4);
//! let mut cfg = RunConfig::new(30, 4);
//! cfg.subspace_dim = 1;
//! cfg.lsod = LsodConfig::new(Strategy::TopM(16));
//! let trace = run_bolduc(|x: &[f64]| bench.evaluate_normalized(x), &domain, &cfg).unwrap();
//! assert_eq!(trace.records.len(), 30);
//! ```

pub mod acquisition;
pub mod benchmarks;
pub mod design;
pub mod error;
pub mod gpr;
pub mod harness;
pub mod kernels;
mod linalg;
pub mod lsod;
mod neldermead;
pub mod optimizer;
pub mod subspace;

pub use error::{Error, Result};
