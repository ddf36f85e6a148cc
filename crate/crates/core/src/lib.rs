//! Exact and entropy-regularized transport distances, for discrete measures
//! and for stochastic processes given as scenario trees.
//!
//! * [`transport`]: exact optimal transport (transportation simplex with
//!   dual certificates) and the flat Wasserstein distance between trees.
//! * [`sinkhorn`]: entropic transport by Sinkhorn scaling, plain and
//!   log-domain, with dual recovery and comparison bounds.
//! * [`nested`]: the nested (process) distance by backward recursion, its
//!   entropic counterpart, a single-LP reference solver, and diagnostics.
//! * [`tree`]: scenario trees, their file format, and random generation.
//!
//! ```
//! use nested_sinkhorn::{fixtures, nested_exact, nested_sinkhorn, wasserstein_distance};
//!
//! let (a, b) = fixtures::information_pair(0.1);
//! let flat = wasserstein_distance(&a, &b, 1.0)?;
//! let nested = nested_exact(&a, &b, 1.0)?;
//! assert!((flat - 0.05).abs() < 1e-12);
//! assert!((nested.value - 1.05).abs() < 1e-10);
//!
//! let entropic = nested_sinkhorn(&a, &b, 1.0, 20.0, Default::default())?;
//! assert!(entropic.value_with_entropy <= nested.value);
//! assert!(nested.value <= entropic.value + 1e-8);
//! # Ok::<(), nested_sinkhorn::Error>(())
//! ```

pub mod cli;
pub mod error;
pub mod fixtures;
pub mod lp;
pub mod nested;
pub mod report;
pub mod sinkhorn;
pub mod transport;
pub mod tree;

pub use error::{Error, Result};
pub use nested::{
    bench, bound_report, flat_nested_lp, lambda_sweep, martingale_check, nested_bound_report,
    nested_exact, nested_sinkhorn, verify_entropic_equivalence, Method, NestedResult,
};
pub use report::{Check, Report};
pub use sinkhorn::{
    bound_certificates, dual_from_scalings, entropy, gibbs_kernel, sinkhorn, sinkhorn_auto,
    sinkhorn_stabilized, DualCertificate, SinkhornOptions, SinkhornResult,
};
pub use transport::{solve_transport_lp, wasserstein_distance, LpSolution, TransportPlan};
pub use tree::{cost_matrix, generate_random_tree, parse_tree, ScenarioTree, Trajectory};
