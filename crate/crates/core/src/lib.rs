//! Loss-driven minimax estimators over finite candidate models.
//!
//! Every supported loss (total variation, squared Hellinger, Kullback-Leibler,
//! 1-d Wasserstein, `L_j` and `L_∞`) comes with a family of antisymmetric score
//! functions `t_(P,Q)` whose empirical sums approximate loss differences. The
//! estimator picks the candidate whose worst pairwise statistic is smallest.
//!
//! The crate is `no_std` with `alloc`; IO, configuration files and the Monte
//! Carlo harness live in the companion `ellest` crate.

#![cfg_attr(not(test), no_std)]

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod error;
pub mod special;
pub mod quad;
pub mod measures;
pub mod losses;
pub mod testfam;
pub mod estimator;
pub mod models;

pub use error::{Error, Result};
pub use estimator::{ell_estimate, pairwise_statistic, EstimateReport, PairwiseMatrix};
pub use losses::{LossKind, LossSpec};
pub use measures::{Family, Measure, Reference, Sample};
pub use models::{Candidate, Model, ModelConfig, ModelMeta};
pub use robust_tests::{Decision, TestOutcome};
pub use testfam::{FamilyConstants, ScoreFunction};
