//! Std companion of `ellest-core`: parallel pairwise statistics, the Monte
//! Carlo harness, configuration files, record IO and the `ellest` CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod par;
pub mod sim;
pub mod suite;
pub mod config;
pub mod io;
pub mod cli;
