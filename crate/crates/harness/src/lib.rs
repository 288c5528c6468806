//! Config-driven experiment runner and verification suites.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod runner;
pub mod validate;
pub mod verify;
