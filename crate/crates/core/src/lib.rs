//! Bivariate random-effects meta-analysis of diagnostic test accuracy.
//!
//! The crate fits the Reitsma bivariate normal-normal model by restricted
//! maximum likelihood, derives the Rutter–Gatsonis SROC curve implied by the
//! fit, integrates its AUC, and runs parametric-bootstrap procedures on top of
//! that pipeline:
//!
//! * percentile confidence intervals for the AUC ([`bootstrap::bootstrap_auc_ci`]),
//! * a bootstrap test for the difference of two AUCs ([`bootstrap::bootstrap_compare_auc`]),
//! * leave-one-study-out ΔAUC influence diagnostics with bootstrap thresholds
//!   ([`influence::leave_one_out_table`]),
//! * a Monte Carlo coverage harness for the AUC interval ([`sim::coverage_study`]).
//!
//! The crate is `no_std` and only needs `alloc`. Parallel execution of
//! bootstrap replicates is delegated to an [`exec::Executor`] supplied by the
//! caller; [`exec::Serial`] is provided here and the `dtaboot` crate supplies
//! a thread-pool backed one. Results never depend on which executor is used.
//!
//! ```
//! use dtaboot_core::data::{Dataset, Study2x2, CorrectionPolicy, to_outcomes};
//! use dtaboot_core::reml::{fit_reml, FitOptions};
//! use dtaboot_core::sroc::{hsroc_params, compute_auc, AucOptions};
//!
//! let studies = [
//!     (20, 5, 8, 60), (35, 12, 10, 90), (14, 3, 9, 40), (50, 20, 12, 150),
//!     (22, 9, 4, 70), (30, 6, 15, 80),
//! ];
//! let data = Dataset::new(
//!     "example",
//!     studies
//!         .iter()
//!         .enumerate()
//!         .map(|(i, &(tp, fp, fn_, tn))| Study2x2::new(format!("s{}", i + 1), tp, fp, fn_, tn))
//!         .collect(),
//! )
//! .unwrap();
//! let outcomes = to_outcomes(&data, CorrectionPolicy::AffectedStudies).unwrap();
//! let fit = fit_reml(&outcomes, &FitOptions::default()).unwrap();
//! let auc = compute_auc(&hsroc_params(&fit).unwrap(), &AucOptions::default()).unwrap();
//! assert!(auc.value > 0.5 && auc.value < 1.0);
//! ```

#![no_std]
#![deny(missing_debug_implementations)]
// `!(x > 0.0)` is used deliberately so NaN takes the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bootstrap;
pub mod data;
mod error;
pub mod exec;
pub mod influence;
pub mod linalg;
pub mod math;
pub mod reml;
pub mod rng;
pub mod sim;
pub mod simplex;
pub mod sroc;

pub use error::{Error, Result};

/// Smallest number of studies a bivariate fit accepts.
pub const MIN_STUDIES: usize = 3;
