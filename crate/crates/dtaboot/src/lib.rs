//! File formats, reports and the command-line interface around
//! [`dtaboot_core`].
//!
//! * [`input`] parses study counts from CSV.
//! * [`report`] writes JSON documents and CSV tables atomically.
//! * [`svg`] draws SROC plots.
//! * [`scenario`] reads simulation scenarios and appends to the coverage ledger.
//! * [`exec::ThreadPool`] runs bootstrap replicates on a rayon pool.

pub mod cli;
pub mod exec;
pub mod input;
pub mod report;
pub mod scenario;
pub mod svg;

pub use dtaboot_core as core;
