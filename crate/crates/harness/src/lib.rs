//! Driver layer for `fracfold`: run configuration, artifact files, and the
//! verification battery behind `fracfold verify` and the acceptance target.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod error;
pub mod oracle;
pub mod report;
pub mod suite;

pub use config::RunConfig;
pub use error::{HarnessError, Result};
pub use report::{CheckRecord, VerificationReport};
pub use suite::{verify_suite, Suite};
