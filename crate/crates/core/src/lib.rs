//! Conversion of hardware performance counter samples into source-level
//! profiles for profile-guided optimization.
//!
//! The pipeline runs in stages that mirror a sampling-based PGO flow:
//!
//! 1. [`formats`] parses a sample file (program-counter samples or
//!    last-branch-record stacks) and a binary description carrying the
//!    debug-symbol view of the executable.
//! 2. [`attribution`] and [`lbr`] turn samples into per-instruction and
//!    per-block counts.
//! 3. [`profile`] maps instruction counts onto inline stacks and builds the
//!    source profile, which can be merged across runs.
//! 4. [`annotate`] applies a profile to a control-flow graph and propagates
//!    edge counts.
//!
//! [`simulate`] generates synthetic programs, traces and sampled sessions with
//! exact ground truth, and is what the test suites check the pipeline against.

pub mod annotate;
pub mod attribution;
pub mod count;
pub mod error;
pub mod formats;
pub mod lbr;
pub mod pipeline;
pub mod profile;
pub mod simulate;

pub use error::{Error, ParseError, Result, ValidationError};
