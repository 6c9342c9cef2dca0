//! Synthetic programs, execution traces and sampled sessions with exact
//! ground truth.
//!
//! Everything here is a pure function of its inputs and seed, and the
//! simulator writes the same file formats the converter reads, so tests can
//! run the real parsers end to end.

mod program;
mod random;
mod sampler;
mod trace;
mod truth;

pub use program::{
    gen_program, BlockSpec, Call, FunctionSpec, ProgramShape, SyntheticProgram, Terminator,
};
pub use random::{gen_dag_cfg, gen_profile, walk_dag, DagWalk};
pub use sampler::{sample_cycles, sample_lbr, SamplerConfig};
pub use trace::{run_trace, TakenBranch, Trace};
pub use truth::{ground_truth, oracle_profile, GroundTruth};

/// Address of the launcher's call into `main`; outside every function.
pub const LAUNCH_ADDR: u64 = 0x1000;
/// Where `main` returns to.
pub const LAUNCH_RETURN: u64 = LAUNCH_ADDR + 4;
/// Base address of the first synthetic function.
pub const TEXT_BASE: u64 = 0x40_0000;
/// Every synthetic instruction is four bytes long.
pub const INSN_SIZE: u64 = 4;
