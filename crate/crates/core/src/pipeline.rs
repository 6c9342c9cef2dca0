//! The end-to-end conversion from a sample session to a source profile.

use crate::attribution::{build_address_profile, to_source_accumulator, AddressProfile};
use crate::formats::{BinaryDescription, Mode, SampleSet};
use crate::lbr::{self, BlockProfile};
use crate::profile::{build_source_profile, compute_head_counts, HeadCounts, SourceProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvertStats {
    pub mode: Mode,
    pub total_samples: u64,
    /// Cycles: samples at unknown addresses. LBR: discarded ranges.
    pub dropped_samples: u64,
    pub unresolved_frames: u64,
    pub saturations: u64,
}

#[derive(Debug, Clone)]
pub struct Conversion {
    pub profile: SourceProfile,
    /// The per-instruction counts the profile was built from.
    pub instruction_profile: AddressProfile,
    pub block_profile: BlockProfile,
    pub head_counts: HeadCounts,
    pub stats: ConvertStats,
}

/// Converts a sample session against a binary description.
///
/// Cycles samples map straight to instructions. LBR stacks are walked into
/// instruction counts, normalized per block, and every instruction of a block
/// then carries the block's count.
pub fn convert(samples: &SampleSet, bd: &BinaryDescription) -> Conversion {
    let (instruction_profile, block_profile, dropped) = match samples.mode {
        Mode::Cycles => {
            let ap = build_address_profile(samples, bd).expect("cycles mode");
            let blocks = lbr::block_counts(&ap, bd);
            let dropped = ap.dropped_samples;
            (ap, blocks, dropped)
        }
        Mode::Lbr => {
            let walked = lbr::walk_ranges(samples, bd).expect("lbr mode");
            let blocks = lbr::block_counts(&walked, bd);
            (
                lbr::expand_block_counts(&blocks, bd),
                blocks,
                walked.dropped_samples,
            )
        }
    };
    let head_counts = compute_head_counts(samples, bd);
    let acc = to_source_accumulator(&instruction_profile, bd);
    let (profile, build) = build_source_profile(&acc, bd, &head_counts);
    Conversion {
        profile,
        instruction_profile,
        block_profile,
        head_counts,
        stats: ConvertStats {
            mode: samples.mode,
            total_samples: samples.total_samples(),
            dropped_samples: dropped,
            unresolved_frames: build.unresolved_frames,
            saturations: build.saturations,
        },
    }
}
