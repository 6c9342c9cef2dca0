use std::collections::BTreeMap;

use super::{FunctionProfile, LineKey, SourceProfile};
use crate::attribution::{build_address_profile, SourceAccumulator};
use crate::count::{div_round_half_up, SaturationLog};
use crate::formats::{BinaryDescription, FunctionDesc, Mode, SampleSet};
use crate::lbr;

/// Function entry counts keyed by assembler name.
pub type HeadCounts = BTreeMap<String, u64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BuildStats {
    /// Source keys whose inline frames could not be placed and were
    /// attributed to the containing function's own body instead.
    pub unresolved_frames: u64,
    /// Root frames naming a different function than the one containing the
    /// instruction.
    pub root_mismatches: u64,
    pub saturations: u64,
}

/// Builds the source profile from normalized per-key counts.
///
/// Each key's count is `round(count_sum / mapped_instructions)`. The leaf
/// frame gives the body entry; every frame above it opens an inlined
/// subprofile at its call site. Offsets are relative to the start line of the
/// function owning the frame, found through its debug-symbol name.
pub fn build_source_profile(
    acc: &SourceAccumulator,
    bd: &BinaryDescription,
    head: &HeadCounts,
) -> (SourceProfile, BuildStats) {
    let mut stats = BuildStats::default();
    let mut log = SaturationLog::default();
    let mut profile = SourceProfile::new();

    for (key, kc) in &acc.entries {
        let count = div_round_half_up(kc.count_sum, kc.mapped_instructions);
        if count == 0 {
            continue;
        }
        let func = bd.function(key.function);
        let stack = bd.stack(key.stack);
        let root = stack.root();
        if root.function != func.bfd_name {
            stats.root_mismatches += 1;
        }
        let root_key = LineKey::new(
            root.line.checked_sub(func.start_line).unwrap_or_else(|| {
                stats.unresolved_frames += 1;
                0
            }),
            root.discriminator,
        );

        // Walk from the root towards the leaf, collecting call sites.
        let mut path: Vec<(LineKey, &str)> = Vec::new();
        let mut site = root_key;
        let mut placed = true;
        for frame in stack.frames.iter().rev().skip(1) {
            let start = bd
                .function_by_bfd_name(&frame.function)
                .map(|i| bd.function(i).start_line);
            match start.and_then(|s| frame.line.checked_sub(s)) {
                Some(offset) => {
                    path.push((site, &frame.function));
                    site = LineKey::new(offset, frame.discriminator);
                }
                None => {
                    placed = false;
                    break;
                }
            }
        }

        let fp = profile
            .functions
            .entry(func.asm_name.clone())
            .or_insert_with(|| FunctionProfile::new(&func.asm_name, &func.bfd_name));
        if !placed {
            stats.unresolved_frames += 1;
            fp.add_body(root_key, count, &mut log);
            continue;
        }
        let mut target = fp;
        for (call_site, callee) in path {
            target = target.inlined_mut(call_site, callee);
        }
        target.add_body(site, count, &mut log);
    }

    for (name, &h) in head {
        if h == 0 {
            continue;
        }
        let Some(fi) = bd.function_by_asm_name(name) else {
            continue;
        };
        let func: &FunctionDesc = bd.function(fi);
        profile
            .functions
            .entry(name.clone())
            .or_insert_with(|| FunctionProfile::new(&func.asm_name, &func.bfd_name))
            .head_count = h;
    }
    for f in profile.functions.values_mut() {
        f.recompute_totals(&mut log);
    }
    profile
        .functions
        .retain(|_, f| f.total_count > 0 || f.head_count > 0);
    stats.saturations = log.events;
    (profile, stats)
}

/// Entry counts per function.
///
/// In LBR mode a function's head count is the number of recorded branches
/// targeting its first address. In cycles mode it is the normalized count of
/// the block containing that address.
pub fn compute_head_counts(samples: &SampleSet, bd: &BinaryDescription) -> HeadCounts {
    match samples.mode {
        Mode::Lbr => lbr::entry_counts(samples, bd),
        Mode::Cycles => {
            let ap = build_address_profile(samples, bd).expect("mode checked above");
            let blocks = lbr::block_counts(&ap, bd);
            bd.functions()
                .iter()
                .map(|f| {
                    let head = f
                        .blocks
                        .iter()
                        .position(|b| b.low <= f.low && f.low < b.high)
                        .map_or(0, |bi| blocks.get(&f.asm_name, bi));
                    (f.asm_name.clone(), head)
                })
                .collect()
        }
    }
}
