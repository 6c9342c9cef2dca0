//! Basic-block and instruction counts from last-branch-record stacks.
//!
//! Between two consecutive taken branches execution is straight-line, so for
//! consecutive pairs `i`, `i + 1` of a stack every instruction in the closed
//! range `[pairs[i].to, pairs[i + 1].from]` retired exactly once.
//!
//! When the sampling period is shorter than the stack history, consecutive
//! samples share pairs. Each stack then only contributes what is new since
//! the previous sample: its newest `min(period, len - 1)` ranges and newest
//! `min(period, len)` pairs. For periods at least as long as the history
//! (every realistic setting) this is the whole stack.

use std::collections::{BTreeMap, HashMap};

use crate::attribution::AddressProfile;
use crate::count::{div_round_half_up, SaturationLog};
use crate::error::{Error, Result};
use crate::formats::{BinaryDescription, BranchPair, BranchStack, Mode, SampleSet};

/// Normalized execution count per `(function asm_name, block index)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlockProfile {
    pub counts: BTreeMap<(String, usize), u64>,
}

impl BlockProfile {
    pub fn get(&self, function: &str, block: usize) -> u64 {
        self.counts
            .get(&(function.to_string(), block))
            .copied()
            .unwrap_or(0)
    }
}

fn fresh_count(len: usize, period: u64) -> usize {
    usize::try_from(period).map_or(len, |p| p.min(len))
}

/// The pairs of `stack` not already seen by the previous sample.
pub fn fresh_pairs(stack: &BranchStack, period: u64) -> &[BranchPair] {
    let n = stack.pairs.len();
    &stack.pairs[n - fresh_count(n, period)..]
}

/// Index of the first pair starting a fresh range; ranges run from pair `i`
/// to pair `i + 1` for `i` in `first..len - 1`.
fn first_fresh_range(stack: &BranchStack, period: u64) -> usize {
    let ranges = stack.pairs.len().saturating_sub(1);
    ranges - fresh_count(ranges, period)
}

/// Counts instruction executions covered by the branch stacks.
///
/// Ranges that run backwards or whose ends fall in different functions (or
/// outside every function) are discarded and counted in `dropped_samples`.
pub fn walk_ranges(samples: &SampleSet, bd: &BinaryDescription) -> Result<AddressProfile> {
    if samples.mode != Mode::Lbr {
        return Err(Error::ModeMismatch {
            expected: Mode::Lbr,
            found: samples.mode,
        });
    }
    let all = bd.instructions();
    let mut per_insn = vec![0u64; all.len()];
    let mut dropped = 0u64;
    for stack in &samples.lbr_samples {
        for i in first_fresh_range(stack, samples.period)..stack.pairs.len().saturating_sub(1) {
            let lo = stack.pairs[i].to;
            let hi = stack.pairs[i + 1].from;
            let same_function = match (bd.function_containing(lo), bd.function_containing(hi)) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            };
            if lo > hi || !same_function {
                dropped += 1;
                continue;
            }
            let start = all.partition_point(|r| r.address < lo);
            let end = all.partition_point(|r| r.address <= hi);
            for c in &mut per_insn[start..end] {
                *c = c.saturating_add(1);
            }
        }
    }
    Ok(AddressProfile {
        counts: all
            .iter()
            .zip(per_insn)
            .filter(|(_, c)| *c > 0)
            .map(|(r, c)| (r.address, c))
            .collect(),
        dropped_samples: dropped,
    })
}

/// Per-block mean of instruction counts, rounded half up.
pub fn block_counts(ap: &AddressProfile, bd: &BinaryDescription) -> BlockProfile {
    let mut log = SaturationLog::default();
    let mut counts = BTreeMap::new();
    for f in bd.functions() {
        for (bi, b) in f.blocks.iter().enumerate() {
            let sum = b
                .instructions
                .iter()
                .fold(0u64, |acc, insn| log.add(acc, ap.get(insn.address)));
            let n = b.instructions.len() as u64;
            counts.insert((f.asm_name.clone(), bi), div_round_half_up(sum, n));
        }
    }
    BlockProfile { counts }
}

/// Gives every instruction its block's count.
pub fn expand_block_counts(bp: &BlockProfile, bd: &BinaryDescription) -> AddressProfile {
    let mut counts = BTreeMap::new();
    for f in bd.functions() {
        for (bi, b) in f.blocks.iter().enumerate() {
            let c = bp.get(&f.asm_name, bi);
            if c > 0 {
                counts.extend(b.instructions.iter().map(|i| (i.address, c)));
            }
        }
    }
    AddressProfile {
        counts,
        dropped_samples: 0,
    }
}

/// Number of branches into each function's first address, per assembler
/// name. Functions never entered map to zero.
pub fn entry_counts(samples: &SampleSet, bd: &BinaryDescription) -> BTreeMap<String, u64> {
    let entries: HashMap<u64, usize> = bd
        .functions()
        .iter()
        .enumerate()
        .map(|(i, f)| (f.low, i))
        .collect();
    let mut heads = vec![0u64; bd.functions().len()];
    for stack in &samples.lbr_samples {
        for pair in fresh_pairs(stack, samples.period) {
            if let Some(&f) = entries.get(&pair.to) {
                heads[f] = heads[f].saturating_add(1);
            }
        }
    }
    bd.functions()
        .iter()
        .zip(heads)
        .map(|(f, h)| (f.asm_name.clone(), h))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{parse_binary_desc, parse_samples};

    const BD: &str = "\
func name=f bfd=f file=f.c line=1 range=0x100-0x120
block range=0x100-0x110
insn addr=0x100 loc=f:f.c:2.0
insn addr=0x104 loc=f:f.c:2.0
insn addr=0x108 loc=f:f.c:3.0 branch
insn addr=0x10c loc=f:f.c:4.0
block range=0x110-0x118
insn addr=0x110 loc=f:f.c:5.0
insn addr=0x114 loc=f:f.c:5.0 branch
func name=g bfd=g file=g.c line=1 range=0x200-0x210
block range=0x200-0x208
insn addr=0x200 loc=g:g.c:2.0
insn addr=0x204 loc=g:g.c:2.0 branch
";

    fn lbr(period: u64, stacks: &[&str]) -> SampleSet {
        let mut text = format!("mode: lbr\nevent: BRANCH_INST_RETIRED\nperiod: {period}\n");
        for s in stacks {
            text.push_str("L ");
            text.push_str(s);
            text.push('\n');
        }
        parse_samples(&text).unwrap()
    }

    #[test]
    fn single_range() {
        let bd = parse_binary_desc(BD).unwrap();
        let ap = walk_ranges(&lbr(1, &["0xf0->0x100,0x108->0x200"]), &bd).unwrap();
        assert_eq!(
            ap.counts,
            BTreeMap::from([(0x100, 1), (0x104, 1), (0x108, 1)])
        );
        assert_eq!(ap.dropped_samples, 0);
    }

    #[test]
    fn single_pair_has_no_range() {
        let bd = parse_binary_desc(BD).unwrap();
        let ap = walk_ranges(&lbr(1, &["0xf0->0x100"]), &bd).unwrap();
        assert!(ap.counts.is_empty());
        assert_eq!(ap.dropped_samples, 0);
    }

    #[test]
    fn cross_function_and_backward_ranges_are_dropped() {
        let bd = parse_binary_desc(BD).unwrap();
        let ap = walk_ranges(&lbr(400_000, &["0xf0->0x100,0x204->0x110"]), &bd).unwrap();
        assert!(ap.counts.is_empty());
        assert_eq!(ap.dropped_samples, 1);
        let ap = walk_ranges(&lbr(400_000, &["0xf0->0x110,0x104->0x200"]), &bd).unwrap();
        assert_eq!(ap.dropped_samples, 1);
        let ap = walk_ranges(&lbr(400_000, &["0xf0->0x900,0x904->0x200"]), &bd).unwrap();
        assert_eq!(ap.dropped_samples, 1);
    }

    #[test]
    fn long_period_walks_whole_stack() {
        let bd = parse_binary_desc(BD).unwrap();
        // f entered, 0x108 jumps to 0x110, 0x114 calls g, g returns to... anywhere
        let stack = "0x1->0x100,0x108->0x110,0x114->0x200,0x204->0x300";
        let ap = walk_ranges(&lbr(400_000, &[stack]), &bd).unwrap();
        let expect: BTreeMap<u64, u64> = [0x100, 0x104, 0x108, 0x110, 0x114, 0x200, 0x204]
            .into_iter()
            .map(|a| (a, 1))
            .collect();
        assert_eq!(ap.counts, expect);
    }

    #[test]
    fn short_period_only_walks_fresh_ranges() {
        let bd = parse_binary_desc(BD).unwrap();
        // successive period-1 samples of the same history
        let s = lbr(
            1,
            &[
                "0x1->0x100",
                "0x1->0x100,0x108->0x110",
                "0x1->0x100,0x108->0x110,0x114->0x200",
            ],
        );
        let ap = walk_ranges(&s, &bd).unwrap();
        assert_eq!(ap.get(0x100), 1);
        assert_eq!(ap.get(0x110), 1);
        assert_eq!(ap.get(0x10c), 0);
        let heads = entry_counts(&s, &bd);
        assert_eq!(heads["f"], 1);
        assert_eq!(heads["g"], 1);
    }

    #[test]
    fn normalized_block_counts() {
        let bd = parse_binary_desc(BD).unwrap();
        let ap = AddressProfile {
            counts: BTreeMap::from([(0x100, 3), (0x104, 5), (0x108, 4), (0x10c, 4)]),
            dropped_samples: 0,
        };
        let bp = block_counts(&ap, &bd);
        assert_eq!(bp.get("f", 0), 4);
        assert_eq!(bp.get("f", 1), 0);
        assert_eq!(bp.get("g", 0), 0);
        // expansion is a fixpoint of normalization
        assert_eq!(block_counts(&expand_block_counts(&bp, &bd), &bd), bp);
    }

    #[test]
    fn entry_counts_by_target() {
        let bd = parse_binary_desc(BD).unwrap();
        let s = lbr(400_000, &["0x1->0x200,0x204->0x300", "0x1->0x200"]);
        let heads = entry_counts(&s, &bd);
        assert_eq!(heads["g"], 2);
        assert_eq!(heads["f"], 0);
    }
}
