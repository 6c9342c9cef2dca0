//! Mapping sampled addresses to instructions and source keys.

use std::collections::BTreeMap;

use crate::count::SaturationLog;
use crate::error::{Error, Result};
use crate::formats::{BinaryDescription, InlineStack, Mode, SampleSet, StackId};

/// Per-address counts for the instructions of one binary description.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AddressProfile {
    /// Only addresses of known instructions with a nonzero count appear.
    pub counts: BTreeMap<u64, u64>,
    /// Samples (or LBR ranges) that could not be attributed.
    pub dropped_samples: u64,
}

impl AddressProfile {
    pub fn get(&self, addr: u64) -> u64 {
        self.counts.get(&addr).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().fold(0u64, |a, &c| a.saturating_add(c))
    }
}

/// The inline stack of the instruction starting exactly at `addr`.
pub fn resolve(addr: u64, bd: &BinaryDescription) -> Option<&InlineStack> {
    bd.locate(addr).map(|r| bd.stack(r.stack))
}

/// Sums cycles-mode samples per instruction address.
///
/// Samples at addresses that are not instruction starts are counted in
/// `dropped_samples`.
pub fn build_address_profile(
    samples: &SampleSet,
    bd: &BinaryDescription,
) -> Result<AddressProfile> {
    if samples.mode != Mode::Cycles {
        return Err(Error::ModeMismatch {
            expected: Mode::Cycles,
            found: samples.mode,
        });
    }
    let mut log = SaturationLog::default();
    let mut ap = AddressProfile::default();
    for s in &samples.pc_samples {
        if bd.locate(s.address).is_some() {
            log.add_assign(ap.counts.entry(s.address).or_insert(0), s.count);
        } else {
            log.add_assign(&mut ap.dropped_samples, s.count);
        }
    }
    if log.events > 0 {
        log::warn!("{} sample-count additions saturated", log.events);
    }
    Ok(ap)
}

/// A source instruction: an inline stack inside one containing function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceKey {
    pub function: usize,
    pub stack: StackId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KeyCount {
    pub count_sum: u64,
    /// Instructions of the binary carrying this key, sampled or not.
    pub mapped_instructions: u64,
}

/// Execution count and instruction count per source instruction.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceAccumulator {
    pub entries: BTreeMap<SourceKey, KeyCount>,
}

impl SourceAccumulator {
    /// Looks up an entry by containing function and inline stack.
    pub fn find(
        &self,
        bd: &BinaryDescription,
        function: &str,
        stack: &InlineStack,
    ) -> Option<KeyCount> {
        let f = bd.function_by_asm_name(function)?;
        self.entries
            .iter()
            .find(|(k, _)| k.function == f && bd.stack(k.stack) == stack)
            .map(|(_, v)| *v)
    }

    pub fn total(&self) -> u64 {
        self.entries
            .values()
            .fold(0u64, |a, k| a.saturating_add(k.count_sum))
    }
}

/// Groups instruction counts by source key. Every key of the binary is
/// present, including keys whose instructions were never sampled.
pub fn to_source_accumulator(ap: &AddressProfile, bd: &BinaryDescription) -> SourceAccumulator {
    let mut log = SaturationLog::default();
    let mut acc = SourceAccumulator::default();
    for r in bd.instructions() {
        let entry = acc
            .entries
            .entry(SourceKey {
                function: r.function,
                stack: r.stack,
            })
            .or_default();
        entry.mapped_instructions += 1;
        log.add_assign(&mut entry.count_sum, ap.get(r.address));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{parse_binary_desc, parse_samples, Frame};

    const BD: &str = "\
func name=main bfd=main file=main.c line=10 range=0x400100-0x400300
block range=0x400100-0x400110
insn addr=0x400100 loc=main:main.c:12.0
insn addr=0x400104 loc=main:main.c:12.0
insn addr=0x400108 loc=main:main.c:12.0
insn addr=0x40010c loc=main:main.c:12.0 branch
block range=0x400200-0x400210
insn addr=0x400200 loc=hot:inline.h:3.1;main:main.c:20.0
insn addr=0x400204 loc=hot:inline.h:3.1;main:main.c:21.0
insn addr=0x400208 loc=main:main.c:22.0
";

    #[test]
    fn resolve_by_exact_address() {
        let bd = parse_binary_desc(BD).unwrap();
        assert_eq!(
            resolve(0x400100, &bd).unwrap(),
            &InlineStack::single(Frame::new("main", "main.c", 12, 0))
        );
        assert!(resolve(0x999999, &bd).is_none());
        assert!(resolve(0x400102, &bd).is_none());
        let s = resolve(0x400200, &bd).unwrap();
        assert_eq!(s.frames.len(), 2);
        assert_eq!(s.leaf(), &Frame::new("hot", "inline.h", 3, 1));
    }

    #[test]
    fn address_profile_sums_and_drops() {
        let bd = parse_binary_desc(BD).unwrap();
        let s = parse_samples(
            "mode: cycles\nevent: C\nperiod: 1\nS 0x400100 3\nS 0x400100 2\nS 0x1 1\n",
        )
        .unwrap();
        let ap = build_address_profile(&s, &bd).unwrap();
        assert_eq!(ap.counts, BTreeMap::from([(0x400100, 5)]));
        assert_eq!(ap.dropped_samples, 1);
        assert_eq!(ap.total() + ap.dropped_samples, s.total_samples());
    }

    #[test]
    fn mode_mismatch() {
        let bd = parse_binary_desc(BD).unwrap();
        let s = parse_samples("mode: lbr\nevent: B\nperiod: 1\n").unwrap();
        assert!(matches!(
            build_address_profile(&s, &bd),
            Err(Error::ModeMismatch { .. })
        ));
    }

    #[test]
    fn accumulator_counts_and_mapped() {
        let bd = parse_binary_desc(BD).unwrap();
        let s = parse_samples(
            "mode: cycles\nevent: C\nperiod: 1\nS 0x400100 3\nS 0x400104 5\nS 0x400108 4\nS 0x40010c 4\n",
        )
        .unwrap();
        let acc = to_source_accumulator(&build_address_profile(&s, &bd).unwrap(), &bd);
        let key = InlineStack::single(Frame::new("main", "main.c", 12, 0));
        assert_eq!(
            acc.find(&bd, "main", &key).unwrap(),
            KeyCount {
                count_sum: 16,
                mapped_instructions: 4
            }
        );
        let cold = InlineStack::single(Frame::new("main", "main.c", 22, 0));
        assert_eq!(
            acc.find(&bd, "main", &cold).unwrap(),
            KeyCount {
                count_sum: 0,
                mapped_instructions: 1
            }
        );
        // two inlined copies of hot:inline.h:3.1 stay apart
        assert_eq!(acc.entries.len(), 4);
    }
}
