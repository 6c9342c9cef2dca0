//! Source-level profiles: per-function head and total counts, a body of
//! `offset.discriminator` counters, and nested profiles for inlined callees.

mod build;
mod summary;

pub use build::{build_source_profile, compute_head_counts, BuildStats, HeadCounts};
pub use summary::{summarize, Summary};

use std::collections::BTreeMap;
use std::fmt;

use crate::count::SaturationLog;

/// Source position relative to the start line of the enclosing function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LineKey {
    pub offset: u32,
    pub discriminator: u32,
}

impl LineKey {
    pub fn new(offset: u32, discriminator: u32) -> Self {
        LineKey {
            offset,
            discriminator,
        }
    }
}

impl fmt::Display for LineKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.offset, self.discriminator)
    }
}

/// An inlined call site: where the call was, and which function was inlined.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CallsiteKey {
    pub site: LineKey,
    pub callee: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FunctionProfile {
    pub asm_name: String,
    pub bfd_name: String,
    /// Number of times the function was entered. Always 0 for inlined copies.
    pub head_count: u64,
    /// Sum of the body and of every inlined subprofile's total.
    pub total_count: u64,
    pub body: BTreeMap<LineKey, u64>,
    pub inlined: BTreeMap<CallsiteKey, FunctionProfile>,
}

impl FunctionProfile {
    pub fn new(asm_name: &str, bfd_name: &str) -> Self {
        FunctionProfile {
            asm_name: asm_name.to_string(),
            bfd_name: bfd_name.to_string(),
            ..Default::default()
        }
    }

    /// Profile of a callee inlined at some call site.
    pub fn inlined_copy(bfd_name: &str) -> Self {
        FunctionProfile::new(bfd_name, bfd_name)
    }

    /// Adds `count` to a body entry. Zero counts are not stored.
    pub fn add_body(&mut self, key: LineKey, count: u64, log: &mut SaturationLog) {
        if count == 0 {
            return;
        }
        log.add_assign(self.body.entry(key).or_insert(0), count);
    }

    /// Inlined subprofile for `callee` at `site`, created on demand.
    pub fn inlined_mut(&mut self, site: LineKey, callee: &str) -> &mut FunctionProfile {
        self.inlined
            .entry(CallsiteKey {
                site,
                callee: callee.to_string(),
            })
            .or_insert_with(|| FunctionProfile::inlined_copy(callee))
    }

    /// Recomputes `total_count` bottom-up from bodies and subprofiles.
    pub fn recompute_totals(&mut self, log: &mut SaturationLog) -> u64 {
        let mut total = 0u64;
        for &c in self.body.values() {
            total = log.add(total, c);
        }
        for sub in self.inlined.values_mut() {
            let t = sub.recompute_totals(log);
            total = log.add(total, t);
        }
        self.total_count = total;
        total
    }

    /// Whether the total-count invariant holds at every nesting level.
    pub fn totals_consistent(&self) -> bool {
        let mut expected = 0u64;
        for &c in self.body.values() {
            expected = expected.saturating_add(c);
        }
        for sub in self.inlined.values() {
            if !sub.totals_consistent() {
                return false;
            }
            expected = expected.saturating_add(sub.total_count);
        }
        expected == self.total_count
    }

    /// Sum of body counts over every nesting level.
    pub fn body_sum_recursive(&self) -> u64 {
        self.body
            .values()
            .fold(0u64, |a, &c| a.saturating_add(c))
            .saturating_add(
                self.inlined
                    .values()
                    .fold(0u64, |a, s| a.saturating_add(s.body_sum_recursive())),
            )
    }

    fn merge_from(&mut self, other: &FunctionProfile, log: &mut SaturationLog) {
        log.add_assign(&mut self.head_count, other.head_count);
        for (&key, &count) in &other.body {
            self.add_body(key, count, log);
        }
        for (key, sub) in &other.inlined {
            match self.inlined.get_mut(key) {
                Some(mine) => mine.merge_from(sub, log),
                None => {
                    self.inlined.insert(key.clone(), sub.clone());
                }
            }
        }
    }
}

/// A whole-program source profile keyed by assembler name.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceProfile {
    pub functions: BTreeMap<String, FunctionProfile>,
}

impl SourceProfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn get(&self, asm_name: &str) -> Option<&FunctionProfile> {
        self.functions.get(asm_name)
    }

    /// Sum of top-level total counts.
    pub fn total_count(&self) -> u64 {
        self.functions
            .values()
            .fold(0u64, |a, f| a.saturating_add(f.total_count))
    }

    pub fn totals_consistent(&self) -> bool {
        self.functions
            .values()
            .all(FunctionProfile::totals_consistent)
    }
}

/// Pointwise sum of two profiles over the union of their keys.
///
/// Head counts, body counters and inlined subprofiles add; totals are
/// recomputed. Additions saturate at `u64::MAX`.
pub fn merge(a: &SourceProfile, b: &SourceProfile) -> SourceProfile {
    merge_logged(a, b, &mut SaturationLog::default())
}

pub fn merge_logged(
    a: &SourceProfile,
    b: &SourceProfile,
    log: &mut SaturationLog,
) -> SourceProfile {
    let mut out = a.clone();
    for (name, fb) in &b.functions {
        match out.functions.get_mut(name) {
            Some(fa) => fa.merge_from(fb, log),
            None => {
                out.functions.insert(name.clone(), fb.clone());
            }
        }
    }
    for f in out.functions.values_mut() {
        f.recompute_totals(log);
    }
    out
}
