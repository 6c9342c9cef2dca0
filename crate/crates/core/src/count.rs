//! Counter arithmetic shared by every stage.
//!
//! Counts are `u64` and never wrap: additions saturate at `u64::MAX` and the
//! caller's [`SaturationLog`] records how often that happened.

/// Tally of saturated additions.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SaturationLog {
    pub events: u64,
}

impl SaturationLog {
    pub fn add(&mut self, a: u64, b: u64) -> u64 {
        match a.checked_add(b) {
            Some(sum) => sum,
            None => {
                self.events += 1;
                u64::MAX
            }
        }
    }

    pub fn add_assign(&mut self, slot: &mut u64, b: u64) {
        *slot = self.add(*slot, b);
    }
}

/// `round(numerator / denominator)` with halves rounded up.
///
/// A zero denominator yields zero.
pub fn div_round_half_up(numerator: u64, denominator: u64) -> u64 {
    if denominator == 0 {
        return 0;
    }
    let n = numerator as u128;
    let d = denominator as u128;
    ((2 * n + d) / (2 * d)) as u64
}
