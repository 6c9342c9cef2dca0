use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::trace::Trace;
use crate::error::{Error, Result};
use crate::formats::{BranchStack, Mode, PcSample, SampleSet, MAX_LBR_DEPTH};

pub const CYCLES_EVENT: &str = "CPU_CLK_UNHALTED.THREAD";
pub const LBR_EVENT: &str = "BR_INST_RETIRED.NEAR_TAKEN";

/// Sampling period and its jitter: gaps between samples are drawn
/// uniformly from `[period·(1−jitter), period·(1+jitter)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub period: u64,
    pub jitter: f64,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(period: u64, jitter: f64, seed: u64) -> Self {
        SamplerConfig {
            period,
            jitter,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.period == 0 {
            return Err(Error::InvalidParams("period must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::InvalidParams(format!(
                "jitter must be in [0, 1), got {}",
                self.jitter
            )));
        }
        Ok(())
    }

    /// 1-based ordinals of the sampled events among `events`.
    fn points(&self, events: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let p = self.period as f64;
        let lo = ((p * (1.0 - self.jitter)).ceil() as u64).max(1);
        let hi = ((p * (1.0 + self.jitter)).floor() as u64).max(lo);
        let mut points = Vec::new();
        let mut next = 0u64;
        loop {
            next += if lo == hi { lo } else { rng.gen_range(lo..=hi) };
            if next > events as u64 {
                return points;
            }
            points.push(next as usize);
        }
    }
}

/// Samples the retired instruction stream: every sample records the
/// address of the instruction that overflowed the counter.
pub fn sample_cycles(trace: &Trace, config: SamplerConfig) -> Result<SampleSet> {
    config.validate()?;
    let mut set = SampleSet::new(Mode::Cycles, CYCLES_EVENT, config.period);
    set.pc_samples = config
        .points(trace.addrs.len())
        .into_iter()
        .map(|i| PcSample {
            address: trace.addrs[i - 1],
            count: 1,
        })
        .collect();
    Ok(set)
}

/// Samples the taken-branch stream, recording the last `depth` taken
/// branches at every overflow.
pub fn sample_lbr(trace: &Trace, config: SamplerConfig, depth: usize) -> Result<SampleSet> {
    config.validate()?;
    if depth == 0 || depth > MAX_LBR_DEPTH {
        return Err(Error::InvalidParams(format!(
            "depth must be in 1..={MAX_LBR_DEPTH}, got {depth}"
        )));
    }
    let mut set = SampleSet::new(Mode::Lbr, LBR_EVENT, config.period);
    set.lbr_samples = config
        .points(trace.branches.len())
        .into_iter()
        .map(|k| BranchStack {
            pairs: trace.branches[k.saturating_sub(depth)..k]
                .iter()
                .map(|b| b.pair)
                .collect(),
        })
        .collect();
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{gen_program, run_trace, ProgramShape};

    fn trace() -> Trace {
        let p = gen_program(5, ProgramShape::new(10)).unwrap();
        run_trace(&p, 5, 100_000)
    }

    #[test]
    fn fixed_period_samples_every_pth_instruction() {
        let t = trace();
        let s = sample_cycles(&t, SamplerConfig::new(7, 0.0, 1)).unwrap();
        assert_eq!(s.pc_samples.len(), t.addrs.len() / 7);
        assert_eq!(s.pc_samples[0].address, t.addrs[6]);
    }

    #[test]
    fn period_one_lbr_is_lossless() {
        let t = trace();
        let s = sample_lbr(&t, SamplerConfig::new(1, 0.0, 1), 16).unwrap();
        assert_eq!(s.lbr_samples.len(), t.branches.len());
        assert_eq!(s.lbr_samples[0].pairs.len(), 1);
        assert_eq!(
            s.lbr_samples.last().unwrap().pairs.len(),
            16.min(t.branches.len())
        );
    }

    #[test]
    fn jittered_gaps_stay_in_range() {
        let c = SamplerConfig::new(100, 0.2, 3);
        let pts = c.points(1_000_000);
        assert!(pts.windows(2).all(|w| (80..=120).contains(&(w[1] - w[0]))));
        assert!(pts.windows(2).any(|w| w[1] - w[0] != 100));
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let t = trace();
        assert!(sample_cycles(&t, SamplerConfig::new(0, 0.0, 1)).is_err());
        assert!(sample_cycles(&t, SamplerConfig::new(10, 1.0, 1)).is_err());
        assert!(sample_lbr(&t, SamplerConfig::new(10, 0.0, 1), 17).is_err());
        assert!(sample_lbr(&t, SamplerConfig::new(10, 0.0, 1), 0).is_err());
    }
}
