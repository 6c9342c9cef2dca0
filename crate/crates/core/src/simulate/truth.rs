use std::collections::BTreeMap;

use super::program::{SyntheticProgram, Terminator};
use super::trace::Trace;
use crate::attribution::{to_source_accumulator, AddressProfile};
use crate::formats::BinaryDescription;
use crate::profile::{build_source_profile, SourceProfile};

/// Exact execution counts of one trace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    /// Entries of each function, by assembler name.
    pub heads: BTreeMap<String, u64>,
    /// Executions of every block, zeros included.
    pub blocks: BTreeMap<(String, usize), u64>,
    /// Traversals of every CFG edge, aligned with the function's CFG edges.
    pub edges: BTreeMap<String, Vec<u64>>,
    /// Retirements of every executed instruction.
    pub addresses: BTreeMap<u64, u64>,
}

impl GroundTruth {
    pub fn block(&self, function: &str, block: usize) -> u64 {
        self.blocks
            .get(&(function.to_string(), block))
            .copied()
            .unwrap_or(0)
    }
}

pub fn ground_truth(program: &SyntheticProgram, trace: &Trace) -> GroundTruth {
    let bd = &program.binary;
    let mut truth = GroundTruth::default();
    for (f, func) in bd.functions().iter().enumerate() {
        truth.heads.insert(func.asm_name.clone(), 0);
        for b in 0..func.blocks.len() {
            truth.blocks.insert((func.asm_name.clone(), b), 0);
        }
        truth
            .edges
            .insert(func.asm_name.clone(), vec![0; program.cfgs[f].edges.len()]);
    }
    let mut prev: Option<crate::formats::InsnRef> = None;
    for &addr in &trace.addrs {
        *truth.addresses.entry(addr).or_default() += 1;
        let here = bd.locate(addr).expect("trace addresses are laid out");
        let name = &bd.function(here.function).asm_name;
        if here.position == 0 {
            *truth.blocks.get_mut(&(name.clone(), here.block)).unwrap() += 1;
            if here.block == 0 {
                *truth.heads.get_mut(name).unwrap() += 1;
            }
        }
        if let Some(p) = prev {
            let spec = &program.specs[p.function].blocks[p.block];
            let last = p.position + 1 == spec.instructions.len();
            if last && spec.terminator != Terminator::Return {
                debug_assert_eq!(p.function, here.function);
                let cfg = &program.cfgs[p.function];
                let i = cfg
                    .edges
                    .iter()
                    .position(|e| e.src as usize == p.block && e.dst as usize == here.block)
                    .expect("edge exists");
                truth.edges.get_mut(&cfg.function).unwrap()[i] += 1;
            }
        }
        prev = Some(here);
    }
    truth
}

/// The profile an ideal converter would produce: every instruction counted
/// exactly, heads taken from the true entry counts.
pub fn oracle_profile(bd: &BinaryDescription, truth: &GroundTruth) -> SourceProfile {
    let ap = AddressProfile {
        counts: truth.addresses.clone(),
        dropped_samples: 0,
    };
    let acc = to_source_accumulator(&ap, bd);
    build_source_profile(&acc, bd, &truth.heads).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{gen_program, run_trace, ProgramShape};

    #[test]
    fn flow_is_conserved() {
        for seed in 0..10 {
            let p = gen_program(seed, ProgramShape::new(12)).unwrap();
            let t = run_trace(&p, seed, 500_000);
            let truth = ground_truth(&p, &t);
            assert_eq!(truth.addresses.values().sum::<u64>(), t.addrs.len() as u64);
            for cfg in &p.cfgs {
                let edges = &truth.edges[&cfg.function];
                for b in &cfg.blocks {
                    let count = truth.block(&cfg.function, b.id as usize);
                    let inflow: u64 = cfg
                        .edges
                        .iter()
                        .zip(edges)
                        .filter(|(e, _)| e.dst == b.id)
                        .map(|(_, c)| c)
                        .sum();
                    let outflow: u64 = cfg
                        .edges
                        .iter()
                        .zip(edges)
                        .filter(|(e, _)| e.src == b.id)
                        .map(|(_, c)| c)
                        .sum();
                    if b.id == cfg.entry {
                        assert_eq!(count, truth.heads[&cfg.function] + inflow);
                    } else {
                        assert_eq!(count, inflow);
                    }
                    if b.id != cfg.exit {
                        assert_eq!(count, outflow);
                    }
                }
            }
        }
    }
}
