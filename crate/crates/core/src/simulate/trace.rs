use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::program::{SyntheticProgram, Terminator};
use super::{LAUNCH_ADDR, LAUNCH_RETURN};
use crate::formats::BranchPair;

/// A taken branch and how many instructions had retired when it retired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TakenBranch {
    pub pair: BranchPair,
    pub retired: usize,
}

/// One run of a program: every retired instruction address in order and
/// every taken branch, starting with the launcher's call into `main`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub addrs: Vec<u64>,
    pub branches: Vec<TakenBranch>,
    /// False if the run stopped at the instruction limit before `main`
    /// returned.
    pub completed: bool,
}

#[derive(Clone)]
struct Cursor {
    function: usize,
    block: usize,
    position: usize,
    // consecutive takes of each block's back edge
    trips: Vec<u32>,
}

/// Executes `program` from `main`'s entry, choosing conditional branches
/// with a seeded RNG, for at most `max_insns` instructions.
pub fn run_trace(program: &SyntheticProgram, seed: u64, max_insns: usize) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bd = &program.binary;
    let addr_of =
        |c: &Cursor| bd.function(c.function).blocks[c.block].instructions[c.position].address;
    let fresh = |function: usize| Cursor {
        function,
        block: 0,
        position: 0,
        trips: vec![0; program.specs[function].blocks.len()],
    };

    let mut trace = Trace {
        addrs: Vec::new(),
        branches: vec![TakenBranch {
            pair: BranchPair {
                from: LAUNCH_ADDR,
                to: bd.function(0).low,
            },
            retired: 0,
        }],
        completed: false,
    };
    let mut stack: Vec<Cursor> = Vec::new();
    let mut cur = fresh(0);

    while trace.addrs.len() < max_insns {
        let addr = addr_of(&cur);
        trace.addrs.push(addr);
        let retired = trace.addrs.len();
        let spec = &program.specs[cur.function].blocks[cur.block];
        let take = |to: u64, trace: &mut Trace| {
            trace.branches.push(TakenBranch {
                pair: BranchPair { from: addr, to },
                retired,
            })
        };

        if let Some(call) = spec.call.filter(|c| c.position == cur.position) {
            take(bd.function(call.callee).low, &mut trace);
            cur.position += 1;
            stack.push(std::mem::replace(&mut cur, fresh(call.callee)));
            continue;
        }
        if cur.position + 1 < spec.instructions.len() {
            cur.position += 1;
            continue;
        }
        let next = match spec.terminator {
            Terminator::FallThrough => cur.block + 1,
            Terminator::Jump(t) => {
                take(bd.function(cur.function).blocks[t].low, &mut trace);
                t
            }
            Terminator::Branch {
                target,
                taken,
                max_trips,
            } => {
                let backward = target <= cur.block;
                let allowed = !backward || cur.trips[cur.block] < max_trips.unwrap_or(u32::MAX);
                let coin = rng.gen::<f64>() < taken;
                if allowed && coin {
                    if backward {
                        cur.trips[cur.block] += 1;
                    }
                    take(bd.function(cur.function).blocks[target].low, &mut trace);
                    target
                } else {
                    cur.block + 1
                }
            }
            Terminator::Return => match stack.pop() {
                Some(caller) => {
                    take(addr_of(&caller), &mut trace);
                    cur = caller;
                    continue;
                }
                None => {
                    take(LAUNCH_RETURN, &mut trace);
                    trace.completed = true;
                    break;
                }
            },
        };
        if next > cur.block {
            // entering a loop header from above starts a fresh loop
            for (b, blk) in program.specs[cur.function].blocks.iter().enumerate() {
                if matches!(blk.terminator, Terminator::Branch { target, .. } if target == next && b >= next)
                {
                    cur.trips[b] = 0;
                }
            }
        }
        cur.block = next;
        cur.position = 0;
    }
    trace
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{Frame, InlineStack};
    use crate::simulate::{gen_program, BlockSpec, FunctionSpec, ProgramShape, Terminator};

    fn main_with(blocks: Vec<BlockSpec>) -> SyntheticProgram {
        SyntheticProgram::assemble(vec![FunctionSpec {
            asm_name: "main".into(),
            bfd_name: "main".into(),
            file: "m.c".into(),
            start_line: 1,
            blocks,
        }])
        .unwrap()
    }

    fn block(insns: u32, terminator: Terminator) -> BlockSpec {
        BlockSpec {
            instructions: (0..insns)
                .map(|i| InlineStack::single(Frame::new("main", "m.c", 2 + i, 0)))
                .collect(),
            call: None,
            terminator,
        }
    }

    #[test]
    fn single_block_runs_its_instructions() {
        let p = main_with(vec![block(3, Terminator::Return)]);
        let t = run_trace(&p, 0, 100);
        assert_eq!(t.addrs, vec![0x40_0000, 0x40_0004, 0x40_0008]);
        assert!(t.completed);
    }

    #[test]
    fn loop_exits_after_two_iterations() {
        let p = main_with(vec![
            block(2, Terminator::FallThrough),
            block(
                2,
                Terminator::Branch {
                    target: 1,
                    taken: 1.0,
                    max_trips: Some(1),
                },
            ),
            block(1, Terminator::Return),
        ]);
        let t = run_trace(&p, 3, 100);
        assert_eq!(
            t.addrs,
            vec![0x40_0000, 0x40_0004, 0x40_0008, 0x40_000c, 0x40_0008, 0x40_000c, 0x40_0010]
        );
        let pairs: Vec<(u64, u64, usize)> = t
            .branches
            .iter()
            .map(|b| (b.pair.from, b.pair.to, b.retired))
            .collect();
        assert_eq!(
            pairs,
            vec![
                (LAUNCH_ADDR, 0x40_0000, 0),
                (0x40_000c, 0x40_0008, 4),
                (0x40_0010, LAUNCH_RETURN, 7),
            ]
        );
    }

    #[test]
    fn consecutive_addresses_follow_layout_or_branches() {
        for seed in 0..10 {
            let p = gen_program(seed, ProgramShape::new(15).with_iterations(20)).unwrap();
            let t = run_trace(&p, seed, 200_000);
            assert!(t.completed);
            assert_eq!(t.branches[0].pair.to, t.addrs[0]);
            let mut next_branch = 1;
            for (i, w) in t.addrs.windows(2).enumerate() {
                if next_branch < t.branches.len() && t.branches[next_branch].retired == i + 1 {
                    let b = t.branches[next_branch].pair;
                    assert_eq!((b.from, b.to), (w[0], w[1]));
                    next_branch += 1;
                } else {
                    assert_eq!(w[1], w[0] + 4, "at {i}");
                }
            }
            assert_eq!(next_branch, t.branches.len() - 1);
            assert_eq!(t.branches.last().unwrap().pair.to, LAUNCH_RETURN);
        }
    }

    #[test]
    fn instruction_limit_truncates() {
        let p = gen_program(2, ProgramShape::new(20)).unwrap();
        for max in [1, 5, 1000] {
            let t = run_trace(&p, 2, max);
            assert!(t.addrs.len() <= max);
        }
        assert!(!run_trace(&p, 2, 1).completed);
    }

    #[test]
    fn deterministic_per_seed() {
        let p = gen_program(4, ProgramShape::new(20)).unwrap();
        assert_eq!(run_trace(&p, 9, 100_000), run_trace(&p, 9, 100_000));
    }
}
