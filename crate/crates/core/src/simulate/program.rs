use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{INSN_SIZE, TEXT_BASE};
use crate::annotate::{Cfg, CfgBlock, Edge};
use crate::error::{Error, Result};
use crate::formats::{
    BinaryDescription, BlockDesc, Frame, FunctionDesc, InlineStack, InstructionDesc,
};
use crate::profile::LineKey;

/// How control leaves a block once its last instruction retires.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terminator {
    /// Falls into the next block without a taken branch.
    FallThrough,
    /// Unconditional taken branch.
    Jump(usize),
    /// Conditional branch: taken with probability `taken`, otherwise falls
    /// through. A branch to an earlier (or the same) block is a loop back
    /// edge and can be limited to `max_trips` consecutive takes; the counter
    /// resets whenever the loop header is entered from an earlier block.
    Branch {
        target: usize,
        taken: f64,
        max_trips: Option<u32>,
    },
    /// Returns to the caller. Only the last block of a function returns.
    Return,
}

/// A call from instruction `position` of a block to function `callee`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Call {
    pub position: usize,
    pub callee: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    /// Inline stack of each instruction, in address order.
    pub instructions: Vec<InlineStack>,
    pub call: Option<Call>,
    pub terminator: Terminator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSpec {
    pub asm_name: String,
    pub bfd_name: String,
    pub file: String,
    pub start_line: u32,
    pub blocks: Vec<BlockSpec>,
}

/// A laid-out program: the binary description, one CFG per function (block
/// `i` of the CFG is block `i` of the function) and the control behavior
/// the trace runner follows.
#[derive(Debug, Clone)]
pub struct SyntheticProgram {
    pub binary: BinaryDescription,
    pub cfgs: Vec<Cfg>,
    pub specs: Vec<FunctionSpec>,
}

impl SyntheticProgram {
    /// Lays functions out from [`TEXT_BASE`], each aligned to 256 bytes.
    pub fn assemble(specs: Vec<FunctionSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidParams("a program needs a function".into()));
        }
        let mut functions = Vec::with_capacity(specs.len());
        let mut cfgs = Vec::with_capacity(specs.len());
        let mut base = TEXT_BASE;
        for (fi, spec) in specs.iter().enumerate() {
            check_spec(spec, specs.len())?;
            let mut addr = base;
            let mut blocks = Vec::with_capacity(spec.blocks.len());
            for block in &spec.blocks {
                let low = addr;
                let last = block.instructions.len() - 1;
                let instructions = block
                    .instructions
                    .iter()
                    .enumerate()
                    .map(|(i, stack)| {
                        let is_branch = block.call.is_some_and(|c| c.position == i)
                            || (i == last && !matches!(block.terminator, Terminator::FallThrough));
                        let insn = InstructionDesc {
                            address: addr,
                            source_key: stack.clone(),
                            is_branch,
                        };
                        addr += INSN_SIZE;
                        insn
                    })
                    .collect();
                blocks.push(BlockDesc {
                    low,
                    high: addr,
                    instructions,
                });
            }
            functions.push(FunctionDesc {
                asm_name: spec.asm_name.clone(),
                bfd_name: spec.bfd_name.clone(),
                file: spec.file.clone(),
                start_line: spec.start_line,
                low: base,
                high: addr,
                blocks,
            });
            cfgs.push(cfg_of(spec));
            cfgs[fi].validate()?;
            base = (addr + 0xff) & !0xff;
        }
        let binary = BinaryDescription::new(functions)?;
        Ok(SyntheticProgram {
            binary,
            cfgs,
            specs,
        })
    }

    /// Branch probability of each CFG edge of function `f`, aligned with
    /// `cfgs[f].edges`.
    pub fn edge_probabilities(&self, f: usize) -> Vec<f64> {
        let mut probs = Vec::new();
        for block in &self.specs[f].blocks {
            match block.terminator {
                Terminator::FallThrough | Terminator::Jump(_) => probs.push(1.0),
                Terminator::Branch { taken, .. } => {
                    probs.push(1.0 - taken);
                    probs.push(taken);
                }
                Terminator::Return => {}
            }
        }
        probs
    }
}

fn check_spec(spec: &FunctionSpec, functions: usize) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidParams(format!("{}: {msg}", spec.asm_name)));
    let n = spec.blocks.len();
    if n == 0 {
        return bad("no blocks".into());
    }
    for (b, block) in spec.blocks.iter().enumerate() {
        if block.instructions.is_empty() {
            return bad(format!("block {b} is empty"));
        }
        if let Some(call) = block.call {
            if call.position + 1 >= block.instructions.len() {
                return bad(format!(
                    "call in block {b} must not be its last instruction"
                ));
            }
            if call.callee >= functions {
                return bad(format!("block {b} calls unknown function {}", call.callee));
            }
        }
        let is_last = b + 1 == n;
        match block.terminator {
            Terminator::Return if !is_last => return bad(format!("block {b} returns early")),
            Terminator::Return => {}
            _ if is_last => return bad("last block must return".into()),
            Terminator::FallThrough => {}
            Terminator::Jump(t) if t > b && t < n => {}
            Terminator::Jump(t) => return bad(format!("block {b} jumps to {t}")),
            Terminator::Branch { target, taken, .. } => {
                if target == 0 || target >= n || !(0.0..=1.0).contains(&taken) {
                    return bad(format!("block {b} has a bad branch to {target}"));
                }
            }
        }
    }
    Ok(())
}

fn cfg_of(spec: &FunctionSpec) -> Cfg {
    let n = spec.blocks.len();
    let mut edges = Vec::new();
    let mut blocks = Vec::with_capacity(n);
    for (b, block) in spec.blocks.iter().enumerate() {
        let id = b as u32;
        match block.terminator {
            Terminator::FallThrough => edges.push(Edge {
                src: id,
                dst: id + 1,
            }),
            Terminator::Jump(t) => edges.push(Edge {
                src: id,
                dst: t as u32,
            }),
            Terminator::Branch { target, .. } => {
                edges.push(Edge {
                    src: id,
                    dst: id + 1,
                });
                edges.push(Edge {
                    src: id,
                    dst: target as u32,
                });
            }
            Terminator::Return => {}
        }
        let mut statements: Vec<LineKey> = Vec::new();
        for stack in &block.instructions {
            let frame = stack.leaf();
            if stack.is_inlined() || frame.function != spec.bfd_name {
                continue;
            }
            let key = LineKey::new(
                frame.line.saturating_sub(spec.start_line),
                frame.discriminator,
            );
            if !statements.contains(&key) {
                statements.push(key);
            }
        }
        blocks.push(CfgBlock { id, statements });
    }
    Cfg {
        function: spec.asm_name.clone(),
        start_line: spec.start_line,
        blocks,
        edges,
        entry: 0,
        exit: n as u32 - 1,
    }
}

/// Size parameters for [`gen_program`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProgramShape {
    /// Blocks in `main`; other functions get at most this many.
    pub blocks: usize,
    pub loops: bool,
    pub calls: bool,
    /// With three or more blocks, `main` repeats blocks `1..n-1` this many
    /// times, giving traces enough volume for statistics.
    pub iterations: u32,
}

impl ProgramShape {
    pub fn new(blocks: usize) -> Self {
        ProgramShape {
            blocks,
            loops: true,
            calls: true,
            iterations: 1,
        }
    }

    pub fn with_iterations(mut self, iterations: u32) -> Self {
        self.iterations = iterations;
        self
    }
}

const HOT: usize = 1;
const TINY: usize = 2;

struct Names {
    asm: String,
    bfd: String,
    file: String,
    start_line: u32,
}

/// Generates a random program.
///
/// Function 0 is `main`, function 1 (`hot`) is also inlined twice into
/// `main` at distinct call sites, and function 2 (`tiny`) is inlined into
/// those copies, so the program always contains one source line reached
/// through two different inline stacks. The first block of every function
/// holds two statements on one line told apart by their discriminators.
/// Calls only go to functions with a higher index, so there is no recursion.
pub fn gen_program(seed: u64, shape: ProgramShape) -> Result<SyntheticProgram> {
    if shape.blocks == 0 {
        return Err(Error::InvalidParams(
            "programs need at least one block".into(),
        ));
    }
    if shape.iterations == 0 {
        return Err(Error::InvalidParams("iterations must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extra = rng.gen_range(0..=2usize);
    let mut names = vec![
        Names {
            asm: "main".into(),
            bfd: "main".into(),
            file: "main.c".into(),
            start_line: 10,
        },
        Names {
            asm: "_Z3hotv".into(),
            bfd: "hot".into(),
            file: "hot.h".into(),
            start_line: 1,
        },
        Names {
            asm: "_Z4tinyv".into(),
            bfd: "tiny".into(),
            file: "tiny.h".into(),
            start_line: 1,
        },
    ];
    for k in 0..extra {
        let bfd = format!("work{k}");
        names.push(Names {
            asm: format!("_Z{}{}v", bfd.len(), bfd),
            file: format!("{bfd}.c"),
            bfd,
            start_line: rng.gen_range(1..200),
        });
    }
    let sizes: Vec<usize> = (0..names.len())
        .map(|f| match f {
            0 => shape.blocks,
            HOT => shape.blocks.min(2),
            TINY => 1,
            _ => rng.gen_range(1..=shape.blocks.min(6)),
        })
        .collect();

    let inline_blocks = if shape.blocks == 1 {
        [0, 0]
    } else {
        let a = rng.gen_range(0..shape.blocks);
        let mut b = rng.gen_range(0..shape.blocks - 1);
        if b >= a {
            b += 1;
        }
        [a, b]
    };

    let functions = names.len();
    let specs = names
        .iter()
        .enumerate()
        .map(|(f, n)| {
            let size = sizes[f];
            let terminators = if f == 0 && size >= 3 && shape.iterations > 1 {
                // no forward branch may skip the latch
                let mut t = gen_terminators(&mut rng, size - 1, shape.loops);
                t[size - 2] = Terminator::Branch {
                    target: 1,
                    taken: 1.0,
                    max_trips: Some(shape.iterations - 1),
                };
                t.push(Terminator::Return);
                t
            } else {
                gen_terminators(&mut rng, size, shape.loops)
            };
            let mut line = n.start_line + 1;
            let blocks = terminators
                .into_iter()
                .enumerate()
                .map(|(b, terminator)| {
                    let own = |line: u32, disc: u32| {
                        InlineStack::single(Frame::new(&n.bfd, &n.file, line, disc))
                    };
                    let mut instructions = Vec::new();
                    let first_line = line;
                    line += 1;
                    for _ in 0..rng.gen_range(1..=3) {
                        instructions.push(own(first_line, 0));
                    }
                    if f == 0 {
                        for _ in inline_blocks.iter().filter(|&&ib| ib == b) {
                            let site = Frame::new(&n.bfd, &n.file, line, 0);
                            line += 1;
                            let hot_leaf = Frame::new("hot", "hot.h", 2, 0);
                            instructions
                                .push(InlineStack::new(vec![hot_leaf.clone(), site.clone()]));
                            instructions.push(InlineStack::new(vec![hot_leaf, site.clone()]));
                            instructions.push(InlineStack::new(vec![
                                Frame::new("tiny", "tiny.h", 2, 0),
                                Frame::new("hot", "hot.h", 3, 0),
                                site,
                            ]));
                        }
                    }
                    let mut call = None;
                    if shape.calls && f + 1 < functions && rng.gen_bool(0.3) {
                        call = Some(Call {
                            position: instructions.len(),
                            callee: rng.gen_range(f + 1..functions),
                        });
                        instructions.push(own(line, 0));
                        line += 1;
                    }
                    let (tail_line, tail_disc) = if b == 0 {
                        (first_line, 1)
                    } else {
                        line += 1;
                        (line - 1, 0)
                    };
                    for _ in 0..rng.gen_range(1..=2) {
                        instructions.push(own(tail_line, tail_disc));
                    }
                    BlockSpec {
                        instructions,
                        call,
                        terminator,
                    }
                })
                .collect();
            FunctionSpec {
                asm_name: n.asm.clone(),
                bfd_name: n.bfd.clone(),
                file: n.file.clone(),
                start_line: n.start_line,
                blocks,
            }
        })
        .collect();
    SyntheticProgram::assemble(specs)
}

fn gen_terminators(rng: &mut ChaCha8Rng, n: usize, loops: bool) -> Vec<Terminator> {
    let mut terms: Vec<Terminator> = (0..n)
        .map(|b| {
            if b + 1 == n {
                return Terminator::Return;
            }
            let has_forward = b + 2 < n;
            let roll: f64 = rng.gen();
            if roll < 0.35 {
                Terminator::FallThrough
            } else if roll < 0.8 {
                if loops && b >= 1 && rng.gen_bool(0.3) {
                    Terminator::Branch {
                        target: rng.gen_range(1..=b),
                        taken: rng.gen_range(0.3..0.9),
                        max_trips: Some(rng.gen_range(1..=4)),
                    }
                } else if has_forward {
                    Terminator::Branch {
                        target: rng.gen_range(b + 2..n),
                        taken: rng.gen_range(0.1..0.9),
                        max_trips: None,
                    }
                } else {
                    Terminator::FallThrough
                }
            } else if has_forward {
                Terminator::Jump(rng.gen_range(b + 2..n))
            } else {
                Terminator::FallThrough
            }
        })
        .collect();

    // every block needs a forward predecessor
    for j in 1..n {
        let reached = (0..j).any(|i| match terms[i] {
            Terminator::FallThrough | Terminator::Branch { .. } => i + 1 == j,
            Terminator::Jump(t) => t == j,
            Terminator::Return => false,
        } || matches!(terms[i], Terminator::Branch { target, .. } if target == j && i < j));
        if !reached {
            if let Terminator::Jump(t) = terms[j - 1] {
                terms[j - 1] = Terminator::Branch {
                    target: t,
                    taken: 0.5,
                    max_trips: None,
                };
            }
        }
    }
    terms
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn same_seed_same_program() {
        let a = gen_program(7, ProgramShape::new(12)).unwrap();
        let b = gen_program(7, ProgramShape::new(12)).unwrap();
        assert_eq!(a.binary, b.binary);
        assert_eq!(a.cfgs, b.cfgs);
        let c = gen_program(8, ProgramShape::new(12)).unwrap();
        assert_ne!(a.binary, c.binary);
    }

    #[test]
    fn three_block_program_is_valid() {
        for seed in 0..20 {
            let p = gen_program(seed, ProgramShape::new(3)).unwrap();
            assert_eq!(p.binary.function(0).blocks.len(), 3);
            let text = crate::formats::emit_binary_desc(&p.binary);
            assert_eq!(crate::formats::parse_binary_desc(&text).unwrap(), p.binary);
            for cfg in &p.cfgs {
                cfg.validate().unwrap();
            }
        }
    }

    #[test]
    fn zero_blocks_is_rejected() {
        assert!(matches!(
            gen_program(1, ProgramShape::new(0)),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn inline_and_discriminator_patterns() {
        for blocks in [1, 2, 5, 30] {
            let p = gen_program(blocks as u64, ProgramShape::new(blocks)).unwrap();
            let bd = &p.binary;
            let main = bd.function_by_asm_name("main").unwrap();
            let hot_leaf = Frame::new("hot", "hot.h", 2, 0);
            let stacks: HashSet<&InlineStack> = bd
                .instructions()
                .iter()
                .filter(|r| r.function == main)
                .map(|r| bd.stack(r.stack))
                .filter(|s| s.is_inlined() && s.leaf() == &hot_leaf)
                .collect();
            assert!(stacks.len() >= 2, "{blocks} blocks");
            let first = &bd.function(main).blocks[0].instructions;
            let lines: HashSet<(u32, u32)> = first
                .iter()
                .filter(|i| !i.source_key.is_inlined())
                .map(|i| (i.source_key.leaf().line, i.source_key.leaf().discriminator))
                .collect();
            let first_line = first[0].source_key.leaf().line;
            assert!(lines.contains(&(first_line, 0)) && lines.contains(&(first_line, 1)));
        }
    }

    #[test]
    fn probabilities_align_with_edges() {
        let p = gen_program(3, ProgramShape::new(20)).unwrap();
        for (f, cfg) in p.cfgs.iter().enumerate() {
            let probs = p.edge_probabilities(f);
            assert_eq!(probs.len(), cfg.edges.len());
            for b in &cfg.blocks {
                let out: f64 = cfg
                    .edges
                    .iter()
                    .zip(&probs)
                    .filter(|(e, _)| e.src == b.id)
                    .map(|(_, p)| p)
                    .sum();
                if b.id != cfg.exit {
                    assert!((out - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
