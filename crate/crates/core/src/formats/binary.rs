use std::collections::HashMap;
use std::fmt::{self, Write as _};

use super::{content_lines, key_values, parse_dec, parse_hex, parse_range, required};
use crate::error::{Error, ParseError, ValidationError};

/// One source location in an inline stack.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frame {
    /// Debug-symbol (BFD) name of the function this location belongs to.
    pub function: String,
    pub file: String,
    pub line: u32,
    pub discriminator: u32,
}

impl Frame {
    pub fn new(function: &str, file: &str, line: u32, discriminator: u32) -> Self {
        Frame {
            function: function.to_string(),
            file: file.to_string(),
            line,
            discriminator,
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}.{}",
            self.function, self.file, self.line, self.discriminator
        )
    }
}

/// Leaf-first chain of source locations identifying an instruction.
///
/// `frames[0]` is the instruction's own location; each following frame is the
/// call site into which the previous one was inlined. Two copies of the same
/// inlined statement share a leaf but differ further up the stack.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InlineStack {
    pub frames: Vec<Frame>,
}

impl InlineStack {
    pub fn new(frames: Vec<Frame>) -> Self {
        InlineStack { frames }
    }

    pub fn single(frame: Frame) -> Self {
        InlineStack {
            frames: vec![frame],
        }
    }

    pub fn leaf(&self) -> &Frame {
        &self.frames[0]
    }

    /// The outermost frame, which belongs to the function containing the code.
    pub fn root(&self) -> &Frame {
        &self.frames[self.frames.len() - 1]
    }

    pub fn is_inlined(&self) -> bool {
        self.frames.len() > 1
    }
}

impl fmt::Display for InlineStack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, frame) in self.frames.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{frame}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionDesc {
    pub address: u64,
    pub source_key: InlineStack,
    pub is_branch: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockDesc {
    pub low: u64,
    pub high: u64,
    pub instructions: Vec<InstructionDesc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDesc {
    /// Unique assembler (mangled) name from the symbol table.
    pub asm_name: String,
    /// Name used for this function in inline stacks.
    pub bfd_name: String,
    pub file: String,
    pub start_line: u32,
    pub low: u64,
    pub high: u64,
    pub blocks: Vec<BlockDesc>,
}

impl FunctionDesc {
    pub fn contains(&self, addr: u64) -> bool {
        self.low <= addr && addr < self.high
    }

    pub fn instruction_count(&self) -> usize {
        self.blocks.iter().map(|b| b.instructions.len()).sum()
    }
}

/// Interned inline stack handle, local to one [`BinaryDescription`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StackId(pub u32);

/// Position of one instruction inside a [`BinaryDescription`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InsnRef {
    pub address: u64,
    pub function: usize,
    pub block: usize,
    pub position: usize,
    pub stack: StackId,
}

/// The debug-symbol view of an executable: functions, their basic blocks and
/// the inline stack of every instruction.
///
/// Construction validates the layout and builds an address index, so every
/// value of this type satisfies the range invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryDescription {
    functions: Vec<FunctionDesc>,
    stacks: Vec<InlineStack>,
    // all instructions, sorted by address
    index: Vec<InsnRef>,
    // function indices sorted by low address
    by_address: Vec<usize>,
    by_asm: HashMap<String, usize>,
    by_bfd: HashMap<String, usize>,
}

impl BinaryDescription {
    pub fn new(functions: Vec<FunctionDesc>) -> Result<Self, ValidationError> {
        let mut by_asm = HashMap::new();
        let mut by_bfd = HashMap::new();
        for (i, f) in functions.iter().enumerate() {
            if by_asm.insert(f.asm_name.clone(), i).is_some() {
                return Err(ValidationError::DuplicateAsmName(f.asm_name.clone()));
            }
            by_bfd.entry(f.bfd_name.clone()).or_insert(i);
        }

        let mut by_address: Vec<usize> = (0..functions.len()).collect();
        by_address.sort_by_key(|&i| functions[i].low);
        for pair in by_address.windows(2) {
            let (a, b) = (&functions[pair[0]], &functions[pair[1]]);
            if b.low < a.high {
                return Err(ValidationError::OverlappingFunctions {
                    first: a.asm_name.clone(),
                    second: b.asm_name.clone(),
                });
            }
        }

        let mut stack_ids: HashMap<&InlineStack, StackId> = HashMap::new();
        let mut stacks = Vec::new();
        let mut index = Vec::new();
        for (fi, f) in functions.iter().enumerate() {
            let mut prev_high = None;
            for (bi, b) in f.blocks.iter().enumerate() {
                if b.low < f.low || b.high > f.high || b.low >= b.high {
                    return Err(ValidationError::BlockOutsideFunction {
                        function: f.asm_name.clone(),
                        lo: b.low,
                        hi: b.high,
                    });
                }
                if let Some((plo, phi)) = prev_high {
                    if b.low < phi {
                        return Err(ValidationError::OverlappingBlocks {
                            function: f.asm_name.clone(),
                            first: plo,
                            second: b.low,
                        });
                    }
                }
                prev_high = Some((b.low, b.high));
                if b.instructions.is_empty() {
                    return Err(ValidationError::EmptyBlock {
                        function: f.asm_name.clone(),
                        lo: b.low,
                        hi: b.high,
                    });
                }
                let mut prev_addr = None;
                for (pi, insn) in b.instructions.iter().enumerate() {
                    if insn.address < b.low || insn.address >= b.high {
                        return Err(ValidationError::InstructionOutsideBlock {
                            addr: insn.address,
                        });
                    }
                    if prev_addr.is_some_and(|p| insn.address <= p) {
                        return Err(ValidationError::UnorderedInstruction { addr: insn.address });
                    }
                    prev_addr = Some(insn.address);
                    let id = *stack_ids.entry(&insn.source_key).or_insert_with(|| {
                        stacks.push(insn.source_key.clone());
                        StackId(stacks.len() as u32 - 1)
                    });
                    index.push(InsnRef {
                        address: insn.address,
                        function: fi,
                        block: bi,
                        position: pi,
                        stack: id,
                    });
                }
            }
        }
        index.sort_by_key(|r| r.address);

        Ok(BinaryDescription {
            functions,
            stacks,
            index,
            by_address,
            by_asm,
            by_bfd,
        })
    }

    pub fn functions(&self) -> &[FunctionDesc] {
        &self.functions
    }

    pub fn function(&self, index: usize) -> &FunctionDesc {
        &self.functions[index]
    }

    pub fn function_by_asm_name(&self, name: &str) -> Option<usize> {
        self.by_asm.get(name).copied()
    }

    /// First declared function with this debug-symbol name.
    pub fn function_by_bfd_name(&self, name: &str) -> Option<usize> {
        self.by_bfd.get(name).copied()
    }

    /// Index of the function whose address range contains `addr`.
    pub fn function_containing(&self, addr: u64) -> Option<usize> {
        let pos = self
            .by_address
            .partition_point(|&i| self.functions[i].low <= addr);
        let candidate = *self.by_address.get(pos.checked_sub(1)?)?;
        self.functions[candidate]
            .contains(addr)
            .then_some(candidate)
    }

    /// The instruction starting exactly at `addr`.
    pub fn locate(&self, addr: u64) -> Option<InsnRef> {
        self.index
            .binary_search_by_key(&addr, |r| r.address)
            .ok()
            .map(|i| self.index[i])
    }

    /// Instructions whose address lies in the closed range `[lo, hi]`.
    pub fn instructions_between(&self, lo: u64, hi: u64) -> &[InsnRef] {
        let start = self.index.partition_point(|r| r.address < lo);
        let end = self.index.partition_point(|r| r.address <= hi);
        &self.index[start..end.max(start)]
    }

    pub fn instructions(&self) -> &[InsnRef] {
        &self.index
    }

    pub fn instruction_count(&self) -> usize {
        self.index.len()
    }

    pub fn stack(&self, id: StackId) -> &InlineStack {
        &self.stacks[id.0 as usize]
    }

    pub fn stack_count(&self) -> usize {
        self.stacks.len()
    }

    pub fn into_functions(self) -> Vec<FunctionDesc> {
        self.functions
    }
}

fn parse_frame(token: &str, line_no: usize, line: &str) -> Result<Frame, ParseError> {
    let bad = || ParseError::new(line_no, line, format!("bad frame `{token}`"));
    let (rest, line_disc) = token.rsplit_once(':').ok_or_else(bad)?;
    let (function, file) = rest.rsplit_once(':').ok_or_else(bad)?;
    let (src_line, disc) = line_disc.split_once('.').ok_or_else(bad)?;
    if function.is_empty() || file.is_empty() {
        return Err(bad());
    }
    let src_line: u32 = parse_dec(src_line, "line", line_no, line)?;
    if src_line == 0 {
        return Err(ParseError::new(line_no, line, "line numbers start at 1"));
    }
    Ok(Frame {
        function: function.to_string(),
        file: file.to_string(),
        line: src_line,
        discriminator: parse_dec(disc, "discriminator", line_no, line)?,
    })
}

/// Parses a binary description:
///
/// ```text
/// func name=<asm> bfd=<bfd> file=<path> line=<n> range=<0xlo>-<0xhi>
/// block range=<0xlo>-<0xhi>
/// insn addr=<0xa> loc=<bfd>:<file>:<line>.<disc>[;...] [branch]
/// ```
///
/// Blocks belong to the preceding `func`, instructions to the preceding
/// `block`.
pub fn parse_binary_desc(text: &str) -> Result<BinaryDescription, Error> {
    let mut functions: Vec<FunctionDesc> = Vec::new();
    for (line_no, line) in content_lines(text) {
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("func") => {
                let (kv, flags) = key_values(
                    tokens,
                    &["name", "bfd", "file", "line", "range"],
                    line_no,
                    line,
                )?;
                if let Some(flag) = flags.first() {
                    return Err(
                        ParseError::new(line_no, line, format!("unexpected `{flag}`")).into(),
                    );
                }
                let start_line: u32 =
                    parse_dec(required(&kv, "line", line_no, line)?, "line", line_no, line)?;
                if start_line == 0 {
                    return Err(ParseError::new(line_no, line, "line numbers start at 1").into());
                }
                let (low, high) =
                    parse_range(required(&kv, "range", line_no, line)?, line_no, line)?;
                functions.push(FunctionDesc {
                    asm_name: required(&kv, "name", line_no, line)?.to_string(),
                    bfd_name: required(&kv, "bfd", line_no, line)?.to_string(),
                    file: required(&kv, "file", line_no, line)?.to_string(),
                    start_line,
                    low,
                    high,
                    blocks: Vec::new(),
                });
            }
            Some("block") => {
                let (kv, flags) = key_values(tokens, &["range"], line_no, line)?;
                if let Some(flag) = flags.first() {
                    return Err(
                        ParseError::new(line_no, line, format!("unexpected `{flag}`")).into(),
                    );
                }
                let (low, high) =
                    parse_range(required(&kv, "range", line_no, line)?, line_no, line)?;
                let func = functions
                    .last_mut()
                    .ok_or_else(|| ParseError::new(line_no, line, "block before any func"))?;
                func.blocks.push(BlockDesc {
                    low,
                    high,
                    instructions: Vec::new(),
                });
            }
            Some("insn") => {
                let (kv, flags) = key_values(tokens, &["addr", "loc"], line_no, line)?;
                let is_branch = match flags.as_slice() {
                    [] => false,
                    ["branch"] => true,
                    [other, ..] => {
                        return Err(
                            ParseError::new(line_no, line, format!("unexpected `{other}`")).into(),
                        )
                    }
                };
                let address = parse_hex(required(&kv, "addr", line_no, line)?, line_no, line)?;
                let frames = required(&kv, "loc", line_no, line)?
                    .split(';')
                    .map(|f| parse_frame(f, line_no, line))
                    .collect::<Result<Vec<_>, _>>()?;
                let block = functions
                    .last_mut()
                    .and_then(|f| f.blocks.last_mut())
                    .ok_or_else(|| ParseError::new(line_no, line, "insn before any block"))?;
                block.instructions.push(InstructionDesc {
                    address,
                    source_key: InlineStack::new(frames),
                    is_branch,
                });
            }
            _ => return Err(ParseError::new(line_no, line, "unrecognized record").into()),
        }
    }
    Ok(BinaryDescription::new(functions)?)
}

pub fn emit_binary_desc(bd: &BinaryDescription) -> String {
    let mut out = String::new();
    for f in bd.functions() {
        let _ = writeln!(
            out,
            "func name={} bfd={} file={} line={} range={:#x}-{:#x}",
            f.asm_name, f.bfd_name, f.file, f.start_line, f.low, f.high
        );
        for b in &f.blocks {
            let _ = writeln!(out, "block range={:#x}-{:#x}", b.low, b.high);
            for insn in &b.instructions {
                let _ = write!(out, "insn addr={:#x} loc={}", insn.address, insn.source_key);
                if insn.is_branch {
                    out.push_str(" branch");
                }
                out.push('\n');
            }
        }
    }
    out
}
