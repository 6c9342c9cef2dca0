use std::fmt;

use thiserror::Error;

use crate::formats::Mode;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A malformed line in one of the text formats.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}: `{text}`")]
pub struct ParseError {
    /// 1-based line number; 0 when the problem is at end of input.
    pub line: usize,
    pub text: String,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, text: &str, message: impl Into<String>) -> Self {
        ParseError {
            line,
            text: text.to_string(),
            message: message.into(),
        }
    }
}

/// Structural violations found after a binary description or CFG parsed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("functions `{first}` and `{second}` have overlapping ranges")]
    OverlappingFunctions { first: String, second: String },
    #[error("duplicate assembler name `{0}`")]
    DuplicateAsmName(String),
    #[error("block {lo:#x}-{hi:#x} lies outside function `{function}`")]
    BlockOutsideFunction { function: String, lo: u64, hi: u64 },
    #[error("blocks {first:#x} and {second:#x} of function `{function}` overlap")]
    OverlappingBlocks {
        function: String,
        first: u64,
        second: u64,
    },
    #[error("instruction {addr:#x} lies outside any block")]
    InstructionOutsideBlock { addr: u64 },
    #[error("instruction {addr:#x} is not after the previous instruction of its block")]
    UnorderedInstruction { addr: u64 },
    #[error("block {lo:#x}-{hi:#x} of function `{function}` has no instructions")]
    EmptyBlock { function: String, lo: u64, hi: u64 },
    #[error("cfg `{function}`: {message}")]
    Cfg { function: String, message: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("expected a {expected} sample set, found {found}")]
    ModeMismatch { expected: Mode, found: Mode },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
