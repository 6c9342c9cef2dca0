//! Line-oriented text formats: sample files, binary descriptions, source
//! profiles, CFG descriptions and simulator ground truth.
//!
//! Every format ignores blank lines and lines whose first non-blank character
//! is `#`. Addresses are always hexadecimal with a `0x` prefix.

mod binary;
mod cfg;
mod profile;
mod samples;
mod truth;

pub use binary::{
    emit_binary_desc, parse_binary_desc, BinaryDescription, BlockDesc, Frame, FunctionDesc,
    InlineStack, InsnRef, InstructionDesc, StackId,
};
pub use cfg::{emit_annotated_cfgs, emit_cfgs, parse_annotated_cfgs, parse_cfgs};
pub use profile::{emit_profile, parse_profile};
pub use samples::{
    emit_samples, parse_samples, BranchPair, BranchStack, Mode, PcSample, SampleSet, MAX_LBR_DEPTH,
};
pub use truth::{emit_truth, emit_truth_with_cfgs, parse_truth};

use crate::error::ParseError;

/// Lines that carry content, paired with their 1-based line number.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            None
        } else {
            Some((i + 1, line))
        }
    })
}

fn parse_hex(token: &str, line: usize, text: &str) -> Result<u64, ParseError> {
    let digits = token
        .strip_prefix("0x")
        .ok_or_else(|| ParseError::new(line, text, format!("address `{token}` lacks 0x prefix")))?;
    u64::from_str_radix(digits, 16)
        .map_err(|_| ParseError::new(line, text, format!("bad hexadecimal address `{token}`")))
}

fn parse_dec<T: std::str::FromStr>(
    token: &str,
    what: &str,
    line: usize,
    text: &str,
) -> Result<T, ParseError> {
    if token.starts_with('-') {
        return Err(ParseError::new(
            line,
            text,
            format!("negative {what} `{token}`"),
        ));
    }
    token
        .parse()
        .map_err(|_| ParseError::new(line, text, format!("bad {what} `{token}`")))
}

/// `<off>.<disc>` as used by profiles and CFG statements.
fn parse_offset_disc(token: &str, line: usize, text: &str) -> Result<(u32, u32), ParseError> {
    let (off, disc) = token.split_once('.').ok_or_else(|| {
        ParseError::new(
            line,
            text,
            format!("expected <offset>.<disc>, got `{token}`"),
        )
    })?;
    Ok((
        parse_dec(off, "offset", line, text)?,
        parse_dec(disc, "discriminator", line, text)?,
    ))
}

/// `<0xlo>-<0xhi>` with `lo < hi`.
fn parse_range(token: &str, line: usize, text: &str) -> Result<(u64, u64), ParseError> {
    let (lo, hi) = token.split_once('-').ok_or_else(|| {
        ParseError::new(line, text, format!("expected <0xlo>-<0xhi>, got `{token}`"))
    })?;
    let lo = parse_hex(lo, line, text)?;
    let hi = parse_hex(hi, line, text)?;
    if lo >= hi {
        return Err(ParseError::new(line, text, "empty or inverted range"));
    }
    Ok((lo, hi))
}

type KeyValues<'a> = (Vec<(&'a str, &'a str)>, Vec<&'a str>);

/// Splits `key=value` tokens, rejecting duplicates and keys outside `allowed`.
/// Bare words (no `=`) are returned separately.
fn key_values<'a>(
    tokens: impl Iterator<Item = &'a str>,
    allowed: &[&str],
    line: usize,
    text: &str,
) -> Result<KeyValues<'a>, ParseError> {
    let mut pairs: Vec<(&str, &str)> = Vec::new();
    let mut flags = Vec::new();
    for token in tokens {
        match token.split_once('=') {
            Some((key, value)) => {
                if !allowed.contains(&key) {
                    return Err(ParseError::new(line, text, format!("unknown key `{key}`")));
                }
                if pairs.iter().any(|(k, _)| *k == key) {
                    return Err(ParseError::new(
                        line,
                        text,
                        format!("duplicate key `{key}`"),
                    ));
                }
                pairs.push((key, value));
            }
            None => flags.push(token),
        }
    }
    Ok((pairs, flags))
}

fn required<'a>(
    pairs: &[(&str, &'a str)],
    key: &str,
    line: usize,
    text: &str,
) -> Result<&'a str, ParseError> {
    pairs
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| ParseError::new(line, text, format!("missing `{key}=`")))
}
