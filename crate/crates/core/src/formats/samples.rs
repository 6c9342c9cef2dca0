use std::fmt::Write as _;

use super::{content_lines, parse_dec, parse_hex};
use crate::error::ParseError;

/// Hardware limit on recorded branch pairs per stack.
pub const MAX_LBR_DEPTH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Program-counter samples of an overflowing cycle counter.
    Cycles,
    /// Last-branch-record stacks sampled on retired branches.
    Lbr,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Cycles => "cycles",
            Mode::Lbr => "lbr",
        }
    }

    /// The sampling period used by default for each mode.
    pub fn default_period(self) -> u64 {
        match self {
            Mode::Cycles => 2_000_000,
            Mode::Lbr => 400_000,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cycles" => Ok(Mode::Cycles),
            "lbr" => Ok(Mode::Lbr),
            other => Err(format!("unknown mode `{other}` (expected cycles or lbr)")),
        }
    }
}

/// One taken branch: source and target addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BranchPair {
    pub from: u64,
    pub to: u64,
}

/// The branch history captured with one LBR sample, oldest pair first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BranchStack {
    pub pairs: Vec<BranchPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcSample {
    pub address: u64,
    pub count: u64,
}

/// A parsed sampling session.
///
/// Exactly one of `pc_samples` (cycles mode) and `lbr_samples` (LBR mode) can
/// be non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    pub mode: Mode,
    pub event_name: String,
    pub period: u64,
    pub pc_samples: Vec<PcSample>,
    pub lbr_samples: Vec<BranchStack>,
}

impl SampleSet {
    pub fn new(mode: Mode, event_name: impl Into<String>, period: u64) -> Self {
        SampleSet {
            mode,
            event_name: event_name.into(),
            period,
            pc_samples: Vec::new(),
            lbr_samples: Vec::new(),
        }
    }

    /// Sum of all sample counts; each LBR stack counts as one sample.
    pub fn total_samples(&self) -> u64 {
        match self.mode {
            Mode::Cycles => self
                .pc_samples
                .iter()
                .fold(0u64, |acc, s| acc.saturating_add(s.count)),
            Mode::Lbr => self.lbr_samples.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pc_samples.is_empty() && self.lbr_samples.is_empty()
    }
}

/// Parses the sample-file format:
///
/// ```text
/// mode: cycles|lbr
/// event: <identifier>
/// period: <decimal>
/// S <0xaddr> <count>                  # cycles records
/// L <0xfrom>-><0xto>[,<0xfrom>-><0xto>]  # lbr records, oldest pair first
/// ```
///
/// All three header fields are required and must precede the records.
pub fn parse_samples(text: &str) -> Result<SampleSet, ParseError> {
    let mut mode = None;
    let mut event = None;
    let mut period = None;
    let mut set: Option<SampleSet> = None;

    for (line_no, line) in content_lines(text) {
        let trimmed = line.trim();
        if let Some((key, value)) = header_field(trimmed) {
            if set.is_some() {
                return Err(ParseError::new(line_no, line, "header field after records"));
            }
            let value = value.trim();
            match key {
                "mode" => {
                    if mode.is_some() {
                        return Err(ParseError::new(line_no, line, "duplicate `mode:`"));
                    }
                    mode = Some(
                        value
                            .parse::<Mode>()
                            .map_err(|e| ParseError::new(line_no, line, e))?,
                    );
                }
                "event" => {
                    if event.is_some() {
                        return Err(ParseError::new(line_no, line, "duplicate `event:`"));
                    }
                    if value.is_empty() || value.contains(char::is_whitespace) {
                        return Err(ParseError::new(
                            line_no,
                            line,
                            "event must be one identifier",
                        ));
                    }
                    event = Some(value.to_string());
                }
                "period" => {
                    if period.is_some() {
                        return Err(ParseError::new(line_no, line, "duplicate `period:`"));
                    }
                    let p: u64 = parse_dec(value, "period", line_no, line)?;
                    if p == 0 {
                        return Err(ParseError::new(line_no, line, "period must be at least 1"));
                    }
                    period = Some(p);
                }
                other => {
                    return Err(ParseError::new(
                        line_no,
                        line,
                        format!("unknown header field `{other}`"),
                    ))
                }
            }
            continue;
        }

        let set = match &mut set {
            Some(set) => set,
            None => {
                let (Some(m), Some(e), Some(p)) = (mode, event.take(), period) else {
                    return Err(ParseError::new(
                        line_no,
                        line,
                        "record before complete header (mode, event, period)",
                    ));
                };
                set.insert(SampleSet::new(m, e, p))
            }
        };

        let mut tokens = trimmed.split_whitespace();
        match tokens.next() {
            Some("S") => {
                if set.mode != Mode::Cycles {
                    return Err(ParseError::new(line_no, line, "`S` record in lbr mode"));
                }
                let (Some(addr), Some(count), None) = (tokens.next(), tokens.next(), tokens.next())
                else {
                    return Err(ParseError::new(
                        line_no,
                        line,
                        "expected `S <0xaddr> <count>`",
                    ));
                };
                let address = parse_hex(addr, line_no, line)?;
                let count: u64 = parse_dec(count, "sample count", line_no, line)?;
                if count == 0 {
                    return Err(ParseError::new(
                        line_no,
                        line,
                        "sample count must be at least 1",
                    ));
                }
                set.pc_samples.push(PcSample { address, count });
            }
            Some("L") => {
                if set.mode != Mode::Lbr {
                    return Err(ParseError::new(line_no, line, "`L` record in cycles mode"));
                }
                let (Some(list), None) = (tokens.next(), tokens.next()) else {
                    return Err(ParseError::new(line_no, line, "expected `L <pairs>`"));
                };
                let mut pairs = Vec::new();
                for pair in list.split(',') {
                    let (from, to) = pair.split_once("->").ok_or_else(|| {
                        ParseError::new(line_no, line, format!("bad branch pair `{pair}`"))
                    })?;
                    pairs.push(BranchPair {
                        from: parse_hex(from, line_no, line)?,
                        to: parse_hex(to, line_no, line)?,
                    });
                }
                if pairs.len() > MAX_LBR_DEPTH {
                    return Err(ParseError::new(
                        line_no,
                        line,
                        format!(
                            "{} branch pairs exceed the limit of {MAX_LBR_DEPTH}",
                            pairs.len()
                        ),
                    ));
                }
                set.lbr_samples.push(BranchStack { pairs });
            }
            _ => return Err(ParseError::new(line_no, line, "unrecognized record")),
        }
    }

    match set {
        Some(set) => Ok(set),
        None => match (mode, event, period) {
            (Some(m), Some(e), Some(p)) => Ok(SampleSet::new(m, e, p)),
            (None, _, _) => Err(ParseError::new(0, "", "missing `mode:` header")),
            (_, None, _) => Err(ParseError::new(0, "", "missing `event:` header")),
            (_, _, None) => Err(ParseError::new(0, "", "missing `period:` header")),
        },
    }
}

fn header_field(line: &str) -> Option<(&str, &str)> {
    let (key, value) = line.split_once(':')?;
    if key.chars().all(|c| c.is_ascii_lowercase()) && !key.is_empty() {
        Some((key, value))
    } else {
        None
    }
}

pub fn emit_samples(set: &SampleSet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mode: {}", set.mode);
    let _ = writeln!(out, "event: {}", set.event_name);
    let _ = writeln!(out, "period: {}", set.period);
    for s in &set.pc_samples {
        let _ = writeln!(out, "S {:#x} {}", s.address, s.count);
    }
    for stack in &set.lbr_samples {
        out.push('L');
        for (i, p) in stack.pairs.iter().enumerate() {
            out.push(if i == 0 { ' ' } else { ',' });
            let _ = write!(out, "{:#x}->{:#x}", p.from, p.to);
        }
        out.push('\n');
    }
    out
}
