use std::fmt::Write as _;

use super::{content_lines, parse_dec, parse_offset_disc};
use crate::count::SaturationLog;
use crate::error::ParseError;
use crate::profile::{CallsiteKey, FunctionProfile, LineKey, SourceProfile};

/// Renders a profile as text.
///
/// Functions appear in assembler-name order. Within a function, lines are
/// ordered by `(offset, discriminator)`; at a given key the body counter comes
/// before inlined callees, which are ordered by name. Each nesting level is
/// indented by two spaces. The output is a pure function of the profile.
pub fn emit_profile(profile: &SourceProfile) -> String {
    let mut out = String::new();
    for f in profile.functions.values() {
        let _ = write!(
            out,
            "{} total:{} head:{}",
            f.asm_name, f.total_count, f.head_count
        );
        if f.bfd_name != f.asm_name {
            let _ = write!(out, " bfd:{}", f.bfd_name);
        }
        out.push('\n');
        emit_contents(&mut out, f, 1);
    }
    out
}

fn emit_contents(out: &mut String, f: &FunctionProfile, depth: usize) {
    let indent = "  ".repeat(depth);
    let mut body = f.body.iter().peekable();
    let mut inlined = f.inlined.iter().peekable();
    loop {
        let take_body = match (body.peek(), inlined.peek()) {
            (None, None) => break,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (Some((bk, _)), Some((ik, _))) => **bk <= ik.site,
        };
        if take_body {
            let (key, count) = body.next().unwrap();
            if *count > 0 {
                let _ = writeln!(out, "{indent}{key}: {count}");
            }
        } else {
            let (key, sub) = inlined.next().unwrap();
            let _ = writeln!(
                out,
                "{indent}{}: {} total:{}",
                key.site, key.callee, sub.total_count
            );
            emit_contents(out, sub, depth + 1);
        }
    }
}

struct Open {
    site: Option<CallsiteKey>,
    profile: FunctionProfile,
    declared_total: u64,
    line: usize,
    text: String,
}

/// Parses the text produced by [`emit_profile`].
///
/// Totals are checked against the parsed body and subprofiles; a mismatch is
/// an error. Body lines with a zero count are accepted and dropped.
pub fn parse_profile(text: &str) -> Result<SourceProfile, ParseError> {
    let mut profile = SourceProfile::new();
    let mut open: Vec<Open> = Vec::new();

    for (line_no, line) in content_lines(text) {
        let content = line.trim_start_matches(' ');
        let indent = line.len() - content.len();
        if content.starts_with('\t') || indent % 2 != 0 {
            return Err(ParseError::new(
                line_no,
                line,
                "indentation must be two spaces per level",
            ));
        }
        let depth = indent / 2;
        if depth > open.len() {
            return Err(ParseError::new(
                line_no,
                line,
                "line is nested deeper than its parent",
            ));
        }
        while open.len() > depth {
            close(&mut open, &mut profile)?;
        }
        let content = content.trim_end();

        if depth == 0 {
            let mut tokens = content.split_whitespace();
            let name = tokens.next().unwrap_or_default();
            let total = field(tokens.next(), "total", line_no, line)?;
            let head = field(tokens.next(), "head", line_no, line)?;
            let bfd = match tokens.next() {
                None => name.to_string(),
                Some(t) => t
                    .strip_prefix("bfd:")
                    .filter(|b| !b.is_empty())
                    .ok_or_else(|| ParseError::new(line_no, line, format!("unexpected `{t}`")))?
                    .to_string(),
            };
            if let Some(t) = tokens.next() {
                return Err(ParseError::new(line_no, line, format!("unexpected `{t}`")));
            }
            if profile.functions.contains_key(name) {
                return Err(ParseError::new(
                    line_no,
                    line,
                    format!("duplicate function `{name}`"),
                ));
            }
            let mut f = FunctionProfile::new(name, &bfd);
            f.head_count = head;
            open.push(Open {
                site: None,
                profile: f,
                declared_total: total,
                line: line_no,
                text: line.to_string(),
            });
            continue;
        }

        let (key, rest) = content
            .split_once(':')
            .ok_or_else(|| ParseError::new(line_no, line, "expected `<offset>.<disc>: ...`"))?;
        let (offset, disc) = parse_offset_disc(key, line_no, line)?;
        let key = LineKey::new(offset, disc);
        let rest: Vec<&str> = rest.split_whitespace().collect();
        let parent = &mut open
            .last_mut()
            .expect("depth >= 1 implies an open parent")
            .profile;
        match rest.as_slice() {
            [count] => {
                let count: u64 = parse_dec(count, "count", line_no, line)?;
                if parent.body.contains_key(&key) {
                    return Err(ParseError::new(
                        line_no,
                        line,
                        format!("duplicate entry {key}"),
                    ));
                }
                if count > 0 {
                    parent.body.insert(key, count);
                }
            }
            [callee, total] => {
                let total = field(Some(total), "total", line_no, line)?;
                let site = CallsiteKey {
                    site: key,
                    callee: callee.to_string(),
                };
                if parent.inlined.contains_key(&site) {
                    return Err(ParseError::new(
                        line_no,
                        line,
                        format!("duplicate inlined callee `{callee}` at {key}"),
                    ));
                }
                open.push(Open {
                    site: Some(site),
                    profile: FunctionProfile::inlined_copy(callee),
                    declared_total: total,
                    line: line_no,
                    text: line.to_string(),
                });
            }
            _ => return Err(ParseError::new(line_no, line, "malformed profile line")),
        }
    }
    while !open.is_empty() {
        close(&mut open, &mut profile)?;
    }
    Ok(profile)
}

fn close(open: &mut Vec<Open>, profile: &mut SourceProfile) -> Result<(), ParseError> {
    let Open {
        site,
        profile: mut f,
        declared_total,
        line,
        text,
    } = open.pop().expect("close called with an open entry");
    let mut log = SaturationLog::default();
    let mut computed = 0u64;
    for &c in f.body.values() {
        computed = log.add(computed, c);
    }
    for sub in f.inlined.values() {
        computed = log.add(computed, sub.total_count);
    }
    if computed != declared_total {
        return Err(ParseError::new(
            line,
            &text,
            format!("total {declared_total} does not match the sum of its entries ({computed})"),
        ));
    }
    f.total_count = declared_total;
    match site {
        None => {
            profile.functions.insert(f.asm_name.clone(), f);
        }
        Some(site) => {
            open.last_mut()
                .expect("inlined entries always have a parent")
                .profile
                .inlined
                .insert(site, f);
        }
    }
    Ok(())
}

fn field(token: Option<&str>, name: &str, line_no: usize, line: &str) -> Result<u64, ParseError> {
    let token =
        token.ok_or_else(|| ParseError::new(line_no, line, format!("missing `{name}:`")))?;
    let value = token
        .strip_prefix(name)
        .and_then(|t| t.strip_prefix(':'))
        .ok_or_else(|| ParseError::new(line_no, line, format!("expected `{name}:<count>`")))?;
    parse_dec(value, "count", line_no, line)
}
