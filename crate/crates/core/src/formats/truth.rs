//! Ground truth written by the simulator:
//!
//! ```text
//! head main 1
//! block main 0 1
//! edge main 0 0->1 1
//! addr 0x400000 1
//! ```
//!
//! Edge lines carry the edge's index in the function's CFG, then its
//! endpoints for the reader.

use std::fmt::Write;

use super::{content_lines, parse_dec, parse_hex};
use crate::error::ParseError;
use crate::simulate::GroundTruth;

pub fn emit_truth(truth: &GroundTruth) -> String {
    let mut out = String::new();
    for (name, n) in &truth.heads {
        writeln!(out, "head {name} {n}").unwrap();
    }
    for ((name, b), n) in &truth.blocks {
        writeln!(out, "block {name} {b} {n}").unwrap();
    }
    for (name, edges) in &truth.edges {
        for (i, n) in edges.iter().enumerate() {
            writeln!(out, "edge {name} {i} ? {n}").unwrap();
        }
    }
    for (addr, n) in &truth.addresses {
        writeln!(out, "addr {addr:#x} {n}").unwrap();
    }
    out
}

/// Like [`emit_truth`], but edge lines name their endpoints.
pub fn emit_truth_with_cfgs(truth: &GroundTruth, cfgs: &[crate::annotate::Cfg]) -> String {
    let text = emit_truth(truth);
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        let mut tokens = line.split(' ');
        if tokens.next() == Some("edge") {
            let name = tokens.next().unwrap();
            let i: usize = tokens.next().unwrap().parse().unwrap();
            let n = tokens.nth(1).unwrap();
            let e = cfgs.iter().find(|c| c.function == name).map(|c| c.edges[i]);
            match e {
                Some(e) => writeln!(out, "edge {name} {i} {}->{} {n}", e.src, e.dst).unwrap(),
                None => writeln!(out, "{line}").unwrap(),
            }
        } else {
            writeln!(out, "{line}").unwrap();
        }
    }
    out
}

pub fn parse_truth(text: &str) -> Result<GroundTruth, ParseError> {
    let mut truth = GroundTruth::default();
    for (line_no, line) in content_lines(text) {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: &str| ParseError::new(line_no, line, msg);
        let arity = |n: usize| {
            if tokens.len() == n {
                Ok(())
            } else {
                Err(err(&format!("expected {n} fields")))
            }
        };
        let count = |t: &str| parse_dec::<u64>(t, "count", line_no, line);
        match tokens[0] {
            "head" => {
                arity(3)?;
                if truth
                    .heads
                    .insert(tokens[1].into(), count(tokens[2])?)
                    .is_some()
                {
                    return Err(err("duplicate head"));
                }
            }
            "block" => {
                arity(4)?;
                let b = parse_dec(tokens[2], "block index", line_no, line)?;
                if truth
                    .blocks
                    .insert((tokens[1].into(), b), count(tokens[3])?)
                    .is_some()
                {
                    return Err(err("duplicate block"));
                }
            }
            "edge" => {
                arity(5)?;
                let i: usize = parse_dec(tokens[2], "edge index", line_no, line)?;
                let edges = truth.edges.entry(tokens[1].into()).or_default();
                if i != edges.len() {
                    return Err(err("edges must be listed in index order"));
                }
                edges.push(count(tokens[4])?);
            }
            "addr" => {
                arity(3)?;
                let a = parse_hex(tokens[1], line_no, line)?;
                if truth.addresses.insert(a, count(tokens[2])?).is_some() {
                    return Err(err("duplicate address"));
                }
            }
            other => return Err(err(&format!("unknown record `{other}`"))),
        }
    }
    // functions without edges have no edge lines
    for name in truth.heads.keys() {
        truth.edges.entry(name.clone()).or_default();
    }
    Ok(truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{gen_program, ground_truth, run_trace, ProgramShape};

    #[test]
    fn round_trip() {
        let p = gen_program(11, ProgramShape::new(8)).unwrap();
        let t = run_trace(&p, 11, 100_000);
        let truth = ground_truth(&p, &t);
        assert_eq!(parse_truth(&emit_truth(&truth)).unwrap(), truth);
        let named = emit_truth_with_cfgs(&truth, &p.cfgs);
        assert!(named.contains("edge main 0 0->"));
        assert_eq!(parse_truth(&named).unwrap(), truth);
    }

    #[test]
    fn rejects_garbage() {
        assert_eq!(
            parse_truth("head main 1\nblock main x 2\n")
                .unwrap_err()
                .line,
            2
        );
        assert!(parse_truth("edge main 1 ? 3\n").is_err());
        assert!(parse_truth("addr 400000 1\n").is_err());
        assert!(parse_truth("bogus\n").is_err());
    }
}
