use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{content_lines, key_values, parse_dec, parse_offset_disc, required};
use crate::annotate::{BlockId, Cfg, CfgBlock, Edge, EdgeProfile};
use crate::error::{Error, ParseError};

/// Renders CFG descriptions:
///
/// ```text
/// cfg name=<asm> line=<n> entry=<id> exit=<id>
/// node id=<id> stmts=<off>.<disc>[,<off>.<disc>]...
/// edge <id>-><id>
/// ```
pub fn emit_cfgs(cfgs: &[Cfg]) -> String {
    let mut out = String::new();
    for cfg in cfgs {
        write_cfg(&mut out, cfg, None);
    }
    out
}

/// Like [`emit_cfgs`] with `count=<n>` on every node and edge and an
/// `unresolved=<n>` trailer after each graph.
pub fn emit_annotated_cfgs(annotated: &[(Cfg, EdgeProfile)]) -> String {
    let mut out = String::new();
    for (cfg, ep) in annotated {
        write_cfg(&mut out, cfg, Some(ep));
    }
    out
}

fn write_cfg(out: &mut String, cfg: &Cfg, ep: Option<&EdgeProfile>) {
    let _ = writeln!(
        out,
        "cfg name={} line={} entry={} exit={}",
        cfg.function, cfg.start_line, cfg.entry, cfg.exit
    );
    for b in &cfg.blocks {
        let stmts: Vec<String> = b.statements.iter().map(|k| k.to_string()).collect();
        let _ = write!(out, "node id={} stmts={}", b.id, stmts.join(","));
        if let Some(ep) = ep {
            let _ = write!(
                out,
                " count={}",
                ep.block_counts.get(&b.id).copied().unwrap_or(0)
            );
        }
        out.push('\n');
    }
    for (i, e) in cfg.edges.iter().enumerate() {
        let _ = write!(out, "edge {}->{}", e.src, e.dst);
        if let Some(ep) = ep {
            let _ = write!(out, " count={}", ep.edge_count(i));
        }
        out.push('\n');
    }
    if let Some(ep) = ep {
        let _ = writeln!(out, "unresolved={}", ep.unresolved);
    }
}

pub fn parse_cfgs(text: &str) -> Result<Vec<Cfg>, Error> {
    Ok(parse(text, false)?
        .into_iter()
        .map(|(cfg, _)| cfg)
        .collect())
}

/// Parses annotated output. Unresolved edges cannot be told apart from
/// resolved zero edges in the text, so every edge comes back as `Some`.
pub fn parse_annotated_cfgs(text: &str) -> Result<Vec<(Cfg, EdgeProfile)>, Error> {
    parse(text, true)
}

struct Pending {
    cfg: Cfg,
    profile: EdgeProfile,
    trailer: bool,
    line: usize,
    text: String,
}

fn parse(text: &str, annotated: bool) -> Result<Vec<(Cfg, EdgeProfile)>, Error> {
    let mut done = Vec::new();
    let mut current: Option<Pending> = None;

    for (line_no, line) in content_lines(text) {
        let mut tokens = line.split_whitespace();
        let head = tokens.next().unwrap_or_default();
        if head == "cfg" {
            if let Some(p) = current.take() {
                done.push(finish(p, annotated)?);
            }
            let (kv, flags) =
                key_values(tokens, &["name", "line", "entry", "exit"], line_no, line)?;
            if let Some(flag) = flags.first() {
                return Err(ParseError::new(line_no, line, format!("unexpected `{flag}`")).into());
            }
            let start_line: u32 =
                parse_dec(required(&kv, "line", line_no, line)?, "line", line_no, line)?;
            if start_line == 0 {
                return Err(ParseError::new(line_no, line, "line numbers start at 1").into());
            }
            current = Some(Pending {
                cfg: Cfg {
                    function: required(&kv, "name", line_no, line)?.to_string(),
                    start_line,
                    blocks: Vec::new(),
                    edges: Vec::new(),
                    entry: parse_dec(
                        required(&kv, "entry", line_no, line)?,
                        "node id",
                        line_no,
                        line,
                    )?,
                    exit: parse_dec(
                        required(&kv, "exit", line_no, line)?,
                        "node id",
                        line_no,
                        line,
                    )?,
                },
                profile: EdgeProfile::default(),
                trailer: false,
                line: line_no,
                text: line.to_string(),
            });
            continue;
        }

        let p = current
            .as_mut()
            .ok_or_else(|| ParseError::new(line_no, line, "record before any `cfg` line"))?;
        if p.trailer {
            return Err(
                ParseError::new(line_no, line, "record after `unresolved=` trailer").into(),
            );
        }
        let count_key: &[&str] = if annotated { &["count"] } else { &[] };
        match head {
            "node" => {
                let allowed: Vec<&str> = ["id", "stmts"].iter().chain(count_key).copied().collect();
                let (kv, flags) = key_values(tokens, &allowed, line_no, line)?;
                if let Some(flag) = flags.first() {
                    return Err(
                        ParseError::new(line_no, line, format!("unexpected `{flag}`")).into(),
                    );
                }
                let id: BlockId = parse_dec(
                    required(&kv, "id", line_no, line)?,
                    "node id",
                    line_no,
                    line,
                )?;
                let stmts = required(&kv, "stmts", line_no, line)?;
                let statements = if stmts.is_empty() {
                    Vec::new()
                } else {
                    stmts
                        .split(',')
                        .map(|s| {
                            parse_offset_disc(s, line_no, line)
                                .map(|(o, d)| crate::profile::LineKey::new(o, d))
                        })
                        .collect::<Result<Vec<_>, _>>()?
                };
                if annotated {
                    let c = parse_dec(
                        required(&kv, "count", line_no, line)?,
                        "count",
                        line_no,
                        line,
                    )?;
                    p.profile.block_counts.insert(id, c);
                }
                p.cfg.blocks.push(CfgBlock { id, statements });
            }
            "edge" => {
                let spec = tokens
                    .next()
                    .ok_or_else(|| ParseError::new(line_no, line, "expected `edge <id>-><id>`"))?;
                let (src, dst) = spec
                    .split_once("->")
                    .ok_or_else(|| ParseError::new(line_no, line, "expected `edge <id>-><id>`"))?;
                let edge = Edge {
                    src: parse_dec(src, "node id", line_no, line)?,
                    dst: parse_dec(dst, "node id", line_no, line)?,
                };
                let (kv, flags) = key_values(tokens, count_key, line_no, line)?;
                if let Some(flag) = flags.first() {
                    return Err(
                        ParseError::new(line_no, line, format!("unexpected `{flag}`")).into(),
                    );
                }
                if annotated {
                    let c = parse_dec(
                        required(&kv, "count", line_no, line)?,
                        "count",
                        line_no,
                        line,
                    )?;
                    p.profile.edge_counts.push(Some(c));
                }
                p.cfg.edges.push(edge);
            }
            _ if annotated && head.starts_with("unresolved=") => {
                let n = &head["unresolved=".len()..];
                p.profile.unresolved = parse_dec(n, "unresolved count", line_no, line)?;
                p.trailer = true;
            }
            _ => return Err(ParseError::new(line_no, line, "unrecognized record").into()),
        }
    }
    if let Some(p) = current.take() {
        done.push(finish(p, annotated)?);
    }
    Ok(done)
}

fn finish(p: Pending, annotated: bool) -> Result<(Cfg, EdgeProfile), Error> {
    if annotated && !p.trailer {
        return Err(ParseError::new(p.line, &p.text, "missing `unresolved=` trailer").into());
    }
    p.cfg.validate()?;
    let mut profile = p.profile;
    if !annotated {
        profile.block_counts = BTreeMap::new();
    }
    Ok((p.cfg, profile))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::propagate_edges;

    const DIAMOND: &str = "\
cfg name=main line=10 entry=0 exit=3
node id=0 stmts=0.0,1.0
node id=1 stmts=2.0
node id=2 stmts=3.0,3.1
node id=3 stmts=
edge 0->1
edge 0->2
edge 1->3
edge 2->3
";

    #[test]
    fn parses_and_reemits() {
        let cfgs = parse_cfgs(DIAMOND).unwrap();
        assert_eq!(cfgs.len(), 1);
        let g = &cfgs[0];
        assert_eq!(g.blocks[2].statements.len(), 2);
        assert!(g.blocks[3].statements.is_empty());
        assert_eq!(emit_cfgs(&cfgs), DIAMOND);
    }

    #[test]
    fn annotated_output() {
        let g = parse_cfgs(DIAMOND).unwrap().remove(0);
        let counts = [(0, 10), (1, 7), (2, 3), (3, 10)].into_iter().collect();
        let ep = propagate_edges(&g, &counts);
        let text = emit_annotated_cfgs(&[(g.clone(), ep)]);
        assert!(text.contains("edge 0->1 count=7\n"));
        assert!(text.contains("edge 2->3 count=3\n"));
        assert!(text.ends_with("unresolved=0\n"));
        let back = parse_annotated_cfgs(&text).unwrap();
        assert_eq!(back[0].0, g);
        assert_eq!(back[0].1.block_counts[&1], 7);
        assert_eq!(back[0].1.edge_counts[1], Some(3));
    }

    #[test]
    fn errors() {
        assert!(parse_cfgs("node id=0 stmts=\n").is_err());
        let bad_entry = "cfg name=f line=1 entry=0 exit=1\nnode id=0 stmts=\nnode id=1 stmts=\nedge 0->1\nedge 1->0\n";
        assert!(matches!(parse_cfgs(bad_entry), Err(Error::Validation(_))));
        let bad_stmt = "cfg name=f line=1 entry=0 exit=0\nnode id=0 stmts=1\n";
        assert!(matches!(parse_cfgs(bad_stmt), Err(Error::Parse(e)) if e.line == 2));
        let counted = "cfg name=f line=1 entry=0 exit=0\nnode id=0 stmts= count=3\n";
        assert!(parse_cfgs(counted).is_err());
    }
}
