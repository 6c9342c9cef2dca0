//! Applying a source profile to a control-flow graph.
//!
//! Block counts come straight from the profile; edge counts are then inferred
//! by flow conservation. An edge is resolved when it is the single unknown
//! edge on one side (incoming or outgoing) of a block, or, once that stalls,
//! when it is the only unknown edge linking two otherwise separate groups of
//! constraints. Either way every resolved value is forced by the block
//! counts. Edges that are never forced stay unresolved and read as zero.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use crate::error::ValidationError;
use crate::profile::{LineKey, SourceProfile};

pub type BlockId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfgBlock {
    pub id: BlockId,
    /// Source statements of the block, relative to the function start line.
    pub statements: Vec<LineKey>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: BlockId,
    pub dst: BlockId,
}

/// Control-flow graph of one function.
///
/// Edges are identified by their position in `edges`; parallel edges between
/// the same two blocks are allowed and stay distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    pub function: String,
    pub start_line: u32,
    pub blocks: Vec<CfgBlock>,
    pub edges: Vec<Edge>,
    pub entry: BlockId,
    pub exit: BlockId,
}

impl Cfg {
    /// Checks block ids, edge endpoints, the entry/exit shape and that every
    /// block is reachable from the entry.
    pub fn validate(&self) -> Result<(), ValidationError> {
        let err = |message: String| ValidationError::Cfg {
            function: self.function.clone(),
            message,
        };
        let mut ids = HashSet::new();
        for b in &self.blocks {
            if !ids.insert(b.id) {
                return Err(err(format!("duplicate node id {}", b.id)));
            }
        }
        for id in [self.entry, self.exit] {
            if !ids.contains(&id) {
                return Err(err(format!("unknown node {id}")));
            }
        }
        for e in &self.edges {
            if !ids.contains(&e.src) || !ids.contains(&e.dst) {
                return Err(err(format!(
                    "edge {}->{} references an unknown node",
                    e.src, e.dst
                )));
            }
            if e.dst == self.entry {
                return Err(err(format!("entry {} has a predecessor", self.entry)));
            }
            if e.src == self.exit {
                return Err(err(format!("exit {} has a successor", self.exit)));
            }
        }
        let mut seen = HashSet::from([self.entry]);
        let mut queue = VecDeque::from([self.entry]);
        while let Some(b) = queue.pop_front() {
            for e in self.edges.iter().filter(|e| e.src == b) {
                if seen.insert(e.dst) {
                    queue.push_back(e.dst);
                }
            }
        }
        if let Some(b) = self.blocks.iter().find(|b| !seen.contains(&b.id)) {
            return Err(err(format!("node {} is unreachable from the entry", b.id)));
        }
        Ok(())
    }
}

/// Block and edge counts for one CFG.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeProfile {
    pub block_counts: BTreeMap<BlockId, u64>,
    /// Per edge (same order as [`Cfg::edges`]); `None` when never forced.
    pub edge_counts: Vec<Option<u64>>,
    pub unresolved: usize,
    /// Inconsistencies between block counts: inferences that came out
    /// negative (clamped to zero), plus fully resolved block sides whose edges
    /// do not add up to the block count.
    pub inconsistencies: u64,
    /// Passes over the blocks that resolved at least one edge.
    pub rounds: usize,
}

impl EdgeProfile {
    /// Count of edge `index`, with unresolved edges reading as zero.
    pub fn edge_count(&self, index: usize) -> u64 {
        self.edge_counts[index].unwrap_or(0)
    }
}

/// Block counts of `cfg` from its function's profile.
///
/// A block's count is the rounded mean of its statements' body counters,
/// missing statements counting zero. If the function has samples but its
/// entry block came out zero, the entry is raised to `max(1, head_count)` so
/// the function is never treated as dead.
pub fn annotate_blocks(cfg: &Cfg, profile: &SourceProfile) -> BTreeMap<BlockId, u64> {
    let Some(fp) = profile.get(&cfg.function) else {
        return cfg.blocks.iter().map(|b| (b.id, 0)).collect();
    };
    let mut counts: BTreeMap<BlockId, u64> = cfg
        .blocks
        .iter()
        .map(|b| {
            let sum = b.statements.iter().fold(0u128, |acc, k| {
                acc + fp.body.get(k).copied().unwrap_or(0) as u128
            });
            let n = b.statements.len() as u128;
            let mean = if n == 0 {
                0
            } else {
                ((2 * sum + n) / (2 * n)).min(u64::MAX as u128) as u64
            };
            (b.id, mean)
        })
        .collect();
    if fp.total_count > 0 {
        let entry = counts.entry(cfg.entry).or_insert(0);
        if *entry == 0 {
            *entry = fp.head_count.max(1);
        }
    }
    counts
}

/// Infers edge counts from block counts by flow conservation.
pub fn propagate_edges(cfg: &Cfg, block_counts: &BTreeMap<BlockId, u64>) -> EdgeProfile {
    let order: Vec<usize> = (0..cfg.blocks.len()).collect();
    propagate_edges_in_order(cfg, block_counts, &order)
}

/// [`propagate_edges`] visiting blocks in the given order (a permutation of
/// block positions). The resolved values do not depend on the order when the
/// block counts are consistent.
pub fn propagate_edges_in_order(
    cfg: &Cfg,
    block_counts: &BTreeMap<BlockId, u64>,
    order: &[usize],
) -> EdgeProfile {
    let position: HashMap<BlockId, usize> = cfg
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id, i))
        .collect();
    let mut incoming = vec![Vec::new(); cfg.blocks.len()];
    let mut outgoing = vec![Vec::new(); cfg.blocks.len()];
    for (i, e) in cfg.edges.iter().enumerate() {
        outgoing[position[&e.src]].push(i);
        incoming[position[&e.dst]].push(i);
    }

    let mut edges: Vec<Option<u64>> = vec![None; cfg.edges.len()];
    let mut inconsistent = 0u64;
    let mut rounds = 0usize;
    loop {
        let mut progress = false;
        for &pos in order {
            let count = block_counts.get(&cfg.blocks[pos].id).copied().unwrap_or(0);
            for side in [&incoming[pos], &outgoing[pos]] {
                if side.is_empty() {
                    continue;
                }
                let mut unknown = None;
                let mut unknown_count = 0;
                let mut known_sum = 0u128;
                for &e in side {
                    match edges[e] {
                        Some(c) => known_sum += c as u128,
                        None => {
                            unknown = Some(e);
                            unknown_count += 1;
                        }
                    }
                }
                if unknown_count != 1 {
                    continue;
                }
                let value = if known_sum > count as u128 {
                    inconsistent += 1;
                    0
                } else {
                    count - known_sum as u64
                };
                edges[unknown.unwrap()] = Some(value);
                progress = true;
            }
        }
        if !progress {
            progress = resolve_bridges(
                &incoming,
                &outgoing,
                cfg,
                block_counts,
                &mut edges,
                &mut inconsistent,
            );
        }
        if !progress {
            break;
        }
        rounds += 1;
    }

    for (pos, b) in cfg.blocks.iter().enumerate() {
        let count = block_counts.get(&b.id).copied().unwrap_or(0) as u128;
        for side in [&incoming[pos], &outgoing[pos]] {
            if side.is_empty() {
                continue;
            }
            let sum: Option<u128> = side.iter().map(|&e| edges[e].map(u128::from)).sum();
            if sum.is_some_and(|s| s != count) {
                inconsistent += 1;
            }
        }
    }

    let unresolved = edges.iter().filter(|e| e.is_none()).count();
    EdgeProfile {
        block_counts: cfg
            .blocks
            .iter()
            .map(|b| (b.id, block_counts.get(&b.id).copied().unwrap_or(0)))
            .collect(),
        edge_counts: edges,
        unresolved,
        inconsistencies: inconsistent,
        rounds,
    }
}

/// The cut rule, for when no side has a single unknown edge left.
///
/// Conservation gives one equation per block side: the unknown edges on it
/// sum to the side's residual (block count minus known edges). Every edge
/// joins an out-side to an in-side, so adding up the out-side equations of a
/// connected set of sides and subtracting its in-side equations cancels every
/// edge inside the set. If an unknown edge is the only one leaving that set
/// (a bridge among the unknown edges), the signed sum is its value.
fn resolve_bridges(
    incoming: &[Vec<usize>],
    outgoing: &[Vec<usize>],
    cfg: &Cfg,
    block_counts: &BTreeMap<BlockId, u64>,
    edges: &mut [Option<u64>],
    inconsistent: &mut u64,
) -> bool {
    // side 2p is the in-side of block position p, 2p + 1 its out-side
    let position: HashMap<BlockId, usize> = cfg
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id, i))
        .collect();
    let ends = |e: usize| {
        (
            2 * position[&cfg.edges[e].src] + 1,
            2 * position[&cfg.edges[e].dst],
        )
    };
    let side_edges = |side: usize| {
        let p = side / 2;
        if side.is_multiple_of(2) {
            &incoming[p]
        } else {
            &outgoing[p]
        }
    };
    let mut resolved = false;
    for bridge in 0..edges.len() {
        if edges[bridge].is_some() {
            continue;
        }
        let (start, other) = ends(bridge);
        let mut seen = vec![false; 2 * cfg.blocks.len()];
        seen[start] = true;
        let mut stack = vec![start];
        let mut component = Vec::new();
        let mut cut = true;
        while let Some(side) = stack.pop() {
            component.push(side);
            for &e in side_edges(side) {
                if e == bridge || edges[e].is_some() {
                    continue;
                }
                let (a, b) = ends(e);
                let next = if a == side { b } else { a };
                if next == other {
                    cut = false;
                    break;
                }
                if !seen[next] {
                    seen[next] = true;
                    stack.push(next);
                }
            }
            if !cut {
                break;
            }
        }
        if !cut {
            continue;
        }
        let mut value = 0i128;
        for &side in &component {
            let count = block_counts
                .get(&cfg.blocks[side / 2].id)
                .copied()
                .unwrap_or(0);
            let known: i128 = side_edges(side)
                .iter()
                .filter_map(|&e| edges[e])
                .map(i128::from)
                .sum();
            let residual = count as i128 - known;
            value += if side % 2 == 1 { residual } else { -residual };
        }
        edges[bridge] = Some(if value < 0 {
            *inconsistent += 1;
            0
        } else {
            value.min(u64::MAX as i128) as u64
        });
        resolved = true;
    }
    resolved
}

/// Annotates blocks from the profile, then propagates edges.
pub fn annotate(cfg: &Cfg, profile: &SourceProfile) -> EdgeProfile {
    propagate_edges(cfg, &annotate_blocks(cfg, profile))
}
