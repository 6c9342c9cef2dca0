use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotate::{BlockId, Cfg, CfgBlock, Edge};
use crate::count::SaturationLog;
use crate::profile::{FunctionProfile, LineKey, SourceProfile};

/// Random acyclic CFG with `blocks` blocks (at least 2) and a branch
/// probability per edge. Every block is reachable from the entry and
/// reaches the exit; a few parallel edges appear.
pub fn gen_dag_cfg(seed: u64, blocks: usize) -> (Cfg, Vec<f64>) {
    let n = blocks.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n - 1 {
        let degree = rng.gen_range(1..=3usize);
        for _ in 0..degree {
            let dst = rng.gen_range(i + 1..n);
            edges.push(Edge {
                src: i as BlockId,
                dst: dst as BlockId,
            });
            weights.push(rng.gen_range(0.05..1.0));
        }
    }
    for j in 1..n {
        if !edges.iter().any(|e| e.dst as usize == j) {
            edges.push(Edge {
                src: j as BlockId - 1,
                dst: j as BlockId,
            });
            weights.push(rng.gen_range(0.05..1.0));
        }
    }
    let mut probs = weights.clone();
    for i in 0..n as BlockId {
        let total: f64 = edges
            .iter()
            .zip(&weights)
            .filter(|(e, _)| e.src == i)
            .map(|(_, w)| w)
            .sum();
        for (p, e) in probs.iter_mut().zip(&edges) {
            if e.src == i {
                *p /= total;
            }
        }
    }
    let blocks = (0..n as BlockId)
        .map(|id| CfgBlock {
            id,
            statements: vec![LineKey::new(id + 1, 0)],
        })
        .collect();
    let cfg = Cfg {
        function: format!("dag{seed}"),
        start_line: 1,
        blocks,
        edges,
        entry: 0,
        exit: n as BlockId - 1,
    };
    (cfg, probs)
}

/// Exact counts from random entry-to-exit walks over an acyclic CFG.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DagWalk {
    pub block_counts: BTreeMap<BlockId, u64>,
    pub edge_counts: Vec<u64>,
}

pub fn walk_dag(cfg: &Cfg, probs: &[f64], seed: u64, walks: u64) -> DagWalk {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut block_counts: BTreeMap<BlockId, u64> = cfg.blocks.iter().map(|b| (b.id, 0)).collect();
    let mut edge_counts = vec![0u64; cfg.edges.len()];
    for _ in 0..walks {
        let mut at = cfg.entry;
        loop {
            *block_counts.get_mut(&at).unwrap() += 1;
            if at == cfg.exit {
                break;
            }
            let mut roll: f64 = rng.gen();
            let out: Vec<usize> = (0..cfg.edges.len())
                .filter(|&i| cfg.edges[i].src == at)
                .collect();
            let mut pick = *out.last().unwrap();
            for &i in &out {
                if roll < probs[i] {
                    pick = i;
                    break;
                }
                roll -= probs[i];
            }
            edge_counts[pick] += 1;
            at = cfg.edges[pick].dst;
        }
    }
    DagWalk {
        block_counts,
        edge_counts,
    }
}

/// Random well-formed source profile with consistent totals.
pub fn gen_profile(seed: u64) -> SourceProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut profile = SourceProfile::new();
    let mut log = SaturationLog::default();
    for f in 0..rng.gen_range(0..5) {
        let name = format!("f{}", rng.gen_range(0..8) + f * 8);
        let mut fp = FunctionProfile::new(&name, &name);
        fp.head_count = rng.gen_range(0..1000);
        fill(&mut rng, &mut fp, 2, 0, &mut log);
        fp.recompute_totals(&mut log);
        profile.functions.insert(name, fp);
    }
    profile
}

fn fill(
    rng: &mut ChaCha8Rng,
    fp: &mut FunctionProfile,
    depth: u32,
    min_body: usize,
    log: &mut SaturationLog,
) {
    for _ in 0..rng.gen_range(min_body..6) {
        let key = LineKey::new(rng.gen_range(0..20), rng.gen_range(0..3));
        fp.add_body(key, rng.gen_range(1..1u64 << 32), log);
    }
    if depth > 0 {
        for _ in 0..rng.gen_range(0..3) {
            let site = LineKey::new(rng.gen_range(0..20), 0);
            let callee = format!("g{}", rng.gen_range(0..4));
            fill(rng, fp.inlined_mut(site, &callee), depth - 1, 1, log);
        }
    }
}
