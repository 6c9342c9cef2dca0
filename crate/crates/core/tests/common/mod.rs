#![allow(dead_code)]

use hwpgo_core::annotate::Cfg;

const P: u64 = (1 << 61) - 1;

fn mul(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % P as u128) as u64
}

fn inv(a: u64) -> u64 {
    let (mut base, mut exp, mut acc) = (a, P - 2, 1u64);
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul(acc, base);
        }
        base = mul(base, base);
        exp >>= 1;
    }
    acc
}

/// Row-reduces `rows` in place modulo a large prime; returns the rank.
/// Conservation systems have 0/±1 minors, so this is the rank over Q.
fn rank(mut rows: Vec<Vec<u64>>) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(pivot) = (r..rows.len()).find(|&i| rows[i][c] != 0) else {
            continue;
        };
        rows.swap(r, pivot);
        let scale = inv(rows[r][c]);
        for x in rows[r].iter_mut() {
            *x = mul(*x, scale);
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && row[c] != 0 {
                let f = row[c];
                for (x, &y) in row.iter_mut().zip(&pivot_row) {
                    *x = (*x + P - mul(f, y)) % P;
                }
            }
        }
        r += 1;
    }
    r
}

/// Conservation equations of `cfg`: one row per in-side of every non-entry
/// block and per out-side of every non-exit block.
fn equations(cfg: &Cfg) -> Vec<Vec<u64>> {
    let mut rows = Vec::new();
    for b in &cfg.blocks {
        if b.id != cfg.entry {
            rows.push(cfg.edges.iter().map(|e| (e.dst == b.id) as u64).collect());
        }
        if b.id != cfg.exit {
            rows.push(cfg.edges.iter().map(|e| (e.src == b.id) as u64).collect());
        }
    }
    rows
}

/// Which edge counts the block counts pin down: edge `i` is determined iff
/// the unit vector `e_i` lies in the row space of the equations.
pub fn determined_edges(cfg: &Cfg) -> Vec<bool> {
    let rows = equations(cfg);
    let base = rank(rows.clone());
    (0..cfg.edges.len())
        .map(|i| {
            let mut with = rows.clone();
            with.push((0..cfg.edges.len()).map(|j| (i == j) as u64).collect());
            rank(with) == base
        })
        .collect()
}
