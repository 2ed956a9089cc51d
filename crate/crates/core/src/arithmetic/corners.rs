use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{HypergraphSystem, WeightedHypergraph};

/// The tripartite graphs on `X ∪ Y ∪ Z` with `X = Y = S` and `Z = Z_N`.
/// Classes are `X = 0`, `Y = 1`, `Z = 2`; vertex `i` of `X` or `Y` is the
/// `i`-th element of `S` in increasing order.
#[derive(Clone, Debug)]
pub struct CornerGraphs {
    pub n: usize,
    pub s: Vec<usize>,
    /// Complete between `X` and `Y`; `(y, z)` iff `z − y ∈ S`; `(x, z)` iff
    /// `z − x ∈ S`.
    pub gamma: WeightedHypergraph,
    /// `(x, y)` iff `(x, y) ∈ A`; `(y, z)` iff `(z − y, y) ∈ A`; `(x, z)` iff
    /// `(x, z − x) ∈ A`.
    pub g: WeightedHypergraph,
}

fn sorted_set(n: usize, s: &[usize]) -> Result<Vec<usize>> {
    let mut s = s.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.is_empty() || s.iter().any(|&v| v >= n) {
        return Err(Error::Input(format!("S must be a nonempty set of residues mod {n}")));
    }
    Ok(s)
}

fn indicator(n: usize, pairs: &[(usize, usize)]) -> Vec<bool> {
    let mut member = vec![false; n * n];
    for &(x, y) in pairs {
        member[x * n + y] = true;
    }
    member
}

/// Builds `Γ` and `G` from `S ⊆ Z_N` and `A ⊆ S × S`.
pub fn corner_graphs(n: usize, s: &[usize], a: &[(usize, usize)]) -> Result<CornerGraphs> {
    let s = sorted_set(n, s)?;
    let in_s: Vec<bool> = (0..n).map(|v| s.binary_search(&v).is_ok()).collect();
    if let Some(p) = a.iter().find(|&&(x, y)| x >= n || y >= n || !in_s[x] || !in_s[y]) {
        return Err(Error::Input(format!("{p:?} is not in S × S")));
    }
    let in_a = indicator(n, a);
    let m = s.len();
    let system = Arc::new(HypergraphSystem::new(vec![m, m, n], 2, vec![vec![0, 1], vec![0, 2], vec![1, 2]])?);
    let (xy, xz, yz) = (
        system.edge_id(&[0, 1]).expect("edge"),
        system.edge_id(&[0, 2]).expect("edge"),
        system.edge_id(&[1, 2]).expect("edge"),
    );
    let sub = |z: usize, v: usize| (z + n - v) % n;
    let bit = |b: bool| f64::from(u8::from(b));
    let gamma = WeightedHypergraph::from_fn(system.clone(), |e, ix| {
        if e == xy {
            1.0
        } else {
            bit(in_s[sub(ix[1], s[ix[0]])])
        }
    })?;
    let g = WeightedHypergraph::from_fn(system, |e, ix| {
        if e == xy {
            bit(in_a[s[ix[0]] * n + s[ix[1]]])
        } else if e == xz {
            let x = s[ix[0]];
            bit(in_a[x * n + sub(ix[1], x)])
        } else {
            debug_assert_eq!(e, yz);
            let y = s[ix[0]];
            bit(in_a[sub(ix[1], y) * n + y])
        }
    })?;
    Ok(CornerGraphs { n, s, gamma, g })
}

/// Triangle statistics of a 0/1 graph on `X ∪ Y ∪ Z`, by a full sweep.
#[derive(Clone, Debug, Serialize)]
pub struct TriangleCount {
    pub triangles: usize,
    pub edges: usize,
    /// Every edge lies in exactly one triangle.
    pub unique_triangles: bool,
}

pub fn count_triangles(g: &WeightedHypergraph) -> Result<TriangleCount> {
    let system = g.system();
    if system.num_classes() != 3 || system.r() != 2 || system.num_edges() != 3 {
        return Err(Error::structural("triangle counts need a tripartite graph"));
    }
    let sizes = system.sizes();
    let (xy, xz, yz) = (
        g.weight(system.edge_id(&[0, 1]).expect("edge")),
        g.weight(system.edge_id(&[0, 2]).expect("edge")),
        g.weight(system.edge_id(&[1, 2]).expect("edge")),
    );
    let mut per_edge = [vec![0usize; xy.len()], vec![0usize; xz.len()], vec![0usize; yz.len()]];
    let mut triangles = 0;
    for x in 0..sizes[0] {
        for y in 0..sizes[1] {
            if xy.data()[x * sizes[1] + y] == 0.0 {
                continue;
            }
            for z in 0..sizes[2] {
                if xz.data()[x * sizes[2] + z] != 0.0 && yz.data()[y * sizes[2] + z] != 0.0 {
                    triangles += 1;
                    per_edge[0][x * sizes[1] + y] += 1;
                    per_edge[1][x * sizes[2] + z] += 1;
                    per_edge[2][y * sizes[2] + z] += 1;
                }
            }
        }
    }
    let weights = [xy, xz, yz];
    let mut edges = 0;
    let mut unique_triangles = true;
    for (w, counts) in weights.iter().zip(&per_edge) {
        for (&v, &c) in w.data().iter().zip(counts) {
            if v != 0.0 {
                edges += 1;
                unique_triangles &= c == 1;
            }
        }
    }
    Ok(TriangleCount { triangles, edges, unique_triangles })
}

/// Whether `{(x, y), (x+d, y), (x, y+d)} ⊆ A` for some `d ≠ 0`.
pub fn has_corner(n: usize, a: &[(usize, usize)]) -> bool {
    let member = indicator(n, a);
    a.iter().any(|&(x, y)| (1..n).any(|d| member[(x + d) % n * n + y] && member[x * n + (y + d) % n]))
}

/// A maximal corner-free subset of `S × S`, built greedily over a seeded
/// shuffle.
pub fn random_corner_free(n: usize, s: &[usize], seed: u64) -> Result<Vec<(usize, usize)>> {
    let s = sorted_set(n, s)?;
    let mut pairs: Vec<(usize, usize)> = s.iter().flat_map(|&x| s.iter().map(move |&y| (x, y))).collect();
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut member = vec![false; n * n];
    let mut out = Vec::new();
    let at = |m: &[bool], x: usize, y: usize| m[(x % n) * n + y % n];
    for (x, y) in pairs {
        // (x, y) can be any of the three corners of a new corner
        let blocked = (1..n).any(|d| {
            let nd = n - d;
            (at(&member, x + d, y) && at(&member, x, y + d))
                || (at(&member, x + nd, y) && at(&member, x + nd, y + d))
                || (at(&member, x, y + nd) && at(&member, x + d, y + nd))
        });
        if !blocked {
            member[x * n + y] = true;
            out.push((x, y));
        }
    }
    out.sort_unstable();
    Ok(out)
}
