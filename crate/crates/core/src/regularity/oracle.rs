//! Maximizers of `E[D(x) ∏_{f∈∂e} 1_{B_f}(x_f)]` over clique sets.
//!
//! For fixed faces other than a pivot face `p`, the best `B_p` keeps the
//! pivot elements with nonnegative marginal, so the search runs over the
//! remaining faces only: by Gray-code enumeration when that space is small,
//! otherwise by branch and bound with the bound
//! `Σ_y max(0, Σ_{x ↦ y} w(x))`, where `w` is `D` on points whose faces are
//! all in, `D⁺` on points with an undecided face and `0` once a face is out.

use std::sync::Arc;

use fixedbitset::FixedBitSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CliqueSet, EdgeGeometry};

/// How clique sets are searched.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// The true supremum (exhaustive enumeration or certified branch and bound).
    Exact,
    /// Coordinate ascent from `restarts` seeded starting points; a lower bound.
    Ascent { seed: u64, restarts: usize },
}

#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    /// Enumerate directly when the non-pivot faces have at most this many
    /// elements in total.
    pub enumeration_log2: u32,
    /// Branch-and-bound node budget; exceeding it is a resource error.
    pub node_budget: u64,
    /// Restarts of the ascent run used to seed exact searches.
    pub warm_restarts: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { enumeration_log2: 20, node_budget: 1 << 22, warm_restarts: 4 }
    }
}

/// `E[d · 1_set]`, summed directly.
pub fn value_on(d: &[f64], set: &CliqueSet) -> f64 {
    let mut s = 0.0;
    for (x, &v) in d.iter().enumerate() {
        if set.contains_flat(x) {
            s += v;
        }
    }
    s / d.len() as f64
}

pub(crate) struct Search<'a> {
    geom: &'a Arc<EdgeGeometry>,
    d: &'a [f64],
    pivot: usize,
    /// `fibers[k][z]`: the points projecting to `z` on face `k`.
    fibers: Vec<Vec<Vec<u32>>>,
}

impl<'a> Search<'a> {
    pub(crate) fn new(geom: &'a Arc<EdgeGeometry>, d: &'a [f64]) -> Self {
        let r = geom.r();
        // largest face as pivot, lowest index on ties
        let pivot = (0..r).fold(0, |best, k| if geom.face_len(k) > geom.face_len(best) { k } else { best });
        let fibers = (0..r)
            .map(|k| {
                let mut f = vec![Vec::new(); geom.face_len(k)];
                for (x, &z) in geom.projections(k).iter().enumerate() {
                    f[z as usize].push(x as u32);
                }
                f
            })
            .collect();
        Search { geom, d, pivot, fibers }
    }

    fn free_bits(&self) -> usize {
        (0..self.geom.r()).filter(|&k| k != self.pivot).map(|k| self.geom.face_len(k)).sum()
    }

    /// Completes non-pivot faces with the optimal pivot face.
    fn witness(&self, mut faces: Vec<FixedBitSet>) -> CliqueSet {
        let p = self.pivot;
        let mut m = vec![0.0; self.geom.face_len(p)];
        for (x, &v) in self.d.iter().enumerate() {
            let inside = (0..self.geom.r()).all(|k| k == p || faces[k].contains(self.geom.project(k, x)));
            if inside {
                m[self.geom.project(p, x)] += v;
            }
        }
        let mut bp = FixedBitSet::with_capacity(m.len());
        for (y, &v) in m.iter().enumerate() {
            bp.set(y, v >= 0.0);
        }
        faces[p] = bp;
        CliqueSet::from_faces(self.geom.clone(), faces).expect("face sizes match")
    }

    fn full_faces(&self) -> Vec<FixedBitSet> {
        (0..self.geom.r())
            .map(|k| {
                let mut b = FixedBitSet::with_capacity(self.geom.face_len(k));
                b.insert_range(..);
                b
            })
            .collect()
    }

    /// Exhaustive search over the non-pivot faces in Gray-code order,
    /// starting from the full set and keeping the first strict maximum.
    pub(crate) fn enumerate(&self) -> (f64, CliqueSet) {
        let r = self.geom.r();
        let p = self.pivot;
        let bits: Vec<(usize, usize)> = (0..r)
            .filter(|&k| k != p)
            .flat_map(|k| (0..self.geom.face_len(k)).map(move |z| (k, z)))
            .collect();
        let len = self.d.len();
        let mut outs = vec![0u8; len];
        let mut m = vec![0.0; self.geom.face_len(p)];
        for (x, &v) in self.d.iter().enumerate() {
            m[self.geom.project(p, x)] += v;
        }
        let score = |m: &[f64]| m.iter().map(|&v| v.max(0.0)).sum::<f64>();
        let mut state = vec![true; bits.len()];
        let mut best = (score(&m), state.clone());
        for i in 1u64..(1u64 << bits.len()) {
            let flip = i.trailing_zeros() as usize;
            let (k, z) = bits[flip];
            state[flip] = !state[flip];
            for &x in &self.fibers[k][z] {
                let x = x as usize;
                let y = self.geom.project(p, x);
                if state[flip] {
                    outs[x] -= 1;
                    if outs[x] == 0 {
                        m[y] += self.d[x];
                    }
                } else {
                    if outs[x] == 0 {
                        m[y] -= self.d[x];
                    }
                    outs[x] += 1;
                }
            }
            let v = score(&m);
            if v > best.0 {
                best = (v, state.clone());
            }
        }
        let mut faces = self.full_faces();
        for (&(k, z), &on) in bits.iter().zip(&best.1) {
            faces[k].set(z, on);
        }
        let w = self.witness(faces);
        (value_on(self.d, &w), w)
    }

    /// Coordinate ascent: each face in turn is reset to the elements whose
    /// marginal is nonnegative, until nothing changes.
    pub(crate) fn ascend(&self, start: Vec<FixedBitSet>) -> (f64, CliqueSet) {
        let r = self.geom.r();
        let mut faces = start;
        for _round in 0..200 {
            let mut changed = false;
            for k in 0..r {
                let mut m = vec![0.0; self.geom.face_len(k)];
                for (x, &v) in self.d.iter().enumerate() {
                    let inside = (0..r).all(|j| j == k || faces[j].contains(self.geom.project(j, x)));
                    if inside {
                        m[self.geom.project(k, x)] += v;
                    }
                }
                let mut b = FixedBitSet::with_capacity(m.len());
                for (z, &v) in m.iter().enumerate() {
                    b.set(z, v >= 0.0);
                }
                if b != faces[k] {
                    faces[k] = b;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let w = CliqueSet::from_faces(self.geom.clone(), faces).expect("face sizes match");
        (value_on(self.d, &w), w)
    }

    /// Best ascent result over seeded restarts (restart 0 starts from the
    /// full set); ties go to the lowest restart index.
    pub(crate) fn ascent(&self, seed: u64, restarts: usize) -> (f64, CliqueSet) {
        let restarts = restarts.max(1);
        let results: Vec<(f64, CliqueSet)> = (0..restarts)
            .into_par_iter()
            .map(|i| {
                let start = if i == 0 {
                    self.full_faces()
                } else {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
                    (0..self.geom.r())
                        .map(|k| {
                            let mut b = FixedBitSet::with_capacity(self.geom.face_len(k));
                            for z in 0..self.geom.face_len(k) {
                                b.set(z, rng.gen_bool(0.5));
                            }
                            b
                        })
                        .collect()
                };
                self.ascend(start)
            })
            .collect();
        let mut best = 0;
        for (i, res) in results.iter().enumerate() {
            if res.0 > results[best].0 {
                best = i;
            }
        }
        results.into_iter().nth(best).expect("at least one restart")
    }

    /// The exact maximum, via enumeration or branch and bound.
    pub(crate) fn maximize_exact(&self, options: &OracleOptions) -> Result<(f64, CliqueSet)> {
        if self.free_bits() as u32 <= options.enumeration_log2 {
            return Ok(self.enumerate());
        }
        let warm = self.ascent(0, options.warm_restarts);
        let mut bb = Bnb::new(self, options.node_budget, warm.0, None);
        bb.run()?;
        Ok(match bb.best {
            Some(faces) => {
                let w = self.witness(faces);
                let v = value_on(self.d, &w);
                if v >= warm.0 {
                    (v, w)
                } else {
                    warm
                }
            }
            None => warm,
        })
    }

    /// Some clique set with value above `threshold`, or `None` if there is
    /// none (certified when `mode` is exact).
    pub(crate) fn find_above(
        &self,
        threshold: f64,
        mode: OracleMode,
        options: &OracleOptions,
    ) -> Result<Option<(f64, CliqueSet)>> {
        let (seed, restarts) = match mode {
            OracleMode::Ascent { seed, restarts } => (seed, restarts),
            OracleMode::Exact => (0, options.warm_restarts),
        };
        let warm = self.ascent(seed, restarts);
        if warm.0 > threshold {
            return Ok(Some(warm));
        }
        if let OracleMode::Ascent { .. } = mode {
            return Ok(None);
        }
        if self.free_bits() as u32 <= options.enumeration_log2 {
            let best = self.enumerate();
            return Ok((best.0 > threshold).then_some(best));
        }
        let mut bb = Bnb::new(self, options.node_budget, threshold, Some(threshold));
        bb.run()?;
        Ok(bb.best.map(|faces| {
            let w = self.witness(faces);
            (value_on(self.d, &w), w)
        }))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Face {
    In,
    Out,
    Free,
}

struct Bnb<'s, 'a> {
    search: &'s Search<'a>,
    state: Vec<Vec<Face>>,
    incumbent: f64,
    best: Option<Vec<FixedBitSet>>,
    stop_above: Option<f64>,
    nodes: u64,
    budget: u64,
    done: bool,
}

impl<'s, 'a> Bnb<'s, 'a> {
    fn new(search: &'s Search<'a>, budget: u64, incumbent: f64, stop_above: Option<f64>) -> Self {
        let g = search.geom;
        let state = (0..g.r())
            .map(|k| vec![if k == search.pivot { Face::In } else { Face::Free }; g.face_len(k)])
            .collect();
        Bnb { search, state, incumbent, best: None, stop_above, nodes: 0, budget, done: false }
    }

    fn run(&mut self) -> Result<()> {
        self.node()
    }

    fn faces_from_state(&self, free_in: bool) -> Vec<FixedBitSet> {
        self.state
            .iter()
            .map(|s| {
                let mut b = FixedBitSet::with_capacity(s.len());
                for (z, f) in s.iter().enumerate() {
                    b.set(z, *f == Face::In || (*f == Face::Free && free_in));
                }
                b
            })
            .collect()
    }

    fn node(&mut self) -> Result<()> {
        if self.done {
            return Ok(());
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::resource(format!(
                "exact discrepancy search exceeded {} branch-and-bound nodes",
                self.budget
            )));
        }
        let s = self.search;
        let g = s.geom;
        let r = g.r();
        let p = s.pivot;
        let len = s.d.len() as f64;
        let np = g.face_len(p);
        let (mut only_in, mut no_out, mut bound) = (vec![0.0; np], vec![0.0; np], vec![0.0; np]);
        let mut mass: Vec<Vec<f64>> = (0..r).map(|k| vec![0.0; g.face_len(k)]).collect();
        for (x, &v) in s.d.iter().enumerate() {
            let mut any_out = false;
            let mut any_free = false;
            for k in 0..r {
                if k == p {
                    continue;
                }
                match self.state[k][g.project(k, x)] {
                    Face::Out => {
                        any_out = true;
                        break;
                    }
                    Face::Free => any_free = true,
                    Face::In => {}
                }
            }
            if any_out {
                continue;
            }
            let y = g.project(p, x);
            no_out[y] += v;
            if any_free {
                bound[y] += v.max(0.0);
                for k in 0..r {
                    if k != p {
                        let z = g.project(k, x);
                        if self.state[k][z] == Face::Free {
                            mass[k][z] += v.abs();
                        }
                    }
                }
            } else {
                only_in[y] += v;
                bound[y] += v;
            }
        }
        let pos = |m: &[f64]| m.iter().map(|&v| v.max(0.0)).sum::<f64>() / len;
        let (lb_out, lb_in, ub) = (pos(&only_in), pos(&no_out), pos(&bound));
        for (lb, free_in) in [(lb_out, false), (lb_in, true)] {
            if lb > self.incumbent {
                self.incumbent = lb;
                self.best = Some(self.faces_from_state(free_in));
                if self.stop_above.is_some_and(|t| lb > t) {
                    self.done = true;
                    return Ok(());
                }
            }
        }
        if ub <= self.incumbent + 1e-13 {
            return Ok(());
        }
        let mut choice: Option<(f64, usize, usize)> = None;
        for (k, row) in mass.iter().enumerate() {
            for (z, &m) in row.iter().enumerate() {
                if k != p && self.state[k][z] == Face::Free && choice.map_or(true, |c| m > c.0) {
                    choice = Some((m, k, z));
                }
            }
        }
        let Some((_, k, z)) = choice else { return Ok(()) };
        for f in [Face::In, Face::Out] {
            self.state[k][z] = f;
            self.node()?;
            if self.done {
                break;
            }
        }
        self.state[k][z] = Face::Free;
        Ok(())
    }
}
