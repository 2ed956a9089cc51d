use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `Z_{n_1} × ⋯ × Z_{n_m}`, elements encoded in mixed radix with the last
/// component fastest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclicProduct {
    pub orders: Vec<u64>,
}

impl CyclicProduct {
    pub fn new(orders: Vec<u64>) -> Result<Self> {
        if orders.contains(&0) {
            return Err(Error::Input("cyclic factors need positive order".into()));
        }
        Ok(CyclicProduct { orders })
    }

    pub fn cyclic(n: u64) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn size(&self) -> usize {
        self.orders.iter().product::<u64>() as usize
    }

    pub fn rank(&self) -> usize {
        self.orders.len()
    }

    pub fn encode(&self, element: &[u64]) -> usize {
        element.iter().zip(&self.orders).fold(0u64, |acc, (&x, &n)| acc * n + x % n) as usize
    }

    pub fn decode(&self, mut index: usize) -> Vec<u64> {
        let mut out = vec![0; self.orders.len()];
        for (slot, &n) in out.iter_mut().zip(&self.orders).rev() {
            *slot = index as u64 % n;
            index /= n as usize;
        }
        out
    }

    pub fn add(&self, a: usize, b: usize) -> usize {
        let (x, y) = (self.decode(a), self.decode(b));
        let sum: Vec<u64> = x.iter().zip(&y).zip(&self.orders).map(|((p, q), n)| (p + q) % n).collect();
        self.encode(&sum)
    }

    pub fn neg(&self, a: usize) -> usize {
        let x = self.decode(a);
        let out: Vec<u64> = x.iter().zip(&self.orders).map(|(p, n)| (n - p) % n).collect();
        self.encode(&out)
    }

    fn generators(&self) -> Vec<usize> {
        (0..self.rank())
            .map(|c| {
                let mut e = vec![0; self.rank()];
                e[c] = 1;
                self.encode(&e)
            })
            .collect()
    }

    /// The subgroup generated by `gens`, as a membership table.
    pub fn closure(&self, gens: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.size()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(a) = queue.pop_front() {
            for &g in gens {
                let b = self.add(a, g);
                if !seen[b] {
                    seen[b] = true;
                    queue.push_back(b);
                }
            }
        }
        seen
    }
}

/// A homomorphism `Z → Z'` given by an integer matrix: component `r` of
/// `φ(x)` is `Σ_c m[r][c] x_c` reduced mod `n'_r`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Homomorphism {
    pub matrix: Vec<Vec<i64>>,
}

impl Homomorphism {
    /// Checks the shape and that every generator's order is respected.
    pub fn validate(&self, from: &CyclicProduct, to: &CyclicProduct) -> Result<()> {
        if self.matrix.len() != to.rank() || self.matrix.iter().any(|row| row.len() != from.rank()) {
            return Err(Error::structural(format!(
                "a map Z^{} → Z'^{} needs a {}×{} matrix",
                from.rank(),
                to.rank(),
                to.rank(),
                from.rank()
            )));
        }
        for (c, &n) in from.orders.iter().enumerate() {
            for (r, &m) in to.orders.iter().enumerate() {
                if (n as i128 * self.matrix[r][c] as i128).rem_euclid(m as i128) != 0 {
                    return Err(Error::contract(format!(
                        "matrix entry ({r}, {c}) does not define a homomorphism Z_{n} → Z_{m}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, from: &CyclicProduct, to: &CyclicProduct, x: usize) -> usize {
        let x = from.decode(x);
        let out: Vec<u64> = self
            .matrix
            .iter()
            .zip(&to.orders)
            .map(|(row, &m)| {
                let s: i128 = row.iter().zip(&x).map(|(&a, &v)| a as i128 * v as i128).sum();
                s.rem_euclid(m as i128) as u64
            })
            .collect();
        to.encode(&out)
    }

    /// The full table `x ↦ φ(x)`.
    pub fn table(&self, from: &CyclicProduct, to: &CyclicProduct) -> Vec<usize> {
        (0..from.size()).map(|x| self.apply(from, to, x)).collect()
    }
}

/// Whether `{φ_i(d) − φ_j(d)}` generates `Z'`; checked on the generators of
/// `Z` by subgroup closure.
pub fn differences_generate(from: &CyclicProduct, to: &CyclicProduct, tables: &[Vec<usize>]) -> bool {
    let mut gens = Vec::new();
    for g in from.generators() {
        for a in tables {
            for b in tables {
                gens.push(to.add(a[g], to.neg(b[g])));
            }
        }
    }
    gens.sort_unstable();
    gens.dedup();
    to.closure(&gens).iter().all(|&b| b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_round_trips() {
        let g = CyclicProduct::new(vec![3, 4, 5]).unwrap();
        for i in 0..g.size() {
            assert_eq!(g.encode(&g.decode(i)), i);
            assert_eq!(g.add(i, g.neg(i)), 0);
        }
    }

    #[test]
    fn homomorphism_validation() {
        let z6 = CyclicProduct::cyclic(6).unwrap();
        let z3 = CyclicProduct::cyclic(3).unwrap();
        assert!(Homomorphism { matrix: vec![vec![1]] }.validate(&z6, &z3).is_ok());
        assert!(Homomorphism { matrix: vec![vec![1]] }.validate(&z3, &z6).is_err());
        assert!(Homomorphism { matrix: vec![vec![2]] }.validate(&z3, &z6).is_ok());
    }

    #[test]
    fn generation() {
        let z = CyclicProduct::cyclic(7).unwrap();
        let z2 = CyclicProduct::new(vec![7, 7]).unwrap();
        let corner = [vec![vec![0], vec![0]], vec![vec![1], vec![0]], vec![vec![0], vec![1]]];
        let tables: Vec<Vec<usize>> = corner.iter().map(|m| Homomorphism { matrix: m.clone() }.table(&z, &z2)).collect();
        assert!(differences_generate(&z, &z2, &tables));
        assert!(!differences_generate(&z, &z2, &tables[..2]));
        let z8 = CyclicProduct::cyclic(8).unwrap();
        let even: Vec<Vec<usize>> = [0, 2].iter().map(|&a| Homomorphism { matrix: vec![vec![a]] }.table(&z8, &z8)).collect();
        assert!(!differences_generate(&z8, &z8, &even));
    }
}
