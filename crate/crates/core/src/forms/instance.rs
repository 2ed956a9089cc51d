use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{strides_for, Tensor};

/// A variable slot: a vertex class together with a copy tag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slot {
    pub class: usize,
    pub copy: u8,
    pub size: usize,
}

/// One factor `T(x_{v_1}, ..., x_{v_k})^n` of a forms expectation.
#[derive(Clone, Debug)]
pub struct Factor {
    pub tensor: Arc<Tensor>,
    pub vars: Vec<usize>,
    pub exponent: u8,
}

/// An expectation `E[∏ T_i(x_{vars_i})^{n_i}]` over independent uniform
/// variables, some of which may be identified with each other.
#[derive(Clone, Debug, Default)]
pub struct FormsInstance {
    slots: Vec<Slot>,
    factors: Vec<Factor>,
    parent: Vec<usize>,
}

impl FormsInstance {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a slot and returns its id.
    pub fn add_slot(&mut self, class: usize, copy: u8, size: usize) -> Result<usize> {
        if size == 0 {
            return Err(Error::structural("variable slots need a nonempty range"));
        }
        self.slots.push(Slot { class, copy, size });
        self.parent.push(self.parent.len());
        Ok(self.slots.len() - 1)
    }

    /// Declares an anonymous slot of the given range.
    pub fn add_variable(&mut self, size: usize) -> Result<usize> {
        let class = self.slots.len();
        self.add_slot(class, 0, size)
    }

    pub fn add_factor(&mut self, tensor: Arc<Tensor>, vars: &[usize], exponent: u8) -> Result<()> {
        if exponent > 1 {
            return Err(Error::structural("exponents must be 0 or 1"));
        }
        if tensor.rank() != vars.len() {
            return Err(Error::structural(format!(
                "rank-{} tensor attached to {} variables",
                tensor.rank(),
                vars.len()
            )));
        }
        for (axis, &v) in vars.iter().enumerate() {
            let slot = self
                .slots
                .get(v)
                .ok_or_else(|| Error::structural(format!("unknown variable slot {v}")))?;
            if slot.size != tensor.shape()[axis] {
                return Err(Error::structural(format!(
                    "axis {axis} has length {} but slot {v} ranges over {}",
                    tensor.shape()[axis],
                    slot.size
                )));
            }
        }
        self.factors.push(Factor { tensor, vars: vars.to_vec(), exponent });
        Ok(())
    }

    /// Forces slots `a` and `b` to take the same value.
    pub fn identify(&mut self, a: usize, b: usize) -> Result<()> {
        if a >= self.slots.len() || b >= self.slots.len() {
            return Err(Error::structural("identification refers to an unknown slot"));
        }
        if self.slots[a].size != self.slots[b].size {
            return Err(Error::structural("identified slots must range over the same set"));
        }
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        Ok(())
    }

    fn find(&self, mut v: usize) -> usize {
        while self.parent[v] != v {
            v = self.parent[v];
        }
        v
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// The representative slot of `v` after identifications.
    pub fn representative(&self, v: usize) -> usize {
        self.find(v)
    }

    /// Drops exponent-0 factors, merges identified slots, takes diagonals
    /// where a factor sees the same variable twice and discards variables no
    /// factor reads. `keep` lists slots that survive regardless.
    pub(crate) fn normalize(&self, keep: &[usize]) -> Normalized {
        let mut used = vec![false; self.slots.len()];
        for &k in keep {
            used[self.find(k)] = true;
        }
        for f in self.factors.iter().filter(|f| f.exponent == 1) {
            for &v in &f.vars {
                used[self.find(v)] = true;
            }
        }
        let mut index = vec![usize::MAX; self.slots.len()];
        let mut sizes = Vec::new();
        for (v, &u) in used.iter().enumerate() {
            if u {
                index[v] = sizes.len();
                sizes.push(self.slots[v].size);
            }
        }
        let factors = self
            .factors
            .iter()
            .filter(|f| f.exponent == 1)
            .map(|f| {
                let vars: Vec<usize> = f.vars.iter().map(|&v| index[self.find(v)]).collect();
                diagonal(&f.tensor, &vars)
            })
            .collect();
        let keep = keep.iter().map(|&k| index[self.find(k)]).collect();
        Normalized { sizes, factors, keep }
    }
}

/// A factor after normalization: distinct variables, tensor axes in `vars`
/// order.
#[derive(Clone, Debug)]
pub(crate) struct NFactor {
    pub vars: Vec<usize>,
    pub data: Arc<Tensor>,
}

#[derive(Clone, Debug)]
pub(crate) struct Normalized {
    pub sizes: Vec<usize>,
    pub factors: Vec<NFactor>,
    pub keep: Vec<usize>,
}

fn diagonal(tensor: &Arc<Tensor>, vars: &[usize]) -> NFactor {
    let mut distinct: Vec<usize> = Vec::with_capacity(vars.len());
    for &v in vars {
        if !distinct.contains(&v) {
            distinct.push(v);
        }
    }
    if distinct.len() == vars.len() {
        return NFactor { vars: distinct, data: tensor.clone() };
    }
    let old = strides_for(tensor.shape());
    let mut strides = vec![0; distinct.len()];
    let mut shape = vec![0; distinct.len()];
    for (axis, v) in vars.iter().enumerate() {
        let k = distinct.iter().position(|d| d == v).expect("present");
        strides[k] += old[axis];
        shape[k] = tensor.shape()[axis];
    }
    let mut out = Vec::with_capacity(shape.iter().product());
    let src = tensor.data();
    crate::forms::kernels::for_each_offset(&shape, &strides, |_, off| out.push(src[off]));
    NFactor {
        vars: distinct,
        data: Arc::new(Tensor::new(shape, out).expect("diagonal shape")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_variable_takes_the_diagonal() {
        let mut inst = FormsInstance::new();
        let a = inst.add_variable(3).unwrap();
        let b = inst.add_variable(3).unwrap();
        let t = Arc::new(Tensor::from_fn(vec![3, 3], |ix| (ix[0] * 3 + ix[1]) as f64));
        inst.add_factor(t, &[a, b], 1).unwrap();
        inst.identify(b, a).unwrap();
        let n = inst.normalize(&[]);
        assert_eq!(n.sizes, vec![3]);
        assert_eq!(n.factors[0].data.data(), &[0.0, 4.0, 8.0]);
    }

    #[test]
    fn mismatched_factor_is_structural() {
        let mut inst = FormsInstance::new();
        let a = inst.add_variable(2).unwrap();
        let t = Arc::new(Tensor::ones(vec![3]));
        assert!(matches!(inst.add_factor(t.clone(), &[a], 1), Err(Error::Structural(_))));
        assert!(matches!(inst.add_factor(t, &[7], 1), Err(Error::Structural(_))));
    }
}
