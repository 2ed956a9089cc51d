use std::sync::Arc;

use crate::error::{Error, Result};
use crate::forms::instance::{FormsInstance, NFactor, Normalized};
use crate::forms::kernels::{batched_gemm, product_over, sum_into};
use crate::tensor::Tensor;

/// Budgets for [`eval_optimized_with`].
#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    /// Largest intermediate tensor (in entries) elimination may build.
    pub memory_budget: usize,
    /// Instances with at most this many variables go through the naive sweep.
    pub naive_max_vars: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { memory_budget: 1 << 27, naive_max_vars: 3 }
    }
}

/// Result of an optimized evaluation together with its cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// Entries in the largest tensor built during elimination.
    pub max_intermediate: usize,
    /// Whether the naive sweep produced the value.
    pub naive: bool,
}

/// The exact expectation by a full sweep over every assignment.
pub fn eval_naive(instance: &FormsInstance) -> Result<f64> {
    let n = instance.normalize(&[]);
    Ok(naive_marginal(&n)[0])
}

/// Exact conditional expectation with the `outputs` slots held fixed, by a
/// full sweep; the result has one axis per output slot.
pub fn marginal_naive(instance: &FormsInstance, outputs: &[usize]) -> Result<Tensor> {
    let n = instance.normalize(outputs);
    check_outputs(&n)?;
    let shape: Vec<usize> = n.keep.iter().map(|&v| n.sizes[v]).collect();
    Tensor::new(shape, naive_marginal(&n))
}

fn check_outputs(n: &Normalized) -> Result<()> {
    for (i, v) in n.keep.iter().enumerate() {
        if n.keep[..i].contains(v) {
            return Err(Error::structural("output slots must be distinct after identification"));
        }
    }
    Ok(())
}

fn naive_marginal(n: &Normalized) -> Vec<f64> {
    let vars = n.sizes.len();
    let strides: Vec<Vec<usize>> = n
        .factors
        .iter()
        .map(|f| super::kernels::strides_in(&(0..vars).collect::<Vec<_>>(), &f.vars, f.data.shape()))
        .collect();
    let out_strides = crate::tensor::strides_for(&n.keep.iter().map(|&v| n.sizes[v]).collect::<Vec<_>>());
    let mut out_stride = vec![0usize; vars];
    for (k, &v) in n.keep.iter().enumerate() {
        out_stride[v] = out_strides[k];
    }
    let out_len: usize = n.keep.iter().map(|&v| n.sizes[v]).product();
    let mut out = vec![0.0; out_len];
    let total: f64 = n.sizes.iter().map(|&s| s as f64).product();
    let denom = total / out_len as f64;

    let mut index = vec![0usize; vars];
    let mut offsets = vec![0usize; n.factors.len()];
    let mut out_off = 0usize;
    loop {
        let mut p = 1.0;
        for (f, &off) in n.factors.iter().zip(&offsets) {
            p *= f.data.data()[off];
        }
        out[out_off] += p;
        let mut k = vars;
        loop {
            if k == 0 {
                for v in out.iter_mut() {
                    *v /= denom;
                }
                return out;
            }
            k -= 1;
            index[k] += 1;
            for (off, s) in offsets.iter_mut().zip(&strides) {
                *off += s[k];
            }
            out_off += out_stride[k];
            if index[k] < n.sizes[k] {
                break;
            }
            for (off, s) in offsets.iter_mut().zip(&strides) {
                *off -= s[k] * n.sizes[k];
            }
            out_off -= out_stride[k] * n.sizes[k];
            index[k] = 0;
        }
    }
}

/// The exact expectation by variable elimination with default budgets.
pub fn eval_optimized(instance: &FormsInstance) -> Result<f64> {
    eval_optimized_with(instance, &EvalOptions::default()).map(|e| e.value)
}

/// Variable elimination: variables are summed out in greedy min-degree order
/// (ties to the lowest slot), each step contracting the factors that read the
/// variable as a batched matrix product.
pub fn eval_optimized_with(instance: &FormsInstance, options: &EvalOptions) -> Result<Evaluation> {
    let n = instance.normalize(&[]);
    if n.sizes.len() <= options.naive_max_vars {
        return Ok(Evaluation { value: naive_marginal(&n)[0], max_intermediate: 0, naive: true });
    }
    let (data, max_intermediate) = eliminate(&n, options)?;
    Ok(Evaluation { value: data[0], max_intermediate, naive: false })
}

/// Optimized evaluation that falls back to the naive sweep when the memory
/// budget is exceeded.
pub fn evaluate(instance: &FormsInstance, options: &EvalOptions) -> Result<f64> {
    match eval_optimized_with(instance, options) {
        Ok(e) => Ok(e.value),
        Err(e) if e.is_resource() => eval_naive(instance),
        Err(e) => Err(e),
    }
}

/// Conditional expectation with the `outputs` slots held fixed, by
/// elimination of every other variable.
pub fn marginal(instance: &FormsInstance, outputs: &[usize], options: &EvalOptions) -> Result<Tensor> {
    let n = instance.normalize(outputs);
    check_outputs(&n)?;
    let (data, _) = eliminate(&n, options)?;
    let shape: Vec<usize> = n.keep.iter().map(|&v| n.sizes[v]).collect();
    Tensor::new(shape, data)
}

struct Work {
    vars: Vec<usize>,
    shape: Vec<usize>,
    data: Arc<Vec<f64>>,
}

impl Work {
    fn from_factor(f: &NFactor) -> Work {
        Work {
            vars: f.vars.clone(),
            shape: f.data.shape().to_vec(),
            data: Arc::new(f.data.data().to_vec()),
        }
    }

    fn view(&self) -> (&[usize], &[usize], &[f64]) {
        (&self.vars, &self.shape, &self.data)
    }
}

fn union_vars<'a>(works: impl Iterator<Item = &'a Work>) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for w in works {
        for &v in &w.vars {
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out.sort_unstable();
    out
}

fn volume(vars: &[usize], sizes: &[usize]) -> usize {
    vars.iter().fold(1usize, |acc, &v| acc.saturating_mul(sizes[v]))
}

fn over_budget(len: usize, options: &EvalOptions) -> Result<()> {
    if len > options.memory_budget {
        return Err(Error::resource(format!(
            "elimination needs an intermediate of {len} entries (budget {})",
            options.memory_budget
        )));
    }
    Ok(())
}

enum Plan {
    /// Multiply everything over the union and sum `v` out.
    Single,
    /// Contract group `a` (bitmask over the factors) against the rest.
    Split(u32),
}

fn plan_step(works: &[&Work], v: usize, sizes: &[usize]) -> Plan {
    let all = union_vars(works.iter().copied());
    let mut best = (
        (works.len() + 1).saturating_mul(volume(&all, sizes)),
        Plan::Single,
    );
    let n = works.len();
    if n < 2 {
        return best.1;
    }
    let masks: Box<dyn Iterator<Item = u32>> = if n <= 10 {
        // bit 0 always sits in group a
        Box::new((0..(1u32 << (n - 1)) - 1).map(|m| (m << 1) | 1))
    } else {
        let biggest = (0..n).max_by_key(|&i| (works[i].data.len(), usize::MAX - i)).unwrap();
        Box::new(std::iter::once(1u32 << biggest))
    };
    for mask in masks {
        let a: Vec<&Work> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| works[i]).collect();
        let b: Vec<&Work> = (0..n).filter(|i| mask >> i & 1 == 0).map(|i| works[i]).collect();
        let va = union_vars(a.iter().copied());
        let vb = union_vars(b.iter().copied());
        let out: Vec<usize> = all.iter().copied().filter(|&u| u != v).collect();
        let cost = a
            .len()
            .saturating_mul(volume(&va, sizes))
            .saturating_add(b.len().saturating_mul(volume(&vb, sizes)))
            .saturating_add(volume(&out, sizes).saturating_mul(sizes[v]));
        if cost < best.0 {
            best = (cost, Plan::Split(mask));
        }
    }
    best.1
}

fn eliminate(n: &Normalized, options: &EvalOptions) -> Result<(Vec<f64>, usize)> {
    let sizes = &n.sizes;
    let mut live: Vec<Work> = n.factors.iter().map(Work::from_factor).collect();
    let mut done = vec![false; sizes.len()];
    for &k in &n.keep {
        done[k] = true;
    }
    let mut max_intermediate = 0usize;

    loop {
        // greedy min-degree choice
        let mut choice: Option<(usize, usize)> = None;
        for v in 0..sizes.len() {
            if done[v] {
                continue;
            }
            let nbrs = union_vars(live.iter().filter(|w| w.vars.contains(&v)));
            let degree = nbrs.len().saturating_sub(1);
            if choice.map_or(true, |(d, _)| degree < d) {
                choice = Some((degree, v));
            }
        }
        let Some((_, v)) = choice else { break };
        done[v] = true;

        let (touching, rest): (Vec<Work>, Vec<Work>) = live.into_iter().partition(|w| w.vars.contains(&v));
        live = rest;
        if touching.is_empty() {
            continue;
        }
        let refs: Vec<&Work> = touching.iter().collect();
        let all = union_vars(refs.iter().copied());
        let out_vars: Vec<usize> = all.iter().copied().filter(|&u| u != v).collect();
        let out_shape: Vec<usize> = out_vars.iter().map(|&u| sizes[u]).collect();
        let scale = 1.0 / sizes[v] as f64;

        let result = match plan_step(&refs, v, sizes) {
            Plan::Single => {
                let shape: Vec<usize> = all.iter().map(|&u| sizes[u]).collect();
                let len = volume(&all, sizes);
                over_budget(len, options)?;
                max_intermediate = max_intermediate.max(len);
                let views: Vec<_> = refs.iter().map(|w| w.view()).collect();
                let prod = if refs.len() == 1 && refs[0].vars == all {
                    refs[0].data.to_vec()
                } else {
                    product_over(&all, &shape, &views)
                };
                sum_into(&all, &shape, &prod, &out_vars, &out_shape, scale)
            }
            Plan::Split(mask) => {
                let a: Vec<&Work> = (0..refs.len()).filter(|i| mask >> i & 1 == 1).map(|i| refs[i]).collect();
                let b: Vec<&Work> = (0..refs.len()).filter(|i| mask >> i & 1 == 0).map(|i| refs[i]).collect();
                let va = union_vars(a.iter().copied());
                let vb = union_vars(b.iter().copied());
                let batch: Vec<usize> = va.iter().copied().filter(|u| *u != v && vb.contains(u)).collect();
                let m_vars: Vec<usize> = va.iter().copied().filter(|u| *u != v && !vb.contains(u)).collect();
                let n_vars: Vec<usize> = vb.iter().copied().filter(|u| *u != v && !va.contains(u)).collect();

                let layout_a: Vec<usize> = batch.iter().chain(&m_vars).chain([&v]).copied().collect();
                let layout_b: Vec<usize> = batch.iter().chain([&v]).chain(&n_vars).copied().collect();
                let layout_c: Vec<usize> = batch.iter().chain(&m_vars).chain(&n_vars).copied().collect();
                let (len_a, len_b, len_c) = (volume(&layout_a, sizes), volume(&layout_b, sizes), volume(&layout_c, sizes));
                over_budget(len_a.max(len_b).max(len_c), options)?;
                max_intermediate = max_intermediate.max(len_a).max(len_b).max(len_c);

                let shape_of = |l: &[usize]| l.iter().map(|&u| sizes[u]).collect::<Vec<_>>();
                let views_a: Vec<_> = a.iter().map(|w| w.view()).collect();
                let views_b: Vec<_> = b.iter().map(|w| w.view()).collect();
                let ta = product_over(&layout_a, &shape_of(&layout_a), &views_a);
                let tb = product_over(&layout_b, &shape_of(&layout_b), &views_b);
                let c = batched_gemm(
                    volume(&batch, sizes),
                    volume(&m_vars, sizes),
                    sizes[v],
                    volume(&n_vars, sizes),
                    scale,
                    &ta,
                    &tb,
                );
                // reorder [batch, m, n] into sorted variable order
                let c_shape = shape_of(&layout_c);
                sum_into(&layout_c, &c_shape, &c, &out_vars, &out_shape, 1.0)
            }
        };
        live.push(Work { vars: out_vars, shape: out_shape, data: Arc::new(result) });
    }

    let keep = &n.keep;
    let keep_shape: Vec<usize> = keep.iter().map(|&u| sizes[u]).collect();
    let views: Vec<_> = live.iter().map(|w| w.view()).collect();
    over_budget(volume(keep, sizes), options)?;
    Ok((product_over(keep, &keep_shape, &views), max_intermediate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(seed: u64, vars: usize, factors: usize) -> FormsInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inst = FormsInstance::new();
        let slots: Vec<usize> = (0..vars).map(|_| inst.add_variable(rng.gen_range(1..5)).unwrap()).collect();
        for _ in 0..factors {
            let arity = rng.gen_range(0..4.min(vars) + 1);
            let vs: Vec<usize> = (0..arity).map(|_| slots[rng.gen_range(0..vars)]).collect();
            let shape: Vec<usize> = vs.iter().map(|&v| inst.slots()[v].size).collect();
            let t = Tensor::from_fn(shape, |_| rng.gen_range(-1.0..2.0));
            inst.add_factor(Arc::new(t), &vs, rng.gen_range(0..2)).unwrap();
        }
        inst
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() < 1e-14
    }

    proptest! {
        #[test]
        fn elimination_matches_sweep(seed in any::<u64>(), vars in 1usize..7, factors in 0usize..9) {
            let inst = random_instance(seed, vars, factors);
            let naive = eval_naive(&inst).unwrap();
            let opts = EvalOptions { naive_max_vars: 0, ..EvalOptions::default() };
            let fast = eval_optimized_with(&inst, &opts).unwrap().value;
            prop_assert!(close(naive, fast), "{naive} vs {fast}");
        }

        #[test]
        fn marginals_match_sweep(seed in any::<u64>(), vars in 2usize..6, factors in 1usize..7) {
            let inst = random_instance(seed, vars, factors);
            let outputs = [0, vars - 1];
            let a = marginal_naive(&inst, &outputs).unwrap();
            let b = marginal(&inst, &outputs, &EvalOptions::default()).unwrap();
            prop_assert_eq!(a.shape(), b.shape());
            for (x, y) in a.data().iter().zip(b.data()) {
                prop_assert!(close(*x, *y));
            }
        }
    }

    #[test]
    fn few_variables_are_bit_identical() {
        for seed in 0..50 {
            let inst = random_instance(seed, 3, 5);
            let e = eval_optimized_with(&inst, &EvalOptions::default()).unwrap();
            assert!(e.naive);
            assert_eq!(e.value.to_bits(), eval_naive(&inst).unwrap().to_bits());
        }
    }

    #[test]
    fn budget_overflow_is_a_resource_error() {
        let mut inst = FormsInstance::new();
        let vs: Vec<usize> = (0..5).map(|_| inst.add_variable(6).unwrap()).collect();
        let t = Arc::new(Tensor::from_fn(vec![6; 5], |ix| ix.iter().sum::<usize>() as f64));
        inst.add_factor(t, &vs, 1).unwrap();
        let opts = EvalOptions { memory_budget: 100, naive_max_vars: 0 };
        let err = eval_optimized_with(&inst, &opts).unwrap_err();
        assert!(err.is_resource());
        let fallback = evaluate(&inst, &opts).unwrap();
        assert!(close(fallback, eval_naive(&inst).unwrap()));
    }

    #[test]
    fn chain_intermediates_stay_small() {
        let n = 5;
        let mut sizes = Vec::new();
        for len in [4usize, 8, 16, 24] {
            let mut inst = FormsInstance::new();
            let vs: Vec<usize> = (0..=len).map(|_| inst.add_variable(n).unwrap()).collect();
            for w in vs.windows(2) {
                let t = Tensor::from_fn(vec![n, n], |ix| 1.0 + ((ix[0] * 7 + ix[1] * 3) % 5) as f64 / 5.0);
                inst.add_factor(Arc::new(t), w, 1).unwrap();
            }
            let opts = EvalOptions { naive_max_vars: 0, ..EvalOptions::default() };
            sizes.push(eval_optimized_with(&inst, &opts).unwrap().max_intermediate);
        }
        assert!(sizes.iter().all(|&s| s <= n * n), "{sizes:?}");
    }

    #[test]
    fn constants_and_empty_instances() {
        let inst = FormsInstance::new();
        assert_eq!(eval_naive(&inst).unwrap(), 1.0);
        assert_eq!(eval_optimized(&inst).unwrap(), 1.0);
        let mut inst = FormsInstance::new();
        let a = inst.add_variable(3).unwrap();
        inst.add_factor(Arc::new(Tensor::scalar(2.5)), &[], 1).unwrap();
        inst.add_factor(Arc::new(Tensor::zeros(vec![3])), &[a], 0).unwrap();
        assert_eq!(eval_naive(&inst).unwrap(), 2.5);
    }
}
