//! H-densities, the telescoping decomposition of a density difference and
//! the densification operators `ν′`, `g′`, `g̃′`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::{density_instance, evaluate, marginal, EvalOptions, FormsInstance};
use crate::model::{CliqueSet, WeightedHypergraph};
use crate::regularity::{discrepancy_with, OracleMode, OracleOptions};
use crate::tensor::Tensor;

/// `E[∏_{e∈H} g_e(x_e) | x ∈ V_J]`.
pub fn h_density(g: &WeightedHypergraph) -> Result<f64> {
    evaluate(&density_instance(g)?, &EvalOptions::default())
}

fn same_system(a: &WeightedHypergraph, b: &WeightedHypergraph, what: &str) -> Result<()> {
    if a.same_system(b) {
        Ok(())
    } else {
        Err(Error::structural(format!("{what} live on different systems")))
    }
}

fn check_order(order: &[usize], edges: usize) -> Result<()> {
    let mut seen = vec![false; edges];
    for &e in order {
        if e >= edges || seen[e] {
            return Err(Error::structural(format!("{order:?} is not an ordering of the {edges} edges")));
        }
        seen[e] = true;
    }
    if order.len() != edges {
        return Err(Error::structural(format!("{order:?} is not an ordering of the {edges} edges")));
    }
    Ok(())
}

/// The terms `E[∏_{s<t} g̃_s · (g_t − g̃_t) · ∏_{s>t} g_s]`, `t` running over
/// `order`. They sum to `h_density(g) − h_density(g_tilde)`.
pub fn telescoping_terms(g: &WeightedHypergraph, g_tilde: &WeightedHypergraph, order: &[usize]) -> Result<Vec<f64>> {
    same_system(g, g_tilde, "g and g̃")?;
    let system = g.system();
    check_order(order, system.num_edges())?;
    let base = density_instance(g)?;
    let g_factors: Vec<Arc<Tensor>> = g.weights().iter().map(|w| Arc::new(w.clone())).collect();
    let gt_factors: Vec<Arc<Tensor>> = g_tilde.weights().iter().map(|w| Arc::new(w.clone())).collect();
    let mut terms = Vec::with_capacity(order.len());
    for (k, &t) in order.iter().enumerate() {
        let mut inst = FormsInstance::new();
        for slot in base.slots() {
            inst.add_slot(slot.class, slot.copy, slot.size)?;
        }
        for (pos, &e) in order.iter().enumerate() {
            let tensor = match pos.cmp(&k) {
                std::cmp::Ordering::Less => gt_factors[e].clone(),
                std::cmp::Ordering::Greater => g_factors[e].clone(),
                std::cmp::Ordering::Equal => Arc::new(g.weight(t).zip_map(g_tilde.weight(t), |a, b| a - b)?),
            };
            inst.add_factor(tensor, system.edge(e), 1)?;
        }
        terms.push(evaluate(&inst, &EvalOptions::default())?);
    }
    Ok(terms)
}

/// Pointwise `min(t, 1)`.
pub fn cap(t: &Tensor) -> Tensor {
    t.map(|v| v.min(1.0))
}

/// `ν′`, `g′`, `g̃′` on `V_{e1}`.
#[derive(Clone, Debug, Serialize)]
pub struct Densified {
    pub nu_prime: Tensor,
    pub g_prime: Tensor,
    pub g_tilde_prime: Tensor,
}

/// `E[∏_{e ≠ e1} w_e(x_e) | x_{e1}]`, a tensor over `V_{e1}`.
pub fn edge_marginal(w: &WeightedHypergraph, e1: usize) -> Result<Tensor> {
    let system = w.system();
    if e1 >= system.num_edges() {
        return Err(Error::structural(format!("edge id {e1} is not in H")));
    }
    let mut inst = FormsInstance::new();
    for j in 0..system.num_classes() {
        inst.add_slot(j, 0, system.size(j))?;
    }
    for (id, t) in w.weights().iter().enumerate().filter(|&(id, _)| id != e1) {
        inst.add_factor(Arc::new(t.clone()), system.edge(id), 1)?;
    }
    marginal(&inst, system.edge(e1), &EvalOptions::default())
}

fn check_majorized(nu: &WeightedHypergraph, g: &WeightedHypergraph, g_tilde: &WeightedHypergraph) -> Result<()> {
    same_system(nu, g, "ν and g")?;
    same_system(nu, g_tilde, "ν and g̃")?;
    let system = nu.system();
    for id in 0..system.num_edges() {
        if g.weight(id).data().iter().zip(nu.weight(id).data()).any(|(a, b)| a > b) {
            return Err(Error::contract(format!("g exceeds ν on edge {}", system.edge_key(id))));
        }
        if !g_tilde.weight(id).all(|v| (0.0..=1.0).contains(&v)) {
            return Err(Error::contract(format!("g̃ leaves [0, 1] on edge {}", system.edge_key(id))));
        }
    }
    Ok(())
}

/// The densification at `e1`. Requires `0 ≤ g ≤ ν` and `0 ≤ g̃ ≤ 1`.
pub fn densify(
    nu: &WeightedHypergraph,
    g: &WeightedHypergraph,
    g_tilde: &WeightedHypergraph,
    e1: usize,
) -> Result<Densified> {
    check_majorized(nu, g, g_tilde)?;
    let nu_prime = edge_marginal(nu, e1)?;
    let g_prime = edge_marginal(g, e1)?;
    let g_tilde_prime = edge_marginal(g_tilde, e1)?;
    // products of smaller nonnegative numbers; only rounding can break these
    let slack = |v: f64| 1e-12 * (1.0 + v.abs());
    if g_prime.data().iter().zip(nu_prime.data()).any(|(&a, &b)| a > b + slack(b)) {
        return Err(Error::Numeric("g′ exceeds ν′".into()));
    }
    if g_tilde_prime.data().iter().any(|&v| v > 1.0 + slack(1.0)) {
        return Err(Error::Numeric("g̃′ exceeds 1".into()));
    }
    Ok(Densified { nu_prime, g_prime, g_tilde_prime })
}

#[derive(Clone, Copy, Debug)]
pub struct CountingOptions {
    /// The edge singled out by the split; by default the first edge where
    /// `ν ≢ 1`, or edge 0.
    pub e1: Option<usize>,
    /// Compute per-edge discrepancies of `(g_e, g̃_e)` with this oracle.
    pub discrepancy: Option<OracleMode>,
    pub oracle: OracleOptions,
}

impl Default for CountingOptions {
    fn default() -> Self {
        CountingOptions { e1: None, discrepancy: Some(OracleMode::Exact), oracle: OracleOptions::default() }
    }
}

/// Densities of `g` and `g̃` and the diagnostics of the counting argument.
#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub density_g: f64,
    pub density_gtilde: f64,
    /// `|density_g − density_gtilde|`.
    pub gap: f64,
    /// `|H| · max_e disc(g_e, g̃_e)`, present when `ν ≡ 1` off at most one
    /// edge and every discrepancy is exact.
    pub bound_dense: Option<f64>,
    pub discrepancies: Vec<Option<f64>>,
    pub e1: usize,
    /// Edge ids, `e1` first, then the rest in increasing order.
    pub order: Vec<usize>,
    pub telescoping: Vec<f64>,
    /// `E[(ν′_e − 1)²]` for every edge `e`.
    pub nu_prime_deviation: Vec<f64>,
    /// `E[g_{e1}(g′ − g̃′)]`.
    pub split_main: f64,
    /// `E[(g_{e1} − g̃_{e1}) g̃′]`.
    pub split_rest: f64,
    /// `E[g_{e1}(g′ − g̃′)]²`.
    pub cauchy_schwarz_lhs: f64,
    /// `E[ν_{e1}(g′ − g̃′)²] · E[ν_{e1}]`.
    pub cauchy_schwarz_rhs: f64,
    /// `E[(g′ − g̃′)²]`.
    pub densified_l2: f64,
    /// `max (g′ − g′∧1)`.
    pub cap_loss_max: f64,
    /// `0 ≤ g′ − g′∧1 ≤ |ν′ − 1|` everywhere.
    pub cap_loss_bounded: bool,
}

fn mean_of(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> f64 {
    a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).sum::<f64>() / a.len() as f64
}

/// Compares the H-densities of `g` and `g̃` and records the quantities the
/// counting argument bounds. Requires `0 ≤ g ≤ ν` and `0 ≤ g̃ ≤ 1`.
pub fn counting_gap(
    nu: &WeightedHypergraph,
    g: &WeightedHypergraph,
    g_tilde: &WeightedHypergraph,
    options: &CountingOptions,
) -> Result<DensityReport> {
    check_majorized(nu, g, g_tilde)?;
    let system = nu.system();
    let edges = system.num_edges();
    let sparse_edges: Vec<usize> = (0..edges).filter(|&e| !nu.is_one_on(e)).collect();
    let e1 = match options.e1 {
        Some(e) if e >= edges => return Err(Error::structural(format!("edge id {e} is not in H"))),
        Some(e) => e,
        None => sparse_edges.first().copied().unwrap_or(0),
    };
    let order: Vec<usize> = std::iter::once(e1).chain((0..edges).filter(|&e| e != e1)).collect();

    let density_g = h_density(g)?;
    let density_gtilde = h_density(g_tilde)?;
    let telescoping = telescoping_terms(g, g_tilde, &order)?;

    let discrepancies: Vec<Option<f64>> = match options.discrepancy {
        Some(mode) => (0..edges)
            .map(|e| discrepancy_with(g.weight(e), g_tilde.weight(e), mode, &options.oracle).map(|c| Some(c.value)))
            .collect::<Result<_>>()?,
        None => vec![None; edges],
    };
    let dense_case = sparse_edges.len() <= 1 && sparse_edges.iter().all(|&e| e == e1);
    let bound_dense = (dense_case && options.discrepancy == Some(OracleMode::Exact)).then(|| {
        let worst = discrepancies.iter().flatten().fold(0.0f64, |m, &v| m.max(v));
        edges as f64 * worst
    });

    let nu_prime_deviation = (0..edges)
        .map(|e| edge_marginal(nu, e).map(|t| t.data().iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>() / t.len() as f64))
        .collect::<Result<Vec<_>>>()?;

    let d = densify(nu, g, g_tilde, e1)?;
    let diff = d.g_prime.zip_map(&d.g_tilde_prime, |a, b| a - b)?;
    let g1 = g.weight(e1);
    let nu1 = nu.weight(e1);
    let split_main = mean_of(g1, &diff, |a, b| a * b);
    let split_rest = mean_of(&g1.zip_map(g_tilde.weight(e1), |a, b| a - b)?, &d.g_tilde_prime, |a, b| a * b);
    let cauchy_schwarz_rhs = mean_of(nu1, &diff, |a, b| a * b * b) * nu1.mean();
    let densified_l2 = diff.data().iter().map(|v| v * v).sum::<f64>() / diff.len() as f64;
    let capped = cap(&d.g_prime);
    let loss = d.g_prime.zip_map(&capped, |a, b| a - b)?;
    let cap_loss_bounded = loss
        .data()
        .iter()
        .zip(d.nu_prime.data())
        .all(|(&l, &n)| l >= 0.0 && l <= (n - 1.0).abs() + 1e-12 * (1.0 + n));

    Ok(DensityReport {
        density_g,
        density_gtilde,
        gap: (density_g - density_gtilde).abs(),
        bound_dense,
        discrepancies,
        e1,
        order,
        telescoping,
        nu_prime_deviation,
        split_main,
        split_rest,
        cauchy_schwarz_lhs: split_main * split_main,
        cauchy_schwarz_rhs,
        densified_l2,
        cap_loss_max: loss.max_value(),
        cap_loss_bounded,
    })
}

/// `Q_d = E[∏_{ω∈{0,1}^d} (ν(x_{e∖d}, x_d^{(ω)}) − 1) ∏_{f ⊇ d} ∏_ω 1_{B_f}(x_{f∖d}, x_d^{(ω)})]`
/// for every `d ⊆ e`; `Q_∅ = E[(ν − 1) 1_B]` and `Q_e` is the box quantity.
#[derive(Clone, Debug, Serialize)]
pub struct BoxChain {
    /// `(d as tensor axes, Q_d)`, `d` running over subsets in binary order.
    pub q: Vec<(Vec<usize>, f64)>,
    /// `|Q_∅|`.
    pub lhs: f64,
    /// `Q_e^{1/2^{|e|}}`.
    pub rhs: f64,
}

impl BoxChain {
    /// `|Q_∅| ≤ Q_e^{1/2^{|e|}} + tol`.
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }

    /// `Q_d² ≤ Q_{d∪{j}} + tol` for every `d` and `j ∉ d`.
    pub fn steps_hold(&self, tol: f64) -> bool {
        let q: Vec<f64> = self.q.iter().map(|(_, v)| *v).collect();
        (0..q.len()).all(|d| (0..q.len().trailing_zeros()).all(|j| d >> j & 1 == 1 || q[d] * q[d] <= q[d | 1 << j] + tol))
    }
}

/// The Cauchy–Schwarz chain from `E[(ν − 1) 1_B]` to the box norm of
/// `ν − 1`, for a clique set `B` on the same edge.
pub fn box_chain(nu_e: &Tensor, b: &CliqueSet) -> Result<BoxChain> {
    let geom = b.geometry();
    if geom.shape() != nu_e.shape() {
        return Err(Error::structural("ν and the clique set live on different edges"));
    }
    let r = nu_e.rank();
    let centered = Arc::new(nu_e.map(|v| v - 1.0));
    let faces: Vec<Arc<Tensor>> = (0..r)
        .map(|k| {
            let face = b.face(k);
            let data = (0..geom.face_len(k)).map(|x| f64::from(u8::from(face.contains(x)))).collect();
            Tensor::new(geom.face_shape(k).to_vec(), data).map(Arc::new)
        })
        .collect::<Result<_>>()?;
    let mut q = Vec::with_capacity(1 << r);
    for d in 0..1usize << r {
        let mut inst = FormsInstance::new();
        let mut slots = Vec::with_capacity(r);
        for (axis, &n) in nu_e.shape().iter().enumerate() {
            let a = inst.add_slot(axis, 0, n)?;
            let c = if d >> axis & 1 == 1 { inst.add_slot(axis, 1, n)? } else { a };
            slots.push([a, c]);
        }
        let dl: Vec<usize> = (0..r).filter(|&a| d >> a & 1 == 1).collect();
        for w in 0..1usize << dl.len() {
            let mut vars: Vec<usize> = slots.iter().map(|s| s[0]).collect();
            for (bit, &axis) in dl.iter().enumerate() {
                vars[axis] = slots[axis][w >> bit & 1];
            }
            inst.add_factor(centered.clone(), &vars, 1)?;
            for k in (0..r).filter(|&k| d >> k & 1 == 0) {
                let fv: Vec<usize> = (0..r).filter(|&a| a != k).map(|a| vars[a]).collect();
                inst.add_factor(faces[k].clone(), &fv, 1)?;
            }
        }
        q.push((dl, evaluate(&inst, &EvalOptions::default())?));
    }
    let lhs = q[0].1.abs();
    let top = q[(1 << r) - 1].1;
    if top < -1e-12 {
        return Err(Error::Numeric(format!("box quantity {top} is negative")));
    }
    let rhs = top.max(0.0).powf(1.0 / (1u64 << r) as f64);
    Ok(BoxChain { q, lhs, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HypergraphSystem;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k3(n: usize) -> Arc<HypergraphSystem> {
        Arc::new(HypergraphSystem::complete(3, n, 2).unwrap())
    }

    fn random(sys: &Arc<HypergraphSystem>, rng: &mut ChaCha8Rng, hi: f64) -> WeightedHypergraph {
        WeightedHypergraph::from_fn(sys.clone(), |_, _| rng.gen_range(0.0..hi)).unwrap()
    }

    #[test]
    fn identity_triangle_density() {
        let sys = k3(2);
        let g = WeightedHypergraph::from_fn(sys, |_, ix| if ix[0] == ix[1] { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(h_density(&g).unwrap(), 0.25);
    }

    #[test]
    fn trivial_densities() {
        let sys = k3(3);
        assert_eq!(h_density(&WeightedHypergraph::constant(sys.clone(), 1.0).unwrap()).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random(&sys, &mut rng, 2.0).with_weight(1, Tensor::zeros(vec![3, 3])).unwrap();
        assert_eq!(h_density(&g).unwrap(), 0.0);
    }

    #[test]
    fn equal_pairs_have_zero_terms() {
        let sys = k3(3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random(&sys, &mut rng, 1.0);
        assert!(telescoping_terms(&g, &g, &[2, 0, 1]).unwrap().iter().all(|&t| t == 0.0));
        assert!(telescoping_terms(&g, &g, &[0, 0, 1]).is_err());
    }

    #[test]
    fn codegree_matches_loop() {
        let sys = k3(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nu = random(&sys, &mut rng, 3.0);
        // edge ids follow sorted order: {0,1}, {0,2}, {1,2}
        let e1 = sys.edge_id(&[1, 2]).unwrap();
        let got = edge_marginal(&nu, e1).unwrap();
        let (e02, e01) = (sys.edge_id(&[0, 2]).unwrap(), sys.edge_id(&[0, 1]).unwrap());
        for x1 in 0..3 {
            for x2 in 0..3 {
                let want: f64 =
                    (0..3).map(|x0| nu.weight(e01).get(&[x0, x1]) * nu.weight(e02).get(&[x0, x2])).sum::<f64>() / 3.0;
                assert!((got.get(&[x1, x2]) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn densify_flat_and_zero_cases() {
        let sys = k3(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let nu = WeightedHypergraph::constant(sys.clone(), 1.0).unwrap().with_weight(0, Tensor::filled(vec![3, 3], 2.0)).unwrap();
        let zero = WeightedHypergraph::constant(sys.clone(), 0.0).unwrap();
        let gt = random(&sys, &mut rng, 1.0);
        let d = densify(&nu, &zero, &gt, 0).unwrap();
        assert!(d.nu_prime.is_constant(1.0));
        assert!(d.g_prime.is_constant(0.0));
        let big = WeightedHypergraph::constant(sys, 1.5).unwrap();
        assert!(matches!(densify(&nu, &big, &gt, 0), Err(Error::Contract(_))));
        assert!(matches!(densify(&nu, &zero, &big, 0), Err(Error::Contract(_))));
    }

    #[test]
    fn cap_is_idempotent() {
        let t = Tensor::new(vec![3], vec![0.5, 2.5, 1.0]).unwrap();
        assert_eq!(cap(&t).data(), &[0.5, 1.0, 1.0]);
        assert_eq!(cap(&cap(&t)), cap(&t));
    }

    #[test]
    fn dense_gap_is_bounded_by_edge_count_times_discrepancy() {
        let sys = k3(4);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let nu = WeightedHypergraph::constant(sys.clone(), 1.0).unwrap();
        for _ in 0..10 {
            let g = random(&sys, &mut rng, 1.0);
            let gt = random(&sys, &mut rng, 1.0);
            let r = counting_gap(&nu, &g, &gt, &CountingOptions::default()).unwrap();
            let bound = r.bound_dense.expect("dense case");
            assert!(r.gap <= bound + 1e-12, "{r:?}");
        }
    }

    #[test]
    fn flat_nu_equal_pair_report() {
        let sys = k3(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let nu = WeightedHypergraph::constant(sys.clone(), 1.0).unwrap();
        let g = random(&sys, &mut rng, 1.0);
        let r = counting_gap(&nu, &g, &g, &CountingOptions::default()).unwrap();
        assert_eq!(r.gap, 0.0);
        assert_eq!(r.bound_dense, Some(0.0));
        assert!(r.nu_prime_deviation.iter().all(|&v| v == 0.0));
        assert_eq!(r.cap_loss_max, 0.0);
    }

    #[test]
    fn box_chain_ends_match_direct_values() {
        use crate::forms::box_quantity;
        use crate::model::EdgeGeometry;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let nu = Tensor::from_fn(vec![3, 4], |_| rng.gen_range(0.0..3.0));
        let geom = EdgeGeometry::new(nu.shape());
        let b = CliqueSet::from_predicates(geom, |_, _| rng.gen_bool(0.6));
        let c = box_chain(&nu, &b).unwrap();
        let direct: f64 = (0..nu.len()).filter(|&x| b.contains_flat(x)).map(|x| nu.data()[x] - 1.0).sum::<f64>() / 12.0;
        assert!((c.q[0].1 - direct).abs() < 1e-12);
        assert!((c.q[3].1 - box_quantity(&nu, &[0, 1]).unwrap()).abs() < 1e-12);
        assert!(c.holds(1e-9) && c.steps_hold(1e-9));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gowers_cauchy_schwarz(seed in any::<u64>(), r in 2usize..4) {
            use crate::model::EdgeGeometry;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let shape: Vec<usize> = (0..r).map(|_| rng.gen_range(2..5)).collect();
            let nu = Tensor::from_fn(shape.clone(), |_| if rng.gen_bool(0.4) { 2.5 } else { 0.0 });
            let b = CliqueSet::from_predicates(EdgeGeometry::new(&shape), |_, _| rng.gen_bool(0.7));
            let c = box_chain(&nu, &b).unwrap();
            prop_assert!(c.holds(1e-9));
            prop_assert!(c.steps_hold(1e-9));
        }

        #[test]
        fn telescoping_sums_to_density_difference(seed in any::<u64>(), perm in 0usize..6) {
            let sys = k3(3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random(&sys, &mut rng, 3.0);
            let gt = random(&sys, &mut rng, 1.0);
            let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let terms = telescoping_terms(&g, &gt, &orders[perm]).unwrap();
            let diff = h_density(&g).unwrap() - h_density(&gt).unwrap();
            prop_assert!((terms.iter().sum::<f64>() - diff).abs() < 1e-12);
        }

        #[test]
        fn densification_contracts(seed in any::<u64>(), e1 in 0usize..3) {
            let sys = k3(3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nu = random(&sys, &mut rng, 3.0);
            let g = WeightedHypergraph::new(
                sys.clone(),
                nu.weights().iter().map(|w| w.map(|v| v * 0.7)).collect(),
            ).unwrap();
            let gt = random(&sys, &mut rng, 1.0);
            let r = counting_gap(&nu, &g, &gt, &CountingOptions { e1: Some(e1), discrepancy: None, ..Default::default() }).unwrap();
            prop_assert!(r.cauchy_schwarz_lhs <= r.cauchy_schwarz_rhs + 1e-12);
            prop_assert!(r.cap_loss_bounded);
            prop_assert!((r.split_main + r.split_rest - (r.density_g - r.density_gtilde)).abs() < 1e-12);
            // E[g′] is the density of g with the e1 weight replaced by ones
            let d = densify(&nu, &g, &gt, e1).unwrap();
            let flat = g.with_weight(e1, Tensor::ones(sys.edge_shape(e1))).unwrap();
            prop_assert!((d.g_prime.mean() - h_density(&flat).unwrap()).abs() < 1e-12);
        }
    }
}
