use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::eval::{evaluate, EvalOptions};
use crate::forms::instance::FormsInstance;
use crate::model::WeightedHypergraph;
use crate::tensor::Tensor;

/// `E[∏_{e∈H} g_e(x_e) | x ∈ V_J]` as a forms instance (slot `j` is `x_j`).
pub fn density_instance(g: &WeightedHypergraph) -> Result<FormsInstance> {
    let system = g.system();
    let mut inst = FormsInstance::new();
    for j in 0..system.num_classes() {
        inst.add_slot(j, 0, system.size(j))?;
    }
    for (id, w) in g.weights().iter().enumerate() {
        inst.add_factor(Arc::new(w.clone()), system.edge(id), 1)?;
    }
    Ok(inst)
}

fn distinct_axes(d: &[usize], rank: usize) -> Result<()> {
    for (i, &a) in d.iter().enumerate() {
        if a >= rank || d[..i].contains(&a) {
            return Err(Error::structural(format!("{d:?} is not a set of axes of a rank-{rank} tensor")));
        }
    }
    Ok(())
}

/// `E[∏_{ω ∈ {0,1}^d} (ν(x_{e∖d}, x_d^{(ω)}) − 1)]` over independent copies;
/// `d` lists tensor axes. For `d = e` this is the `2^{|e|}`-th power of the
/// box norm of `ν − 1`.
pub fn box_quantity(nu_e: &Tensor, d: &[usize]) -> Result<f64> {
    distinct_axes(d, nu_e.rank())?;
    let centered = Arc::new(nu_e.map(|v| v - 1.0));
    let mut inst = FormsInstance::new();
    // slot[axis][copy]; axes outside d get a single slot
    let mut slots = Vec::with_capacity(nu_e.rank());
    for (axis, &n) in nu_e.shape().iter().enumerate() {
        let a = inst.add_slot(axis, 0, n)?;
        let b = if d.contains(&axis) { inst.add_slot(axis, 1, n)? } else { a };
        slots.push([a, b]);
    }
    for bits in 0..(1usize << d.len()) {
        let mut vars: Vec<usize> = slots.iter().map(|s| s[0]).collect();
        for (k, &axis) in d.iter().enumerate() {
            vars[axis] = slots[axis][(bits >> k) & 1];
        }
        inst.add_factor(centered.clone(), &vars, 1)?;
    }
    evaluate(&inst, &EvalOptions::default())
}

/// The pointwise majorant declared for a factor of the strong forms
/// quantity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Majorant {
    One,
    Nu,
}

/// `E[(ν_{e1}(x_{e1}) − 1) ∏_{ι∈{0,1}} ∏_{e≠e1} g_e^{(ι)}(x_e^{(ι)})]` with the
/// coordinates in `e1` shared by both copies.
///
/// `majorants[ι][e]` declares `g_e^{(ι)} ≤ 1` or `g_e^{(ι)} ≤ ν_e`; the
/// declaration is checked at every point. Weights of `g^{(ι)}` on `e1` are
/// ignored.
pub fn strong_forms_quantity(
    nu: &WeightedHypergraph,
    g: [&WeightedHypergraph; 2],
    majorants: [&[Majorant]; 2],
    e1: usize,
) -> Result<f64> {
    let system = nu.system();
    if e1 >= system.num_edges() {
        return Err(Error::structural(format!("edge id {e1} is not in H")));
    }
    for iota in 0..2 {
        if !g[iota].same_system(nu) {
            return Err(Error::structural("g and ν live on different systems"));
        }
        if majorants[iota].len() != system.num_edges() {
            return Err(Error::structural("one majorant declaration per edge is required"));
        }
        for id in (0..system.num_edges()).filter(|&id| id != e1) {
            let w = g[iota].weight(id);
            let ok = match majorants[iota][id] {
                Majorant::One => w.all(|v| v <= 1.0),
                Majorant::Nu => w.data().iter().zip(nu.weight(id).data()).all(|(a, b)| a <= b),
            };
            if !ok {
                return Err(Error::contract(format!(
                    "g^({iota}) on edge {} is not bounded by its declared majorant {:?}",
                    system.edge_key(id),
                    majorants[iota][id]
                )));
            }
        }
    }
    let base = system.edge(e1);
    let mut inst = FormsInstance::new();
    for j in 0..system.num_classes() {
        let a = inst.add_slot(j, 0, system.size(j))?;
        let b = inst.add_slot(j, 1, system.size(j))?;
        if base.contains(&j) {
            inst.identify(a, b)?;
        }
    }
    let centered = nu.weight(e1).map(|v| v - 1.0);
    let vars0: Vec<usize> = base.iter().map(|&j| 2 * j).collect();
    inst.add_factor(Arc::new(centered), &vars0, 1)?;
    for (iota, gi) in g.iter().enumerate() {
        for id in (0..system.num_edges()).filter(|&id| id != e1) {
            let vars: Vec<usize> = system.edge(id).iter().map(|&j| 2 * j + iota).collect();
            inst.add_factor(Arc::new(gi.weight(id).clone()), &vars, 1)?;
        }
    }
    evaluate(&inst, &EvalOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HypergraphSystem;

    #[test]
    fn box_quantity_small_cases() {
        let ones = Tensor::ones(vec![3, 3]);
        assert_eq!(box_quantity(&ones, &[0, 1]).unwrap(), 0.0);
        let nu = Tensor::from_fn(vec![2, 3], |ix| (ix[0] + 2 * ix[1]) as f64);
        assert!((box_quantity(&nu, &[]).unwrap() - (nu.mean() - 1.0)).abs() < 1e-12);
        assert!(box_quantity(&nu, &[0, 0]).is_err());
    }

    #[test]
    fn box_quantity_matches_quadruple_loop() {
        let nu = Tensor::from_fn(vec![4, 4], |ix| [0.0, 2.0, 1.5, 0.25][(ix[0] * 5 + ix[1] * 3) % 4]);
        let mut sum = 0.0;
        for a in 0..4 {
            for a2 in 0..4 {
                for b in 0..4 {
                    for b2 in 0..4 {
                        sum += (nu.get(&[a, b]) - 1.0)
                            * (nu.get(&[a, b2]) - 1.0)
                            * (nu.get(&[a2, b]) - 1.0)
                            * (nu.get(&[a2, b2]) - 1.0);
                    }
                }
            }
        }
        let want = sum / 256.0;
        assert!((box_quantity(&nu, &[0, 1]).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn strong_quantity_vanishes_for_flat_nu_or_zero_g() {
        let sys = Arc::new(HypergraphSystem::complete(3, 3, 2).unwrap());
        let nu = WeightedHypergraph::from_fn(sys.clone(), |e, ix| if e == 0 { 1.0 } else { (ix[0] + ix[1]) as f64 }).unwrap();
        let g = WeightedHypergraph::from_fn(sys.clone(), |_, ix| if ix[0] == 0 { 0.5 } else { 0.0 }).unwrap();
        let maj = vec![Majorant::One; 3];
        assert_eq!(strong_forms_quantity(&nu, [&g, &g], [&maj, &maj], 0).unwrap(), 0.0);
        let zero = WeightedHypergraph::constant(sys.clone(), 0.0).unwrap();
        assert_eq!(strong_forms_quantity(&nu, [&zero, &zero], [&maj, &maj], 1).unwrap(), 0.0);
        let big = WeightedHypergraph::constant(sys, 2.0).unwrap();
        assert!(matches!(
            strong_forms_quantity(&nu, [&big, &g], [&maj, &maj], 1),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn strong_quantity_matches_direct_sum() {
        // K_3, e1 = {0,1}: E[(ν01(x0,x1) − 1) Σ over x2, x2' of the g's]
        let sys = Arc::new(HypergraphSystem::complete(3, 3, 2).unwrap());
        let nu = WeightedHypergraph::from_fn(sys.clone(), |e, ix| ((ix[0] * 2 + ix[1] + e) % 3) as f64).unwrap();
        let g0 = WeightedHypergraph::from_fn(sys.clone(), |_, ix| ((ix[0] + ix[1]) % 2) as f64 * 0.7).unwrap();
        let g1 = WeightedHypergraph::from_fn(sys.clone(), |_, ix| if ix[1] == 2 { 0.0 } else { 0.9 }).unwrap();
        let maj = vec![Majorant::One; 3];
        let got = strong_forms_quantity(&nu, [&g0, &g1], [&maj, &maj], 0).unwrap();
        let mut sum = 0.0;
        for x0 in 0..3 {
            for x1 in 0..3 {
                for z0 in 0..3 {
                    for z1 in 0..3 {
                        sum += (nu.weight(0).get(&[x0, x1]) - 1.0)
                            * g0.weight(1).get(&[x0, z0])
                            * g0.weight(2).get(&[x1, z0])
                            * g1.weight(1).get(&[x0, z1])
                            * g1.weight(2).get(&[x1, z1]);
                    }
                }
            }
        }
        assert!((got - sum / 81.0).abs() < 1e-12);
    }
}
