//! Removal at desk scale: a greedy dense removal and the relative removal
//! pipeline built on regularization, counting and dense removal.
//!
//! The dense step certifies the removed part of each edge as a union of
//! singleton clique sets, so its complexity grows with the instance. It
//! does not reach the bounded complexity of the dense removal lemma.

use std::sync::Arc;

use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use serde::Serialize;

use crate::counting::{counting_gap, h_density, CountingOptions, DensityReport};
use crate::error::{Error, Result};
use crate::forms::{check_lfc, eval_naive, marginal, EvalOptions, FormsInstance, LfcMode, LfcReport};
use crate::model::{CliqueSet, EdgeGeometry, HypergraphSystem, WeightedHypergraph};
use crate::regularity::{upper_regularity_deficit_with, weak_regularize_with, OracleMode, RegularizeOptions};
use crate::tensor::Tensor;

/// Kept sets `E′_e ⊆ V_e` with the mass removed from each edge.
#[derive(Clone, Debug, Serialize)]
pub struct RemovalResult {
    pub edges: Vec<String>,
    #[serde(skip)]
    pub kept_sets: Vec<FixedBitSet>,
    /// `E[w_e 1_{V_e ∖ E′_e}]` for the weights the result is measured against.
    pub removed_mass: Vec<f64>,
    /// Flat indices of `V_e ∖ E′_e`; each is a singleton clique set.
    pub complexity_certificate: Vec<Vec<usize>>,
    /// Number of clique sets in the largest certificate.
    pub complexity: usize,
    /// Tuples deleted by the greedy phase, in deletion order, as `(edge, flat index)`.
    pub deletions: Vec<(usize, usize)>,
    pub h_free: bool,
}

impl RemovalResult {
    /// The certificate of edge `e` as clique sets.
    pub fn certificate_sets(&self, system: &HypergraphSystem, e: usize) -> Vec<CliqueSet> {
        let geom = EdgeGeometry::new(&system.edge_shape(e));
        self.complexity_certificate[e].iter().map(|&x| CliqueSet::singleton(geom.clone(), x)).collect()
    }

    fn measured_against(&mut self, w: &WeightedHypergraph) {
        self.removed_mass = removed_mass(w, &self.kept_sets);
    }
}

fn removed_mass(w: &WeightedHypergraph, kept: &[FixedBitSet]) -> Vec<f64> {
    w.weights()
        .iter()
        .zip(kept)
        .map(|(t, k)| {
            let removed: f64 = t.data().iter().enumerate().filter(|(x, _)| !k.contains(*x)).map(|(_, v)| v).sum::<f64>();
            // an empty f64 sum is -0.0
            let removed = removed + 0.0;
            removed / t.len() as f64
        })
        .collect()
}

fn indicator_instance(system: &HypergraphSystem, kept: &[FixedBitSet], skip: Option<usize>) -> Result<FormsInstance> {
    let mut inst = FormsInstance::new();
    for j in 0..system.num_classes() {
        inst.add_slot(j, 0, system.size(j))?;
    }
    for (e, k) in kept.iter().enumerate().filter(|&(e, _)| Some(e) != skip) {
        let shape = system.edge_shape(e);
        let data = (0..k.len()).map(|x| f64::from(u8::from(k.contains(x)))).collect();
        let t = Tensor::new(shape, data)?;
        inst.add_factor(Arc::new(t), system.edge(e), 1)?;
    }
    Ok(inst)
}

/// Number of copies of `H` through each kept tuple of every edge.
fn copy_counts(system: &HypergraphSystem, kept: &[FixedBitSet]) -> Result<Vec<Vec<u64>>> {
    let total: f64 = system.sizes().iter().map(|&n| n as f64).product();
    (0..system.num_edges())
        .into_par_iter()
        .map(|e| {
            let inst = indicator_instance(system, kept, Some(e))?;
            let m = marginal(&inst, system.edge(e), &EvalOptions::default())?;
            let scale = total / m.len() as f64;
            Ok(m.data()
                .iter()
                .enumerate()
                .map(|(x, &v)| if kept[e].contains(x) { (v * scale).round() as u64 } else { 0 })
                .collect())
        })
        .collect()
}

/// Whether no `x ∈ V_J` has `x_e ∈ E′_e` for every edge, by a full sweep.
pub fn is_h_free(system: &HypergraphSystem, kept: &[FixedBitSet]) -> Result<bool> {
    Ok(eval_naive(&indicator_instance(system, kept, None)?)? == 0.0)
}

/// Rounds `g̃` to `{x : g̃_e(x) > threshold}` and deletes, while a copy of
/// `H` survives, the tuple lying in the most surviving copies (ties to the
/// smallest `(edge, flat index)`). Removed mass is measured against `g̃`.
pub fn dense_remove(g_tilde: &WeightedHypergraph, threshold: f64) -> Result<RemovalResult> {
    if !g_tilde.bounded_by(1.0) {
        return Err(Error::contract("dense removal needs weights in [0, 1]"));
    }
    let system = g_tilde.system();
    let mut kept: Vec<FixedBitSet> = g_tilde
        .weights()
        .iter()
        .map(|t| {
            let mut b = FixedBitSet::with_capacity(t.len());
            b.extend(t.data().iter().enumerate().filter(|(_, &v)| v > threshold).map(|(x, _)| x));
            b
        })
        .collect();
    let mut deletions = Vec::new();
    loop {
        let counts = copy_counts(system, &kept)?;
        let mut best: Option<(u64, usize, usize)> = None;
        for (e, c) in counts.iter().enumerate() {
            for (x, &n) in c.iter().enumerate() {
                if n > 0 && best.map_or(true, |(m, _, _)| n > m) {
                    best = Some((n, e, x));
                }
            }
        }
        let Some((_, e, x)) = best else { break };
        kept[e].set(x, false);
        deletions.push((e, x));
    }
    let h_free = is_h_free(system, &kept)?;
    if !h_free {
        return Err(Error::Invariant("greedy removal left a copy of H".into()));
    }
    let complexity_certificate: Vec<Vec<usize>> =
        kept.iter().map(|k| (0..k.len()).filter(|&x| !k.contains(x)).collect()).collect();
    let mut result = RemovalResult {
        edges: (0..system.num_edges()).map(|e| system.edge_key(e)).collect(),
        kept_sets: kept,
        removed_mass: Vec::new(),
        complexity: complexity_certificate.iter().map(Vec::len).max().unwrap_or(0),
        complexity_certificate,
        deletions,
        h_free,
    };
    result.measured_against(g_tilde);
    Ok(result)
}

/// A pipeline stage whose check did not hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// `ν` failed the linear forms check.
    LinearForms,
    /// `h_density(g) > δ`.
    Density,
    /// Some `g_e` is not upper `η`-regular for the configured `η`.
    UpperRegularity,
    /// Some decomposition is not certified `ε`-discrepant.
    Regularization,
    /// The dense counting bound applied and failed.
    Counting,
    /// `E[g̃_e 1_{V_e∖E′_e}] > ε/2` on some edge.
    DenseMass,
    /// The triangle inequality over the certificate failed.
    DiscrepancyTransfer,
    /// `E[g_e 1_{V_e∖E′_e}] > ε` on some edge.
    FinalMass,
}

#[derive(Clone, Copy, Debug)]
pub struct RelativeOptions {
    pub mode: OracleMode,
    /// The `η` handed to the regularity lemma and checked against the deficits.
    pub eta: f64,
    pub threshold: f64,
    /// Run the linear forms check on `ν` at this tolerance.
    pub lfc: Option<(LfcMode, f64)>,
    /// Oracle for the per-edge discrepancies inside the counting report.
    pub counting_discrepancy: Option<OracleMode>,
}

impl Default for RelativeOptions {
    fn default() -> Self {
        RelativeOptions {
            mode: OracleMode::Exact,
            eta: 0.0,
            threshold: 0.5,
            lfc: None,
            counting_discrepancy: Some(OracleMode::Exact),
        }
    }
}

/// Per-edge summary of the weak regularity decomposition.
#[derive(Clone, Debug, Serialize)]
pub struct RegularizationSummary {
    pub steps: usize,
    pub cells: usize,
    pub certified: bool,
    pub violation: Option<f64>,
}

/// `E[(g̃_e − g_e) 1_{V_e∖E′_e}]` against the sum over the certificate.
#[derive(Clone, Debug, Serialize)]
pub struct TransferCheck {
    pub removed_difference: f64,
    pub certificate_sum: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RelativeRemoval {
    pub epsilon: f64,
    pub delta: f64,
    pub threshold: f64,
    pub density_g: f64,
    pub lfc: Option<LfcReport>,
    pub upper_deficits: Vec<f64>,
    pub regularization: Vec<RegularizationSummary>,
    pub g_tilde: Vec<Tensor>,
    pub counting: DensityReport,
    /// Mass removed from `g̃`.
    pub dense_mass: Vec<f64>,
    pub transfer: Vec<TransferCheck>,
    /// Measured against `g`.
    pub result: RemovalResult,
    pub failed: Vec<Stage>,
    pub first_failure: Option<Stage>,
}

/// Regularizes each `g_e`, removes copies of `H` from the dense model `g̃`
/// and measures the removal against `g`. Checks that fail are recorded in
/// `failed`, in pipeline order.
pub fn relative_remove(
    nu: &WeightedHypergraph,
    g: &WeightedHypergraph,
    epsilon: f64,
    delta: f64,
    options: &RelativeOptions,
) -> Result<RelativeRemoval> {
    if !g.same_system(nu) {
        return Err(Error::structural("ν and g live on different systems"));
    }
    if !g.le(nu) {
        return Err(Error::contract("g must be bounded by ν"));
    }
    let system = g.system().clone();
    let mut failed = Vec::new();

    let lfc = match options.lfc {
        Some((mode, tol)) => Some(check_lfc(nu, mode, tol)?.summary()),
        None => None,
    };
    if lfc.as_ref().is_some_and(|r| !r.pass) {
        failed.push(Stage::LinearForms);
    }
    let density_g = h_density(g)?;
    if density_g > delta {
        failed.push(Stage::Density);
    }

    let oracle = Default::default();
    let upper_deficits = g
        .weights()
        .iter()
        .map(|w| upper_regularity_deficit_with(w, options.mode, &oracle).map(|c| c.value))
        .collect::<Result<Vec<_>>>()?;
    if upper_deficits.iter().any(|&d| d > options.eta) {
        failed.push(Stage::UpperRegularity);
    }

    let reg = RegularizeOptions { mode: options.mode, oracle };
    let decompositions = g
        .weights()
        .iter()
        .map(|w| weak_regularize_with(w, epsilon, options.eta, &reg))
        .collect::<Result<Vec<_>>>()?;
    if decompositions.iter().any(|d| !d.certified) {
        failed.push(Stage::Regularization);
    }
    let g_tilde = WeightedHypergraph::new(system.clone(), decompositions.iter().map(|d| d.g_tilde.clone()).collect())?;

    let counting = counting_gap(
        nu,
        g,
        &g_tilde,
        &CountingOptions { e1: None, discrepancy: options.counting_discrepancy, oracle },
    )?;
    if counting.bound_dense.is_some_and(|b| counting.gap > b + 1e-12) {
        failed.push(Stage::Counting);
    }

    let mut result = dense_remove(&g_tilde, options.threshold)?;
    let dense_mass = result.removed_mass.clone();
    if dense_mass.iter().any(|&m| m > epsilon / 2.0) {
        failed.push(Stage::DenseMass);
    }

    let transfer: Vec<TransferCheck> = (0..system.num_edges())
        .map(|e| {
            let (gt, ge) = (g_tilde.weight(e).data(), g.weight(e).data());
            let n = gt.len() as f64;
            let cert = &result.complexity_certificate[e];
            let removed_difference = cert.iter().map(|&x| gt[x] - ge[x]).sum::<f64>() / n;
            let certificate_sum = cert.iter().map(|&x| (gt[x] - ge[x]).abs() / n).sum::<f64>();
            TransferCheck { removed_difference, certificate_sum }
        })
        .collect();
    if transfer.iter().any(|t| t.removed_difference.abs() > t.certificate_sum + 1e-12) {
        failed.push(Stage::DiscrepancyTransfer);
    }

    result.measured_against(g);
    if result.removed_mass.iter().any(|&m| m > epsilon) {
        failed.push(Stage::FinalMass);
    }

    Ok(RelativeRemoval {
        epsilon,
        delta,
        threshold: options.threshold,
        density_g,
        lfc,
        upper_deficits,
        regularization: decompositions
            .iter()
            .map(|d| RegularizationSummary {
                steps: d.steps,
                cells: d.partition.len(),
                certified: d.certified,
                violation: d.violation.as_ref().map(|v| v.value),
            })
            .collect(),
        g_tilde: g_tilde.into_weights(),
        counting,
        dense_mass,
        transfer,
        result,
        first_failure: failed.first().copied(),
        failed,
    })
}
