use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::eval::{evaluate, EvalOptions};
use crate::forms::instance::FormsInstance;
use crate::model::{blow_up_patterns, BlowUpMode, ExponentPattern, WeightedHypergraph};

/// Which exponent patterns a linear forms check evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LfcMode {
    /// Every pattern over the full 2-blow-up.
    Full,
    /// Every pattern over the weak 2-blow-up relative to edge `edge`.
    Weak { edge: usize },
    /// `samples` patterns over the full 2-blow-up drawn from a seeded generator.
    Sampled { samples: usize, seed: u64 },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PatternValue {
    pub pattern: ExponentPattern,
    pub value: f64,
}

/// Outcome of a linear forms check: the raw worst deviation from 1 and the
/// verdict against the tolerance.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LfcReport {
    pub mode: LfcMode,
    pub tol: f64,
    pub pattern_count: usize,
    pub worst_deviation: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_pattern: Vec<PatternValue>,
}

impl LfcReport {
    /// Drops the per-pattern listing.
    pub fn summary(mut self) -> Self {
        self.per_pattern.clear();
        self
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LfcOptions {
    pub eval: EvalOptions,
    /// Full enumeration is refused beyond `2^pattern_cap_log2` patterns.
    pub pattern_cap_log2: u32,
}

impl Default for LfcOptions {
    fn default() -> Self {
        LfcOptions { eval: EvalOptions::default(), pattern_cap_log2: 24 }
    }
}

/// The patterns selected by `mode` over `slots` exponent slots.
pub fn select_patterns(slots: usize, mode: LfcMode, cap_log2: u32) -> Result<Vec<ExponentPattern>> {
    match mode {
        LfcMode::Full | LfcMode::Weak { .. } => {
            if slots as u32 > cap_log2 {
                return Err(Error::resource(format!(
                    "2^{slots} patterns exceed the enumeration cap of 2^{cap_log2}; use sampled mode"
                )));
            }
            Ok((0..1u64 << slots).map(|i| ExponentPattern::from_index(slots, i)).collect())
        }
        LfcMode::Sampled { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..samples).map(|_| ExponentPattern::random(slots, &mut rng)).collect())
        }
    }
}

/// Evaluates `eval` on every pattern (in parallel, results kept in pattern
/// order) and summarizes the deviations from 1.
pub fn run_patterns(
    patterns: Vec<ExponentPattern>,
    mode: LfcMode,
    tol: f64,
    eval: impl Fn(&ExponentPattern) -> Result<f64> + Sync,
) -> Result<LfcReport> {
    let values: Vec<f64> = patterns.par_iter().map(&eval).collect::<Result<_>>()?;
    let worst_deviation = values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    Ok(LfcReport {
        mode,
        tol,
        pattern_count: values.len(),
        worst_deviation,
        pass: worst_deviation <= tol,
        per_pattern: patterns
            .into_iter()
            .zip(values)
            .map(|(pattern, value)| PatternValue { pattern, value })
            .collect(),
    })
}

/// The exponent slots `(edge, ω)` of the H-linear forms condition, in
/// pattern bit order.
pub fn lfc_slots(nu: &WeightedHypergraph, mode: LfcMode) -> Result<Vec<(usize, Vec<u8>)>> {
    let system = nu.system();
    let blow = match mode {
        LfcMode::Weak { edge } => {
            if edge >= system.num_edges() {
                return Err(Error::structural(format!("edge id {edge} is not in H")));
            }
            BlowUpMode::Weak(edge)
        }
        _ => BlowUpMode::Full,
    };
    Ok((0..system.num_edges())
        .flat_map(|id| blow_up_patterns(system, id, blow).into_iter().map(move |w| (id, w)))
        .collect())
}

/// The forms instance `E[∏_{e,ω} ν_e(x_e^{(ω)})^{n_{e,ω}}]`. Slot `2j + c`
/// holds `x_j^{(c)}`.
pub fn lfc_instance(
    nu: &WeightedHypergraph,
    slots: &[(usize, Vec<u8>)],
    pattern: &ExponentPattern,
) -> Result<FormsInstance> {
    if pattern.len() != slots.len() {
        return Err(Error::structural(format!(
            "pattern has {} slots, expected {}",
            pattern.len(),
            slots.len()
        )));
    }
    let system = nu.system();
    let mut inst = FormsInstance::new();
    for j in 0..system.num_classes() {
        for c in 0..2 {
            inst.add_slot(j, c, system.size(j))?;
        }
    }
    let tensors: Vec<Arc<_>> = nu.weights().iter().map(|w| Arc::new(w.clone())).collect();
    for (k, (id, omega)) in slots.iter().enumerate() {
        let vars: Vec<usize> = system.edge(*id).iter().zip(omega).map(|(&j, &w)| 2 * j + w as usize).collect();
        inst.add_factor(tensors[*id].clone(), &vars, pattern.get(k) as u8)?;
    }
    Ok(inst)
}

/// Checks the H-linear forms condition for `nu`.
pub fn check_lfc(nu: &WeightedHypergraph, mode: LfcMode, tol: f64) -> Result<LfcReport> {
    check_lfc_with(nu, mode, tol, &LfcOptions::default())
}

pub fn check_lfc_with(
    nu: &WeightedHypergraph,
    mode: LfcMode,
    tol: f64,
    options: &LfcOptions,
) -> Result<LfcReport> {
    let slots = lfc_slots(nu, mode)?;
    let patterns = select_patterns(slots.len(), mode, options.pattern_cap_log2)?;
    run_patterns(patterns, mode, tol, |p| {
        evaluate(&lfc_instance(nu, &slots, p)?, &options.eval)
    })
}
