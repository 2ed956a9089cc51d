use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use crate::arithmetic::measure::MeasureZn;
use crate::error::{Error, Result};
use crate::forms::{evaluate, run_patterns, select_patterns, FormsInstance, LfcMode, LfcOptions, LfcReport};
use crate::model::ExponentPattern;
use crate::tensor::Tensor;

/// `ν(Σ_v a_v y_v)`, one integer coefficient per variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LinearForm {
    pub coefficients: Vec<i64>,
}

/// The factors of the `k`-linear forms condition: form `(j, ω)` is
/// `ν(Σ_i (i − j) x_i^{(ω_i)})`.
#[derive(Clone, Debug, Serialize)]
pub struct ZkForm {
    /// `1..=k`.
    pub j: usize,
    /// `ω_i` for `i ≠ j`, in increasing `i`.
    pub omega: Vec<u8>,
    pub form: LinearForm,
}

/// Variable index of `x_i^{(c)}` (`i` from 1).
pub fn zk_variable(i: usize, c: u8) -> usize {
    2 * (i - 1) + c as usize
}

/// All `k·2^{k−1}` forms, ordered by `j`, then by `ω` read as a binary
/// number with the smallest `i` in the lowest bit. This order is the
/// exponent pattern's bit order.
pub fn zk_forms(k: usize) -> Vec<ZkForm> {
    let mut out = Vec::with_capacity(k << (k - 1));
    for j in 1..=k {
        let others: Vec<usize> = (1..=k).filter(|&i| i != j).collect();
        for bits in 0..1usize << others.len() {
            let mut coefficients = vec![0i64; 2 * k];
            let mut omega = Vec::with_capacity(others.len());
            for (b, &i) in others.iter().enumerate() {
                let c = ((bits >> b) & 1) as u8;
                omega.push(c);
                coefficients[zk_variable(i, c)] = i as i64 - j as i64;
            }
            out.push(ZkForm { j, omega, form: LinearForm { coefficients } });
        }
    }
    out
}

/// The twelve factors of the product-set corner condition over
/// `(x, x', y, y', z, z')`: `ν(x) ν(x') ν(z−x) ν(z−x') ν(z'−x) ν(z'−x')`
/// and the same with `y` in place of `x`.
pub fn corner_product_forms() -> Vec<LinearForm> {
    let mut out = Vec::with_capacity(12);
    for base in [0usize, 2] {
        for c in 0..2 {
            let mut a = vec![0i64; 6];
            a[base + c] = 1;
            out.push(LinearForm { coefficients: a });
        }
        for z in 4..6 {
            for c in 0..2 {
                let mut a = vec![0i64; 6];
                a[z] = 1;
                a[base + c] = -1;
                out.push(LinearForm { coefficients: a });
            }
        }
    }
    out
}

/// A family of forms with its factor tensors built once. Pinned variables
/// are fixed to 0 and do not become slots.
pub struct PreparedForms {
    n: usize,
    slots: usize,
    factors: Vec<(Arc<Tensor>, Vec<usize>)>,
}

impl PreparedForms {
    pub fn new(nu: &MeasureZn, vars: usize, forms: &[LinearForm], pinned: &[usize], budget: usize) -> Result<Self> {
        let n = nu.n();
        let mut slot_of = vec![None; vars];
        let mut slots = 0;
        for (v, s) in slot_of.iter_mut().enumerate() {
            if !pinned.contains(&v) {
                *s = Some(slots);
                slots += 1;
            }
        }
        let mut cache: HashMap<Vec<i64>, Arc<Tensor>> = HashMap::new();
        let mut factors = Vec::with_capacity(forms.len());
        for form in forms {
            if form.coefficients.len() != vars {
                return Err(Error::structural("form and variable count disagree"));
            }
            let mut coeffs = Vec::new();
            let mut at = Vec::new();
            for (v, &a) in form.coefficients.iter().enumerate() {
                let a = a.rem_euclid(n as i64);
                if let (Some(s), true) = (slot_of[v], a != 0) {
                    coeffs.push(a);
                    at.push(s);
                }
            }
            let len = (n as f64).powi(coeffs.len() as i32);
            if len > budget as f64 {
                return Err(Error::resource(format!(
                    "a factor over {} variables needs {len} entries, above the budget of {budget}",
                    coeffs.len()
                )));
            }
            let tensor = cache
                .entry(coeffs.clone())
                .or_insert_with(|| {
                    Arc::new(Tensor::from_fn(vec![n; coeffs.len()], |ix| {
                        nu.at(ix.iter().zip(&coeffs).map(|(&x, &a)| x as i64 * a).sum())
                    }))
                })
                .clone();
            factors.push((tensor, at));
        }
        Ok(PreparedForms { n, slots, factors })
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn instance(&self, pattern: &ExponentPattern) -> Result<FormsInstance> {
        if pattern.len() != self.factors.len() {
            return Err(Error::structural(format!(
                "pattern has {} slots, expected {}",
                pattern.len(),
                self.factors.len()
            )));
        }
        let mut inst = FormsInstance::new();
        for v in 0..self.slots {
            inst.add_slot(v, 0, self.n)?;
        }
        for (k, (t, at)) in self.factors.iter().enumerate() {
            inst.add_factor(t.clone(), at, pattern.get(k) as u8)?;
        }
        Ok(inst)
    }
}

fn check_mode(mode: LfcMode) -> Result<()> {
    if let LfcMode::Weak { .. } = mode {
        return Err(Error::Input("weak mode is defined for hypergraph systems only".into()));
    }
    Ok(())
}

/// Variables pinned to 0 in the `k`-linear forms expectation.
///
/// Shifting every copy of `x_i` by `c_i` preserves each form when
/// `Σ c_i = Σ i c_i = 0`. The shifts `e_m − 2e_{m+1} + e_{m+2}` span these
/// integrally and are unitriangular on `x_1, …, x_{k−2}`, so averaging
/// over `x_m^{(0)}` for `m ≤ k − 2` changes nothing.
pub fn zk_pinned(k: usize) -> Vec<usize> {
    (1..=k.saturating_sub(2)).map(|m| zk_variable(m, 0)).collect()
}

/// Prepared `k`-linear forms family; `pin` selects the reduced instance.
pub fn zk_prepared(nu: &MeasureZn, k: usize, pin: bool, options: &LfcOptions) -> Result<PreparedForms> {
    if k < 3 {
        return Err(Error::Input(format!("k = {k}; the k-linear forms condition needs k ≥ 3")));
    }
    let forms: Vec<LinearForm> = zk_forms(k).into_iter().map(|f| f.form).collect();
    let pinned = if pin { zk_pinned(k) } else { Vec::new() };
    PreparedForms::new(nu, 2 * k, &forms, &pinned, options.eval.memory_budget)
}

/// Checks the `k`-linear forms condition for `ν` on `Z_N`.
pub fn zk_lfc_check(nu: &MeasureZn, k: usize, mode: LfcMode, tol: f64) -> Result<LfcReport> {
    zk_lfc_check_with(nu, k, mode, tol, &LfcOptions::default())
}

pub fn zk_lfc_check_with(nu: &MeasureZn, k: usize, mode: LfcMode, tol: f64, options: &LfcOptions) -> Result<LfcReport> {
    check_mode(mode)?;
    let prepared = zk_prepared(nu, k, true, options)?;
    let patterns = select_patterns(prepared.len(), mode, options.pattern_cap_log2)?;
    run_patterns(patterns, mode, tol, |p| evaluate(&prepared.instance(p)?, &options.eval))
}

/// Checks the twelve-factor product-set corner condition for `ν`.
pub fn lfc_corner_product(nu: &MeasureZn, mode: LfcMode, tol: f64) -> Result<LfcReport> {
    lfc_corner_product_with(nu, mode, tol, &LfcOptions::default())
}

pub fn lfc_corner_product_with(nu: &MeasureZn, mode: LfcMode, tol: f64, options: &LfcOptions) -> Result<LfcReport> {
    check_mode(mode)?;
    let prepared = PreparedForms::new(nu, 6, &corner_product_forms(), &[], options.eval.memory_budget)?;
    let patterns = select_patterns(prepared.len(), mode, options.pattern_cap_log2)?;
    run_patterns(patterns, mode, tol, |p| evaluate(&prepared.instance(p)?, &options.eval))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::measure::random_measure;
    use crate::forms::eval_naive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flat_measure_has_zero_deviation() {
        let nu = MeasureZn::ones(11).unwrap();
        let r = zk_lfc_check(&nu, 3, LfcMode::Full, 0.0).unwrap();
        assert_eq!(r.pattern_count, 4096);
        assert_eq!(r.worst_deviation, 0.0);
        let r = lfc_corner_product(&nu, LfcMode::Sampled { samples: 16, seed: 2 }, 0.0).unwrap();
        assert_eq!(r.worst_deviation, 0.0);
    }

    #[test]
    fn k3_forms_match_the_twelve_factor_display() {
        // x = x_1, y = x_2, z = x_3
        let forms = zk_forms(3);
        assert_eq!(forms.len(), 12);
        let j3: Vec<Vec<i64>> = forms.iter().filter(|f| f.j == 3).map(|f| f.form.coefficients.clone()).collect();
        assert!(j3.contains(&vec![-2, 0, -1, 0, 0, 0]));
        assert!(j3.contains(&vec![0, -2, 0, -1, 0, 0]));
        let j1: Vec<Vec<i64>> = forms.iter().filter(|f| f.j == 1).map(|f| f.form.coefficients.clone()).collect();
        assert!(j1.contains(&vec![0, 0, 1, 0, 2, 0]));
        assert!(j1.contains(&vec![0, 0, 0, 1, 0, 2]));
    }

    #[test]
    fn all_ones_pattern_is_the_twelve_factor_expectation() {
        let n = 7i64;
        let nu = random_measure(n as usize, 0.5, 4).unwrap();
        let prepared = zk_prepared(&nu, 3, true, &LfcOptions::default()).unwrap();
        let got = evaluate(&prepared.instance(&ExponentPattern::all_ones(12)).unwrap(), &Default::default()).unwrap();
        let f = |v: i64| nu.at(v);
        let mut sum = 0.0;
        for x in 0..n {
            for x2 in 0..n {
                for y in 0..n {
                    for y2 in 0..n {
                        for z in 0..n {
                            for z2 in 0..n {
                                sum += f(y + 2 * z) * f(y2 + 2 * z) * f(y + 2 * z2) * f(y2 + 2 * z2)
                                    * f(-x + z) * f(-x2 + z) * f(-x + z2) * f(-x2 + z2)
                                    * f(-2 * x - y) * f(-2 * x2 - y) * f(-2 * x - y2) * f(-2 * x2 - y2);
                            }
                        }
                    }
                }
            }
        }
        let want = sum / (n as f64).powi(6);
        assert!((got - want).abs() <= 1e-12 * want.max(1.0), "{got} vs {want}");
    }

    #[test]
    fn pinning_preserves_every_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (k, n) in [(3usize, 7usize), (4, 5)] {
            let nu = random_measure(n, 0.5, k as u64).unwrap();
            let opts = LfcOptions::default();
            let pinned = zk_prepared(&nu, k, true, &opts).unwrap();
            let full = zk_prepared(&nu, k, false, &opts).unwrap();
            for _ in 0..6 {
                let p = ExponentPattern::random(pinned.len(), &mut rng);
                let a = eval_naive(&pinned.instance(&p).unwrap()).unwrap();
                let b = eval_naive(&full.instance(&p).unwrap()).unwrap();
                assert!((a - b).abs() <= 1e-10 * b.max(1.0), "k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn sampled_values_match_naive() {
        let nu = random_measure(13, 0.5, 7).unwrap();
        let r = zk_lfc_check(&nu, 3, LfcMode::Sampled { samples: 20, seed: 1 }, 1.0).unwrap();
        let prepared = zk_prepared(&nu, 3, true, &LfcOptions::default()).unwrap();
        for pv in &r.per_pattern {
            let naive = eval_naive(&prepared.instance(&pv.pattern).unwrap()).unwrap();
            assert!((naive - pv.value).abs() <= 1e-9 * naive.max(1.0));
        }
    }

    #[test]
    fn single_corner_factor_is_the_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nu = MeasureZn::new((0..9).map(|_| rng.gen_range(0.0..2.0)).collect()).unwrap();
        let prepared = PreparedForms::new(&nu, 6, &corner_product_forms(), &[], 1 << 20).unwrap();
        for k in 0..12 {
            let mut bits = vec![0u8; 12];
            bits[k] = 1;
            let v = eval_naive(&prepared.instance(&ExponentPattern::new(bits)).unwrap()).unwrap();
            assert!((v - nu.mean()).abs() < 1e-12);
        }
    }

    #[test]
    fn weak_mode_is_rejected() {
        let nu = MeasureZn::ones(5).unwrap();
        assert!(matches!(zk_lfc_check(&nu, 3, LfcMode::Weak { edge: 0 }, 0.1), Err(Error::Input(_))));
    }
}
