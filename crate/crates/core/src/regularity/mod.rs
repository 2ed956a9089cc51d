//! Discrepancy pairs, upper regularity and the weak regularity
//! decomposition.

mod decompose;
mod oracle;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CliqueSet, EdgeGeometry};
use crate::tensor::Tensor;

pub use decompose::{phi, weak_regularize, weak_regularize_with, CellRecord, Decomposition, RegularizeOptions};
pub use oracle::{value_on, OracleMode, OracleOptions};

pub(crate) use oracle::Search;

/// A clique set witnessing `|E[(g − h)·1_W]|`.
#[derive(Clone, Debug)]
pub struct DiscrepancyCertificate {
    /// The achieved absolute value (or, for upper regularity, the signed value).
    pub value: f64,
    /// `E[(g − h)·1_W]` with its sign.
    pub signed: f64,
    pub witness: CliqueSet,
    /// Whether `value` is the true supremum.
    pub exact: bool,
}

#[derive(Serialize)]
struct CertificateJson {
    value: f64,
    signed: f64,
    exact: bool,
    witness_faces: Vec<Vec<usize>>,
}

impl Serialize for DiscrepancyCertificate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CertificateJson {
            value: self.value,
            signed: self.signed,
            exact: self.exact,
            witness_faces: face_lists(&self.witness),
        }
        .serialize(s)
    }
}

pub(crate) fn face_lists(set: &CliqueSet) -> Vec<Vec<usize>> {
    set.faces().iter().map(|b| b.ones().collect()).collect()
}

fn difference(g: &Tensor, h: &Tensor) -> Result<Vec<f64>> {
    if g.shape() != h.shape() {
        return Err(Error::structural(format!(
            "tensors of shapes {:?} and {:?} live on different edges",
            g.shape(),
            h.shape()
        )));
    }
    if g.rank() == 0 {
        return Err(Error::structural("discrepancy needs an edge with at least one class"));
    }
    Ok(g.data().iter().zip(h.data()).map(|(a, b)| a - b).collect())
}

fn signed_max(
    geom: &std::sync::Arc<EdgeGeometry>,
    d: &[f64],
    mode: OracleMode,
    options: &OracleOptions,
) -> Result<(f64, CliqueSet)> {
    let search = Search::new(geom, d);
    match mode {
        OracleMode::Exact => search.maximize_exact(options),
        OracleMode::Ascent { seed, restarts } => Ok(search.ascent(seed, restarts)),
    }
}

/// `sup_B |E[(g − h) ∏_f 1_{B_f}]|` over clique sets (exact) or a local
/// optimum of it (ascent).
pub fn discrepancy(g: &Tensor, h: &Tensor, mode: OracleMode) -> Result<DiscrepancyCertificate> {
    discrepancy_with(g, h, mode, &OracleOptions::default())
}

pub fn discrepancy_with(
    g: &Tensor,
    h: &Tensor,
    mode: OracleMode,
    options: &OracleOptions,
) -> Result<DiscrepancyCertificate> {
    let d = difference(g, h)?;
    let geom = EdgeGeometry::new(g.shape());
    let (vp, wp) = signed_max(&geom, &d, mode, options)?;
    let neg: Vec<f64> = d.iter().map(|v| -v).collect();
    let (vn, wn) = signed_max(&geom, &neg, mode, options)?;
    let witness = if vn > vp { wn } else { wp };
    // recomputed on the witness so the certificate reproduces exactly
    let signed = value_on(&d, &witness);
    Ok(DiscrepancyCertificate { value: signed.abs(), signed, witness, exact: mode == OracleMode::Exact })
}

/// `sup_B E[(g − 1) ∏_f 1_{B_f}]` with no absolute value: the least `η`
/// for which `g` is upper `η`-regular (the empty set makes it at least 0).
pub fn upper_regularity_deficit(g: &Tensor, mode: OracleMode) -> Result<DiscrepancyCertificate> {
    upper_regularity_deficit_with(g, mode, &OracleOptions::default())
}

pub fn upper_regularity_deficit_with(
    g: &Tensor,
    mode: OracleMode,
    options: &OracleOptions,
) -> Result<DiscrepancyCertificate> {
    let d = difference(g, &Tensor::ones(g.shape().to_vec()))?;
    let geom = EdgeGeometry::new(g.shape());
    let (_, witness) = signed_max(&geom, &d, mode, options)?;
    let v = value_on(&d, &witness);
    Ok(DiscrepancyCertificate { value: v, signed: v, witness, exact: mode == OracleMode::Exact })
}

/// Decides whether `sup_B |E[(g − h) 1_B]| > threshold`. Returns a witness
/// if one is found; `None` is a proof of the opposite only in exact mode.
pub fn discrepancy_exceeds(
    g: &Tensor,
    h: &Tensor,
    threshold: f64,
    mode: OracleMode,
    options: &OracleOptions,
) -> Result<Option<DiscrepancyCertificate>> {
    let d = difference(g, h)?;
    let geom = EdgeGeometry::new(g.shape());
    for sign in [1.0, -1.0] {
        let sd: Vec<f64> = d.iter().map(|v| sign * v).collect();
        if let Some((_, witness)) = Search::new(&geom, &sd).find_above(threshold, mode, options)? {
            let signed = value_on(&d, &witness);
            return Ok(Some(DiscrepancyCertificate {
                value: signed.abs(),
                signed,
                witness,
                exact: mode == OracleMode::Exact,
            }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equal_tensors_give_zero_with_full_witness() {
        let g = Tensor::from_fn(vec![3, 4], |ix| (ix[0] + ix[1]) as f64);
        let c = discrepancy(&g, &g, OracleMode::Exact).unwrap();
        assert_eq!(c.value, 0.0);
        assert_eq!(c.witness, CliqueSet::full(c.witness.geometry().clone()));
    }

    #[test]
    fn rank_one_sign_pattern_matches_rectangle_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s: Vec<f64> = (0..4).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let t: Vec<f64> = (0..4).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let g = Tensor::from_fn(vec![4, 4], |ix| 1.0 + 0.5 * s[ix[0]] * t[ix[1]]);
        let h = Tensor::ones(vec![4, 4]);
        let mut want: f64 = 0.0;
        for b1 in 0u32..16 {
            for b2 in 0u32..16 {
                let mut sum = 0.0;
                for i in 0..4 {
                    for j in 0..4 {
                        if b1 >> i & 1 == 1 && b2 >> j & 1 == 1 {
                            sum += 0.5 * s[i] * t[j];
                        }
                    }
                }
                want = want.max((sum / 16.0).abs());
            }
        }
        let c = discrepancy(&g, &h, OracleMode::Exact).unwrap();
        assert!((c.value - want).abs() < 1e-12);
        assert!((value_on(&difference(&g, &h).unwrap(), &c.witness).abs() - c.value).abs() < 1e-12);
    }

    #[test]
    fn ascent_never_beats_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let g = Tensor::from_fn(vec![5, 5], |_| rng.gen_range(0.0..2.0));
            let h = Tensor::from_fn(vec![5, 5], |_| rng.gen_range(0.0..1.0));
            let exact = discrepancy(&g, &h, OracleMode::Exact).unwrap();
            let ascent = discrepancy(&g, &h, OracleMode::Ascent { seed: 1, restarts: 4 }).unwrap();
            assert!(ascent.value <= exact.value + 1e-12);
            assert!(!ascent.exact && exact.exact);
        }
    }

    #[test]
    fn deficit_of_subunit_weights_is_zero() {
        let one = Tensor::ones(vec![3, 3, 2]);
        assert_eq!(upper_regularity_deficit(&one, OracleMode::Exact).unwrap().value, 0.0);
        let low = Tensor::from_fn(vec![4, 4], |ix| 0.1 * (ix[0] + ix[1]) as f64);
        assert!(upper_regularity_deficit(&low, OracleMode::Exact).unwrap().value <= 0.0);
        let high = Tensor::from_fn(vec![4, 4], |ix| if ix == [0, 0] { 5.0 } else { 1.0 });
        let c = upper_regularity_deficit(&high, OracleMode::Exact).unwrap();
        assert!((c.value - 4.0 / 16.0).abs() < 1e-12);
    }
}
