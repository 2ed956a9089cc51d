use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A nonnegative function on `Z_N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureZn {
    #[serde(rename = "N")]
    n: usize,
    values: Vec<f64>,
}

/// On disk a measure is either `{"N": n, "values": [...]}` or
/// `{"N": n, "set": [...]}`; a set becomes `(N/|S|) 1_S`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureFile {
    #[serde(rename = "N")]
    n: usize,
    values: Option<Vec<f64>>,
    set: Option<Vec<usize>>,
}

impl<'de> Deserialize<'de> for MeasureZn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let file = MeasureFile::deserialize(d)?;
        match (file.values, file.set) {
            (Some(values), None) => MeasureZn::new(values).and_then(|m| {
                if m.n == file.n {
                    Ok(m)
                } else {
                    Err(Error::Input(format!("N = {} but {} values given", file.n, m.n)))
                }
            }),
            (None, Some(set)) => MeasureZn::from_set(file.n, &set),
            _ => Err(Error::Input("a measure needs exactly one of \"values\" and \"set\"".into())),
        }
        .map_err(D::Error::custom)
    }
}

impl MeasureZn {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Input("a measure on Z_N needs N ≥ 1".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::contract(format!("measure value {v} is not finite and nonnegative")));
        }
        Ok(MeasureZn { n: values.len(), values })
    }

    pub fn ones(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    /// `(N/|S|) 1_S`.
    pub fn from_set(n: usize, set: &[usize]) -> Result<Self> {
        let mut member = vec![false; n];
        for &s in set {
            if s >= n {
                return Err(Error::Input(format!("{s} is not a residue mod {n}")));
            }
            member[s] = true;
        }
        let size = member.iter().filter(|&&b| b).count();
        if size == 0 {
            return Err(Error::Input("the set is empty".into()));
        }
        let scale = n as f64 / size as f64;
        Self::new(member.iter().map(|&b| if b { scale } else { 0.0 }).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `ν(x mod N)` for any integer `x`.
    pub fn at(&self, x: i64) -> f64 {
        self.values[x.rem_euclid(self.n as i64) as usize]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n as f64
    }

    /// The support, in increasing order.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&x| self.values[x] > 0.0).collect()
    }
}

/// Includes each residue independently with probability `p` and returns
/// `(N/|S|) 1_S`. An empty draw retries with the next seed, at most 100
/// times.
pub fn random_measure(n: usize, p: f64, seed: u64) -> Result<MeasureZn> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Input(format!("p = {p} is not in (0, 1]")));
    }
    if n == 0 {
        return Err(Error::Input("N must be positive".into()));
    }
    for attempt in 0..=100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let set: Vec<usize> = (0..n).filter(|_| rng.gen_bool(p)).collect();
        if !set.is_empty() {
            return MeasureZn::from_set(n, &set);
        }
    }
    Err(Error::Generation(format!("100 retries drew only empty sets (N = {n}, p = {p})")))
}

/// `E[f(x) f(x+d) ⋯ f(x+(k−1)d) | x, d ∈ Z_N]`, including `d = 0`.
pub fn ap_density(f: &MeasureZn, k: usize) -> Result<f64> {
    ap_correlation(&vec![f; k])
}

/// The `d = 0` part of [`ap_density`]: `E[f^k]/N`.
pub fn ap_degenerate(f: &MeasureZn, k: usize) -> f64 {
    let n = f.n as f64;
    f.values.iter().map(|v| v.powi(k as i32)).sum::<f64>() / (n * n)
}

/// `E[f_0(x) f_1(x+d) ⋯ f_{k−1}(x+(k−1)d) | x, d ∈ Z_N]` for real-valued
/// functions of a common modulus.
pub fn ap_correlation(fs: &[&MeasureZn]) -> Result<f64> {
    let values: Vec<&[f64]> = fs.iter().map(|f| f.values()).collect();
    ap_correlation_values(&values)
}

pub(crate) fn ap_correlation_values(fs: &[&[f64]]) -> Result<f64> {
    if fs.is_empty() {
        return Err(Error::Input("k must be at least 1".into()));
    }
    let n = fs[0].len();
    if fs.iter().any(|f| f.len() != n) {
        return Err(Error::structural("functions on different moduli"));
    }
    let mut total = 0.0;
    for d in 0..n {
        for x in 0..n {
            let mut p = 1.0;
            let mut y = x;
            for f in fs {
                p *= f[y];
                y = (y + d) % n;
            }
            total += p;
        }
    }
    Ok(total / (n * n) as f64)
}
