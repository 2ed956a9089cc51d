use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::arithmetic::measure::ap_correlation_values;
use crate::error::{Error, Result};

fn root(inner: f64, r: usize) -> Result<f64> {
    if inner < -1e-12 * (1.0 + inner.abs()) {
        return Err(Error::Numeric(format!("U^{r} inner expectation is negative: {inner}")));
    }
    Ok(inner.max(0.0).powf(1.0 / (1u64 << r) as f64))
}

fn check(f: &[f64], r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::Input("Gowers norms need r ≥ 1".into()));
    }
    if f.is_empty() {
        return Err(Error::Input("a function on Z_N needs N ≥ 1".into()));
    }
    Ok(())
}

/// `E[∏_{ω ∈ {0,1}^r} f(x_0 + ω·x)]` by direct summation over
/// `x_0, …, x_r`; `O(N^{r+1} 2^r)`.
pub fn gowers_inner_naive(f: &[f64], r: usize) -> Result<f64> {
    check(f, r)?;
    let n = f.len();
    let mut total = 0.0;
    let mut h = vec![0usize; r];
    let mut points = vec![0usize; 1 << r];
    loop {
        for x0 in 0..n {
            let mut p = 1.0;
            for (w, pt) in points.iter_mut().enumerate() {
                let mut y = x0;
                for (b, &hb) in h.iter().enumerate() {
                    if w >> b & 1 == 1 {
                        y += hb;
                    }
                }
                *pt = y % n;
                p *= f[*pt];
            }
            total += p;
        }
        let mut k = r;
        loop {
            if k == 0 {
                return Ok(total / (n as f64).powi(r as i32 + 1));
            }
            k -= 1;
            h[k] += 1;
            if h[k] < n {
                break;
            }
            h[k] = 0;
        }
    }
}

/// `‖f‖_{U^r}` by direct summation.
pub fn gowers_norm_naive(f: &[f64], r: usize) -> Result<f64> {
    root(gowers_inner_naive(f, r)?, r)
}

/// `‖f‖_{U²}⁴ = Σ_ξ |f̂(ξ)|⁴` with `f̂(ξ) = E_x f(x) e(−xξ/N)`.
fn u2_inner_fourier(f: &[f64], planner: &mut FftPlanner<f64>) -> f64 {
    let n = f.len();
    let mut buf: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| (c.norm_sqr() * scale * scale).powi(2)).sum()
}

/// `‖f‖_{U^r}^{2^r}` through Fourier analysis: `U²` from the transform, and
/// `‖f‖_{U^r}^{2^r} = E_h ‖Δ_h f‖_{U^{r−1}}^{2^{r−1}}` with
/// `Δ_h f(x) = f(x) f(x+h)` above that.
pub fn gowers_inner_fast(f: &[f64], r: usize) -> Result<f64> {
    check(f, r)?;
    let mut planner = FftPlanner::new();
    Ok(inner_fast(f, r, &mut planner))
}

fn inner_fast(f: &[f64], r: usize, planner: &mut FftPlanner<f64>) -> f64 {
    let n = f.len();
    match r {
        1 => {
            let m = f.iter().sum::<f64>() / n as f64;
            m * m
        }
        2 => u2_inner_fourier(f, planner),
        _ => {
            let mut total = 0.0;
            let mut shifted = vec![0.0; n];
            for h in 0..n {
                for (x, s) in shifted.iter_mut().enumerate() {
                    *s = f[x] * f[(x + h) % n];
                }
                total += inner_fast(&shifted, r - 1, planner);
            }
            total / n as f64
        }
    }
}

/// `‖f‖_{U^r}`; the Fourier path for `r ≥ 2`.
pub fn gowers_norm(f: &[f64], r: usize) -> Result<f64> {
    if r == 1 {
        check(f, r)?;
        return Ok((f.iter().sum::<f64>() / f.len() as f64).abs());
    }
    root(gowers_inner_fast(f, r)?, r)
}

/// Both sides of the generalized von Neumann inequality for `r + 1`
/// functions.
#[derive(Clone, Debug, Serialize)]
pub struct VonNeumann {
    /// `|E[f_0(x) f_1(x+d) ⋯ f_r(x+rd)]|`.
    pub lhs: f64,
    /// `rhs[j] = ‖f_j‖_{U^r} ∏_{i≠j} ‖f_i‖_∞`.
    pub rhs: Vec<f64>,
    pub min_rhs: f64,
    pub holds: bool,
}

/// Evaluates the generalized von Neumann bound. The inequality is asserted
/// with slack `1e-9` only when `N` is coprime to `r!`, where the theorem
/// applies.
pub fn von_neumann_check(fs: &[Vec<f64>], r: usize) -> Result<VonNeumann> {
    if fs.len() != r + 1 {
        return Err(Error::Input(format!("the U^{r} bound compares {} functions, got {}", r + 1, fs.len())));
    }
    let refs: Vec<&[f64]> = fs.iter().map(Vec::as_slice).collect();
    let lhs = ap_correlation_values(&refs)?.abs();
    let sup: Vec<f64> = fs.iter().map(|f| f.iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect();
    let rhs = fs
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let others: f64 = sup.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, s)| s).product();
            gowers_norm(f, r).map(|u| u * others)
        })
        .collect::<Result<Vec<_>>>()?;
    let min_rhs = rhs.iter().copied().fold(f64::INFINITY, f64::min);
    let holds = lhs <= min_rhs + 1e-9;
    let n = fs[0].len() as u64;
    if !holds && (2..=r as u64).all(|p| gcd(n, p) == 1) {
        return Err(Error::Numeric(format!("von Neumann bound violated: {lhs} > {min_rhs}")));
    }
    Ok(VonNeumann { lhs, rhs, min_rhs, holds })
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
