use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CellPartition, EdgeGeometry};
use crate::regularity::oracle::{OracleMode, OracleOptions};
use crate::regularity::{discrepancy_exceeds, face_lists, DiscrepancyCertificate};
use crate::tensor::Tensor;

/// The energy integrand: `u²` up to 2, then the tangent line `4u − 4`.
pub fn phi(u: f64) -> f64 {
    if u <= 2.0 {
        u * u
    } else {
        4.0 * u - 4.0
    }
}

fn energy(g_p: &Tensor) -> f64 {
    g_p.data().iter().map(|&u| phi(u)).sum::<f64>() / g_p.len() as f64
}

/// One cell of the final partition, as face element lists.
#[derive(Clone, Debug, Serialize)]
pub struct CellRecord {
    pub faces: Vec<Vec<usize>>,
    pub size: usize,
    pub mean: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct RegularizeOptions {
    pub mode: OracleMode,
    pub oracle: OracleOptions,
}

impl Default for RegularizeOptions {
    fn default() -> Self {
        RegularizeOptions { mode: OracleMode::Exact, oracle: OracleOptions::default() }
    }
}

/// Output of [`weak_regularize`].
#[derive(Clone, Debug, Serialize)]
pub struct Decomposition {
    #[serde(skip)]
    pub partition: CellPartition,
    pub cells: Vec<CellRecord>,
    /// `min(g_P, 1)`: constant on each cell, values in `[0, 1]`.
    pub g_tilde: Tensor,
    pub steps: usize,
    pub phi_trace: Vec<f64>,
    pub cell_counts: Vec<usize>,
    pub epsilon_used: f64,
    pub eta_used: f64,
    /// `log2(ε / (8tT))` with `t = 2^r`, `T = t^{20/ε²}`.
    pub eta_bound_log2: f64,
    pub eta_within_bound: bool,
    pub max_rounds: usize,
    /// The loop stopped because ascent found no violation, which proves nothing.
    pub heuristic: bool,
    /// An exact search proved `sup_B |E[(g − g̃) 1_B]| ≤ ε`.
    pub certified: bool,
    /// A clique set with `|E[(g − g̃) 1_B]| > ε`, when one was found.
    pub violation: Option<DiscrepancyCertificate>,
}

/// The weak regularity decomposition with an exact oracle.
pub fn weak_regularize(g: &Tensor, epsilon: f64, eta: f64, mode: OracleMode) -> Result<Decomposition> {
    weak_regularize_with(g, epsilon, eta, &RegularizeOptions { mode, ..RegularizeOptions::default() })
}

/// Refines `P_0 = {V_e}` until no clique set `A` has
/// `|E[(g_P − g) 1_A]| > 3ε/4`, each round splitting the cells that `A`
/// meets substantially. The energy `E[φ(g_P)]` must rise by `ε²/4` per round.
pub fn weak_regularize_with(
    g: &Tensor,
    epsilon: f64,
    eta: f64,
    options: &RegularizeOptions,
) -> Result<Decomposition> {
    if !(epsilon > 0.0) || !(eta >= 0.0) {
        return Err(Error::Input("ε must be positive and η nonnegative".into()));
    }
    if g.rank() == 0 {
        return Err(Error::structural("g must live on an edge with at least one class"));
    }
    if g.data().iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::contract("g must be nonnegative"));
    }
    let r = g.rank();
    let t = 1usize << r;
    let alpha = epsilon * epsilon / 4.0;
    let max_rounds = (5.0 / alpha).ceil() as usize;
    let eta_bound_log2 = (epsilon / 8.0).log2() - r as f64 - r as f64 * 20.0 / (epsilon * epsilon);
    let mean_g = g.mean();
    let geom = EdgeGeometry::new(g.shape());
    let len = g.len() as f64;

    let mut partition = CellPartition::trivial(geom.clone());
    let mut g_p = partition.conditional_expectation(g);
    let mut phi_trace = vec![energy(&g_p)];
    let mut cell_counts = vec![1];
    let mut heuristic = false;
    let mut steps = 0;

    while steps < max_rounds {
        let found = discrepancy_exceeds(&g_p, g, 0.75 * epsilon, options.mode, &options.oracle)?;
        let Some(cert) = found else {
            heuristic = options.mode != OracleMode::Exact;
            break;
        };
        let a = &cert.witness;
        let mut cells = Vec::new();
        for (i, cell) in partition.cells().iter().enumerate() {
            let inside = cell.intersect(a).count() as f64 / len;
            let outside = (partition.cell_sizes()[i] as f64) / len - inside;
            if inside >= t as f64 * eta && outside >= t as f64 * eta {
                cells.extend(a.split().iter().map(|c| cell.intersect(c)));
            } else {
                cells.push(cell.clone());
            }
        }
        let refined = CellPartition::new(geom.clone(), cells)?;
        if refined.len() > t * partition.len() {
            return Err(Error::Invariant(format!(
                "refinement grew the partition from {} to {} cells",
                partition.len(),
                refined.len()
            )));
        }
        let g_next = refined.conditional_expectation(g);
        check_pythagoras(&g_p, &g_next)?;
        let phi_next = energy(&g_next);
        let phi_prev = *phi_trace.last().expect("nonempty");
        if phi_next < -1e-12 || phi_next > 4.0 * mean_g + 1e-9 {
            return Err(Error::Invariant(format!(
                "energy {phi_next} left [0, 4E[g]] = [0, {}]",
                4.0 * mean_g
            )));
        }
        if phi_next - phi_prev < alpha - 1e-12 {
            return Err(Error::Invariant(format!(
                "round {} raised the energy by {} < ε²/4 = {alpha} despite a violation of {}",
                steps + 1,
                phi_next - phi_prev,
                cert.value
            )));
        }
        partition = refined;
        g_p = g_next;
        phi_trace.push(phi_next);
        cell_counts.push(partition.len());
        steps += 1;
    }

    let g_tilde = g_p.map(|v| v.min(1.0));
    let violation = discrepancy_exceeds(g, &g_tilde, epsilon, options.mode, &options.oracle)?;
    let certified = violation.is_none() && options.mode == OracleMode::Exact;
    let means = partition.cell_means(g);
    let cells = partition
        .cells()
        .iter()
        .zip(partition.cell_sizes())
        .zip(&means)
        .map(|((c, &size), &mean)| CellRecord { faces: face_lists(c), size, mean })
        .collect();
    Ok(Decomposition {
        partition,
        cells,
        g_tilde,
        steps,
        phi_trace,
        cell_counts,
        epsilon_used: epsilon,
        eta_used: eta,
        eta_bound_log2,
        eta_within_bound: eta == 0.0 || eta.log2() <= eta_bound_log2,
        max_rounds,
        heuristic,
        certified,
        violation,
    })
}

/// `E[g_Q²] − E[g_P²] = E[(g_Q − g_P)²]` for a refinement `Q` of `P`.
fn check_pythagoras(g_p: &Tensor, g_q: &Tensor) -> Result<()> {
    let n = g_p.len() as f64;
    let sq = |t: &Tensor| t.data().iter().map(|v| v * v).sum::<f64>() / n;
    let lhs = sq(g_q) - sq(g_p);
    let rhs = g_q.data().iter().zip(g_p.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
    if (lhs - rhs).abs() > 1e-9 * (1.0 + sq(g_q)) {
        return Err(Error::Numeric(format!("Pythagorean identity off: {lhs} vs {rhs}")));
    }
    Ok(())
}
