use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, ValueEnum};
use relsz::arithmetic::{
    ap_degenerate, ap_density, corner_graphs, count_triangles, gowers_norm, gowers_norm_naive, has_corner,
    lfc_corner_product_with, random_corner_free, random_measure, reduce_ap, reduce_corner, zk_lfc_check_with,
    MeasureZn, ReductionCheck,
};
use relsz::counting::{counting_gap, CountingOptions};
use relsz::forms::{check_lfc_with, EvalOptions, LfcOptions, LfcReport};
use relsz::interchange::system_from_json;
use relsz::regularity::{weak_regularize_with, Decomposition, OracleMode, OracleOptions, RegularizeOptions};
use relsz::removal::{relative_remove, RelativeOptions};
use relsz::{Error, HypergraphSystem, Result, WeightedHypergraph};
use serde::Serialize;

use crate::measure::MeasureArgs;
use crate::output::{read_weighted, report, write_weighted};
use crate::{Command, Common, ModeArg, OracleArg};

pub fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Lfc(a) => lfc(command, a),
        Command::Gowers(a) => gowers(command, a),
        Command::ApDensity(a) => ap(command, a),
        Command::Reduce(a) => reduce(command, a),
        Command::CornerGraphs(a) => corners(command, a),
        Command::RegDecompose(a) => reg_decompose(command, a),
        Command::Count(a) => count(command, a),
        Command::Removal(a) => removal(command, a),
        Command::Sweep(a) => crate::sweep::run(command, a),
    }
}

pub fn lfc_options(common: &Common) -> LfcOptions {
    LfcOptions {
        eval: EvalOptions { memory_budget: 1usize << common.memory_log2, ..EvalOptions::default() },
        pattern_cap_log2: common.pattern_cap_log2,
    }
}

/// Per-pattern values in evaluation order; the full listing only when verbose.
fn pattern_values(report: LfcReport, verbose: bool) -> (Vec<f64>, LfcReport) {
    let values = report.per_pattern.iter().map(|p| p.value).collect();
    (values, if verbose { report } else { report.summary() })
}

#[derive(Args, Debug, Serialize)]
pub struct LfcArgs {
    /// Weighted hypergraph file holding ν; without it the check runs on a
    /// measure on Z_N.
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Progression length whose linear forms are checked.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Check the twelve corner product forms instead of progressions.
    #[arg(long)]
    pub corner: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Sampled)]
    pub mode: ModeArg,
    /// Edge id for the weak blow-up.
    #[arg(long, default_value_t = 0)]
    pub edge: usize,
    /// Pattern count in sampled mode.
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.1)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Serialize)]
struct LfcOut {
    forms: &'static str,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    set_size: Option<usize>,
    values: Vec<f64>,
    #[serde(flatten)]
    lfc: LfcReport,
}

fn lfc(command: &Command, a: &LfcArgs) -> Result<()> {
    let c = &a.common;
    let options = lfc_options(c);
    let mode = a.mode.mode(a.edge, a.samples, c.seed);
    let out = if let Some(path) = &a.system {
        let nu = read_weighted(path)?;
        let (values, lfc) = pattern_values(check_lfc_with(&nu, mode, a.tol, &options)?, c.verbose);
        LfcOut { forms: "hypergraph", n: None, set_size: None, values, lfc }
    } else {
        let nu = a.measure.load(c.seed)?;
        let raw = if a.corner {
            lfc_corner_product_with(&nu, mode, a.tol, &options)?
        } else {
            zk_lfc_check_with(&nu, a.k, mode, a.tol, &options)?
        };
        let (values, lfc) = pattern_values(raw, c.verbose);
        let forms = if a.corner { "corner_product" } else { "progression" };
        LfcOut { forms, n: Some(nu.n()), set_size: Some(nu.support().len()), values, lfc }
    };
    report(command, &c.out, out)
}

#[derive(Args, Debug, Serialize)]
pub struct GowersArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArgs,
    /// Largest order; norms U^1 through U^r are reported.
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    /// Sum directly instead of through the Fourier transform.
    #[arg(long)]
    pub naive: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Serialize)]
struct NormRow {
    r: usize,
    nu: f64,
    /// `‖ν − 1‖_{U^r}`.
    balanced: f64,
}

#[derive(Serialize)]
struct GowersOut {
    #[serde(rename = "N")]
    n: usize,
    set_size: usize,
    mean: f64,
    norms: Vec<NormRow>,
}

fn norm(f: &[f64], r: usize, naive: bool) -> Result<f64> {
    if naive {
        gowers_norm_naive(f, r)
    } else {
        gowers_norm(f, r)
    }
}

fn gowers(command: &Command, a: &GowersArgs) -> Result<()> {
    let nu = a.measure.load(a.common.seed)?;
    let balanced: Vec<f64> = nu.values().iter().map(|v| v - 1.0).collect();
    let norms = (1..=a.r)
        .map(|r| Ok(NormRow { r, nu: norm(nu.values(), r, a.naive)?, balanced: norm(&balanced, r, a.naive)? }))
        .collect::<Result<Vec<_>>>()?;
    if norms.is_empty() {
        return Err(Error::Input("Gowers norms need r ≥ 1".into()));
    }
    let out = GowersOut { n: nu.n(), set_size: nu.support().len(), mean: nu.mean(), norms };
    report(command, &a.common.out, out)
}

#[derive(Args, Debug, Serialize)]
pub struct ApDensityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArgs,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Serialize)]
struct ApOut {
    #[serde(rename = "N")]
    n: usize,
    k: usize,
    mean: f64,
    /// `E_{x,d} ∏_j ν(x + j d)`, including `d = 0`.
    density: f64,
    /// The `d = 0` contribution.
    degenerate: f64,
}

fn ap(command: &Command, a: &ApDensityArgs) -> Result<()> {
    let nu = a.measure.load(a.common.seed)?;
    let out = ApOut { n: nu.n(), k: a.k, mean: nu.mean(), density: ap_density(&nu, a.k)?, degenerate: ap_degenerate(&nu, a.k) };
    report(command, &a.common.out, out)
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ReduceKind {
    Ap,
    Corner,
}

#[derive(Args, Debug, Serialize)]
pub struct ReduceArgs {
    #[arg(long, value_enum)]
    pub kind: ReduceKind,
    /// Progression length (`ap` only).
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// For `corner` the measure lives on Z_N², indexed `x N + y`.
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArgs,
    /// Each point of the support is kept in `f` with this probability;
    /// `f = ν 1_B` for the kept set `B`.
    #[arg(long, default_value_t = 1.0)]
    pub keep: f64,
    /// Write ν_H as a weighted hypergraph.
    #[arg(long)]
    pub nu_out: Option<PathBuf>,
    /// Write g_H as a weighted hypergraph.
    #[arg(long)]
    pub g_out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Serialize)]
struct ReduceOut {
    #[serde(rename = "N")]
    n: usize,
    k: usize,
    nu_mean: f64,
    f_mean: f64,
    /// `E[∏_j f(a + φ_j(d))]` over `a ∈ Z'`, `d ∈ Z`.
    pattern_density: f64,
    check: Option<ReductionCheck>,
}

fn kept(values: &[f64], keep: f64, seed: u64) -> Result<Vec<f64>> {
    if keep >= 1.0 {
        return Ok(values.to_vec());
    }
    let b = random_measure(values.len(), keep, seed)?;
    Ok(values.iter().zip(b.values()).map(|(&v, &m)| if m > 0.0 { v } else { 0.0 }).collect())
}

fn reduce(command: &Command, a: &ReduceArgs) -> Result<()> {
    let c = &a.common;
    let keep_seed = c.seed.wrapping_add(1);
    let (bundle, n, nu_mean) = match a.kind {
        ReduceKind::Ap => {
            let nu = a.measure.load(c.seed)?;
            let f = MeasureZn::new(kept(nu.values(), a.keep, keep_seed)?)?;
            let fs = vec![&f; a.k];
            (reduce_ap(&nu, &fs)?, nu.n(), nu.mean())
        }
        ReduceKind::Corner => {
            let n = a.measure.n.ok_or_else(|| Error::Input("the corner reduction needs --N".into()))?;
            let squared = MeasureArgs { n: Some(n * n), ..a.measure.clone() };
            let nu = squared.load(c.seed)?;
            let f = kept(nu.values(), a.keep, keep_seed)?;
            (reduce_corner(n, nu.values(), &[f.clone(), f.clone(), f])?, n, nu.mean())
        }
    };
    write_weighted(a.nu_out.as_deref(), &bundle.nu_h)?;
    write_weighted(a.g_out.as_deref(), &bundle.g_h)?;
    let f0 = &bundle.f_values[0];
    let out = ReduceOut {
        n,
        k: bundle.k(),
        nu_mean,
        f_mean: f0.iter().sum::<f64>() / f0.len() as f64,
        pattern_density: bundle.pattern_density(),
        check: bundle.check.clone(),
    };
    report(command, &c.out, out)
}

#[derive(Args, Debug, Serialize)]
pub struct CornerGraphsArgs {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: usize,
    /// Inclusion probability of the random set S ⊆ Z_N.
    #[arg(long, default_value_t = 0.5)]
    pub s_p: f64,
    #[arg(long)]
    pub g_out: Option<PathBuf>,
    #[arg(long)]
    pub gamma_out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Serialize)]
struct CornersOut {
    #[serde(rename = "N")]
    n: usize,
    s: Vec<usize>,
    a: Vec<(usize, usize)>,
    corner_free: bool,
    triangles: usize,
    edges: usize,
    unique_triangles: bool,
}

fn corners(command: &Command, a: &CornerGraphsArgs) -> Result<()> {
    let c = &a.common;
    let s = random_measure(a.n, a.s_p, c.seed)?.support();
    let set = random_corner_free(a.n, &s, c.seed)?;
    let graphs = corner_graphs(a.n, &s, &set)?;
    write_weighted(a.g_out.as_deref(), &graphs.g)?;
    write_weighted(a.gamma_out.as_deref(), &graphs.gamma)?;
    let t = count_triangles(&graphs.g)?;
    let out = CornersOut {
        n: a.n,
        corner_free: !has_corner(a.n, &set),
        s,
        a: set,
        triangles: t.triangles,
        edges: t.edges,
        unique_triangles: t.unique_triangles,
    };
    report(command, &c.out, out)
}

fn edge_by_key(system: &HypergraphSystem, key: &str) -> Result<usize> {
    (0..system.num_edges())
        .find(|&e| system.edge_key(e) == key)
        .ok_or_else(|| Error::Input(format!("no edge {key} in the system")))
}

fn oracle_options(restarts: usize) -> OracleOptions {
    OracleOptions { warm_restarts: restarts.clamp(1, 4), ..OracleOptions::default() }
}

#[derive(Args, Debug, Serialize)]
pub struct RegDecomposeArgs {
    /// Weighted hypergraph holding g.
    #[arg(long)]
    pub input: PathBuf,
    /// Decompose only this edge, given by its key such as `1-2`.
    #[arg(long)]
    pub edge: Option<String>,
    #[arg(long, default_value_t = 0.25)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    pub eta: f64,
    #[arg(long, value_enum, default_value_t = OracleArg::Exact)]
    pub oracle: OracleArg,
    /// Ascent restarts per search.
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    /// Write g̃ as a weighted hypergraph; edges not decomposed keep g.
    #[arg(long)]
    pub gtilde_out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Serialize)]
struct EdgeDecomposition {
    edge: String,
    decomposition: Decomposition,
}

fn reg_decompose(command: &Command, a: &RegDecomposeArgs) -> Result<()> {
    let c = &a.common;
    let g = read_weighted(&a.input)?;
    let system = g.system().clone();
    let edges: Vec<usize> = match &a.edge {
        Some(key) => vec![edge_by_key(&system, key)?],
        None => (0..system.num_edges()).collect(),
    };
    let options = RegularizeOptions { mode: a.oracle.mode(c.seed, a.restarts), oracle: oracle_options(a.restarts) };
    let mut g_tilde = g.clone();
    let mut out = Vec::with_capacity(edges.len());
    for e in edges {
        let d = weak_regularize_with(g.weight(e), a.epsilon, a.eta, &options)?;
        g_tilde = g_tilde.with_weight(e, d.g_tilde.clone())?;
        out.push(EdgeDecomposition { edge: system.edge_key(e), decomposition: d });
    }
    write_weighted(a.gtilde_out.as_deref(), &g_tilde)?;
    report(command, &c.out, serde_json::json!({ "edges": out }))
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DiscrepancyArg {
    Exact,
    Ascent,
    None,
}

impl DiscrepancyArg {
    fn mode(self, seed: u64, restarts: usize) -> Option<OracleMode> {
        match self {
            DiscrepancyArg::Exact => Some(OracleMode::Exact),
            DiscrepancyArg::Ascent => Some(OracleMode::Ascent { seed, restarts }),
            DiscrepancyArg::None => None,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct CountArgs {
    /// The hypergraph system every weight file must match.
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long)]
    pub g: PathBuf,
    #[arg(long)]
    pub gtilde: PathBuf,
    /// The majorant; 1 on every edge when omitted.
    #[arg(long)]
    pub nu: Option<PathBuf>,
    /// The edge singled out by the densification, by key.
    #[arg(long)]
    pub e1: Option<String>,
    #[arg(long, value_enum, default_value_t = DiscrepancyArg::Exact)]
    pub discrepancy: DiscrepancyArg,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

fn require_shape(system: &HypergraphSystem, w: &WeightedHypergraph, what: &str) -> Result<()> {
    if system.same_shape(w.system()) {
        Ok(())
    } else {
        Err(Error::Structural(format!("{what} does not live on the given system")))
    }
}

fn load_nu(path: &Option<PathBuf>, g: &WeightedHypergraph) -> Result<WeightedHypergraph> {
    match path {
        Some(p) => {
            let nu = read_weighted(p)?;
            require_shape(g.system(), &nu, "ν")?;
            // share one system so same-system checks compare pointers
            WeightedHypergraph::new(g.system().clone(), nu.into_weights())
        }
        None => WeightedHypergraph::constant(g.system().clone(), 1.0),
    }
}

fn rebase(w: WeightedHypergraph, system: &Arc<HypergraphSystem>, what: &str) -> Result<WeightedHypergraph> {
    require_shape(system, &w, what)?;
    WeightedHypergraph::new(system.clone(), w.into_weights())
}

fn count(command: &Command, a: &CountArgs) -> Result<()> {
    let c = &a.common;
    let g = read_weighted(&a.g)?;
    if let Some(path) = &a.system {
        let system = system_from_json(&std::fs::read_to_string(path)?)?;
        require_shape(&system, &g, "g")?;
    }
    let system = g.system().clone();
    let g_tilde = rebase(read_weighted(&a.gtilde)?, &system, "g̃")?;
    let nu = load_nu(&a.nu, &g)?;
    let e1 = a.e1.as_deref().map(|k| edge_by_key(&system, k)).transpose()?;
    let options = CountingOptions {
        e1,
        discrepancy: a.discrepancy.mode(c.seed, a.restarts),
        oracle: oracle_options(a.restarts),
    };
    report(command, &c.out, counting_gap(&nu, &g, &g_tilde, &options)?)
}

#[derive(Args, Debug, Serialize)]
pub struct RemovalArgs {
    #[arg(long)]
    pub nu: PathBuf,
    #[arg(long)]
    pub g: PathBuf,
    #[arg(long)]
    pub epsilon: f64,
    /// Largest H-density of g the removal claim covers.
    #[arg(long)]
    pub delta: f64,
    /// Weight above which a tuple of g̃ counts as an edge.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0.0)]
    pub eta: f64,
    #[arg(long, value_enum, default_value_t = OracleArg::Exact)]
    pub oracle: OracleArg,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    /// Also check the linear forms condition on ν with this many sampled patterns.
    #[arg(long)]
    pub lfc_samples: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub lfc_tol: f64,
    #[arg(long, value_enum, default_value_t = DiscrepancyArg::Exact)]
    pub counting_discrepancy: DiscrepancyArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

fn removal(command: &Command, a: &RemovalArgs) -> Result<()> {
    let c = &a.common;
    let g = read_weighted(&a.g)?;
    let nu = load_nu(&Some(a.nu.clone()), &g)?;
    let options = RelativeOptions {
        mode: a.oracle.mode(c.seed, a.restarts),
        eta: a.eta,
        threshold: a.threshold,
        lfc: a.lfc_samples.map(|samples| (relsz::forms::LfcMode::Sampled { samples, seed: c.seed }, a.lfc_tol)),
        counting_discrepancy: a.counting_discrepancy.mode(c.seed, a.restarts),
    };
    report(command, &c.out, relative_remove(&nu, &g, a.epsilon, a.delta, &options)?)
}
