//! Grid measurements over random measures on Z_N.
//!
//! A config such as
//!
//! ```json
//! {"N": [51, 101, 201], "p": [0.5], "seeds": [1, 2, 3, 4, 5],
//!  "quantities": ["lfc", "gowers", "counting"]}
//! ```
//!
//! expands to one cell per `(N, p, seed)`, `N` outermost and `seed`
//! innermost. Each cell draws `ν` with `random_measure(N, p, seed)` and
//! fills the columns of the requested quantities; the others stay empty.
//!
//! | column | quantity | meaning |
//! |---|---|---|
//! | `N`, `p`, `seed` | | the cell |
//! | `set_size` | | `|S|` for the drawn set |
//! | `lfc_patterns` | `lfc` | patterns evaluated |
//! | `lfc_worst_deviation` | `lfc` | worst `|value − 1|` of the k-progression forms |
//! | `gowers_u2`, `gowers_u3` | `gowers` | `‖ν − 1‖_{U²}`, `‖ν − 1‖_{U³}` |
//! | `density_g`, `density_gtilde` | `counting` | H-densities of `g` and `g̃` |
//! | `counting_gap` | `counting` | their difference in absolute value |
//! | `discrepancy` | `counting` | largest ascent discrepancy of `(g_e, g̃_e)` |
//! | `error` | | the failure of the cell, if any |
//!
//! For `counting`, `g = ν_H` is the progression hypergraph of `ν` and `g̃`
//! regularizes each edge with the ascent oracle at `epsilon`.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use relsz::arithmetic::{gowers_norm, random_measure, reduce_ap, zk_lfc_check_with, MeasureZn};
use relsz::counting::{counting_gap, CountingOptions};
use relsz::forms::LfcMode;
use relsz::regularity::{weak_regularize_with, OracleMode, RegularizeOptions};
use relsz::{Error, Result, WeightedHypergraph};
use serde::{Deserialize, Serialize};

use crate::commands::lfc_options;
use crate::output::write_json;
use crate::{Command, Common};

pub const COLUMNS: [&str; 12] = [
    "N",
    "p",
    "seed",
    "set_size",
    "lfc_patterns",
    "lfc_worst_deviation",
    "gowers_u2",
    "gowers_u3",
    "density_g",
    "density_gtilde",
    "counting_gap",
    "discrepancy",
];

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    /// JSON grid description.
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Lfc,
    Gowers,
    Counting,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    #[serde(default = "default_p")]
    pub p: Vec<f64>,
    pub seeds: Vec<u64>,
    pub quantities: Vec<Quantity>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_p() -> Vec<f64> {
    vec![0.5]
}

fn default_k() -> usize {
    3
}

fn default_samples() -> usize {
    64
}

fn default_epsilon() -> f64 {
    0.25
}

fn default_restarts() -> usize {
    4
}

#[derive(Default)]
struct Row {
    set_size: Option<usize>,
    lfc_patterns: Option<usize>,
    lfc_worst: Option<f64>,
    u2: Option<f64>,
    u3: Option<f64>,
    density_g: Option<f64>,
    density_gtilde: Option<f64>,
    gap: Option<f64>,
    discrepancy: Option<f64>,
}

fn counting_cell(nu: &MeasureZn, cfg: &SweepConfig, seed: u64, row: &mut Row) -> Result<()> {
    let fs = vec![nu; cfg.k];
    let bundle = reduce_ap(nu, &fs)?;
    let g = &bundle.g_h;
    let mode = OracleMode::Ascent { seed, restarts: cfg.restarts };
    let options = RegularizeOptions { mode, ..RegularizeOptions::default() };
    let tildes = g
        .weights()
        .iter()
        .map(|w| weak_regularize_with(w, cfg.epsilon, 0.0, &options).map(|d| d.g_tilde))
        .collect::<Result<Vec<_>>>()?;
    let g_tilde = WeightedHypergraph::new(g.system().clone(), tildes)?;
    let counting = CountingOptions { discrepancy: Some(mode), ..CountingOptions::default() };
    let report = counting_gap(&bundle.nu_h, g, &g_tilde, &counting)?;
    row.density_g = Some(report.density_g);
    row.density_gtilde = Some(report.density_gtilde);
    row.gap = Some(report.gap);
    row.discrepancy = report.discrepancies.iter().flatten().copied().reduce(f64::max);
    Ok(())
}

fn cell(cfg: &SweepConfig, common: &Common, n: usize, p: f64, seed: u64, row: &mut Row) -> Result<()> {
    let nu = random_measure(n, p, seed)?;
    row.set_size = Some(nu.support().len());
    if cfg.quantities.contains(&Quantity::Lfc) {
        let mode = LfcMode::Sampled { samples: cfg.samples, seed };
        let r = zk_lfc_check_with(&nu, cfg.k, mode, f64::INFINITY, &lfc_options(common))?;
        row.lfc_patterns = Some(r.pattern_count);
        row.lfc_worst = Some(r.worst_deviation);
    }
    if cfg.quantities.contains(&Quantity::Gowers) {
        let balanced: Vec<f64> = nu.values().iter().map(|v| v - 1.0).collect();
        row.u2 = Some(gowers_norm(&balanced, 2)?);
        row.u3 = Some(gowers_norm(&balanced, 3)?);
    }
    if cfg.quantities.contains(&Quantity::Counting) {
        counting_cell(&nu, cfg, seed, row)?;
    }
    Ok(())
}

fn field<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Runs every cell of the grid and renders the CSV.
pub fn sweep_csv(cfg: &SweepConfig, common: &Common) -> Result<Vec<u8>> {
    let cells: Vec<(usize, f64, u64)> = cfg
        .n
        .iter()
        .flat_map(|&n| cfg.p.iter().flat_map(move |&p| cfg.seeds.iter().map(move |&s| (n, p, s))))
        .collect();
    let rows: Vec<(Row, Option<String>)> = cells
        .par_iter()
        .map(|&(n, p, seed)| {
            let mut row = Row::default();
            let err = cell(cfg, common, n, p, seed, &mut row).err().map(|e| e.to_string());
            (row, err)
        })
        .collect();
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS.iter().chain(["error"].iter())).map_err(csv_err)?;
    for (&(n, p, seed), (row, err)) in cells.iter().zip(rows) {
        w.write_record([
            n.to_string(),
            p.to_string(),
            seed.to_string(),
            field(row.set_size),
            field(row.lfc_patterns),
            field(row.lfc_worst),
            field(row.u2),
            field(row.u3),
            field(row.density_g),
            field(row.density_gtilde),
            field(row.gap),
            field(row.discrepancy),
            err.unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Writes the CSV, and next to an output file `<out>.json` holding the
/// command line and the parsed grid.
pub fn run(command: &Command, a: &SweepArgs) -> Result<()> {
    let cfg: SweepConfig = serde_json::from_str(&fs::read_to_string(&a.config)?)?;
    let csv = sweep_csv(&cfg, &a.common)?;
    match &a.common.out {
        Some(path) => {
            fs::write(path, csv)?;
            let mut side = path.clone().into_os_string();
            side.push(".json");
            let manifest = serde_json::json!({ "config": command, "grid": cfg, "columns": COLUMNS });
            write_json(Some(PathBuf::from(side).as_path()), &manifest)?;
        }
        None => std::io::Write::write_all(&mut std::io::stdout().lock(), &csv)?,
    }
    Ok(())
}
