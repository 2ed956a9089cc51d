use std::fs;
use std::path::PathBuf;

use clap::Args;
use relsz::arithmetic::{random_measure, MeasureZn};
use relsz::{Error, Result};
use serde::Serialize;

/// Where a measure on `Z_N` comes from.
#[derive(Args, Debug, Clone, Serialize)]
pub struct MeasureArgs {
    /// Modulus.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// A measure file, or `random` for the normalized indicator of a
    /// random set.
    #[arg(long, default_value = "random")]
    pub set: String,
    /// Inclusion probability of the random set.
    #[arg(long, default_value_t = 0.5)]
    pub random_p: f64,
}

impl MeasureArgs {
    pub fn load(&self, seed: u64) -> Result<MeasureZn> {
        if self.set == "random" {
            let n = self.n.ok_or_else(|| Error::Input("a random measure needs --N".into()))?;
            return random_measure(n, self.random_p, seed);
        }
        let m: MeasureZn = serde_json::from_str(&fs::read_to_string(PathBuf::from(&self.set))?)?;
        match self.n {
            Some(n) if n != m.n() => Err(Error::Input(format!("--N {n} but the measure file has N = {}", m.n()))),
            _ => Ok(m),
        }
    }
}
