use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use relsz::{Result, WeightedHypergraph};
use serde::Serialize;
use serde_json::{json, Value};

use crate::Command;

/// `{"config": <command>, "report": <report>}`, pretty printed.
pub fn report(command: &Command, out: &Option<PathBuf>, report: impl Serialize) -> Result<()> {
    let value = json!({ "config": command, "report": report });
    write_json(out.as_deref(), &value)
}

pub fn write_json(path: Option<&Path>, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn write_weighted(path: Option<&Path>, g: &WeightedHypergraph) -> Result<()> {
    match path {
        Some(p) => write_json(Some(p), &relsz::interchange::weighted_to_value(g)),
        None => Ok(()),
    }
}

pub fn read_weighted(path: &Path) -> Result<WeightedHypergraph> {
    relsz::interchange::weighted_from_json(&fs::read_to_string(path)?)
}
