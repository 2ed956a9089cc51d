//! The JSON interchange format shared by every tool:
//!
//! ```json
//! {"J": [1, 2, 3], "vertex_sizes": {"1": 4, "2": 4, "3": 4}, "r": 2,
//!  "edges": [[1, 2], [1, 3], [2, 3]],
//!  "weights": {"1-2": {"shape": [4, 4], "data": [0.5, "1/3", ...]}, ...}}
//! ```
//!
//! Edge keys join the edge's labels in class order with `-`. Weight entries
//! may be JSON numbers or exact rationals written as `"p/q"` strings.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HypergraphSystem, Label, WeightedHypergraph};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Number(f64),
    Text(String),
}

impl Entry {
    fn value(&self) -> Result<f64> {
        match self {
            Entry::Number(v) => Ok(*v),
            Entry::Text(s) => parse_rational(s),
        }
    }
}

/// Parses `"p/q"` (or a plain number) into the nearest `f64`.
pub fn parse_rational(text: &str) -> Result<f64> {
    let bad = || Error::Input(format!("cannot parse weight {text:?}"));
    let text = text.trim();
    match text.split_once('/') {
        Some((p, q)) => {
            let p: i64 = p.trim().parse().map_err(|_| bad())?;
            let q: i64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            Ok(p as f64 / q as f64)
        }
        None => text.parse().map_err(|_| bad()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorFile {
    shape: Vec<usize>,
    data: Vec<Entry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HypergraphFile {
    #[serde(rename = "J")]
    classes: Vec<Label>,
    vertex_sizes: BTreeMap<String, usize>,
    r: usize,
    edges: Vec<Vec<Label>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<BTreeMap<String, TensorFile>>,
}

fn parse_system(file: &HypergraphFile) -> Result<HypergraphSystem> {
    let mut sizes = BTreeMap::new();
    for label in &file.classes {
        let n = file
            .vertex_sizes
            .get(&label.to_string())
            .copied()
            .ok_or_else(|| Error::structural(format!("no vertex size for class {label}")))?;
        sizes.insert(label.clone(), n);
    }
    HypergraphSystem::build(file.classes.clone(), &sizes, file.r, &file.edges)
}

fn system_file(system: &HypergraphSystem) -> HypergraphFile {
    HypergraphFile {
        classes: system.labels().to_vec(),
        vertex_sizes: system
            .labels()
            .iter()
            .zip(system.sizes())
            .map(|(l, &n)| (l.to_string(), n))
            .collect(),
        r: system.r(),
        edges: system
            .edges()
            .iter()
            .map(|e| e.iter().map(|&j| system.labels()[j].clone()).collect())
            .collect(),
        weights: None,
    }
}

/// Reads a hypergraph system; a `weights` field, if present, is ignored.
pub fn system_from_json(text: &str) -> Result<HypergraphSystem> {
    let file: HypergraphFile = serde_json::from_str(text)?;
    parse_system(&file)
}

pub fn system_to_value(system: &HypergraphSystem) -> serde_json::Value {
    serde_json::to_value(system_file(system)).expect("system serializes")
}

pub fn system_to_json(system: &HypergraphSystem) -> String {
    serde_json::to_string_pretty(&system_file(system)).expect("system serializes")
}

pub fn weighted_from_value(value: serde_json::Value) -> Result<WeightedHypergraph> {
    let file: HypergraphFile = serde_json::from_value(value)?;
    weighted_from_file(file)
}

pub fn weighted_from_json(text: &str) -> Result<WeightedHypergraph> {
    let file: HypergraphFile = serde_json::from_str(text)?;
    weighted_from_file(file)
}

fn weighted_from_file(file: HypergraphFile) -> Result<WeightedHypergraph> {
    let system = Arc::new(parse_system(&file)?);
    let mut weights = file
        .weights
        .ok_or_else(|| Error::structural("weighted hypergraph file has no \"weights\""))?;
    let mut tensors = Vec::with_capacity(system.num_edges());
    for id in 0..system.num_edges() {
        let key = system.edge_key(id);
        let t = weights
            .remove(&key)
            .ok_or_else(|| Error::structural(format!("missing weights for edge {key}")))?;
        let data = t.data.iter().map(Entry::value).collect::<Result<Vec<_>>>()?;
        tensors.push(Tensor::new(t.shape, data)?);
    }
    if let Some(key) = weights.keys().next() {
        return Err(Error::structural(format!("weights given for unknown edge {key}")));
    }
    WeightedHypergraph::new(system, tensors)
}

pub fn weighted_to_value(g: &WeightedHypergraph) -> serde_json::Value {
    let system = g.system();
    let mut file = system_file(system);
    file.weights = Some(
        (0..system.num_edges())
            .map(|id| {
                let w = g.weight(id);
                (
                    system.edge_key(id),
                    TensorFile {
                        shape: w.shape().to_vec(),
                        data: w.data().iter().map(|&v| Entry::Number(v)).collect(),
                    },
                )
            })
            .collect(),
    );
    serde_json::to_value(file).expect("weighted hypergraph serializes")
}

pub fn weighted_to_json(g: &WeightedHypergraph) -> String {
    serde_json::to_string_pretty(&weighted_to_value(g)).expect("weighted hypergraph serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TRIANGLE: &str = r#"{
        "J": [1, 2, 3], "vertex_sizes": {"1": 2, "2": 2, "3": 1}, "r": 2,
        "edges": [[2, 1], [1, 3], [2, 3]],
        "weights": {
            "1-2": {"shape": [2, 2], "data": [1, "1/2", 0, "3/4"]},
            "1-3": {"shape": [2, 1], "data": [2, 0.25]},
            "2-3": {"shape": [2, 1], "data": [1, 1]}
        }
    }"#;

    #[test]
    fn reads_rationals_and_canonicalizes_labels() {
        let g = weighted_from_json(TRIANGLE).unwrap();
        assert_eq!(g.system().edge(0), &[0, 1]);
        assert_eq!(g.weight(0).data(), &[1.0, 0.5, 0.0, 0.75]);
        assert_eq!(g.weight(1).get(&[1, 0]), 0.25);
    }

    #[test]
    fn missing_edge_weights_rejected() {
        let text = TRIANGLE.replace("\"2-3\"", "\"2-4\"");
        assert!(weighted_from_json(&text).is_err());
    }

    #[test]
    fn malformed_json_is_an_error() {
        assert!(matches!(weighted_from_json("{\"J\": [1,"), Err(Error::Json(_))));
    }

    #[test]
    fn string_labels_work() {
        let text = r#"{"J": ["x", "y"], "vertex_sizes": {"x": 1, "y": 2}, "r": 2,
            "edges": [["x", "y"]], "weights": {"x-y": {"shape": [1, 2], "data": [1, 2]}}}"#;
        let g = weighted_from_json(text).unwrap();
        assert_eq!(g.system().edge_key(0), "x-y");
        let back = weighted_from_json(&weighted_to_json(&g)).unwrap();
        assert_eq!(back.weights(), g.weights());
    }

    proptest! {
        #[test]
        fn dyadic_weights_round_trip_bit_exactly(
            numerators in proptest::collection::vec(0u32..4096, 12),
            shift in 0u32..20,
        ) {
            let sys = Arc::new(HypergraphSystem::complete(3, 2, 2).unwrap());
            let scale = (1u64 << shift) as f64;
            let mut it = numerators.iter();
            let g = WeightedHypergraph::from_fn(sys, |_, _| *it.next().unwrap() as f64 / scale).unwrap();
            let back = weighted_from_json(&weighted_to_json(&g)).unwrap();
            for (a, b) in g.weights().iter().zip(back.weights()) {
                let bits_a: Vec<u64> = a.data().iter().map(|v| v.to_bits()).collect();
                let bits_b: Vec<u64> = b.data().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(bits_a, bits_b);
            }
        }
    }
}
