use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::system::{blow_up_patterns, BlowUpMode, HypergraphSystem};
use crate::tensor::Tensor;

/// A family `(g_e)_{e ∈ H}` of nonnegative weight tensors, one per edge,
/// each of shape `(|V_j|)_{j ∈ e}`.
#[derive(Clone, Debug)]
pub struct WeightedHypergraph {
    system: Arc<HypergraphSystem>,
    weights: Vec<Tensor>,
}

impl WeightedHypergraph {
    pub fn new(system: Arc<HypergraphSystem>, weights: Vec<Tensor>) -> Result<Self> {
        Self::check_shapes(&system, &weights)?;
        for (id, w) in weights.iter().enumerate() {
            if let Some(bad) = w.data().iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                return Err(Error::contract(format!(
                    "edge {} carries weight {bad}; weights must be finite and nonnegative",
                    system.edge_key(id)
                )));
            }
        }
        Ok(WeightedHypergraph { system, weights })
    }

    fn check_shapes(system: &HypergraphSystem, weights: &[Tensor]) -> Result<()> {
        if weights.len() != system.num_edges() {
            return Err(Error::structural(format!(
                "{} weight tensors for {} edges",
                weights.len(),
                system.num_edges()
            )));
        }
        for (id, w) in weights.iter().enumerate() {
            let shape = system.edge_shape(id);
            if w.shape() != shape.as_slice() {
                return Err(Error::structural(format!(
                    "edge {} expects shape {shape:?}, got {:?}",
                    system.edge_key(id),
                    w.shape()
                )));
            }
        }
        Ok(())
    }

    /// The constant weighted hypergraph of value `c`.
    pub fn constant(system: Arc<HypergraphSystem>, c: f64) -> Result<Self> {
        let weights = (0..system.num_edges())
            .map(|id| Tensor::filled(system.edge_shape(id), c))
            .collect();
        Self::new(system, weights)
    }

    /// Builds weights by evaluating `f(edge_id, multi_index)`.
    pub fn from_fn(
        system: Arc<HypergraphSystem>,
        mut f: impl FnMut(usize, &[usize]) -> f64,
    ) -> Result<Self> {
        let weights = (0..system.num_edges())
            .map(|id| Tensor::from_fn(system.edge_shape(id), |ix| f(id, ix)))
            .collect();
        Self::new(system, weights)
    }

    pub fn system(&self) -> &Arc<HypergraphSystem> {
        &self.system
    }

    pub fn weights(&self) -> &[Tensor] {
        &self.weights
    }

    pub fn weight(&self, edge: usize) -> &Tensor {
        &self.weights[edge]
    }

    pub fn into_weights(self) -> Vec<Tensor> {
        self.weights
    }

    /// Copy with the tensor on `edge` replaced.
    pub fn with_weight(&self, edge: usize, tensor: Tensor) -> Result<Self> {
        let mut weights = self.weights.clone();
        weights[edge] = tensor;
        Self::new(self.system.clone(), weights)
    }

    /// True when `self ≤ other` pointwise on every edge.
    pub fn le(&self, other: &WeightedHypergraph) -> bool {
        self.weights
            .iter()
            .zip(&other.weights)
            .all(|(a, b)| a.data().iter().zip(b.data()).all(|(x, y)| x <= y))
    }

    /// True when every weight is at most `c`.
    pub fn bounded_by(&self, c: f64) -> bool {
        self.weights.iter().all(|w| w.all(|v| v <= c))
    }

    pub fn same_system(&self, other: &WeightedHypergraph) -> bool {
        self.system.same_shape(&other.system)
    }

    /// Whether edge `edge` is identically one.
    pub fn is_one_on(&self, edge: usize) -> bool {
        self.weights[edge].is_constant(1.0)
    }

    /// The weighted 2-blow-up: edge `e^(ω)` carries a copy of `g_e`.
    pub fn blow_up(&self, mode: BlowUpMode) -> Result<WeightedHypergraph> {
        let blown = Arc::new(self.system.blow_up(mode)?);
        let mut weights = vec![None; blown.num_edges()];
        for id in 0..self.system.num_edges() {
            for omega in blow_up_patterns(&self.system, id, mode) {
                let classes: Vec<usize> = self
                    .system
                    .edge(id)
                    .iter()
                    .zip(&omega)
                    .map(|(&j, &w)| 2 * j + w as usize)
                    .collect();
                let target = blown.edge_id(&classes).expect("blown-up edge exists");
                weights[target] = Some(self.weights[id].clone());
            }
        }
        let weights = weights.into_iter().map(|w| w.expect("every edge covered")).collect();
        Self::new(blown, weights)
    }
}
