use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::clique::{CliqueSet, EdgeGeometry};
use crate::tensor::Tensor;

/// A partition of `V_e` into nonempty clique sets, with a lookup from each
/// point to its cell.
#[derive(Clone, Debug)]
pub struct CellPartition {
    geometry: Arc<EdgeGeometry>,
    cells: Vec<CliqueSet>,
    cell_of: Vec<u32>,
    sizes: Vec<usize>,
}

impl CellPartition {
    /// The trivial partition `{V_e}`.
    pub fn trivial(geometry: Arc<EdgeGeometry>) -> Self {
        let len = geometry.len();
        CellPartition {
            cells: vec![CliqueSet::full(geometry.clone())],
            cell_of: vec![0; len],
            sizes: vec![len],
            geometry,
        }
    }

    /// Validates that `cells` are pairwise disjoint and cover `V_e` with a
    /// full membership sweep. Empty cells are dropped.
    pub fn new(geometry: Arc<EdgeGeometry>, cells: Vec<CliqueSet>) -> Result<Self> {
        let len = geometry.len();
        let mut cell_of = vec![u32::MAX; len];
        let mut kept = Vec::with_capacity(cells.len());
        let mut sizes = Vec::with_capacity(cells.len());
        for cell in cells {
            if cell.geometry().shape() != geometry.shape() {
                return Err(Error::structural("cell lives on a different edge shape"));
            }
            let id = kept.len() as u32;
            let mut size = 0;
            for (x, slot) in cell_of.iter_mut().enumerate() {
                if cell.contains_flat(x) {
                    if *slot != u32::MAX {
                        return Err(Error::structural(format!(
                            "cells {} and {id} overlap at point {x}",
                            *slot
                        )));
                    }
                    *slot = id;
                    size += 1;
                }
            }
            if size > 0 {
                kept.push(cell);
                sizes.push(size);
            }
        }
        if let Some(x) = cell_of.iter().position(|&c| c == u32::MAX) {
            return Err(Error::structural(format!("point {x} is not covered")));
        }
        Ok(CellPartition {
            geometry,
            cells: kept,
            cell_of,
            sizes,
        })
    }

    pub fn geometry(&self) -> &Arc<EdgeGeometry> {
        &self.geometry
    }

    pub fn cells(&self) -> &[CliqueSet] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_of(&self, x: usize) -> usize {
        self.cell_of[x] as usize
    }

    pub fn cell_sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// `E[g·1_S] / E[1_S]` for every cell `S`.
    pub fn cell_means(&self, g: &Tensor) -> Vec<f64> {
        let mut sums = vec![0.0; self.cells.len()];
        for (x, &v) in g.data().iter().enumerate() {
            sums[self.cell_of[x] as usize] += v;
        }
        sums.iter()
            .zip(&self.sizes)
            .map(|(s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
            .collect()
    }

    /// `g_P`: the conditional expectation of `g` given the partition.
    pub fn conditional_expectation(&self, g: &Tensor) -> Tensor {
        let means = self.cell_means(g);
        self.broadcast(&means)
    }

    /// The tensor that takes value `values[i]` on cell `i`.
    pub fn broadcast(&self, values: &[f64]) -> Tensor {
        let data = self.cell_of.iter().map(|&c| values[c as usize]).collect();
        Tensor::new(self.geometry.shape().to_vec(), data).expect("partition shape")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_cells_form_a_partition_with_means() {
        let g = EdgeGeometry::new(&[2, 2]);
        let rect = CliqueSet::from_predicates(g.clone(), |_, y| y == 0);
        let p = CellPartition::new(g.clone(), rect.split()).unwrap();
        assert_eq!(p.len(), 4);
        let w = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        // Every cell is a single point here, so g_P = g.
        assert_eq!(p.conditional_expectation(&w), w);
    }

    #[test]
    fn overlap_and_gap_are_rejected() {
        let g = EdgeGeometry::new(&[2, 2]);
        let full = CliqueSet::full(g.clone());
        assert!(CellPartition::new(g.clone(), vec![full.clone(), full]).is_err());
        let single = CliqueSet::singleton(g.clone(), 0);
        assert!(CellPartition::new(g, vec![single]).is_err());
    }

    #[test]
    fn empty_cells_are_dropped() {
        let g = EdgeGeometry::new(&[2, 2]);
        let p = CellPartition::new(g.clone(), vec![CliqueSet::full(g.clone()), CliqueSet::empty(g)]).unwrap();
        assert_eq!(p.len(), 1);
    }
}
