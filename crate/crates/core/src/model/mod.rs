//! Hypergraph systems, weighted hypergraphs and clique-set geometry.

mod clique;
mod partition;
mod pattern;
mod system;
mod weighted;

pub use clique::{CliqueSet, EdgeGeometry};
pub use partition::CellPartition;
pub use pattern::ExponentPattern;
pub use system::{k_subsets, BlowUpMode, HypergraphSystem, Label};
pub(crate) use system::blow_up_patterns;
pub use weighted::WeightedHypergraph;
