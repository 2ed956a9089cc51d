pub mod arithmetic;
pub mod counting;
pub mod error;
pub mod forms;
pub mod interchange;
pub mod model;
pub mod regularity;
pub mod removal;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{
    BlowUpMode, CellPartition, CliqueSet, EdgeGeometry, ExponentPattern, HypergraphSystem, Label,
    WeightedHypergraph,
};
pub use tensor::Tensor;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/systems.md")]
    mod systems {}
    #[doc = include_str!("../../../book/src/linear_forms.md")]
    mod linear_forms {}
    #[doc = include_str!("../../../book/src/regularity.md")]
    mod regularity {}
    #[doc = include_str!("../../../book/src/counting.md")]
    mod counting {}
    #[doc = include_str!("../../../book/src/removal.md")]
    mod removal {}
    #[doc = include_str!("../../../book/src/arithmetic.md")]
    mod arithmetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
