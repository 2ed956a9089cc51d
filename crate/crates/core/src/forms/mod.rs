//! Exact evaluation of linear-forms expectations.
//!
//! A [`FormsInstance`] is a product of tensors over shared variables,
//! averaged over every assignment. [`eval_naive`] sweeps all assignments and
//! serves as the oracle; [`eval_optimized`] eliminates variables one at a
//! time and agrees with it to within floating-point reassociation.

mod eval;
mod instance;
pub(crate) mod kernels;
mod lfc;
mod quantities;

pub use eval::{
    eval_naive, eval_optimized, eval_optimized_with, evaluate, marginal, marginal_naive, EvalOptions, Evaluation,
};
pub use instance::{Factor, FormsInstance, Slot};
pub use lfc::{
    check_lfc, check_lfc_with, lfc_instance, lfc_slots, run_patterns, select_patterns, LfcMode, LfcOptions,
    LfcReport, PatternValue,
};
pub use quantities::{box_quantity, density_instance, strong_forms_quantity, Majorant};
