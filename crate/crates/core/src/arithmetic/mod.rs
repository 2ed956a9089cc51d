//! The `Z_N` side: measures, progression densities, linear forms
//! conditions on `Z_N`, Gowers norms and the reductions to hypergraphs.

mod corners;
mod forms;
mod gowers;
mod group;
mod measure;
mod reduction;

pub use corners::{corner_graphs, count_triangles, has_corner, random_corner_free, CornerGraphs, TriangleCount};
pub use forms::{
    corner_product_forms, lfc_corner_product, lfc_corner_product_with, zk_forms, zk_lfc_check, zk_lfc_check_with,
    zk_pinned, zk_prepared, zk_variable, LinearForm, PreparedForms, ZkForm,
};
pub use gowers::{
    gowers_inner_fast, gowers_inner_naive, gowers_norm, gowers_norm_naive, von_neumann_check, VonNeumann,
};
pub use group::{differences_generate, CyclicProduct, Homomorphism};
pub use measure::{ap_correlation, ap_degenerate, ap_density, random_measure, MeasureZn};
pub use reduction::{
    extract_deleted_sets, reduce_ap, reduce_corner, reduce_multidim, DeletedSets, ReductionBundle, ReductionCheck,
};
