//! Rooted tree machinery: canonical shapes, enumeration, counting,
//! bulb catalogs, chandelier families, and the parameter recipe.

pub mod catalog;
pub mod chandelier;
pub mod counting;
pub mod enumerate;
pub mod params;
pub mod shape;

pub use catalog::{build_catalog, BulbCatalog};
pub use chandelier::{build_family, family_over, Chandelier, ChandelierFamily, SUBSET_WIDTH_CAP};
pub use counting::{count_rooted_trees, estimate_otter, rooted_tree_counts_up_to, INV_OTTER_ALPHA};
pub use enumerate::{enumerate_rooted_trees, RootedTreeIter};
pub use params::{
    mean_diagonal_score, select_parameters, ClauseCheck, ParamChoice, RecipeConstants, OTTER_ALPHA,
};
pub use shape::{automorphisms_bruteforce, is_uniquely_rooted, RootedTreeShape};
