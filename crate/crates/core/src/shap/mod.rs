//! Exact path-dependent Tree SHAP for the boosted ensembles, a brute-force
//! Shapley oracle, and mean-|φ| importance rankings.
//!
//! Conditional expectations follow the trees' training covers, so no
//! background dataset is needed. Attributions are in target units.

mod brute;
mod explain;
mod treeshap;

use std::path::PathBuf;

use thiserror::Error;

use crate::gbdt::GbdtError;

pub use brute::{brute_force_shapley, MAX_BRUTE_FORCE_FEATURES};
pub use explain::{explain_ensemble, global_importance, write_importance_csv, write_shap_csv, ImportanceRanking, ShapMatrix};
pub use treeshap::{tree_shap_single, TreeExplanation};

#[derive(Debug, Error)]
pub enum ShapError {
    #[error("node {0} has zero cover; the model is invalid for path-dependent attribution")]
    ZeroCover(usize),
    #[error("tree uses {0} features; brute-force Shapley is limited to {MAX_BRUTE_FORCE_FEATURES}")]
    TooManyFeatures(usize),
    #[error("row has {found} values but the tree splits on feature {feature}")]
    RowTooShort { found: usize, feature: usize },
    #[error("cannot rank an empty attribution matrix")]
    Empty,
    #[error(transparent)]
    Model(#[from] GbdtError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Rejects trees whose splits reference features beyond `n_features` or
/// whose nodes carry no cover.
pub(crate) fn check_tree<T: crate::Scalar>(tree: &crate::gbdt::Tree<T>, n_features: usize) -> Result<(), ShapError> {
    for (i, node) in tree.nodes.iter().enumerate() {
        if !(node.cover > T::zero()) || !node.cover.is_finite() {
            return Err(ShapError::ZeroCover(i));
        }
        if let crate::gbdt::NodeKind::Split { feature, .. } = node.kind {
            if feature >= n_features {
                return Err(ShapError::RowTooShort {
                    found: n_features,
                    feature,
                });
            }
        }
    }
    Ok(())
}
