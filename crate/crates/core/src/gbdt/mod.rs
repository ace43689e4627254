//! Histogram gradient-boosted regression trees.
//!
//! Two growth strategies share one histogram core: leaf-wise (best-first,
//! unregularized, bounded by `num_leaves`) and level-wise (breadth-first,
//! L2-regularized leaves, categoricals via ordered target statistics).

mod binning;
mod boost;
mod encoding;
mod goss;
mod grow;
mod histogram;
mod io;
mod metrics;
mod tree;
mod tuning;

use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::DataError;

pub use binning::{bin_edges, bin_features, bin_of, BinLayout, BinnedData, BinnedFeature, RawFeature};
pub use boost::{fit, training_matrix, BoostParams, Ensemble, FeatureEncoding, FeatureMatrix, FeatureSpec};
pub use encoding::{full_target_statistics, ordered_target_encode};
pub use goss::{goss_sample, GossParams, GossSample};
pub use grow::{grow_tree, GrowthStrategy};
pub use histogram::{
    find_best_split, find_best_split_in, find_best_split_rows, leaf_score, leaf_value, split_gain, BinSplit, BinStats, FeatureBins,
    NodeHistogram, SplitCandidate,
};
pub use io::{load_model, model_from_json, model_to_json, save_model, MODEL_FORMAT};
pub use metrics::{r2_score, rmse};
pub use tree::{Node, NodeKind, SplitRule, Tree};
pub use tuning::{cv_score, grid_search, kfold_indices, CvRecord, GridSearchResult, GridSearchSpec, ModelFamily};

#[derive(Debug, Error)]
pub enum GbdtError {
    #[error("{0}")]
    Invalid(String),
    #[error("feature column `{0}` is missing")]
    MissingFeature(String),
    #[error("r2 is undefined: the actual values are constant")]
    ConstantActual,
    #[error("the hyperparameter grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("cannot access model file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed model file: {0}")]
    Format(String),
}
