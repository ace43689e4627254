//! Gradient-boosted regression trees with leaf-wise and level-wise growth,
//! exact path-dependent Tree SHAP, cross-fitted double machine learning with
//! heterogeneity and policy trees, and a Spearman rank alignment between
//! attribution order and causal significance order.
//!
//! The tree learner, explainer and rank statistics are generic over
//! [`Scalar`] (`f32` / `f64`); the aliases below fix the usual `f64` choice.

pub mod alignment;
pub mod causal;
pub mod dataset;
pub mod gbdt;
pub mod scalar;
pub mod shap;

pub use scalar::Scalar;

pub type Ensemble = gbdt::Ensemble<f64>;
pub type Ensemble32 = gbdt::Ensemble<f32>;
pub type Tree = gbdt::Tree<f64>;
pub type Tree32 = gbdt::Tree<f32>;
pub type ShapMatrix = shap::ShapMatrix<f64>;
pub type ShapMatrix32 = shap::ShapMatrix<f32>;
pub type ImportanceRanking = shap::ImportanceRanking<f64>;
pub type ImportanceRanking32 = shap::ImportanceRanking<f32>;
pub type AlignmentResult = alignment::AlignmentResult<f64>;
pub type AlignmentResult32 = alignment::AlignmentResult<f32>;
