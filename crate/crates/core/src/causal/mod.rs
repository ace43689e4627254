//! Per-feature causal effects by cross-fitted double machine learning,
//! significance ordering, effect-heterogeneity and policy trees on
//! pseudo-outcomes, and what-if counterfactuals through a fitted model.
//!
//! Estimation runs in `f64`; `whatif` works with any model scalar.

mod dml;
mod effect_tree;
mod significance;
pub mod synthetic;
mod whatif;

use thiserror::Error;

use crate::dataset::DataError;
use crate::gbdt::GbdtError;

pub use dml::{dml_effect, dml_effects, normal_p_value, pseudo_outcomes, CausalEffect, DmlConfig, DmlFit, TreatmentKind, TreatmentSpec};
pub use effect_tree::{
    constant_policy_benefit, fit_cate_tree, fit_policy_tree, Action, CateTree, EffectNode, EffectSplit, PolicyTree, SplitTest,
};
pub use significance::{causal_ranking, significance_table, write_effects_csv};
pub use whatif::{whatif, WhatIfResult};

#[derive(Debug, Error)]
pub enum CausalError {
    #[error("treatment `{0}` is constant")]
    ConstantTreatment(String),
    #[error("treatment `{0}` has missing values")]
    MissingTreatment(String),
    #[error("baseline level `{level}` does not occur in `{feature}`")]
    UnknownBaseline { feature: String, level: String },
    #[error("residualized treatment `{0}` has (near) zero variance")]
    DegenerateResiduals(String),
    #[error("nuisance model failed: {0}")]
    Nuisance(#[from] GbdtError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{0}")]
    Invalid(String),
}
