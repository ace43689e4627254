//! JSON model files.
//!
//! ```text
//! {
//!   "format": "shapcausal-gbdt",
//!   "version": 1,
//!   "scalar": "f64",
//!   "model": {
//!     "features": [{"name": .., "encoding": "numeric" | "levels" | "target_statistic", ..}],
//!     "trees": [{"nodes": [ pre-order; {"cover", "split": {feature, rule, left, right, gain}}
//!                                     | {"cover", "leaf": {value}} ]}],
//!     "base_score", "learning_rate", "strategy", "target", "train_rmse"
//!   }
//! }
//! ```
//!
//! Numbers are written in shortest round-trip form, so a save/load cycle
//! reproduces every value bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Scalar;

use super::boost::Ensemble;
use super::GbdtError;

pub const MODEL_FORMAT: &str = "shapcausal-gbdt";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ModelFile<T> {
    format: String,
    version: u32,
    scalar: String,
    model: Ensemble<T>,
}

fn scalar_name<T>() -> String {
    std::any::type_name::<T>().to_string()
}

pub fn model_to_json<T: Scalar>(model: &Ensemble<T>) -> Result<String, GbdtError> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: VERSION,
        scalar: scalar_name::<T>(),
        model: model.clone(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| GbdtError::Format(e.to_string()))
}

pub fn model_from_json<T: Scalar>(text: &str) -> Result<Ensemble<T>, GbdtError> {
    let file: ModelFile<T> = serde_json::from_str(text).map_err(|e| GbdtError::Format(e.to_string()))?;
    if file.format != MODEL_FORMAT || file.version != VERSION {
        return Err(GbdtError::Format(format!(
            "expected {MODEL_FORMAT} version {VERSION}, found {} version {}",
            file.format, file.version
        )));
    }
    if file.scalar != scalar_name::<T>() {
        return Err(GbdtError::Format(format!(
            "model was saved with scalar {}, requested {}",
            file.scalar,
            scalar_name::<T>()
        )));
    }
    for (i, tree) in file.model.trees.iter().enumerate() {
        tree.check_structure(T::infinity())
            .map_err(|e| GbdtError::Format(format!("tree {i}: {e}")))?;
        if let Some(&f) = tree.used_features().last() {
            if f >= file.model.features.len() {
                return Err(GbdtError::Format(format!("tree {i} splits on unknown feature {f}")));
            }
        }
    }
    Ok(file.model)
}

pub fn save_model<T: Scalar>(model: &Ensemble<T>, path: &Path) -> Result<(), GbdtError> {
    let text = model_to_json(model)?;
    fs::write(path, text).map_err(|source| GbdtError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<Ensemble<T>, GbdtError> {
    let text = fs::read_to_string(path).map_err(|source| GbdtError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_json(&text)
}
