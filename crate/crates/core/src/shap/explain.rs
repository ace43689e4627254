use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Table;
use crate::gbdt::Ensemble;
use crate::Scalar;

use super::treeshap::accumulate;
use super::{check_tree, ShapError};

/// Per-row, per-feature attributions in target units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ShapMatrix<T> {
    pub feature_names: Vec<String>,
    pub row_ids: Vec<String>,
    pub n_rows: usize,
    /// Row-major, `n_rows × feature_names.len()`.
    pub values: Vec<T>,
    pub base_value: T,
}

impl<T: Scalar> ShapMatrix<T> {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[T] {
        let m = self.n_features();
        &self.values[i * m..(i + 1) * m]
    }

    /// `base_value + Σ_j φ_ij`, which equals the model output for row `i`.
    pub fn reconstruct(&self, i: usize) -> T {
        self.base_value + self.row(i).iter().copied().sum::<T>()
    }
}

/// Features ordered by mean |φ|, descending; equal scores by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ImportanceRanking<T> {
    pub entries: Vec<(String, T)>,
}

impl<T: Scalar> ImportanceRanking<T> {
    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Names of features with a strictly positive score, in rank order.
    pub fn nonzero_names(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|(_, s)| *s > T::zero())
            .map(|(n, _)| n.clone())
            .collect()
    }
}

/// Attributes every row of `rows` through all trees of `e`.
pub fn explain_ensemble<T: Scalar>(e: &Ensemble<T>, rows: &Table) -> Result<ShapMatrix<T>, ShapError> {
    let x = e.encode(rows)?;
    let m = e.n_features();
    for t in &e.trees {
        check_tree(t, m)?;
    }
    let expected: T = e.trees.iter().map(|t| t.expected_value()).sum();
    let values: Vec<T> = (0..x.n_rows)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut phi = vec![T::zero(); m];
            for t in &e.trees {
                accumulate(t, x.row(i), T::one(), &mut phi);
            }
            phi.into_iter().map(|v| v * e.learning_rate)
        })
        .collect();
    Ok(ShapMatrix {
        feature_names: e.feature_names(),
        row_ids: (0..rows.n_rows()).map(|i| rows.row_label(i)).collect(),
        n_rows: x.n_rows,
        values,
        base_value: e.base_score + e.learning_rate * expected,
    })
}

/// Mean absolute attribution per feature.
pub fn global_importance<T: Scalar>(m: &ShapMatrix<T>) -> Result<ImportanceRanking<T>, ShapError> {
    if m.n_rows == 0 {
        return Err(ShapError::Empty);
    }
    let k = m.n_features();
    let mut sums = vec![T::zero(); k];
    for i in 0..m.n_rows {
        for (s, v) in sums.iter_mut().zip(m.row(i)) {
            *s = *s + v.abs();
        }
    }
    let n = T::of_usize(m.n_rows);
    let mut entries: Vec<(String, T)> = m.feature_names.iter().cloned().zip(sums.into_iter().map(|s| s / n)).collect();
    entries.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    Ok(ImportanceRanking { entries })
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, ShapError> {
    let file = std::fs::File::create(path).map_err(|source| ShapError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::Writer::from_writer(file))
}

/// `row_id, <features...>, base_value`
pub fn write_shap_csv<T: Scalar>(m: &ShapMatrix<T>, path: impl AsRef<Path>) -> Result<(), ShapError> {
    let mut w = writer(path.as_ref())?;
    let mut header = vec!["row_id".to_string()];
    header.extend(m.feature_names.iter().cloned());
    header.push("base_value".into());
    w.write_record(&header)?;
    for i in 0..m.n_rows {
        let mut rec = vec![m.row_ids[i].clone()];
        rec.extend(m.row(i).iter().map(|v| v.to_string()));
        rec.push(m.base_value.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| ShapError::Io {
        path: path.as_ref().to_path_buf(),
        source,
    })
}

/// `rank, feature, score`
pub fn write_importance_csv<T: Scalar>(r: &ImportanceRanking<T>, path: impl AsRef<Path>) -> Result<(), ShapError> {
    let mut w = writer(path.as_ref())?;
    w.write_record(["rank", "feature", "score"])?;
    for (i, (name, score)) in r.entries.iter().enumerate() {
        w.write_record([(i + 1).to_string(), name.clone(), score.to_string()])?;
    }
    w.flush().map_err(|source| ShapError::Io {
        path: path.as_ref().to_path_buf(),
        source,
    })
}
