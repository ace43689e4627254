use serde::{Deserialize, Serialize};

use crate::dataset::{CellValue, Table};
use crate::gbdt::Ensemble;
use crate::Scalar;

use super::CausalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfResult {
    pub feature: String,
    pub value: CellValue,
    /// Mean prediction over all input rows as they are.
    pub baseline_mean: f64,
    /// Mean prediction over all input rows after the intervention.
    pub counterfactual_mean: f64,
    /// Rows whose value was changed.
    pub n_affected: usize,
}

/// Sets `feature := value` on every row where it differs and compares mean
/// predictions before and after.
pub fn whatif<T: Scalar>(e: &Ensemble<T>, rows: &Table, feature: &str, value: &CellValue) -> Result<WhatIfResult, CausalError> {
    if rows.n_rows() == 0 {
        return Err(CausalError::Invalid("what-if needs at least one row".into()));
    }
    let col = rows.require(feature)?;
    if let CellValue::Number(v) = value {
        if !v.is_finite() {
            return Err(CausalError::Invalid(format!("intervention value for `{feature}` must be finite")));
        }
    }
    let kind_ok = matches!(
        (col.schema.kind, value),
        (crate::dataset::ColumnKind::Numeric, CellValue::Number(_)) | (crate::dataset::ColumnKind::Categorical, CellValue::Level(_))
    );
    if !kind_ok {
        return Err(CausalError::Invalid(format!(
            "value `{value}` does not fit the kind of `{feature}`"
        )));
    }
    let mut affected = Vec::new();
    for r in 0..rows.n_rows() {
        if !rows.cell_equals(feature, r, value)? {
            affected.push(r);
        }
    }
    let mean = |p: Vec<T>| p.iter().map(|v| v.to_f64_lossy()).sum::<f64>() / p.len() as f64;
    let baseline_mean = mean(e.predict(rows)?);
    let counterfactual_mean = if affected.is_empty() {
        baseline_mean
    } else {
        mean(e.predict(&rows.assign(feature, &affected, value)?)?)
    };
    Ok(WhatIfResult {
        feature: feature.to_string(),
        value: value.clone(),
        baseline_mean,
        counterfactual_mean,
        n_affected: affected.len(),
    })
}
