use std::cmp::Ordering;
use std::path::Path;

use super::{CausalEffect, CausalError};

/// Effects by ascending p-value; equal p-values by |ate| descending, then
/// feature name, then contrast.
pub fn significance_table(effects: &[CausalEffect]) -> Vec<CausalEffect> {
    let mut out = effects.to_vec();
    out.sort_by(|a, b| {
        a.p_value
            .partial_cmp(&b.p_value)
            .unwrap_or(Ordering::Equal)
            .then_with(|| b.ate.abs().partial_cmp(&a.ate.abs()).unwrap_or(Ordering::Equal))
            .then_with(|| a.feature.cmp(&b.feature))
            .then_with(|| a.contrast.cmp(&b.contrast))
    });
    out
}

/// Feature-level causal order: each feature placed by its best contrast.
/// Effects with `p_value > alpha` are left out.
pub fn causal_ranking(table: &[CausalEffect], alpha: f64) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for e in significance_table(table) {
        if e.p_value <= alpha && !names.contains(&e.feature) {
            names.push(e.feature);
        }
    }
    names
}

/// `feature, contrast, ate, stderr, p_value, n`
pub fn write_effects_csv(effects: &[CausalEffect], path: impl AsRef<Path>) -> Result<(), CausalError> {
    let io = |e: csv::Error| CausalError::Invalid(format!("cannot write {}: {e}", path.as_ref().display()));
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(io)?;
    w.write_record(["feature", "contrast", "ate", "stderr", "p_value", "n"])
        .map_err(io)?;
    for e in effects {
        w.write_record([
            e.feature.clone(),
            e.contrast.clone(),
            e.ate.to_string(),
            e.stderr.to_string(),
            e.p_value.to_string(),
            e.n.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| CausalError::Invalid(format!("cannot write {}: {e}", path.as_ref().display())))
}
