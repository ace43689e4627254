use std::f64::consts::SQRT_2;

use libm::erfc;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, ColumnData, ColumnKind, ColumnRole, ColumnSchema, NumericColumn, Table};
use crate::gbdt::{fit, kfold_indices, BoostParams, GrowthStrategy};

use super::CausalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreatmentKind {
    /// Numeric 0/1 column; the contrast is 1 versus 0.
    Binary,
    /// Effect per unit change.
    Continuous,
    /// One contrast per other level against `baseline`.
    Categorical { baseline: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentSpec {
    pub feature: String,
    #[serde(flatten)]
    pub kind: TreatmentKind,
}

impl TreatmentSpec {
    /// Numeric columns holding only 0/1 are binary, other numeric columns
    /// continuous; categoricals use their lexicographically first occurring
    /// level as the baseline.
    pub fn infer(data: &Table, feature: &str) -> Result<Self, CausalError> {
        let kind = match &data.require(feature)?.data {
            ColumnData::Numeric(c) => {
                if (0..data.n_rows()).all(|r| matches!(c.get(r), Some(v) if v == 0.0 || v == 1.0)) {
                    TreatmentKind::Binary
                } else {
                    TreatmentKind::Continuous
                }
            }
            ColumnData::Categorical(c) => {
                let counts = c.counts();
                let baseline = (0..c.levels.len())
                    .filter(|&k| counts[k] > 0)
                    .map(|k| c.levels[k].clone())
                    .min()
                    .ok_or_else(|| CausalError::ConstantTreatment(feature.to_string()))?;
                TreatmentKind::Categorical { baseline }
            }
        };
        Ok(Self {
            feature: feature.to_string(),
            kind,
        })
    }
}

/// One estimated contrast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalEffect {
    pub feature: String,
    /// `"num"`, `"1 v 0"`, or `"<level> v <baseline>"`.
    pub contrast: String,
    /// Change of the outcome per unit (or per level switch) of the treatment.
    pub ate: f64,
    /// Heteroskedasticity-robust (HC0) standard error.
    pub stderr: f64,
    pub p_value: f64,
    /// Rows the contrast was estimated on.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmlConfig {
    pub folds: usize,
    pub seed: u64,
    /// Model for both E[Y|X] and E[T|X].
    pub nuisance: BoostParams,
    /// Categorical levels with fewer rows are left out of the analysis of
    /// that treatment (their rows are dropped), since a handful of rows
    /// cannot support a robust standard error.
    pub min_level_count: usize,
}

impl Default for DmlConfig {
    fn default() -> Self {
        // Heavy leaf shrinkage: noise the propensity model picks up inflates
        // mean(T̃²) and attenuates the estimate toward zero.
        let strategy = GrowthStrategy::LevelWise {
            depth: 3,
            l2_leaf_reg: 30.0,
            border_count: 255,
        };
        Self {
            folds: 5,
            seed: 0,
            nuisance: BoostParams::new(strategy, 0.1, 200),
            min_level_count: 10,
        }
    }
}

/// A cross-fitted estimate with the residuals it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmlFit {
    pub treatment: TreatmentSpec,
    pub effects: Vec<CausalEffect>,
    /// Rows of the input table that were used, ascending.
    pub rows: Vec<usize>,
    /// Folds as positions into `rows`.
    pub folds: Vec<Vec<usize>>,
    /// Out-of-fold outcome residuals Ỹ, aligned with `rows`.
    pub y_residual: Vec<f64>,
    /// Out-of-fold treatment residuals T̃, one vector per contrast.
    pub t_residual: Vec<Vec<f64>>,
}

/// `2·(1 − Φ(|z|))`, evaluated as `erfc(|z|/√2)` to keep precision in the tail.
pub fn normal_p_value(ate: f64, stderr: f64) -> f64 {
    if stderr > 0.0 {
        erfc((ate / stderr).abs() / SQRT_2)
    } else if ate == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Treatment columns (one per contrast), their labels, and the rows kept.
fn treatment_design(
    data: &Table,
    spec: &TreatmentSpec,
    min_level_count: usize,
) -> Result<(Vec<Vec<f64>>, Vec<String>, Vec<usize>), CausalError> {
    let name = &spec.feature;
    let col = data.require(name)?;
    let all: Vec<usize> = (0..data.n_rows()).collect();
    match (&spec.kind, &col.data) {
        (TreatmentKind::Binary | TreatmentKind::Continuous, ColumnData::Numeric(c)) => {
            if c.n_missing() > 0 {
                return Err(CausalError::MissingTreatment(name.clone()));
            }
            if matches!(spec.kind, TreatmentKind::Binary) && c.values.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(CausalError::Invalid(format!("binary treatment `{name}` has values other than 0/1")));
            }
            let label = if matches!(spec.kind, TreatmentKind::Binary) {
                "1 v 0"
            } else {
                "num"
            };
            Ok((vec![c.values.clone()], vec![label.to_string()], all))
        }
        (TreatmentKind::Categorical { baseline }, ColumnData::Categorical(c)) => {
            let base = c
                .code_of(baseline)
                .filter(|&k| c.counts()[k as usize] > 0)
                .ok_or_else(|| CausalError::UnknownBaseline {
                    feature: name.clone(),
                    level: baseline.clone(),
                })?;
            let counts = c.counts();
            if counts[base as usize] < min_level_count {
                return Err(CausalError::Invalid(format!(
                    "baseline `{baseline}` of `{name}` has only {} rows",
                    counts[base as usize]
                )));
            }
            // other levels in name order
            let mut levels: Vec<u32> = (0..c.levels.len() as u32)
                .filter(|&k| k != base && counts[k as usize] >= min_level_count)
                .collect();
            levels.sort_by(|a, b| c.levels[*a as usize].cmp(&c.levels[*b as usize]));
            if levels.is_empty() {
                return Err(CausalError::ConstantTreatment(name.clone()));
            }
            let rows: Vec<usize> = all
                .into_iter()
                .filter(|&r| c.codes[r] == base || levels.contains(&c.codes[r]))
                .collect();
            let columns = levels
                .iter()
                .map(|&k| rows.iter().map(|&r| f64::from(u8::from(c.codes[r] == k))).collect())
                .collect();
            let labels = levels.iter().map(|&k| format!("{} v {baseline}", c.levels[k as usize])).collect();
            Ok((columns, labels, rows))
        }
        (_, data) => Err(CausalError::Invalid(format!(
            "treatment `{name}` is {} but was declared {:?}",
            data.kind().as_str(),
            spec.kind
        ))),
    }
}

/// Covariate table (every feature but the treatment and outcome) with a
/// fresh target column.
fn nuisance_table(covariates: &Table, target: Vec<f64>) -> Result<Table, CausalError> {
    let mut columns: Vec<Column> = covariates.features().cloned().collect();
    columns.push(Column {
        schema: ColumnSchema::new("__nuisance_target", ColumnKind::Numeric, ColumnRole::Target),
        data: ColumnData::Numeric(NumericColumn::from_values(target)),
    });
    Ok(Table::new(columns)?)
}

/// Out-of-fold predictions of `target` from `covariates`.
fn cross_fit(covariates: &Table, target: &[f64], folds: &[Vec<usize>], params: &BoostParams) -> Result<Vec<f64>, CausalError> {
    let n = target.len();
    let table = nuisance_table(covariates, target.to_vec())?;
    let per_fold: Vec<Vec<f64>> = folds
        .par_iter()
        .map(|held_out| {
            let mut out = vec![false; n];
            for &i in held_out {
                out[i] = true;
            }
            let fit_rows: Vec<usize> = (0..n).filter(|&i| !out[i]).collect();
            debug_assert!(fit_rows.iter().all(|i| !held_out.contains(i)));
            let model = fit::<f64>(&table.select_rows(&fit_rows), params)?;
            Ok(model.predict(&table.select_rows(held_out))?)
        })
        .collect::<Result<_, CausalError>>()?;
    let mut pred = vec![f64::NAN; n];
    for (held_out, p) in folds.iter().zip(per_fold) {
        for (&i, v) in held_out.iter().zip(p) {
            pred[i] = v;
        }
    }
    Ok(pred)
}

/// Cross-fitted partially linear DML for one treatment feature.
///
/// Both nuisances are fit on the complement of each fold and predict that
/// fold; the final stage regresses Ỹ on all contrast residuals jointly
/// (no intercept) with an HC0 sandwich covariance.
pub fn dml_effect(data: &Table, treatment: &TreatmentSpec, outcome: &str, cfg: &DmlConfig) -> Result<DmlFit, CausalError> {
    if cfg.folds < 2 {
        return Err(CausalError::Invalid("cross-fitting needs at least 2 folds".into()));
    }
    let (t_cols, labels, rows) = treatment_design(data, treatment, cfg.min_level_count)?;
    for t in &t_cols {
        if t.iter().all(|&v| v == t[0]) {
            return Err(CausalError::ConstantTreatment(treatment.feature.clone()));
        }
    }
    let y_col = data.numeric(outcome)?;
    if rows.iter().any(|&r| y_col.get(r).is_none_or(|v| !v.is_finite())) {
        return Err(CausalError::Invalid(format!("outcome `{outcome}` has missing values")));
    }
    let y: Vec<f64> = rows.iter().map(|&r| y_col.values[r]).collect();
    let mut covariates = data.select_rows(&rows).drop_columns(&[treatment.feature.as_str(), outcome]);
    if covariates.features().next().is_none() {
        // no confounders: the nuisances reduce to fold means
        covariates = Table::new(vec![Column {
            schema: ColumnSchema::numeric("__constant"),
            data: ColumnData::Numeric(NumericColumn::from_values(vec![0.0; rows.len()])),
        }])?;
    }
    let folds = kfold_indices(rows.len(), cfg.folds, cfg.seed).map_err(CausalError::Nuisance)?;

    let y_hat = cross_fit(&covariates, &y, &folds, &cfg.nuisance)?;
    let y_residual: Vec<f64> = y.iter().zip(&y_hat).map(|(a, b)| a - b).collect();
    let t_residual: Vec<Vec<f64>> = t_cols
        .iter()
        .map(|t| {
            let t_hat = cross_fit(&covariates, t, &folds, &cfg.nuisance)?;
            Ok(t.iter().zip(&t_hat).map(|(a, b)| a - b).collect())
        })
        .collect::<Result<_, CausalError>>()?;

    let (ate, stderr) = final_stage(&t_residual, &y_residual).ok_or_else(|| CausalError::DegenerateResiduals(treatment.feature.clone()))?;
    let effects = labels
        .into_iter()
        .zip(ate.iter().zip(&stderr))
        .map(|(contrast, (&ate, &se))| CausalEffect {
            feature: treatment.feature.clone(),
            contrast,
            ate,
            stderr: se,
            p_value: normal_p_value(ate, se),
            n: rows.len(),
        })
        .collect();
    Ok(DmlFit {
        treatment: treatment.clone(),
        effects,
        rows,
        folds,
        y_residual,
        t_residual,
    })
}

/// OLS of `y` on the columns of `t` without intercept; returns coefficients
/// and HC0 standard errors, or `None` when `TᵀT` is not positive definite.
fn final_stage(t: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = y.len();
    let k = t.len();
    if k == 1 {
        // scalar path, summed in row order
        let sxx: f64 = t[0].iter().map(|v| v * v).sum();
        let sxy: f64 = t[0].iter().zip(y).map(|(a, b)| a * b).sum();
        if !(sxx > 0.0 && sxx.is_finite()) {
            return None;
        }
        let theta = sxy / sxx;
        let meat: f64 = t[0].iter().zip(y).map(|(a, b)| (a * (b - theta * a)).powi(2)).sum();
        return Some((vec![theta], vec![meat.sqrt() / sxx]));
    }
    let x = DMatrix::from_fn(n, k, |i, j| t[j][i]);
    let yv = DVector::from_column_slice(y);
    let xtx = x.transpose() * &x;
    let chol = xtx.clone().cholesky()?;
    let bread = chol.inverse();
    let theta = &bread * (x.transpose() * &yv);
    let resid = &yv - &x * &theta;
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for i in 0..n {
        let row = x.row(i).transpose() * resid[i];
        meat += &row * row.transpose();
    }
    let cov = &bread * meat * &bread;
    if (0..k).any(|j| !(xtx[(j, j)] > 0.0)) {
        return None;
    }
    Some((
        theta.iter().copied().collect(),
        (0..k).map(|j| cov[(j, j)].max(0.0).sqrt()).collect(),
    ))
}

/// Estimates every treatment independently (in parallel); results keep the
/// input order.
pub fn dml_effects(data: &Table, treatments: &[TreatmentSpec], outcome: &str, cfg: &DmlConfig) -> Vec<Result<DmlFit, CausalError>> {
    treatments.par_iter().map(|t| dml_effect(data, t, outcome, cfg)).collect()
}

/// Per-row effect scores `ψ_i = T̃_i·Ỹ_i / mean(T̃²)` for a binary treatment
/// (a 0/1 column or a two-level categorical); their mean is exactly the DML
/// estimate.
pub fn pseudo_outcomes(fit: &DmlFit) -> Result<Vec<f64>, CausalError> {
    if fit.treatment.kind == TreatmentKind::Continuous || fit.t_residual.len() != 1 {
        return Err(CausalError::Invalid(format!(
            "pseudo-outcomes need a binary treatment; `{}` is not",
            fit.treatment.feature
        )));
    }
    let t = &fit.t_residual[0];
    let n = t.len() as f64;
    let mean_sq = t.iter().map(|v| v * v).sum::<f64>() / n;
    if !(mean_sq > 0.0 && mean_sq.is_finite()) {
        return Err(CausalError::DegenerateResiduals(fit.treatment.feature.clone()));
    }
    Ok(t.iter().zip(&fit.y_residual).map(|(a, b)| a * b / mean_sq).collect())
}
