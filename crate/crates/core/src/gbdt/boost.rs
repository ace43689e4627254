//! Boosting loop, fitted ensembles and prediction.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnData, Table};
use crate::Scalar;

use super::binning::{BinnedData, RawFeature};
use super::encoding::{full_target_statistics, ordered_target_encode};
use super::goss::{goss_sample, GossParams};
use super::grow::{grow_tree, GrowthStrategy};
use super::tree::Tree;
use super::GbdtError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub strategy: GrowthStrategy,
    pub learning_rate: f64,
    pub n_trees: usize,
    #[serde(default)]
    pub goss: Option<GossParams>,
    #[serde(default)]
    pub seed: u64,
    /// Numeric bins for leaf-wise growth; level-wise uses `border_count`.
    #[serde(default = "default_max_bin")]
    pub max_bin: usize,
    /// Prior weight of the ordered target statistic (level-wise categoricals).
    #[serde(default = "default_prior_weight")]
    pub prior_weight: f64,
}

fn default_max_bin() -> usize {
    255
}

fn default_prior_weight() -> f64 {
    1.0
}

impl BoostParams {
    pub fn new(strategy: GrowthStrategy, learning_rate: f64, n_trees: usize) -> Self {
        Self {
            strategy,
            learning_rate,
            n_trees,
            goss: None,
            seed: 0,
            max_bin: default_max_bin(),
            prior_weight: default_prior_weight(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_goss(mut self, goss: GossParams) -> Self {
        self.goss = Some(goss);
        self
    }

    pub fn validate(&self) -> Result<(), GbdtError> {
        self.strategy.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(GbdtError::Invalid(format!(
                "learning_rate {} is outside (0, 1]",
                self.learning_rate
            )));
        }
        if self.n_trees == 0 {
            return Err(GbdtError::Invalid("n_trees must be at least 1".into()));
        }
        if self.max_bin < 2 {
            return Err(GbdtError::Invalid("max_bin must be at least 2".into()));
        }
        if !(self.prior_weight >= 0.0) {
            return Err(GbdtError::Invalid("prior_weight must be >= 0".into()));
        }
        Ok(())
    }
}

/// How one input column is turned into the model's feature value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
#[serde(tag = "encoding", rename_all = "snake_case")]
pub enum FeatureEncoding<T> {
    Numeric,
    /// Category code into `levels` (index 0 is NA); split one-vs-rest.
    Levels {
        levels: Vec<String>,
    },
    /// Whole-sample target statistic per level.
    TargetStatistic {
        levels: Vec<String>,
        values: Vec<T>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FeatureSpec<T> {
    pub name: String,
    #[serde(flatten)]
    pub encoding: FeatureEncoding<T>,
}

/// Row-major encoded feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub n_rows: usize,
    pub n_features: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n_features = rows.first().map_or(0, Vec::len);
        Self {
            n_rows: rows.len(),
            n_features,
            values: rows.iter().flatten().copied().collect(),
        }
    }
}

/// A fitted boosted ensemble.
///
/// Leaf values are stored unscaled: `predict(x) = base_score +
/// learning_rate · Σ_t leaf_t(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Ensemble<T> {
    pub features: Vec<FeatureSpec<T>>,
    pub trees: Vec<Tree<T>>,
    pub base_score: T,
    pub learning_rate: T,
    pub strategy: GrowthStrategy,
    pub target: String,
    /// Training RMSE after each boosting round.
    #[serde(default)]
    pub train_rmse: Vec<f64>,
}

impl<T: Scalar> Ensemble<T> {
    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// Encodes the ensemble's features from `rows`. Unseen categorical levels
    /// map to the NA level.
    pub fn encode(&self, rows: &Table) -> Result<FeatureMatrix<T>, GbdtError> {
        let n = rows.n_rows();
        let m = self.features.len();
        let mut values = vec![T::zero(); n * m];
        for (j, spec) in self.features.iter().enumerate() {
            let col = rows
                .column(&spec.name)
                .ok_or_else(|| GbdtError::MissingFeature(spec.name.clone()))?;
            match (&spec.encoding, &col.data) {
                (FeatureEncoding::Numeric, ColumnData::Numeric(c)) => {
                    for i in 0..n {
                        values[i * m + j] = c.get(i).map_or_else(T::nan, T::of);
                    }
                }
                (FeatureEncoding::Levels { levels }, ColumnData::Categorical(c)) => {
                    let map = level_map(&c.levels, levels);
                    for i in 0..n {
                        values[i * m + j] = T::of_usize(map[c.codes[i] as usize]);
                    }
                }
                (FeatureEncoding::TargetStatistic { levels, values: stats }, ColumnData::Categorical(c)) => {
                    let map = level_map(&c.levels, levels);
                    for i in 0..n {
                        values[i * m + j] = stats[map[c.codes[i] as usize]];
                    }
                }
                _ => {
                    return Err(GbdtError::Invalid(format!(
                        "feature `{}` has a different kind than at training time",
                        spec.name
                    )))
                }
            }
        }
        Ok(FeatureMatrix {
            n_rows: n,
            n_features: m,
            values,
        })
    }

    pub fn predict_row(&self, row: &[T]) -> T {
        let sum: T = self.trees.iter().map(|t| t.predict_row(row)).sum();
        self.base_score + self.learning_rate * sum
    }

    pub fn predict_matrix(&self, x: &FeatureMatrix<T>) -> Vec<T> {
        (0..x.n_rows).map(|i| self.predict_row(x.row(i))).collect()
    }

    pub fn predict(&self, rows: &Table) -> Result<Vec<T>, GbdtError> {
        Ok(self.predict_matrix(&self.encode(rows)?))
    }
}

/// Maps codes of a table's level dictionary onto a training dictionary; unseen → 0 (NA).
fn level_map(table_levels: &[String], trained: &[String]) -> Vec<usize> {
    table_levels
        .iter()
        .map(|l| trained.iter().position(|t| t == l).unwrap_or(0))
        .collect()
}

/// Everything the boosting loop needs, derived once from a training table.
pub(crate) struct TrainingSet<T> {
    pub specs: Vec<FeatureSpec<T>>,
    pub binned: BinnedData<T>,
    pub matrix: FeatureMatrix<T>,
    pub target: Vec<T>,
    pub target_name: String,
}

pub(crate) fn prepare<T: Scalar>(train: &Table, params: &BoostParams) -> Result<TrainingSet<T>, GbdtError> {
    let target_name = train
        .target_name()
        .ok_or_else(|| GbdtError::MissingFeature("<target>".into()))?
        .to_string();
    let y = train.target()?;
    if y.is_empty() {
        return Err(GbdtError::Invalid("empty training table".into()));
    }
    let n = y.len();
    let prior = y.iter().sum::<f64>() / n as f64;
    let leaf_wise = params.strategy.is_leaf_wise();
    let border = match params.strategy {
        GrowthStrategy::LeafWise { .. } => params.max_bin,
        GrowthStrategy::LevelWise { border_count, .. } => border_count,
    };

    let mut permutation: Vec<usize> = (0..n).collect();
    permutation.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed ^ 0x5eed_0bde_4ed0_0001));

    enum Col<T> {
        Real(Vec<T>),
        Codes(Vec<u32>, usize),
    }
    let mut specs = Vec::new();
    let mut cols = Vec::new();
    for c in train.features() {
        match &c.data {
            ColumnData::Numeric(num) => {
                specs.push(FeatureSpec {
                    name: c.schema.name.clone(),
                    encoding: FeatureEncoding::Numeric,
                });
                cols.push(Col::Real((0..n).map(|i| num.get(i).map_or_else(T::nan, T::of)).collect()));
            }
            ColumnData::Categorical(cat) if leaf_wise => {
                specs.push(FeatureSpec {
                    name: c.schema.name.clone(),
                    encoding: FeatureEncoding::Levels {
                        levels: cat.levels.clone(),
                    },
                });
                cols.push(Col::Codes(cat.codes.clone(), cat.levels.len()));
            }
            ColumnData::Categorical(cat) => {
                let ordered = ordered_target_encode(&cat.codes, &y, &permutation, prior, params.prior_weight)?;
                let full = full_target_statistics(&cat.codes, cat.levels.len(), &y, prior, params.prior_weight);
                specs.push(FeatureSpec {
                    name: c.schema.name.clone(),
                    encoding: FeatureEncoding::TargetStatistic {
                        levels: cat.levels.clone(),
                        values: full.into_iter().map(T::of).collect(),
                    },
                });
                cols.push(Col::Real(ordered.into_iter().map(T::of).collect()));
            }
        }
    }
    if specs.is_empty() {
        return Err(GbdtError::Invalid("training table has no feature columns".into()));
    }

    let raw: Vec<RawFeature<'_, T>> = cols
        .iter()
        .map(|c| match c {
            Col::Real(v) => RawFeature::Numeric(v),
            Col::Codes(k, n_levels) => RawFeature::Categorical {
                codes: k,
                n_levels: *n_levels,
            },
        })
        .collect();
    let binned = BinnedData::build(&raw, border)?;

    let m = cols.len();
    let mut values = vec![T::zero(); n * m];
    for (j, c) in cols.iter().enumerate() {
        for i in 0..n {
            values[i * m + j] = match c {
                Col::Real(v) => v[i],
                Col::Codes(k, _) => T::of(f64::from(k[i])),
            };
        }
    }
    Ok(TrainingSet {
        specs,
        binned,
        matrix: FeatureMatrix {
            n_rows: n,
            n_features: m,
            values,
        },
        target: y.into_iter().map(T::of).collect(),
        target_name,
    })
}

pub(crate) fn boost<T: Scalar>(set: TrainingSet<T>, params: &BoostParams) -> Result<Ensemble<T>, GbdtError> {
    let n = set.target.len();
    let y = &set.target;
    let base = y.iter().copied().sum::<T>() / T::of_usize(n);
    let lr = T::of(params.learning_rate);
    let mut pred = vec![base; n];
    let mut grad = vec![T::zero(); n];
    let mut hess = vec![T::zero(); n];
    let all_rows: Vec<usize> = (0..n).collect();
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut train_rmse = Vec::with_capacity(params.n_trees);

    for round in 0..params.n_trees {
        let raw_grad: Vec<T> = pred.iter().zip(y).map(|(p, t)| *p - *t).collect();
        let rows = match params.goss {
            Some(goss) => {
                let s = goss_sample(&raw_grad, goss.top_rate, goss.other_rate, params.seed.wrapping_add(round as u64))?;
                grad.iter_mut().for_each(|g| *g = T::zero());
                hess.iter_mut().for_each(|h| *h = T::zero());
                for (&r, &w) in s.rows.iter().zip(&s.weights) {
                    grad[r] = raw_grad[r] * w;
                    hess[r] = w;
                }
                s.rows
            }
            None => {
                grad.copy_from_slice(&raw_grad);
                hess.iter_mut().for_each(|h| *h = T::one());
                all_rows.clone()
            }
        };
        let tree = grow_tree(&set.binned, &grad, &hess, &rows, &params.strategy)?;
        let mut sse = 0.0;
        for (i, p) in pred.iter_mut().enumerate() {
            *p = *p + lr * tree.predict_row(set.matrix.row(i));
            let r = (*p - y[i]).to_f64_lossy();
            sse += r * r;
        }
        train_rmse.push((sse / n as f64).sqrt());
        trees.push(tree);
    }

    Ok(Ensemble {
        features: set.specs,
        trees,
        base_score: base,
        learning_rate: lr,
        strategy: params.strategy.clone(),
        target: set.target_name,
        train_rmse,
    })
}

/// The encoded matrix the trees of `fit(train, params)` are grown on (ordered
/// target statistics in place of level-wise categoricals).
pub fn training_matrix<T: Scalar>(train: &Table, params: &BoostParams) -> Result<FeatureMatrix<T>, GbdtError> {
    params.validate()?;
    Ok(prepare(train, params)?.matrix)
}

/// Fits a squared-error boosted ensemble on `train` (features + target).
///
/// Every round computes `g = prediction − y`, `h = 1`, optionally
/// subsamples rows with GOSS, grows one tree and adds it with shrinkage.
/// Leaf-wise growth splits categorical columns one level against the rest;
/// level-wise growth replaces them with ordered target statistics under one
/// seeded permutation.
pub fn fit<T: Scalar>(train: &Table, params: &BoostParams) -> Result<Ensemble<T>, GbdtError> {
    params.validate()?;
    let set = prepare(train, params)?;
    boost(set, params)
}
