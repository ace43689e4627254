//! Exhaustive grid search with shuffled k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Table;
use crate::Scalar;

use super::boost::{fit, BoostParams};
use super::goss::GossParams;
use super::grow::GrowthStrategy;
use super::metrics::r2_score;
use super::GbdtError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    LeafWise,
    LevelWise,
}

impl ModelFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LeafWise => "leafwise",
            Self::LevelWise => "levelwise",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchSpec {
    pub learning_rates: Vec<f64>,
    /// `max_depth` for leaf-wise (with `num_leaves = 2^depth`), `depth` for level-wise.
    pub depths: Vec<usize>,
    pub min_child_samples: Vec<usize>,
    pub l2_leaf_regs: Vec<f64>,
    pub border_counts: Vec<usize>,
    pub folds: usize,
    pub n_trees: usize,
    pub seed: u64,
    #[serde(default)]
    pub goss: Option<GossParams>,
}

impl Default for GridSearchSpec {
    fn default() -> Self {
        Self {
            learning_rates: vec![0.1, 0.05, 0.01],
            depths: vec![3, 5, 10],
            min_child_samples: vec![20, 30, 40],
            l2_leaf_regs: vec![1.0, 5.0, 10.0],
            border_counts: vec![32, 128, 255],
            folds: 5,
            n_trees: 500,
            seed: 0,
            goss: None,
        }
    }
}

impl GridSearchSpec {
    /// Cartesian product in grid order: learning rate, depth, then the
    /// family-specific grids in declaration order.
    pub fn configs(&self, family: ModelFamily) -> Result<Vec<BoostParams>, GbdtError> {
        let family_grids_empty = match family {
            ModelFamily::LeafWise => self.min_child_samples.is_empty(),
            ModelFamily::LevelWise => self.l2_leaf_regs.is_empty() || self.border_counts.is_empty(),
        };
        if self.learning_rates.is_empty() || self.depths.is_empty() || family_grids_empty {
            return Err(GbdtError::EmptyGrid);
        }
        if self.folds < 2 {
            return Err(GbdtError::Invalid("grid search needs at least 2 folds".into()));
        }
        let mut out = Vec::new();
        for &lr in &self.learning_rates {
            for &depth in &self.depths {
                let strategies: Vec<GrowthStrategy> = match family {
                    ModelFamily::LeafWise => {
                        if depth >= usize::BITS as usize - 1 {
                            return Err(GbdtError::Invalid(format!("depth {depth} is too large")));
                        }
                        self.min_child_samples
                            .iter()
                            .map(|&mcs| GrowthStrategy::LeafWise {
                                num_leaves: 1 << depth,
                                min_child_samples: mcs,
                                max_depth: depth,
                            })
                            .collect()
                    }
                    ModelFamily::LevelWise => self
                        .l2_leaf_regs
                        .iter()
                        .flat_map(|&l2| {
                            self.border_counts.iter().map(move |&bc| GrowthStrategy::LevelWise {
                                depth,
                                l2_leaf_reg: l2,
                                border_count: bc,
                            })
                        })
                        .collect(),
                };
                for strategy in strategies {
                    let mut p = BoostParams::new(strategy, lr, self.n_trees).with_seed(self.seed);
                    p.goss = self.goss;
                    p.validate()?;
                    out.push(p);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRecord {
    pub params: BoostParams,
    pub fold_r2: Vec<f64>,
    pub mean_r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub family: ModelFamily,
    pub best_index: usize,
    pub table: Vec<CvRecord>,
}

impl GridSearchResult {
    pub fn best(&self) -> &CvRecord {
        &self.table[self.best_index]
    }
}

/// Validation row sets of a shuffled k-fold partition: rows are permuted
/// with `seed`, then cut into `k` contiguous chunks, the first `n mod k`
/// one row longer. Each returned set is sorted.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, GbdtError> {
    if k < 2 || k > n {
        return Err(GbdtError::Invalid(format!("cannot cut {n} rows into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = n / k + usize::from(f < n % k);
        let mut fold = order[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

/// Per-fold validation R² of `params` on `train`.
pub fn cv_score<T: Scalar>(train: &Table, params: &BoostParams, folds: &[Vec<usize>]) -> Result<Vec<f64>, GbdtError> {
    (0..folds.len()).map(|f| fold_score::<T>(train, params, folds, f)).collect()
}

fn fold_score<T: Scalar>(train: &Table, params: &BoostParams, folds: &[Vec<usize>], f: usize) -> Result<f64, GbdtError> {
    let mut held_out = vec![false; train.n_rows()];
    for &r in &folds[f] {
        held_out[r] = true;
    }
    let fit_rows: Vec<usize> = (0..train.n_rows()).filter(|&r| !held_out[r]).collect();
    let model = fit::<T>(&train.select_rows(&fit_rows), params)?;
    let valid = train.select_rows(&folds[f]);
    let pred = model.predict(&valid)?;
    let actual: Vec<T> = valid.target()?.into_iter().map(T::of).collect();
    r2_score(&pred, &actual)
}

/// Evaluates every configuration of `family` by k-fold mean R² and returns
/// the full table; the best entry is the first one with the maximal mean.
/// (configuration, fold) fits run in parallel; results do not depend on
/// the thread count.
pub fn grid_search<T: Scalar>(train: &Table, spec: &GridSearchSpec, family: ModelFamily) -> Result<GridSearchResult, GbdtError> {
    let configs = spec.configs(family)?;
    let folds = kfold_indices(train.n_rows(), spec.folds, spec.seed)?;
    let k = folds.len();
    let scores: Vec<f64> = (0..configs.len() * k)
        .into_par_iter()
        .map(|job| fold_score::<T>(train, &configs[job / k], &folds, job % k))
        .collect::<Result<_, _>>()?;
    let mut table: Vec<CvRecord> = Vec::with_capacity(configs.len());
    let mut best_index = 0;
    for (i, (params, fold_r2)) in configs.into_iter().zip(scores.chunks(k)).enumerate() {
        let mean_r2 = fold_r2.iter().sum::<f64>() / k as f64;
        if i > 0 && mean_r2 > table[best_index].mean_r2 {
            best_index = i;
        }
        table.push(CvRecord {
            params,
            fold_r2: fold_r2.to_vec(),
            mean_r2,
        });
    }
    Ok(GridSearchResult { family, best_index, table })
}
