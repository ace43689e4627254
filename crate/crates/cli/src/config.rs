use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shapcausal::dataset::{ames_categorical_columns, CleanConfig};
use shapcausal::gbdt::{BoostParams, GridSearchSpec, GrowthStrategy, ModelFamily};

use crate::error::CliError;

/// Everything a run depends on besides the input bytes. Constants the method
/// leaves open (seeds, tree counts, cost, k, ...) all live here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Used for the split, CV folds, ordered statistics and causal folds.
    pub seed: u64,
    pub data: DataConfig,
    pub clean: CleanConfig,
    pub split_ratio: f64,
    pub model: ModelConfig,
    pub shap: ShapConfig,
    pub causal: CausalConfig,
    pub whatif: WhatIfConfig,
    pub align: AlignConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub path: PathBuf,
    pub id: String,
    pub target: String,
    /// Text-valued input columns; everything else is read as numeric.
    pub categorical: Vec<String>,
    /// Append the age and amenity-flag columns before cleaning.
    pub derive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FamilyChoice {
    Leafwise,
    Levelwise,
    Both,
}

impl FamilyChoice {
    pub fn families(self) -> Vec<ModelFamily> {
        match self {
            Self::Leafwise => vec![ModelFamily::LeafWise],
            Self::Levelwise => vec![ModelFamily::LevelWise],
            Self::Both => vec![ModelFamily::LeafWise, ModelFamily::LevelWise],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tuning {
    /// Cross-validated grid search (`tune`), best entry refit by `train`.
    Grid,
    /// Hyperparameters taken from `model.fixed`.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub family: FamilyChoice,
    pub tuning: Tuning,
    /// Its `seed` is overwritten by the top-level seed.
    pub grid: GridSearchSpec,
    pub fixed: FixedParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedParams {
    pub leafwise: BoostParams,
    pub levelwise: BoostParams,
}

impl FixedParams {
    pub fn get(&self, family: ModelFamily) -> &BoostParams {
        match family {
            ModelFamily::LeafWise => &self.leafwise,
            ModelFamily::LevelWise => &self.levelwise,
        }
    }
}

impl Default for FixedParams {
    fn default() -> Self {
        let leaf = GrowthStrategy::LeafWise {
            num_leaves: 8,
            min_child_samples: 20,
            max_depth: 3,
        };
        let level = GrowthStrategy::LevelWise {
            depth: 5,
            l2_leaf_reg: 5.0,
            border_count: 128,
        };
        Self {
            leafwise: BoostParams::new(leaf, 0.05, 500),
            levelwise: BoostParams::new(level, 0.05, 500),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapConfig {
    /// Length of the importance list; absent keeps every nonzero feature.
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CausalSample {
    /// The whole cleaned table.
    All,
    /// The training split only.
    Train,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CausalConfig {
    pub sample: CausalSample,
    pub folds: usize,
    /// Empty means every feature.
    pub treatments: Vec<String>,
    pub nuisance: BoostParams,
    pub min_level_count: usize,
    pub alpha: f64,
    /// Treatment whose heterogeneity and policy trees are fitted.
    pub focus: String,
    pub cost: f64,
    pub cate_depth: usize,
    pub policy_depth: usize,
    pub min_leaf: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WhatIfConfig {
    pub feature: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlignConfig {
    /// Extend each model's list with the other model's top features.
    pub union: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            data: DataConfig::default(),
            clean: CleanConfig::default(),
            split_ratio: 0.8,
            model: ModelConfig::default(),
            shap: ShapConfig::default(),
            causal: CausalConfig::default(),
            whatif: WhatIfConfig::default(),
            align: AlignConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("data/ames.csv"),
            id: "Id".into(),
            target: "SalePrice".into(),
            categorical: ames_categorical_columns(),
            derive: true,
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            family: FamilyChoice::Both,
            tuning: Tuning::Grid,
            grid: GridSearchSpec::default(),
            fixed: FixedParams::default(),
        }
    }
}

impl Default for ShapConfig {
    fn default() -> Self {
        Self { top_k: None }
    }
}

impl Default for CausalConfig {
    fn default() -> Self {
        let d = shapcausal::causal::DmlConfig::default();
        Self {
            sample: CausalSample::All,
            folds: d.folds,
            treatments: Vec::new(),
            nuisance: d.nuisance,
            min_level_count: d.min_level_count,
            alpha: 0.05,
            focus: "HasPorch".into(),
            cost: 0.0,
            cate_depth: 2,
            policy_depth: 2,
            min_leaf: 20,
        }
    }
}

impl Default for WhatIfConfig {
    fn default() -> Self {
        Self {
            feature: "HasPorch".into(),
            value: "1".into(),
        }
    }
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self { union: false }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub model: Option<FamilyChoice>,
    pub top_k: Option<usize>,
    pub treatment: Option<String>,
    pub value: Option<String>,
    pub cost: Option<f64>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    /// Reads `path` (or the defaults), applies `ov`, and validates.
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        cfg.apply(ov);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, ov: &Overrides) {
        if let Some(p) = &ov.data {
            self.data.path = p.clone();
        }
        if let Some(p) = &ov.out {
            self.output.dir = p.clone();
        }
        if let Some(s) = ov.seed {
            self.seed = s;
        }
        if let Some(m) = ov.model {
            self.model.family = m;
        }
        if let Some(k) = ov.top_k {
            self.shap.top_k = Some(k);
        }
        if let Some(t) = &ov.treatment {
            self.whatif.feature = t.clone();
            self.causal.focus = t.clone();
        }
        if let Some(v) = &ov.value {
            self.whatif.value = v.clone();
        }
        if let Some(c) = ov.cost {
            self.causal.cost = c;
        }
        self.model.grid.seed = self.seed;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !self.data.path.is_file() {
            return bad(format!("data file {} does not exist", self.data.path.display()));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!("split_ratio {} is outside (0, 1)", self.split_ratio));
        }
        match self.model.tuning {
            Tuning::Grid => {
                for f in self.model.family.families() {
                    self.model
                        .grid
                        .configs(f)
                        .map_err(|e| CliError::Config(format!("model.grid: {e}")))?;
                }
            }
            Tuning::Fixed => {
                for f in self.model.family.families() {
                    let p = self.model.fixed.get(f);
                    if p.strategy.is_leaf_wise() != (f == ModelFamily::LeafWise) {
                        return bad(format!("model.fixed.{} has the wrong growth strategy", f.as_str()));
                    }
                    p.validate()
                        .map_err(|e| CliError::Config(format!("model.fixed.{}: {e}", f.as_str())))?;
                }
            }
        }
        if self.shap.top_k.is_some_and(|k| k < 2) {
            return bad("shap.top_k must be at least 2".into());
        }
        let c = &self.causal;
        if c.folds < 2 {
            return bad("causal.folds must be at least 2".into());
        }
        c.nuisance
            .validate()
            .map_err(|e| CliError::Config(format!("causal.nuisance: {e}")))?;
        if !(c.alpha > 0.0 && c.alpha < 1.0) {
            return bad(format!("causal.alpha {} is outside (0, 1)", c.alpha));
        }
        if !c.cost.is_finite() {
            return bad("causal.cost must be finite".into());
        }
        if c.cate_depth == 0 || c.policy_depth == 0 || c.min_leaf == 0 {
            return bad("causal tree depths and min_leaf must be at least 1".into());
        }
        Ok(())
    }

    pub fn families(&self) -> Vec<ModelFamily> {
        self.model.family.families()
    }
}
