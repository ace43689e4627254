//! One function per command. Each reads its inputs through the workspace
//! (hash-checked) and records what it writes.

use serde::{Deserialize, Serialize};

use shapcausal::alignment::{align_report, top_features, AlignOptions, AlignmentResult};
use shapcausal::causal::{
    causal_ranking, constant_policy_benefit, dml_effect, dml_effects, fit_cate_tree, fit_policy_tree, pseudo_outcomes, significance_table,
    whatif, write_effects_csv, CateTree, CausalEffect, DmlConfig, DmlFit, PolicyTree, TreatmentSpec, WhatIfResult,
};
use shapcausal::dataset::{clean_table_with, derive_features, load_table, read_header, split, write_table, CellValue, Schema, Table};
use shapcausal::gbdt::{fit, model_from_json, model_to_json, r2_score, rmse, BoostParams, GridSearchResult, ModelFamily};
use shapcausal::shap::{explain_ensemble, global_importance, write_importance_csv, write_shap_csv};
use shapcausal::{Ensemble, ImportanceRanking};

use crate::artifacts::{sha256_hex, Workspace};
use crate::config::{CausalSample, PipelineConfig, Tuning};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    /// sha256 of the raw input file.
    pub source_sha256: String,
    pub n_raw: usize,
    pub n_clean: usize,
    pub n_features: usize,
    pub seed: u64,
    pub ratio: f64,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

pub struct Data {
    pub all: Table,
    pub train: Table,
    pub test: Table,
}

fn model_name(f: ModelFamily) -> String {
    format!("model_{}.json", f.as_str())
}

fn cv_name(f: ModelFamily) -> String {
    format!("cv_{}.json", f.as_str())
}

fn metrics_name(f: ModelFamily) -> String {
    format!("metrics_{}.json", f.as_str())
}

fn importance_name(f: ModelFamily) -> String {
    format!("importance_{}.json", f.as_str())
}

fn whatif_name(f: ModelFamily) -> String {
    format!("whatif_{}.json", f.as_str())
}

pub fn ingest(cfg: &PipelineConfig, ws: &mut Workspace) -> Result<SplitInfo, CliError> {
    let d = &cfg.data;
    let raw_bytes = std::fs::read(&d.path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", d.path.display())))?;
    let header = read_header(&d.path)?;
    for required in [&d.id, &d.target] {
        if !header.contains(required) {
            return Err(CliError::Data(format!("column `{required}` is not in {}", d.path.display())));
        }
    }
    let schema = Schema::from_names(&header, &d.id, &d.target, &d.categorical)?;
    let raw = load_table(&d.path, &schema)?;
    let derived = if d.derive { derive_features(&raw)? } else { raw.clone() };
    let clean = clean_table_with(&derived, &cfg.clean);
    if clean.n_rows() < 2 {
        return Err(CliError::Data("fewer than two rows survive cleaning".into()));
    }

    write_table(&clean, ws.path("clean.csv"))?;
    ws.adopt("clean.csv", &[])?;
    ws.write_json("schema.json", &clean.schema(), &[])?;

    let reloaded = load_clean(ws)?;
    let s = split(&reloaded, cfg.split_ratio, cfg.seed)?;
    let info = SplitInfo {
        source_sha256: sha256_hex(&raw_bytes),
        n_raw: raw.n_rows(),
        n_clean: reloaded.n_rows(),
        n_features: reloaded.feature_names().len(),
        seed: cfg.seed,
        ratio: cfg.split_ratio,
        train_rows: s.train_rows,
        test_rows: s.test_rows,
    };
    ws.write_json("split.json", &info, &["clean.csv", "schema.json"])?;
    Ok(info)
}

fn load_clean(ws: &Workspace) -> Result<Table, CliError> {
    let schema: Schema = ws.read_json("schema.json")?;
    ws.verify("clean.csv")?;
    Ok(load_table(ws.path("clean.csv"), &schema)?)
}

pub fn load_data(ws: &Workspace) -> Result<Data, CliError> {
    let all = load_clean(ws)?;
    let split: SplitInfo = ws.read_json("split.json")?;
    if split.train_rows.iter().chain(&split.test_rows).any(|&r| r >= all.n_rows()) {
        return Err(CliError::Stage("split.json does not fit clean.csv; rerun `ingest`".into()));
    }
    Ok(Data {
        train: all.select_rows(&split.train_rows),
        test: all.select_rows(&split.test_rows),
        all,
    })
}

pub fn tune(cfg: &PipelineConfig, ws: &mut Workspace, family: ModelFamily) -> Result<GridSearchResult, CliError> {
    let data = load_data(ws)?;
    let mut spec = cfg.model.grid.clone();
    spec.seed = cfg.seed;
    let result = shapcausal::gbdt::grid_search::<f64>(&data.train, &spec, family)?;
    ws.write_json(&cv_name(family), &result, &["clean.csv", "split.json"])?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub family: ModelFamily,
    /// `grid` (best cross-validated entry) or `fixed`.
    pub source: Tuning,
    pub params: BoostParams,
    pub n_train: usize,
    pub n_test: usize,
    pub train_r2: f64,
    pub test_r2: f64,
    pub test_rmse: f64,
}

pub fn train(cfg: &PipelineConfig, ws: &mut Workspace, family: ModelFamily) -> Result<TrainMetrics, CliError> {
    let data = load_data(ws)?;
    let mut inputs = vec!["clean.csv".to_string(), "split.json".to_string()];
    let params = match cfg.model.tuning {
        Tuning::Grid => {
            let cv: GridSearchResult = ws.read_json(&cv_name(family))?;
            inputs.push(cv_name(family));
            cv.best().params.clone()
        }
        Tuning::Fixed => {
            let mut p = cfg.model.fixed.get(family).clone();
            p.seed = cfg.seed;
            p
        }
    };
    let model = fit::<f64>(&data.train, &params)?;
    let score = |t: &Table| -> Result<(f64, f64), CliError> {
        let pred = model.predict(t)?;
        let y = t.target()?;
        Ok((r2_score(&pred, &y)?, rmse(&pred, &y)?))
    };
    let (train_r2, _) = score(&data.train)?;
    let (test_r2, test_rmse) = score(&data.test)?;
    let inputs: Vec<&str> = inputs.iter().map(String::as_str).collect();
    ws.write(&model_name(family), model_to_json(&model)?.as_bytes(), &inputs)?;
    let metrics = TrainMetrics {
        family,
        source: cfg.model.tuning,
        params,
        n_train: data.train.n_rows(),
        n_test: data.test.n_rows(),
        train_r2,
        test_r2,
        test_rmse,
    };
    ws.write_json(&metrics_name(family), &metrics, &[&model_name(family)])?;
    Ok(metrics)
}

fn load_model(ws: &Workspace, family: ModelFamily) -> Result<Ensemble, CliError> {
    let bytes = ws.verify(&model_name(family))?;
    let text = String::from_utf8(bytes).map_err(|_| CliError::Stage(format!("{} is not UTF-8", model_name(family))))?;
    Ok(model_from_json(&text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub family: ModelFamily,
    pub n_rows: usize,
    pub base_value: f64,
    /// max over test rows of |base + Σφ − prediction| / |prediction|.
    pub max_relative_residual: f64,
    pub ranking: ImportanceRanking,
}

pub fn explain(ws: &mut Workspace, family: ModelFamily) -> Result<Explanation, CliError> {
    let model = load_model(ws, family)?;
    let data = load_data(ws)?;
    let shap = explain_ensemble(&model, &data.test)?;
    let pred = model.predict(&data.test)?;
    let max_relative_residual = pred
        .iter()
        .enumerate()
        .map(|(i, &p)| (shap.reconstruct(i) - p).abs() / p.abs())
        .fold(0.0, f64::max);
    let ranking = global_importance(&shap)?;

    let model_file = model_name(family);
    let inputs = [model_file.as_str(), "split.json"];
    let shap_csv = format!("shap_{}.csv", family.as_str());
    write_shap_csv(&shap, ws.path(&shap_csv))?;
    ws.adopt(&shap_csv, &inputs)?;
    let imp_csv = format!("importance_{}.csv", family.as_str());
    write_importance_csv(&ranking, ws.path(&imp_csv))?;
    ws.adopt(&imp_csv, &inputs)?;
    let out = Explanation {
        family,
        n_rows: shap.n_rows,
        base_value: shap.base_value,
        max_relative_residual,
        ranking,
    };
    ws.write_json(&importance_name(family), &out, &inputs)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub feature: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub sample: CausalSample,
    pub n_rows: usize,
    pub alpha: f64,
    /// All contrasts by ascending p-value.
    pub effects: Vec<CausalEffect>,
    /// Features with a contrast at p ≤ alpha, in significance order.
    pub ranking: Vec<String>,
    /// Treatments that could not be estimated.
    pub skipped: Vec<Skipped>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heterogeneity {
    pub treatment: String,
    pub effect: CausalEffect,
    pub cate_depth: usize,
    pub policy_depth: usize,
    pub min_leaf: usize,
    pub cate_tree: CateTree,
    pub policy_tree: PolicyTree,
    pub policy_net_benefit: f64,
    pub treat_all_benefit: f64,
    pub treat_none_benefit: f64,
}

pub struct CausalOutput {
    pub significance: Significance,
    pub heterogeneity: Heterogeneity,
}

fn dml_config(cfg: &PipelineConfig) -> DmlConfig {
    let mut nuisance = cfg.causal.nuisance.clone();
    nuisance.seed = cfg.seed;
    DmlConfig {
        folds: cfg.causal.folds,
        seed: cfg.seed,
        nuisance,
        min_level_count: cfg.causal.min_level_count,
    }
}

pub fn causal(cfg: &PipelineConfig, ws: &mut Workspace) -> Result<CausalOutput, CliError> {
    let data = load_data(ws)?;
    let c = &cfg.causal;
    let table = match c.sample {
        CausalSample::All => data.all,
        CausalSample::Train => data.train,
    };
    let outcome = cfg.data.target.as_str();
    let names: Vec<String> = if c.treatments.is_empty() {
        table.feature_names()
    } else {
        c.treatments.clone()
    };
    for n in names.iter().chain([&c.focus]) {
        if table
            .column(n)
            .is_none_or(|col| col.schema.role != shapcausal::dataset::ColumnRole::Feature)
        {
            return Err(CliError::Config(format!("treatment `{n}` is not a feature of the cleaned data")));
        }
    }
    let dml = dml_config(cfg);

    let mut skipped = Vec::new();
    let mut specs = Vec::new();
    for n in &names {
        match TreatmentSpec::infer(&table, n) {
            Ok(s) => specs.push(s),
            Err(e) => skipped.push(Skipped {
                feature: n.clone(),
                reason: e.to_string(),
            }),
        }
    }
    let mut fits: Vec<DmlFit> = Vec::new();
    for (spec, r) in specs.iter().zip(dml_effects(&table, &specs, outcome, &dml)) {
        match r {
            Ok(f) => fits.push(f),
            Err(e) => skipped.push(Skipped {
                feature: spec.feature.clone(),
                reason: e.to_string(),
            }),
        }
    }
    skipped.sort_by(|a, b| a.feature.cmp(&b.feature));
    let effects: Vec<CausalEffect> = fits.iter().flat_map(|f| f.effects.iter().cloned()).collect();
    let ordered = significance_table(&effects);
    let significance = Significance {
        sample: c.sample,
        n_rows: table.n_rows(),
        alpha: c.alpha,
        ranking: causal_ranking(&ordered, c.alpha),
        effects: ordered,
        skipped,
    };

    let focus_fit = match fits.iter().find(|f| f.treatment.feature == c.focus) {
        Some(f) => f.clone(),
        None => dml_effect(&table, &TreatmentSpec::infer(&table, &c.focus)?, outcome, &dml)?,
    };
    let psi = pseudo_outcomes(&focus_fit)?;
    let x = table.select_rows(&focus_fit.rows).drop_columns(&[c.focus.as_str(), outcome]);
    let cate_tree = fit_cate_tree(&psi, &x, c.cate_depth, c.min_leaf)?;
    let policy_tree = fit_policy_tree(&psi, &x, c.cost, c.policy_depth, c.min_leaf)?;
    let heterogeneity = Heterogeneity {
        treatment: c.focus.clone(),
        effect: focus_fit.effects[0].clone(),
        cate_depth: c.cate_depth,
        policy_depth: c.policy_depth,
        min_leaf: c.min_leaf,
        policy_net_benefit: policy_tree.net_benefit(&psi, &x)?,
        treat_all_benefit: constant_policy_benefit(&psi, c.cost, true),
        treat_none_benefit: constant_policy_benefit(&psi, c.cost, false),
        cate_tree,
        policy_tree,
    };

    let inputs = ["clean.csv", "split.json"];
    write_effects_csv(&significance.effects, ws.path("effects.csv"))?;
    ws.adopt("effects.csv", &inputs)?;
    ws.write_json("significance.json", &significance, &inputs)?;
    ws.write_json("heterogeneity.json", &heterogeneity, &inputs)?;
    ws.write("cate_tree.txt", heterogeneity.cate_tree.render().as_bytes(), &inputs)?;
    ws.write("policy_tree.txt", heterogeneity.policy_tree.render().as_bytes(), &inputs)?;
    Ok(CausalOutput {
        significance,
        heterogeneity,
    })
}

pub fn run_whatif(cfg: &PipelineConfig, ws: &mut Workspace, family: ModelFamily) -> Result<WhatIfResult, CliError> {
    let model = load_model(ws, family)?;
    let data = load_data(ws)?;
    let w = &cfg.whatif;
    let col = data
        .test
        .column(&w.feature)
        .ok_or_else(|| CliError::Config(format!("what-if feature `{}` is not in the cleaned data", w.feature)))?;
    let value = CellValue::parse(&w.value, col.schema.kind).map_err(|e| CliError::Config(format!("what-if value: {e}")))?;
    let result = whatif(&model, &data.test, &w.feature, &value)?;
    ws.write_json(&whatif_name(family), &result, &[&model_name(family), "split.json"])?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub family: ModelFamily,
    pub k: Option<usize>,
    pub union: bool,
    pub result: AlignmentResult<f64>,
}

pub fn align(cfg: &PipelineConfig, ws: &mut Workspace) -> Result<Vec<Alignment>, CliError> {
    let families = cfg.families();
    let sig: Significance = ws.read_json("significance.json")?;
    let explanations = families
        .iter()
        .map(|&f| ws.read_json::<Explanation>(&importance_name(f)))
        .collect::<Result<Vec<_>, _>>()?;
    let opts = AlignOptions {
        k: cfg.shap.top_k,
        alpha: sig.alpha,
    };
    let mut out = Vec::new();
    for (i, e) in explanations.iter().enumerate() {
        let others: Vec<String> = explanations
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, o)| top_features(&o.ranking, opts.k))
            .collect();
        let union_with = (cfg.align.union && !others.is_empty()).then_some(others.as_slice());
        out.push(Alignment {
            family: e.family,
            k: opts.k,
            union: union_with.is_some(),
            result: align_report(&e.ranking, &sig.effects, &opts, union_with)?,
        });
    }
    let names: Vec<String> = families.iter().map(|&f| importance_name(f)).collect();
    let mut inputs: Vec<&str> = names.iter().map(String::as_str).collect();
    inputs.push("significance.json");
    ws.write_json("alignment.json", &out, &inputs)?;
    Ok(out)
}
