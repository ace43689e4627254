use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use shapcausal::causal::WhatIfResult;
use shapcausal::gbdt::{CvRecord, ModelFamily};

use crate::config::PipelineConfig;
use crate::stages::{Alignment, Heterogeneity, Significance, SplitInfo, TrainMetrics};

/// Everything `all` produces, minus wall-clock timings (kept in
/// `timings.json` so two identical runs give identical bytes here).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub data: DataSummary,
    pub models: Vec<ModelReport>,
    pub causal: Significance,
    pub heterogeneity: Heterogeneity,
    pub checks: Checks,
    pub reference: Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub source_sha256: String,
    pub n_raw: usize,
    pub n_clean: usize,
    pub n_features: usize,
    pub n_train: usize,
    pub n_test: usize,
}

impl From<&SplitInfo> for DataSummary {
    fn from(s: &SplitInfo) -> Self {
        Self {
            source_sha256: s.source_sha256.clone(),
            n_raw: s.n_raw,
            n_clean: s.n_clean,
            n_features: s.n_features,
            n_train: s.train_rows.len(),
            n_test: s.test_rows.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub family: ModelFamily,
    /// Empty for fixed hyperparameters.
    pub cv_table: Vec<CvRecord>,
    pub cv_best_index: Option<usize>,
    pub metrics: TrainMetrics,
    pub shap_base_value: f64,
    pub shap_max_relative_residual: f64,
    pub importance: Vec<(String, f64)>,
    pub whatif: WhatIfResult,
    pub alignment: Alignment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    pub significance_sorted: bool,
    /// Per family: rho lies in [−1, 1].
    pub rho_in_range: Vec<(ModelFamily, bool)>,
    /// Sign of the what-if mean shift agrees with the focus ATE, when the
    /// what-if feature is the focus treatment.
    pub whatif_agrees_with_ate: Vec<(ModelFamily, Option<bool>)>,
}

/// Published figures for the same analysis, for comparison only; the
/// learners and estimators differ, so they are not expected to match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub note: String,
    pub test_r2: Vec<(ModelFamily, f64)>,
    pub rho: Vec<(ModelFamily, f64)>,
    pub has_porch_whatif_baseline_mean: f64,
    pub has_porch_whatif_counterfactual_mean: f64,
    /// (feature, contrast, p-value) of the most significant effects.
    pub top_effects: Vec<(String, String, f64)>,
}

impl Default for Reference {
    fn default() -> Self {
        let e = |f: &str, c: &str, p: f64| (f.to_string(), c.to_string(), p);
        Self {
            note: "published values for the same analysis with other learners; context, not targets".into(),
            test_r2: vec![(ModelFamily::LeafWise, 0.8648), (ModelFamily::LevelWise, 0.8991)],
            rho: vec![(ModelFamily::LeafWise, 0.35), (ModelFamily::LevelWise, 0.48)],
            has_porch_whatif_baseline_mean: 146_936.89,
            has_porch_whatif_counterfactual_mean: 149_649.98,
            top_effects: vec![
                e("BldgType", "Twnhs v 1Fam", 0.0),
                e("BldgType", "Duplex v 1Fam", 1.737315e-87),
                e("OverallQual", "num", 2.164378e-08),
                e("GarageFinish", "RFn v Fin", 2.470622e-04),
                e("BsmtExposure", "Gd v Av", 4.727197e-04),
                e("HasFireplace", "1 v 0", 6.727178e-04),
                e("GarageFinish", "Unf v Fin", 8.408833e-04),
                e("KitchenAbvGr", "num", 3.082170e-03),
                e("GarageCars", "num", 4.782600e-03),
            ],
        }
    }
}

impl Checks {
    pub fn compute(models: &[ModelReport], causal: &Significance, het: &Heterogeneity, whatif_feature: &str) -> Self {
        let significance_sorted = causal.effects.windows(2).all(|w| w[0].p_value <= w[1].p_value);
        let rho_in_range = models
            .iter()
            .map(|m| (m.family, (-1.0..=1.0).contains(&m.alignment.result.rho)))
            .collect();
        let whatif_agrees_with_ate = models
            .iter()
            .map(|m| {
                let agrees = (het.treatment == whatif_feature).then(|| {
                    let shift = m.whatif.counterfactual_mean - m.whatif.baseline_mean;
                    shift.signum() == het.effect.ate.signum()
                });
                (m.family, agrees)
            })
            .collect();
        Self {
            significance_sorted,
            rho_in_range,
            whatif_agrees_with_ate,
        }
    }
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let d = &self.data;
        let _ = writeln!(
            s,
            "data: {} raw rows, {} after cleaning, {} features",
            d.n_raw, d.n_clean, d.n_features
        );
        let _ = writeln!(s, "split: {} train / {} test (seed {})", d.n_train, d.n_test, self.config.seed);
        for m in &self.models {
            let f = m.family.as_str();
            let _ = writeln!(s, "\n== {f} ==");
            if let Some(b) = m.cv_best_index {
                let _ = writeln!(
                    s,
                    "grid: {} configs, best #{b} mean CV R2 {:.4}",
                    m.cv_table.len(),
                    m.cv_table[b].mean_r2
                );
            }
            let _ = writeln!(
                s,
                "test R2 {:.4}  RMSE {:.1}  (train R2 {:.4})",
                m.metrics.test_r2, m.metrics.test_rmse, m.metrics.train_r2
            );
            let _ = writeln!(
                s,
                "SHAP base {:.2}, max relative residual {:.2e}",
                m.shap_base_value, m.shap_max_relative_residual
            );
            let _ = writeln!(s, "top features by mean |SHAP|:");
            for (i, (name, v)) in m.importance.iter().take(10).enumerate() {
                let _ = writeln!(s, "  {:>2}. {name:<16} {v:.1}", i + 1);
            }
            let w = &m.whatif;
            let _ = writeln!(
                s,
                "what-if {} := {}: {:.2} -> {:.2} ({} rows changed)",
                w.feature, w.value, w.baseline_mean, w.counterfactual_mean, w.n_affected
            );
            let a = &m.alignment.result;
            let _ = writeln!(
                s,
                "alignment: |C| = {}, |F_m| = {}, n = {}, rho = {:.4}",
                a.c.len(),
                a.f_m.len(),
                a.n,
                a.rho
            );
            for (i, name) in a.common.iter().enumerate() {
                let _ = writeln!(s, "  {name:<16} r_c {:>2}  r_f {:>2}  d {:>3}", a.r_c[i], a.r_f[i], a.d[i]);
            }
        }
        let c = &self.causal;
        let _ = writeln!(s, "\n== causal effects ({} rows, alpha {}) ==", c.n_rows, c.alpha);
        for e in c.effects.iter().filter(|e| e.p_value <= c.alpha) {
            let _ = writeln!(
                s,
                "  {:<16} {:<22} ate {:>12.2}  se {:>10.2}  p {:.3e}",
                e.feature, e.contrast, e.ate, e.stderr, e.p_value
            );
        }
        let _ = writeln!(
            s,
            "  ({} contrasts above alpha, {} treatments skipped)",
            c.effects.iter().filter(|e| e.p_value > c.alpha).count(),
            c.skipped.len()
        );
        let h = &self.heterogeneity;
        let _ = writeln!(s, "\n== {} ==", h.treatment);
        let _ = writeln!(s, "ate {:.2} (se {:.2}, p {:.3e})", h.effect.ate, h.effect.stderr, h.effect.p_value);
        let _ = writeln!(s, "effect heterogeneity tree:\n{}", h.cate_tree.render());
        let _ = writeln!(s, "policy tree (cost {}):\n{}", h.policy_tree.cost, h.policy_tree.render());
        let _ = writeln!(
            s,
            "net benefit: policy {:.1}, treat all {:.1}, treat none {:.1}",
            h.policy_net_benefit, h.treat_all_benefit, h.treat_none_benefit
        );
        let k = &self.checks;
        let _ = writeln!(s, "\n== checks ==");
        let _ = writeln!(s, "significance table sorted: {}", k.significance_sorted);
        for (f, ok) in &k.rho_in_range {
            let _ = writeln!(s, "{} rho in [-1, 1]: {ok}", f.as_str());
        }
        for (f, ok) in &k.whatif_agrees_with_ate {
            let v = ok.map_or("n/a".to_string(), |b| b.to_string());
            let _ = writeln!(s, "{} what-if direction agrees with ATE: {v}", f.as_str());
        }
        let r = &self.reference;
        let _ = writeln!(s, "\n== reference ({}) ==", r.note);
        for ((f, r2), (_, rho)) in r.test_r2.iter().zip(&r.rho) {
            let _ = writeln!(s, "{}: test R2 {r2}, rho {rho}", f.as_str());
        }
        let _ = writeln!(
            s,
            "HasPorch what-if: {} -> {}",
            r.has_porch_whatif_baseline_mean, r.has_porch_whatif_counterfactual_mean
        );
        s
    }
}
