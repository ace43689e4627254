//! End-to-end acceptance run. Prints one `PASS`/`FAIL` line per criterion
//! (1–10) and fails if any correctness check fails.
//!
//! Runtime budgets are reported on the same line. They assume a multi-core
//! laptop; a miss is printed as `FAIL` but does not fail the test, since it
//! measures the host rather than the code.
//!
//! The whole run takes tens of minutes on a single core.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shapcausal::alignment::spearman_rho;
use shapcausal::causal::synthetic::{confounded_linear, two_regime};
use shapcausal::causal::{
    constant_policy_benefit, dml_effect, fit_cate_tree, fit_policy_tree, pseudo_outcomes, DmlConfig, SplitTest, TreatmentSpec,
};
use shapcausal::dataset::{ames_categorical_columns, clean_table, derive_features, load_table, read_header, split, Schema, SplitPair};
use shapcausal::gbdt::{
    fit, grid_search, ordered_target_encode, r2_score, training_matrix, BoostParams, GridSearchSpec, GrowthStrategy, ModelFamily, NodeKind,
    SplitRule,
};
use shapcausal::shap::{brute_force_shapley, explain_ensemble, tree_shap_single};
use shapcausal::{Ensemble, Tree};

struct Outcome {
    correct: bool,
    detail: String,
    elapsed: Duration,
    budget: Option<Duration>,
}

impl Outcome {
    fn within_budget(&self) -> bool {
        self.budget.is_none_or(|b| self.elapsed <= b)
    }

    fn line(&self, id: usize) -> String {
        let status = if self.correct && self.within_budget() { "PASS" } else { "FAIL" };
        let time = match self.budget {
            Some(b) => format!("{:.1}s / budget {:.0}s", self.elapsed.as_secs_f64(), b.as_secs_f64()),
            None => format!("{:.1}s", self.elapsed.as_secs_f64()),
        };
        format!("criterion {id:>2}: {status}  {}  [{time}]", self.detail)
    }
}

fn timed(budget: Option<Duration>, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t = Instant::now();
    let (correct, detail) = f();
    Outcome {
        correct,
        detail,
        elapsed: t.elapsed(),
        budget,
    }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn ames_split() -> SplitPair {
    let path = repo_root().join("data/ames.csv");
    let header = read_header(&path).unwrap();
    let schema = Schema::from_names(&header, "Id", "SalePrice", &ames_categorical_columns()).unwrap();
    let table = clean_table(&derive_features(&load_table(&path, &schema).unwrap()).unwrap());
    split(&table, 0.8, 42).unwrap()
}

// ---------------------------------------------------------------- 1

fn random_tree(rng: &mut ChaCha8Rng, n_features: usize, max_leaves: usize) -> Tree {
    use shapcausal::gbdt::Node;
    let leaves = rng.random_range(1..=max_leaves);
    let mut arena: Vec<Node<f64>> = vec![Node::leaf(0.0, 0.0)];
    let mut open = vec![0usize];
    while open.len() < leaves {
        let pick = open.swap_remove(rng.random_range(0..open.len()));
        let l = arena.len();
        arena.push(Node::leaf(0.0, 0.0));
        arena.push(Node::leaf(0.0, 0.0));
        arena[pick].kind = NodeKind::Split {
            feature: rng.random_range(0..n_features),
            rule: SplitRule::Threshold(rng.random_range(-1.0..1.0)),
            left: l,
            right: l + 1,
            gain: 0.0,
        };
        open.push(l);
        open.push(l + 1);
    }
    for &leaf in &open {
        arena[leaf] = Node::leaf(rng.random_range(-10.0..10.0), rng.random_range(1..100) as f64);
    }
    fn fill(arena: &mut Vec<Node<f64>>, id: usize) -> f64 {
        if let NodeKind::Split { left, right, .. } = arena[id].kind {
            arena[id].cover = fill(arena, left) + fill(arena, right);
        }
        arena[id].cover
    }
    fill(&mut arena, 0);
    Tree::from_arena(arena, 0)
}

fn shap_exactness() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let trees = 250;
    let mut worst: f64 = 0.0;
    for _ in 0..trees {
        let m = rng.random_range(1..=5);
        let tree = random_tree(&mut rng, m, 16);
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.2..1.2)).collect();
        let fast = tree_shap_single(&tree, &x).unwrap();
        let brute = brute_force_shapley(&tree, &x).unwrap();
        for j in 0..m {
            worst = worst.max((fast.phi[j] - brute[j]).abs());
        }
    }
    (
        worst <= 1e-9,
        format!("{trees} random trees, max |tree shap - brute force| = {worst:.2e} (tol 1e-9)"),
    )
}

// ---------------------------------------------------------------- 2

fn shap_additivity(models: &[(ModelFamily, Ensemble)], data: &SplitPair) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (family, model) in models {
        let shap = explain_ensemble(model, &data.test).unwrap();
        let pred = model.predict(&data.test).unwrap();
        let worst = pred
            .iter()
            .enumerate()
            .map(|(i, &p)| (shap.reconstruct(i) - p).abs() / p.abs())
            .fold(0.0, f64::max);
        ok &= worst < 1e-6;
        parts.push(format!("{} max rel residual {worst:.2e}", family.as_str()));
    }
    (ok, format!("{} (tol 1e-6, {} test rows)", parts.join(", "), data.test.n_rows()))
}

// ---------------------------------------------------------------- 3

fn predictive_floor(data: &SplitPair) -> ((bool, String), Vec<(ModelFamily, Ensemble, BoostParams)>) {
    let spec = GridSearchSpec {
        seed: 42,
        ..GridSearchSpec::default()
    };
    let actual = data.test.target().unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    let mut models = Vec::new();
    for family in [ModelFamily::LeafWise, ModelFamily::LevelWise] {
        let grid = grid_search::<f64>(&data.train, &spec, family).unwrap();
        let params = grid.best().params.clone();
        let model: Ensemble = fit(&data.train, &params).unwrap();
        let r2 = r2_score(&model.predict(&data.test).unwrap(), &actual).unwrap();
        ok &= r2 >= 0.80;
        parts.push(format!(
            "{} {} configs, CV {:.4}, test R2 {r2:.4}",
            family.as_str(),
            grid.table.len(),
            grid.best().mean_r2
        ));
        models.push((family, model, params));
    }
    ((ok, format!("{} (floor 0.80)", parts.join("; "))), models)
}

// ---------------------------------------------------------------- 4

fn dml_recovery() -> (bool, String) {
    let runs = 100;
    let mut covered = 0;
    let mut null_ok = 0;
    for seed in 0..runs {
        let cfg = DmlConfig {
            seed,
            ..DmlConfig::default()
        };
        let data = confounded_linear(2000, 5.0, 1000 + seed);
        let s = TreatmentSpec::infer(&data, "treatment").unwrap();
        let e = &dml_effect(&data, &s, "outcome", &cfg).unwrap().effects[0];
        covered += usize::from((e.ate - 5.0).abs() <= 3.0 * e.stderr);

        let data = confounded_linear(2000, 0.0, 5000 + seed);
        let e = &dml_effect(&data, &s, "outcome", &cfg).unwrap().effects[0];
        null_ok += usize::from(e.p_value > 0.05);
    }
    (
        covered >= 95 && null_ok >= 90,
        format!("theta=5 inside ate +- 3se in {covered}/{runs} (need 95); null p > 0.05 in {null_ok}/{runs} (need 90)"),
    )
}

// ---------------------------------------------------------------- 5 and 6

fn cate_and_policy() -> ((bool, String), (bool, String)) {
    let runs = 100;
    let costs = [0.0, 3.0, 4.0, 7.0];
    let mut recovered = 0;
    let mut dominated = 0;
    let mut policy_checks = 0;
    for seed in 0..runs {
        let data = two_regime(5000, 2.0, 6.0, 7000 + seed);
        let s = TreatmentSpec::infer(&data, "treated").unwrap();
        let fit = dml_effect(
            &data,
            &s,
            "outcome",
            &DmlConfig {
                seed,
                ..DmlConfig::default()
            },
        )
        .unwrap();
        let psi = pseudo_outcomes(&fit).unwrap();
        let x = data.select_rows(&fit.rows).drop_columns(&["treated", "outcome"]);

        let tree = fit_cate_tree(&psi, &x, 1, 100).unwrap();
        if let Some(split) = &tree.nodes[0].split {
            let (l, r) = (tree.nodes[split.left].mean, tree.nodes[split.right].mean);
            let on_age = split.feature == "age" && matches!(split.test, SplitTest::Threshold(_));
            if on_age && (l - 2.0).abs() <= 0.2 && (r - 6.0).abs() <= 0.6 {
                recovered += 1;
            }
        }
        for cost in costs {
            let p = fit_policy_tree(&psi, &x, cost, 2, 100).unwrap();
            let net = p.net_benefit(&psi, &x).unwrap();
            let best = constant_policy_benefit(&psi, cost, true).max(constant_policy_benefit(&psi, cost, false));
            policy_checks += 1;
            dominated += usize::from(net >= best);
        }
    }
    (
        (
            recovered >= 90,
            format!("depth-1 tree split on `age` with leaves within 10% of 2 / 6 in {recovered}/{runs} (need 90)"),
        ),
        (
            dominated == policy_checks,
            format!("policy net >= max(treat all, treat none) in {dominated}/{policy_checks} (instances x costs {costs:?})"),
        ),
    )
}

// ---------------------------------------------------------------- 7

/// Locates every feature in both lists by scanning, then applies the formula.
fn naive_rho(r_c: &[usize], r_f: &[usize]) -> f64 {
    let n = r_c.len();
    let list = |r: &[usize]| -> Vec<usize> { (1..=n).map(|pos| r.iter().position(|&v| v == pos).unwrap()).collect() };
    let (c, f) = (list(r_c), list(r_f));
    let mut sum = 0u64;
    for feature in 0..n {
        let d = c.iter().position(|&v| v == feature).unwrap() as i64 - f.iter().position(|&v| v == feature).unwrap() as i64;
        sum += (d * d) as u64;
    }
    1.0 - (6 * sum) as f64 / (n * (n * n - 1)) as f64
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n);
            out.push(q);
        }
    }
    out
}

fn spearman_oracle() -> (bool, String) {
    let mut checked = 0;
    let mut mismatches = 0;
    for n in 2..=8 {
        let identity: Vec<usize> = (1..=n).collect();
        for p in permutations(n) {
            checked += 1;
            mismatches += usize::from(spearman_rho::<f64>(&identity, &p).unwrap() != naive_rho(&identity, &p));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let n = rng.random_range(2..=50);
        let mut a: Vec<usize> = (1..=n).collect();
        let mut b = a.clone();
        a.shuffle(&mut rng);
        b.shuffle(&mut rng);
        checked += 1;
        mismatches += usize::from(spearman_rho::<f64>(&a, &b).unwrap() != naive_rho(&a, &b));
    }
    let mut extremes = true;
    for n in 2..=50 {
        let id: Vec<usize> = (1..=n).collect();
        let rev: Vec<usize> = id.iter().rev().copied().collect();
        extremes &= spearman_rho::<f64>(&id, &id).unwrap().to_bits() == 1.0f64.to_bits();
        extremes &= spearman_rho::<f64>(&id, &rev).unwrap().to_bits() == (-1.0f64).to_bits();
    }
    (
        mismatches == 0 && extremes,
        format!("{checked} rank pairs, {mismatches} mismatches; identity/reversal bit-exact for n = 2..50: {extremes}"),
    )
}

// ---------------------------------------------------------------- 8

fn gbdt_correctness(data: &SplitPair) -> (bool, String) {
    let t = data.train.select_rows(&(0..800).collect::<Vec<_>>());
    let y = t.target().unwrap();
    let strategies = [
        GrowthStrategy::LeafWise {
            num_leaves: 16,
            min_child_samples: 20,
            max_depth: 5,
        },
        GrowthStrategy::LevelWise {
            depth: 4,
            l2_leaf_reg: 5.0,
            border_count: 128,
        },
    ];
    let mut monotone = true;
    let mut worst_gain: f64 = 0.0;
    let mut splits = 0;
    for s in &strategies {
        let params = BoostParams::new(s.clone(), 0.1, 60).with_seed(3);
        let m: Ensemble = fit(&t, &params).unwrap();
        monotone &= m.train_rmse.windows(2).all(|w| w[1] <= w[0]);
        let x = training_matrix::<f64>(&t, &params).unwrap();
        let lambda = s.lambda();
        let mut pred = vec![m.base_score; y.len()];
        for tree in &m.trees {
            let grad: Vec<f64> = pred.iter().zip(&y).map(|(p, y)| p - y).collect();
            let mut reach: Vec<Vec<usize>> = vec![Vec::new(); tree.nodes.len()];
            for i in 0..y.len() {
                let mut id = 0;
                reach[0].push(i);
                while let NodeKind::Split {
                    feature,
                    rule,
                    left,
                    right,
                    ..
                } = &tree.nodes[id].kind
                {
                    id = if rule.goes_left(x.row(i)[*feature]) { *left } else { *right };
                    reach[id].push(i);
                }
            }
            let score = |rows: &[usize]| {
                let g: f64 = rows.iter().map(|&r| grad[r]).sum();
                g * g / (rows.len() as f64 + lambda)
            };
            for (id, node) in tree.nodes.iter().enumerate() {
                if let NodeKind::Split { left, right, gain, .. } = &node.kind {
                    let raw = score(&reach[*left]) + score(&reach[*right]) - score(&reach[id]);
                    worst_gain = worst_gain.max((gain - raw).abs() / raw.abs().max(1.0));
                    splits += 1;
                }
            }
            for (i, p) in pred.iter_mut().enumerate() {
                *p += m.learning_rate * tree.predict_row(x.row(i));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut leak_free = true;
    for _ in 0..200 {
        let n = rng.random_range(2..80);
        let codes: Vec<u32> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let yv: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let base = ordered_target_encode(&codes, &yv, &perm, 0.5, 1.0).unwrap();
        let p = rng.random_range(0..n);
        let mut y2 = yv.clone();
        let mut tail: Vec<f64> = perm[p..].iter().map(|&r| yv[r]).collect();
        tail.shuffle(&mut rng);
        for (&r, v) in perm[p..].iter().zip(tail) {
            y2[r] = v;
        }
        let again = ordered_target_encode(&codes, &y2, &perm, 0.5, 1.0).unwrap();
        leak_free &= perm[..=p].iter().all(|&r| base[r] == again[r]);
    }
    (
        monotone && worst_gain <= 1e-9 && leak_free,
        format!(
            "loss non-increasing: {monotone}; {splits} split gains, max rel error {worst_gain:.1e} (tol 1e-9); ordered encoding leak-free: {leak_free}"
        ),
    )
}

// ---------------------------------------------------------------- 9 and 10

fn write_config(dir: &Path, out: &Path, fixed: &[(ModelFamily, BoostParams)], treatments: &[&str]) -> PathBuf {
    let mut model = toml::Table::new();
    model.insert("tuning".into(), "fixed".into());
    let mut fixed_t = toml::Table::new();
    for (f, p) in fixed {
        fixed_t.insert(f.as_str().into(), toml::Value::try_from(p).unwrap());
    }
    model.insert("fixed".into(), fixed_t.into());
    let mut doc = toml::Table::new();
    doc.insert("seed".into(), 42.into());
    let mut data = toml::Table::new();
    data.insert(
        "path".into(),
        repo_root().join("data/ames.csv").to_string_lossy().into_owned().into(),
    );
    doc.insert("data".into(), data.into());
    doc.insert("model".into(), model.into());
    let mut causal = toml::Table::new();
    causal.insert(
        "treatments".into(),
        toml::Value::Array(treatments.iter().map(|t| toml::Value::from(*t)).collect()),
    );
    doc.insert("causal".into(), causal.into());
    let mut output = toml::Table::new();
    output.insert("dir".into(), out.to_string_lossy().into_owned().into());
    doc.insert("output".into(), output.into());
    let path = dir.join(format!("{}.toml", out.file_name().unwrap().to_string_lossy()));
    std::fs::write(&path, toml::to_string(&doc).unwrap()).unwrap();
    path
}

fn run_all(config: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_shapcausal"))
        .args(["all", "--config"])
        .arg(config)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)))
    }
}

fn end_to_end(dir: &Path, fixed: &[(ModelFamily, BoostParams)], data: &SplitPair) -> (bool, String) {
    let out = dir.join("full");
    let cfg = write_config(dir, &out, fixed, &[]);
    if let Err(e) = run_all(&cfg) {
        return (false, format!("`all` failed: {e}"));
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    let effects = report["causal"]["effects"].as_array().unwrap();
    let p: Vec<f64> = effects.iter().map(|e| e["p_value"].as_f64().unwrap()).collect();
    let sorted = !p.is_empty() && p.windows(2).all(|w| w[0] <= w[1]);

    let ate = report["heterogeneity"]["effect"]["ate"].as_f64().unwrap();
    let porchless = {
        let col = data.test.categorical("HasPorch").unwrap();
        (0..data.test.n_rows()).filter(|&r| col.level(r) == "0").count()
    };
    let mut ok = sorted && report["heterogeneity"]["treatment"] == "HasPorch";
    let mut parts = vec![format!("{} contrasts sorted by p: {sorted}", effects.len())];
    for m in report["models"].as_array().unwrap() {
        let family = m["family"].as_str().unwrap();
        let rho = m["alignment"]["result"]["rho"].as_f64().unwrap();
        let w = &m["whatif"];
        let shift = w["counterfactual_mean"].as_f64().unwrap() - w["baseline_mean"].as_f64().unwrap();
        let agrees = shift.signum() == ate.signum();
        let affected = w["n_affected"].as_u64().unwrap() as usize == porchless;
        ok &= (-1.0..=1.0).contains(&rho) && agrees && affected;
        parts.push(format!(
            "{family} rho {rho:.3}, HasPorch 0->1 shift {shift:+.0} ({} rows) vs ate {ate:+.0}",
            w["n_affected"]
        ));
    }
    ok &= report["models"].as_array().unwrap().len() == 2;
    (ok, parts.join("; "))
}

fn determinism(dir: &Path, fixed: &[(ModelFamily, BoostParams)]) -> (bool, String) {
    let treatments = [
        "OverallQual",
        "GrLivArea",
        "BldgType",
        "GarageFinish",
        "HasPorch",
        "HasFireplace",
        "KitchenAbvGr",
        "GarageCars",
        "Neighborhood",
        "AgeAtSale",
        "LotArea",
        "BsmtExposure",
    ];
    let out = dir.join("repeat");
    let cfg = write_config(dir, &out, fixed, &treatments);
    let mut reports = Vec::new();
    for _ in 0..2 {
        if let Err(e) = run_all(&cfg) {
            return (false, format!("`all` failed: {e}"));
        }
        reports.push(std::fs::read(out.join("report.json")).unwrap());
    }
    let same = reports[0] == reports[1];
    (
        same,
        format!("two `all` runs, report.json {} bytes, byte-identical: {same}", reports[0].len()),
    )
}

#[test]
fn acceptance_criteria() {
    let minute = Duration::from_secs(60);
    let tmp = tempfile::tempdir().unwrap();
    let data = ames_split();
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |id: usize, o: Outcome| {
        println!("{}", o.line(id));
        results.push((id, o));
    };

    report(1, timed(Some(minute), shap_exactness));

    // 3 before 2: additivity is checked on the tuned models
    let mut models = Vec::new();
    let o3 = timed(Some(15 * minute), || {
        let (r, m) = predictive_floor(&data);
        models = m;
        r
    });
    let fitted: Vec<(ModelFamily, Ensemble)> = models.iter().map(|(f, m, _)| (*f, m.clone())).collect();
    report(2, timed(Some(minute), || shap_additivity(&fitted, &data)));
    report(3, o3);

    report(4, timed(Some(10 * minute), dml_recovery));
    let t = Instant::now();
    let (c5, c6) = cate_and_policy();
    let elapsed = t.elapsed();
    for (id, (correct, detail)) in [(5, c5), (6, c6)] {
        report(
            id,
            Outcome {
                correct,
                detail,
                elapsed,
                budget: None,
            },
        );
    }
    report(7, timed(None, spearman_oracle));
    report(8, timed(None, || gbdt_correctness(&data)));

    let fixed: Vec<(ModelFamily, BoostParams)> = models.iter().map(|(f, _, p)| (*f, p.clone())).collect();
    report(9, timed(None, || end_to_end(tmp.path(), &fixed, &data)));
    report(10, timed(None, || determinism(tmp.path(), &fixed)));

    results.sort_by_key(|(id, _)| *id);
    println!("\n---- acceptance summary ----");
    for (id, o) in &results {
        println!("{}", o.line(*id));
    }
    let over: Vec<usize> = results.iter().filter(|(_, o)| !o.within_budget()).map(|(id, _)| *id).collect();
    if !over.is_empty() {
        println!("runtime budget exceeded on this host for criteria {over:?}");
    }
    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.correct).map(|(id, _)| *id).collect();
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
