//! Shallow interpretable trees over per-row effect scores: heterogeneity
//! (CATE) trees minimise squared error, policy trees maximise the net
//! benefit of treating the leaves with positive mean effect minus cost.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnData, Table};

use super::CausalError;

/// Rows satisfying the test go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTest {
    /// `x <= threshold`; missing values go right.
    Threshold(f64),
    Levels(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSplit {
    pub feature: String,
    pub test: SplitTest,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectNode {
    pub n: usize,
    /// Mean effect score of the node's rows.
    pub mean: f64,
    /// `Σ (ψ_i − cost)` over the node's rows (cost 0 for CATE trees).
    pub net: f64,
    pub split: Option<EffectSplit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CateTree {
    /// Pre-order; node 0 is the root.
    pub nodes: Vec<EffectNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Treat,
    NoTreat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTree {
    pub nodes: Vec<EffectNode>,
    pub cost: f64,
}

impl PolicyTree {
    /// Treat iff the leaf's net benefit is positive.
    pub fn action(&self, node: usize) -> Action {
        if self.nodes[node].net > 0.0 {
            Action::Treat
        } else {
            Action::NoTreat
        }
    }

    /// Expected net effect per treated row: mean effect minus cost.
    pub fn net_mean(&self, node: usize) -> f64 {
        self.nodes[node].mean - self.cost
    }

    /// Recommended action for every row of `x`.
    pub fn decide(&self, x: &Table) -> Result<Vec<Action>, CausalError> {
        let leaves = route(&self.nodes, x)?;
        Ok(leaves.into_iter().map(|l| self.action(l)).collect())
    }

    /// Training-style net benefit of following the tree on (`psi`, `x`):
    /// per-leaf sums of `ψ − cost` in row order, added over treated leaves.
    pub fn net_benefit(&self, psi: &[f64], x: &Table) -> Result<f64, CausalError> {
        let leaves = route(&self.nodes, x)?;
        let mut per_leaf = vec![0.0; self.nodes.len()];
        for (i, &l) in leaves.iter().enumerate() {
            per_leaf[l] += psi[i] - self.cost;
        }
        Ok((0..self.nodes.len())
            .filter(|&l| self.nodes[l].split.is_none() && self.action(l) == Action::Treat)
            .map(|l| per_leaf[l])
            .sum())
    }

    pub fn render(&self) -> String {
        render(&self.nodes, |id| {
            format!(
                "{} (net effect {:.3})",
                match self.action(id) {
                    Action::Treat => "treat",
                    Action::NoTreat => "no-treat",
                },
                self.net_mean(id)
            )
        })
    }
}

/// Net benefit of the constant policy: `Σ (ψ_i − cost)` if `treat`, else 0.
pub fn constant_policy_benefit(psi: &[f64], cost: f64, treat: bool) -> f64 {
    if treat {
        psi.iter().map(|p| p - cost).sum()
    } else {
        0.0
    }
}

impl CateTree {
    /// Leaf mean reached by every row of `x`.
    pub fn predict(&self, x: &Table) -> Result<Vec<f64>, CausalError> {
        Ok(route(&self.nodes, x)?.into_iter().map(|l| self.nodes[l].mean).collect())
    }

    pub fn render(&self) -> String {
        render(&self.nodes, |_| String::new())
    }
}

fn render(nodes: &[EffectNode], leaf_note: impl Fn(usize) -> String) -> String {
    fn go(nodes: &[EffectNode], id: usize, depth: usize, out: &mut String, note: &dyn Fn(usize) -> String) {
        let n = &nodes[id];
        let pad = "  ".repeat(depth);
        let _ = write!(out, "{pad}[n={} mean={:.3}]", n.n, n.mean);
        match &n.split {
            Some(s) => {
                let test = match &s.test {
                    SplitTest::Threshold(t) => format!("{} <= {t}", s.feature),
                    SplitTest::Levels(l) => format!("{} in {{{}}}", s.feature, l.join(", ")),
                };
                let _ = writeln!(out, " {test}");
                go(nodes, s.left, depth + 1, out, note);
                go(nodes, s.right, depth + 1, out, note);
            }
            None => {
                let extra = note(id);
                if extra.is_empty() {
                    let _ = writeln!(out, " leaf");
                } else {
                    let _ = writeln!(out, " leaf: {extra}");
                }
            }
        }
    }
    let mut out = String::new();
    go(nodes, 0, 0, &mut out, &leaf_note);
    out
}

enum Covariate<'a> {
    Numeric(Vec<f64>),
    Categorical { codes: &'a [u32], levels: &'a [String] },
}

struct Covariates<'a> {
    names: Vec<String>,
    cols: Vec<Covariate<'a>>,
}

impl<'a> Covariates<'a> {
    fn new(x: &'a Table) -> Self {
        let mut names = Vec::new();
        let mut cols = Vec::new();
        for c in x.features() {
            names.push(c.schema.name.clone());
            cols.push(match &c.data {
                ColumnData::Numeric(n) => Covariate::Numeric((0..x.n_rows()).map(|r| n.get(r).unwrap_or(f64::NAN)).collect()),
                ColumnData::Categorical(k) => Covariate::Categorical {
                    codes: &k.codes,
                    levels: &k.levels,
                },
            });
        }
        Self { names, cols }
    }

    fn goes_left(&self, f: usize, test: &SplitTest, row: usize) -> bool {
        match (&self.cols[f], test) {
            (Covariate::Numeric(v), SplitTest::Threshold(t)) => v[row] <= *t,
            (Covariate::Categorical { codes, levels }, SplitTest::Levels(set)) => set.contains(&levels[codes[row] as usize]),
            _ => false,
        }
    }
}

fn route(nodes: &[EffectNode], x: &Table) -> Result<Vec<usize>, CausalError> {
    let cov = Covariates::new(x);
    let index = |name: &str| {
        cov.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| CausalError::Invalid(format!("covariate `{name}` is missing")))
    };
    (0..x.n_rows())
        .map(|r| {
            let mut id = 0;
            while let Some(s) = &nodes[id].split {
                id = if cov.goes_left(index(&s.feature)?, &s.test, r) {
                    s.left
                } else {
                    s.right
                };
            }
            Ok(id)
        })
        .collect()
}

/// Best split of `rows` under `gain(S_L, n_L, S_R, n_R)` applied to `score`;
/// strict improvement keeps the first feature / lowest threshold on ties.
fn best_split(
    cov: &Covariates,
    score: &[f64],
    rows: &[usize],
    min_leaf: usize,
    gain: &dyn Fn(f64, usize, f64, usize) -> f64,
) -> Option<(f64, usize, SplitTest)> {
    let n = rows.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let total: f64 = rows.iter().map(|&r| score[r]).sum();
    let mut best: Option<(f64, usize, SplitTest)> = None;
    let mut offer = |g: f64, f: usize, test: SplitTest| {
        if g.is_finite() && best.as_ref().is_none_or(|(b, _, _)| g > *b) {
            best = Some((g, f, test));
        }
    };
    for (f, col) in cov.cols.iter().enumerate() {
        match col {
            Covariate::Numeric(v) => {
                let mut order: Vec<usize> = rows.iter().copied().filter(|&r| !v[r].is_nan()).collect();
                order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
                let mut s = 0.0;
                for k in 0..order.len().saturating_sub(1) {
                    s += score[order[k]];
                    let (a, b) = (v[order[k]], v[order[k + 1]]);
                    let nl = k + 1;
                    if a == b || nl < min_leaf || n - nl < min_leaf {
                        continue;
                    }
                    let mut t = a + (b - a) / 2.0;
                    if t >= b {
                        t = a;
                    }
                    offer(gain(s, nl, total - s, n - nl), f, SplitTest::Threshold(t));
                }
            }
            Covariate::Categorical { codes, levels } => {
                let mut sums = vec![(0.0f64, 0usize); levels.len()];
                for &r in rows {
                    let e = &mut sums[codes[r] as usize];
                    e.0 += score[r];
                    e.1 += 1;
                }
                let mut present: Vec<usize> = (0..levels.len()).filter(|&k| sums[k].1 > 0).collect();
                present.sort_by(|&a, &b| {
                    let (ma, mb) = (sums[a].0 / sums[a].1 as f64, sums[b].0 / sums[b].1 as f64);
                    ma.partial_cmp(&mb)
                        .unwrap_or(Ordering::Equal)
                        .then_with(|| levels[a].cmp(&levels[b]))
                });
                let (mut s, mut nl) = (0.0, 0);
                for k in 0..present.len().saturating_sub(1) {
                    s += sums[present[k]].0;
                    nl += sums[present[k]].1;
                    if nl < min_leaf || n - nl < min_leaf {
                        continue;
                    }
                    let mut set: Vec<String> = present[..=k].iter().map(|&l| levels[l].clone()).collect();
                    set.sort();
                    offer(gain(s, nl, total - s, n - nl), f, SplitTest::Levels(set));
                }
            }
        }
    }
    best
}

struct Builder<'a> {
    cov: Covariates<'a>,
    score: Vec<f64>,
    psi: &'a [f64],
    cost: f64,
    min_leaf: usize,
    max_depth: usize,
    nodes: Vec<EffectNode>,
}

impl Builder<'_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let sum: f64 = rows.iter().map(|&r| self.psi[r]).sum();
        let net: f64 = rows.iter().map(|&r| self.psi[r] - self.cost).sum();
        self.nodes.push(EffectNode {
            n: rows.len(),
            mean: sum / rows.len() as f64,
            net,
            split: None,
        });
        self.nodes.len() - 1
    }

    /// Grows depth-first in pre-order; `choose` returns an accepted split.
    fn grow(
        &mut self,
        rows: &[usize],
        depth: usize,
        choose: &dyn Fn(&Covariates, &[f64], &[usize], usize) -> Option<(usize, SplitTest)>,
    ) -> usize {
        let id = self.leaf(rows);
        if depth >= self.max_depth {
            return id;
        }
        let Some((f, test)) = choose(&self.cov, &self.score, rows, self.min_leaf) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| self.cov.goes_left(f, &test, r));
        let l = self.grow(&left, depth + 1, choose);
        let r = self.grow(&right, depth + 1, choose);
        self.nodes[id].split = Some(EffectSplit {
            feature: self.cov.names[f].clone(),
            test,
            left: l,
            right: r,
        });
        id
    }
}

fn check_inputs(psi: &[f64], x: &Table, max_depth: usize) -> Result<(), CausalError> {
    if psi.is_empty() {
        return Err(CausalError::Invalid("no rows to fit an effect tree on".into()));
    }
    if psi.len() != x.n_rows() {
        return Err(CausalError::Invalid(format!(
            "{} effect scores for {} covariate rows",
            psi.len(),
            x.n_rows()
        )));
    }
    if psi.iter().any(|p| !p.is_finite()) {
        return Err(CausalError::Invalid("effect scores must be finite".into()));
    }
    if max_depth < 1 {
        return Err(CausalError::Invalid("max_depth must be at least 1".into()));
    }
    Ok(())
}

/// Variance-reduction regression tree on the effect scores over the feature
/// columns of `x`.
pub fn fit_cate_tree(psi: &[f64], x: &Table, max_depth: usize, min_leaf: usize) -> Result<CateTree, CausalError> {
    check_inputs(psi, x, max_depth)?;
    let mut b = Builder {
        cov: Covariates::new(x),
        score: psi.to_vec(),
        psi,
        cost: 0.0,
        min_leaf: min_leaf.max(1),
        max_depth,
        nodes: Vec::new(),
    };
    let rows: Vec<usize> = (0..psi.len()).collect();
    let choose = |cov: &Covariates, score: &[f64], rows: &[usize], min_leaf: usize| {
        let n = rows.len() as f64;
        let mean = rows.iter().map(|&r| score[r]).sum::<f64>() / n;
        let sse: f64 = rows.iter().map(|&r| (score[r] - mean).powi(2)).sum();
        let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
            (lo.min(score[r]), hi.max(score[r]))
        });
        if lo == hi {
            return None;
        }
        let centered: Vec<f64> = score.iter().map(|s| s - mean).collect();
        let gain = |sl: f64, nl: usize, sr: f64, nr: usize| sl * sl / nl as f64 + sr * sr / nr as f64;
        best_split(cov, &centered, rows, min_leaf, &gain)
            .filter(|(g, _, _)| *g > 1e-10 * sse)
            .map(|(_, f, t)| (f, t))
    };
    b.grow(&rows, 0, &choose);
    Ok(CateTree { nodes: b.nodes })
}

/// Greedy policy tree: a split is kept when treating only the children with
/// positive net benefit beats the parent's best constant action.
pub fn fit_policy_tree(psi: &[f64], x: &Table, cost: f64, max_depth: usize, min_leaf: usize) -> Result<PolicyTree, CausalError> {
    check_inputs(psi, x, max_depth)?;
    if !(cost >= 0.0) || !cost.is_finite() {
        return Err(CausalError::Invalid("treatment cost must be a non-negative number".into()));
    }
    let mut b = Builder {
        cov: Covariates::new(x),
        score: psi.iter().map(|p| p - cost).collect(),
        psi,
        cost,
        min_leaf: min_leaf.max(1),
        max_depth,
        nodes: Vec::new(),
    };
    let rows: Vec<usize> = (0..psi.len()).collect();
    let choose = |cov: &Covariates, score: &[f64], rows: &[usize], min_leaf: usize| {
        let total: f64 = rows.iter().map(|&r| score[r]).sum();
        let scale: f64 = rows.iter().map(|&r| score[r].abs()).sum();
        let base = total.max(0.0);
        let gain = |sl: f64, _: usize, sr: f64, _: usize| sl.max(0.0) + sr.max(0.0) - base;
        best_split(cov, score, rows, min_leaf, &gain)
            .filter(|(g, _, _)| *g > 1e-9 * scale)
            .map(|(_, f, t)| (f, t))
    };
    b.grow(&rows, 0, &choose);
    Ok(PolicyTree { nodes: b.nodes, cost })
}
