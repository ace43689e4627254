//! Per-node gradient histograms and the split search over them.

use crate::Scalar;

use super::binning::{BinLayout, BinnedData};

/// Gradient statistics of one bin (or of a whole node).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BinStats<T> {
    pub grad: T,
    pub hess: T,
    pub count: usize,
}

impl<T: Scalar> BinStats<T> {
    pub fn new(grad: T, hess: T, count: usize) -> Self {
        Self { grad, hess, count }
    }

    #[inline]
    pub(crate) fn add(&mut self, other: &Self) {
        self.grad = self.grad + other.grad;
        self.hess = self.hess + other.hess;
        self.count += other.count;
    }

    #[inline]
    pub(crate) fn sub(&self, other: &Self) -> Self {
        Self {
            grad: self.grad - other.grad,
            hess: self.hess - other.hess,
            count: self.count - other.count,
        }
    }
}

/// `G² / (H + λ)`.
#[inline]
pub fn leaf_score<T: Scalar>(s: &BinStats<T>, lambda: T) -> T {
    let d = s.hess + lambda;
    if d > T::zero() {
        s.grad * s.grad / d
    } else {
        T::zero()
    }
}

/// `G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)` with `G = G_L + G_R`, `H = H_L + H_R`.
pub fn split_gain<T: Scalar>(left: &BinStats<T>, right: &BinStats<T>, lambda: T) -> T {
    let mut parent = *left;
    parent.add(right);
    leaf_score(left, lambda) + leaf_score(right, lambda) - leaf_score(&parent, lambda)
}

/// Optimal leaf output `−G / (H + λ)`.
pub fn leaf_value<T: Scalar>(s: &BinStats<T>, lambda: T) -> T {
    let d = s.hess + lambda;
    if d > T::zero() {
        -s.grad / d
    } else {
        T::zero()
    }
}

/// Which rows a chosen split sends left, in bin space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinSplit {
    /// bin index `<= b`
    Prefix(usize),
    /// category code `== c`
    OneLevel(usize),
}

impl BinSplit {
    #[inline]
    pub fn goes_left(self, bin: u16) -> bool {
        match self {
            BinSplit::Prefix(b) => bin as usize <= b,
            BinSplit::OneLevel(c) => bin as usize == c,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate<T> {
    pub feature: usize,
    pub split: BinSplit,
    pub gain: T,
    pub left: BinStats<T>,
    pub right: BinStats<T>,
}

/// One feature's bins for one node.
#[derive(Debug, Clone, Copy)]
pub struct FeatureBins<'a, T> {
    pub bins: &'a [BinStats<T>],
    pub categorical: bool,
}

/// Histograms of every feature for one node, stored contiguously.
#[derive(Debug, Clone)]
pub struct NodeHistogram<T> {
    offsets: Vec<usize>,
    categorical: Vec<bool>,
    cells: Vec<BinStats<T>>,
}

impl<T: Scalar> NodeHistogram<T> {
    pub fn zeros(data: &BinnedData<T>) -> Self {
        let mut offsets = Vec::with_capacity(data.features.len() + 1);
        let mut total = 0;
        for f in &data.features {
            offsets.push(total);
            total += f.layout.n_bins();
        }
        offsets.push(total);
        let categorical = data
            .features
            .iter()
            .map(|f| matches!(f.layout, BinLayout::Categorical { .. }))
            .collect();
        Self {
            offsets,
            categorical,
            cells: vec![BinStats::default(); total],
        }
    }

    /// Accumulates `rows` into a fresh histogram.
    pub fn build(data: &BinnedData<T>, rows: &[u32], grad: &[T], hess: &[T]) -> Self {
        let mut h = Self::zeros(data);
        // gathered once so the per-feature passes read them sequentially
        let gh: Vec<(T, T)> = rows.iter().map(|&r| (grad[r as usize], hess[r as usize])).collect();
        for (f, feat) in data.features.iter().enumerate() {
            let cells = &mut h.cells[h.offsets[f]..h.offsets[f + 1]];
            let bins = &feat.bins;
            for (&r, &(g, hs)) in rows.iter().zip(&gh) {
                let c = &mut cells[bins[r as usize] as usize];
                c.grad = c.grad + g;
                c.hess = c.hess + hs;
                c.count += 1;
            }
        }
        h
    }

    /// `self − other`, bin by bin (sibling histogram from parent and child).
    pub fn subtract(&self, other: &Self) -> Self {
        Self {
            offsets: self.offsets.clone(),
            categorical: self.categorical.clone(),
            cells: self.cells.iter().zip(&other.cells).map(|(a, b)| a.sub(b)).collect(),
        }
    }

    /// `self −= other`, bin by bin.
    pub fn subtract_in_place(&mut self, other: &Self) {
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a = a.sub(b);
        }
    }

    pub fn n_features(&self) -> usize {
        self.categorical.len()
    }

    pub fn feature(&self, f: usize) -> FeatureBins<'_, T> {
        FeatureBins {
            bins: &self.cells[self.offsets[f]..self.offsets[f + 1]],
            categorical: self.categorical[f],
        }
    }

    /// Node totals, read off the first feature.
    pub fn totals(&self) -> BinStats<T> {
        let mut s = BinStats::default();
        if self.n_features() > 0 {
            for b in self.feature(0).bins {
                s.add(b);
            }
        }
        s
    }
}

/// Running best candidate of one node.
///
/// Candidates are compared on `S = G_L²/(H_L+λ) + G_R²/(H_R+λ)`, which
/// orders them exactly as the gain `S − G²/(H+λ)` does; the first candidate
/// offered wins ties. The winner is kept only if its gain exceeds rounding
/// noise, `gain > √ε · (S + G²/(H+λ))`.
pub(crate) struct Scanner<T> {
    total: BinStats<T>,
    lambda: T,
    min_child: usize,
    best: Option<(T, SplitCandidate<T>)>,
}

impl<T: Scalar> Scanner<T> {
    pub(crate) fn new(total: BinStats<T>, lambda: T, min_child_samples: usize) -> Self {
        Self {
            total,
            lambda,
            min_child: min_child_samples.max(1),
            best: None,
        }
    }

    #[inline]
    pub(crate) fn offer(&mut self, feature: usize, split: BinSplit, left: BinStats<T>) {
        if left.count < self.min_child || self.total.count - left.count < self.min_child {
            return;
        }
        let right = self.total.sub(&left);
        let dl = left.hess + self.lambda;
        let dr = right.hess + self.lambda;
        if !(dl > T::zero() && dr > T::zero()) {
            return;
        }
        // S = (G_L²·d_R + G_R²·d_L) / (d_L·d_R), compared without dividing
        let num = left.grad * left.grad * dr + right.grad * right.grad * dl;
        let den = dl * dr;
        if self.best.as_ref().is_none_or(|(b, _)| num > *b * den) {
            let score = leaf_score(&left, self.lambda) + leaf_score(&right, self.lambda);
            self.best = Some((
                score,
                SplitCandidate {
                    feature,
                    split,
                    gain: T::zero(),
                    left,
                    right,
                },
            ));
        }
    }

    /// Offers every prefix of an ordered feature's non-empty bins (all but the last).
    fn ordered_bins(&mut self, feature: usize, cells: impl Iterator<Item = (usize, BinStats<T>)>) {
        let mut acc = BinStats::default();
        let mut pending: Option<usize> = None;
        for (b, cell) in cells {
            if let Some(p) = pending {
                self.offer(feature, BinSplit::Prefix(p), acc);
            }
            acc.add(&cell);
            if self.total.count - acc.count < self.min_child {
                return;
            }
            pending = Some(b);
        }
    }

    /// Offers every non-empty level of a categorical feature against the rest.
    fn level_bins(&mut self, feature: usize, cells: impl Iterator<Item = (usize, BinStats<T>)>) {
        for (c, cell) in cells {
            self.offer(feature, BinSplit::OneLevel(c), cell);
        }
    }

    /// Same as [`Self::ordered_bins`] from rows sorted by bin.
    fn ordered_rows(&mut self, feature: usize, bins: &[u16], ordered: &[u32], grad: &[T], hess: &[T]) {
        let Some(&first) = ordered.first() else { return };
        let mut acc = BinStats::default();
        let mut cur = bins[first as usize];
        for &r in ordered {
            let r = r as usize;
            let b = bins[r];
            if b != cur {
                if self.total.count - acc.count < self.min_child {
                    return;
                }
                self.offer(feature, BinSplit::Prefix(cur as usize), acc);
                cur = b;
            }
            acc.grad = acc.grad + grad[r];
            acc.hess = acc.hess + hess[r];
            acc.count += 1;
        }
    }

    /// Same as [`Self::level_bins`] from rows sorted by level.
    fn level_rows(&mut self, feature: usize, bins: &[u16], ordered: &[u32], grad: &[T], hess: &[T]) {
        let Some(&first) = ordered.first() else { return };
        let mut run = BinStats::default();
        let mut cur = bins[first as usize];
        for &r in ordered {
            let r = r as usize;
            let b = bins[r];
            if b != cur {
                self.offer(feature, BinSplit::OneLevel(cur as usize), run);
                run = BinStats::default();
                cur = b;
            }
            run.grad = run.grad + grad[r];
            run.hess = run.hess + hess[r];
            run.count += 1;
        }
        self.offer(feature, BinSplit::OneLevel(cur as usize), run);
    }

    pub(crate) fn finish(self) -> Option<SplitCandidate<T>> {
        let (score, mut cand) = self.best?;
        let parent = leaf_score(&self.total, self.lambda);
        let gain = score - parent;
        if gain > T::gain_tolerance() * (score + parent) {
            cand.gain = gain;
            Some(cand)
        } else {
            None
        }
    }
}

fn non_empty<'a, T: Scalar>(fb: &FeatureBins<'a, T>) -> impl Iterator<Item = (usize, BinStats<T>)> + 'a {
    fb.bins.iter().copied().enumerate().filter(|(_, c)| c.count > 0)
}

fn scan_bins<'a, T: Scalar>(
    features: impl Iterator<Item = FeatureBins<'a, T>>,
    total: BinStats<T>,
    lambda: T,
    min_child_samples: usize,
) -> Option<SplitCandidate<T>> {
    if total.count < 2 * min_child_samples.max(1) {
        return None;
    }
    let mut scan = Scanner::new(total, lambda, min_child_samples);
    for (f, fb) in features.enumerate() {
        if fb.categorical {
            scan.level_bins(f, non_empty(&fb));
        } else {
            scan.ordered_bins(f, non_empty(&fb));
        }
    }
    scan.finish()
}

/// Scans every feature's bins for the split of maximum gain.
///
/// Ordered features try every bin prefix; categorical features try each
/// level against the rest. Candidates leaving fewer than `min_child_samples`
/// rows on either side are skipped. Returns `None` when no candidate has a
/// positive gain above rounding noise. Ties keep the earliest feature and bin.
pub fn find_best_split<T: Scalar>(features: &[FeatureBins<'_, T>], lambda: T, min_child_samples: usize) -> Option<SplitCandidate<T>> {
    let first = features.first()?;
    let mut total = BinStats::default();
    for b in first.bins {
        total.add(b);
    }
    scan_bins(features.iter().copied(), total, lambda, min_child_samples)
}

/// [`find_best_split`] over a node histogram.
pub fn find_best_split_in<T: Scalar>(hist: &NodeHistogram<T>, lambda: T, min_child_samples: usize) -> Option<SplitCandidate<T>> {
    scan_bins(
        (0..hist.n_features()).map(|f| hist.feature(f)),
        hist.totals(),
        lambda,
        min_child_samples,
    )
}

/// Writes the node's rows ordered by bin into `out`, feature `f` at
/// `out[f·stride + start ..][..rows.len()]`. Rows sharing a bin keep their
/// relative order (a counting sort).
pub(crate) fn sort_rows_by_bin<T: Scalar>(
    data: &BinnedData<T>,
    rows: &[u32],
    out: &mut [u32],
    stride: usize,
    start: usize,
    counts: &mut Vec<usize>,
) {
    for (f, feat) in data.features.iter().enumerate() {
        let block = &mut out[f * stride + start..f * stride + start + rows.len()];
        counts.clear();
        counts.resize(feat.layout.n_bins() + 1, 0);
        for &row in rows {
            counts[feat.bins[row as usize] as usize + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        for &row in rows {
            let b = feat.bins[row as usize] as usize;
            block[counts[b]] = row;
            counts[b] += 1;
        }
    }
}

/// Split search from bin-ordered rows laid out as by [`sort_rows_by_bin`].
#[allow(clippy::too_many_arguments)]
pub(crate) fn best_split_sorted<T: Scalar>(
    data: &BinnedData<T>,
    sorted: &[u32],
    stride: usize,
    start: usize,
    total: BinStats<T>,
    grad: &[T],
    hess: &[T],
    lambda: T,
    min_child_samples: usize,
) -> Option<SplitCandidate<T>> {
    let r = total.count;
    if data.features.is_empty() || r < 2 * min_child_samples.max(1) {
        return None;
    }
    let mut scan = Scanner::new(total, lambda, min_child_samples);
    for (f, feat) in data.features.iter().enumerate() {
        let block = &sorted[f * stride + start..f * stride + start + r];
        match feat.layout {
            BinLayout::Categorical { .. } => scan.level_rows(f, &feat.bins, block, grad, hess),
            BinLayout::Ordered { .. } => scan.ordered_rows(f, &feat.bins, block, grad, hess),
        }
    }
    scan.finish()
}

/// Whether a node of `n_rows` rows is cheaper to scan through a full histogram.
pub(crate) fn prefers_histogram<T: Scalar>(data: &BinnedData<T>, n_rows: usize) -> bool {
    n_rows * data.features.len() >= data.n_cells()
}

/// Best split of the node holding `rows`.
///
/// Large nodes go through a full [`NodeHistogram`]; small nodes sort their
/// rows by bin per feature instead. Both routes evaluate the same candidates.
pub fn find_best_split_rows<T: Scalar>(
    data: &BinnedData<T>,
    rows: &[u32],
    grad: &[T],
    hess: &[T],
    lambda: T,
    min_child_samples: usize,
) -> Option<SplitCandidate<T>> {
    if data.features.is_empty() || rows.len() < 2 * min_child_samples.max(1) {
        return None;
    }
    if prefers_histogram(data, rows.len()) {
        let hist = NodeHistogram::build(data, rows, grad, hess);
        return find_best_split_in(&hist, lambda, min_child_samples);
    }
    let mut total = BinStats::default();
    for &r in rows {
        total.add(&BinStats::new(grad[r as usize], hess[r as usize], 1));
    }
    let r = rows.len();
    let mut sorted = vec![0u32; r * data.features.len()];
    sort_rows_by_bin(data, rows, &mut sorted, r, 0, &mut Vec::new());
    best_split_sorted(data, &sorted, r, 0, total, grad, hess, lambda, min_child_samples)
}
