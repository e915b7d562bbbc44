//! Binary decision trees: Gini classification trees for the forests and
//! Newton-leaf regression trees for boosting.
//!
//! Samples go left when `x[feature] <= threshold`.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// `(feature, threshold)` of the root split, if any.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split { feature, threshold, .. } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        }
    }
}

/// Row-major feature matrix view.
#[derive(Debug, Clone, Copy)]
pub struct Matrix<'a> {
    pub data: &'a [f64],
    pub cols: usize,
}

impl<'a> Matrix<'a> {
    pub fn new(data: &'a [f64], cols: usize) -> Self {
        Matrix { data, cols }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.cols
    }
}

/// Midpoint between two distinct neighbouring values, kept strictly below
/// the upper one.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m < hi && m >= lo {
        m
    } else {
        lo
    }
}

/// Exact split quality `((l0² + l1²)·nR + (r0² + r1²)·nL) / (nL·nR)`.
/// Maximising it minimises the weighted Gini impurity of the children.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GiniScore {
    num: u128,
    den: u128,
}

impl GiniScore {
    pub fn new(left: [u64; 2], right: [u64; 2]) -> Self {
        let sq = |c: [u64; 2]| (c[0] as u128).pow(2) + (c[1] as u128).pow(2);
        let (nl, nr) = ((left[0] + left[1]) as u128, (right[0] + right[1]) as u128);
        GiniScore {
            num: sq(left) * nr + sq(right) * nl,
            den: nl * nr,
        }
    }

    /// Gini gain of this split over a parent with `parent` class counts, as
    /// a float (for reporting only; comparisons use the exact form).
    pub fn gain(&self, parent: [u64; 2]) -> f64 {
        let n = (parent[0] + parent[1]) as f64;
        let p = (parent[0] as f64).powi(2) + (parent[1] as f64).powi(2);
        (self.num as f64 / self.den as f64 - p / n) / n
    }
}

impl PartialOrd for GiniScore {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GiniScore {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassSplit {
    pub feature: usize,
    pub threshold: f64,
    pub score: GiniScore,
}

impl ClassSplit {
    /// Higher score wins; ties go to the lower feature, then the lower
    /// threshold.
    fn beats(&self, other: &ClassSplit) -> bool {
        match self.score.cmp(&other.score) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => (self.feature, self.threshold) < (other.feature, other.threshold),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClassTreeParams {
    /// Non-constant features examined per node.
    pub max_features: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// One uniform random threshold per feature instead of the best one.
    pub random_thresholds: bool,
}

fn counts(samples: &[usize], y: &[u8]) -> [u64; 2] {
    let ones = samples.iter().filter(|&&i| y[i] == 1).count() as u64;
    [samples.len() as u64 - ones, ones]
}

/// Best threshold of one feature by exhaustive scan over midpoints.
pub fn best_threshold(
    x: Matrix<'_>,
    y: &[u8],
    samples: &[usize],
    feature: usize,
    min_leaf: usize,
) -> Option<ClassSplit> {
    let mut order: Vec<(f64, u8)> = samples.iter().map(|&i| (x.get(i, feature), y[i])).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = {
        let ones = order.iter().filter(|p| p.1 == 1).count() as u64;
        [order.len() as u64 - ones, ones]
    };
    let mut left = [0u64; 2];
    let mut best: Option<ClassSplit> = None;
    for k in 0..order.len() - 1 {
        left[order[k].1 as usize] += 1;
        if order[k].0 == order[k + 1].0 {
            continue;
        }
        let nl = k + 1;
        if nl < min_leaf || order.len() - nl < min_leaf {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let cand = ClassSplit {
            feature,
            threshold: midpoint(order[k].0, order[k + 1].0),
            score: GiniScore::new(left, right),
        };
        if best.is_none_or(|b| cand.score > b.score) {
            best = Some(cand);
        }
    }
    best
}

fn random_threshold<R: Rng>(
    x: Matrix<'_>,
    y: &[u8],
    samples: &[usize],
    feature: usize,
    (lo, hi): (f64, f64),
    min_leaf: usize,
    rng: &mut R,
) -> Option<ClassSplit> {
    let threshold = rng.random_range(lo..hi);
    let (mut left, mut right) = ([0u64; 2], [0u64; 2]);
    for &i in samples {
        let side = if x.get(i, feature) <= threshold {
            &mut left
        } else {
            &mut right
        };
        side[y[i] as usize] += 1;
    }
    let (nl, nr) = ((left[0] + left[1]) as usize, (right[0] + right[1]) as usize);
    if nl < min_leaf.max(1) || nr < min_leaf.max(1) {
        return None;
    }
    Some(ClassSplit {
        feature,
        threshold,
        score: GiniScore::new(left, right),
    })
}

fn value_range(x: Matrix<'_>, samples: &[usize], feature: usize) -> (f64, f64) {
    samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
        let v = x.get(i, feature);
        (lo.min(v), hi.max(v))
    })
}

/// Grows a classification tree on `samples` (which may repeat indices).
pub fn grow_class_tree<R: Rng>(
    x: Matrix<'_>,
    y: &[u8],
    samples: Vec<usize>,
    params: &ClassTreeParams,
    rng: &mut R,
) -> Tree {
    let mut nodes = Vec::new();
    let mut features: Vec<usize> = (0..x.cols).collect();
    // (node slot, samples, depth)
    let mut stack = vec![(0usize, samples, 0usize)];
    nodes.push(Node::Leaf { value: 0.0 });
    while let Some((slot, samples, depth)) = stack.pop() {
        let c = counts(&samples, y);
        let majority = if c[1] > c[0] { 1.0 } else { 0.0 };
        let stop = c[0] == 0
            || c[1] == 0
            || samples.len() < params.min_samples_split.max(2)
            || params.max_depth.is_some_and(|d| depth >= d);
        let split = if stop {
            None
        } else {
            find_class_split(x, y, &samples, params, &mut features, rng)
        };
        let Some(split) = split else {
            nodes[slot] = Node::Leaf { value: majority };
            continue;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| x.get(i, split.feature) <= split.threshold);
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        stack.push((r, right, depth + 1));
        stack.push((l, left, depth + 1));
    }
    Tree { nodes }
}

fn find_class_split<R: Rng>(
    x: Matrix<'_>,
    y: &[u8],
    samples: &[usize],
    params: &ClassTreeParams,
    features: &mut [usize],
    rng: &mut R,
) -> Option<ClassSplit> {
    if params.max_features < features.len() {
        features.shuffle(rng);
    } else {
        features.sort_unstable();
    }
    let mut best: Option<ClassSplit> = None;
    let mut visited = 0;
    for &f in features.iter() {
        if visited == params.max_features {
            break;
        }
        let range = value_range(x, samples, f);
        if range.0 >= range.1 {
            continue;
        }
        visited += 1;
        let cand = if params.random_thresholds {
            random_threshold(x, y, samples, f, range, params.min_samples_leaf, rng)
        } else {
            best_threshold(x, y, samples, f, params.min_samples_leaf.max(1))
        };
        if let Some(c) = cand {
            if best.is_none_or(|b| c.beats(&b)) {
                best = Some(c);
            }
        }
    }
    best
}

/// Regression tree on residuals `r` with Newton leaves `Σr / Σh`, grown
/// depth-first to `max_depth` using variance reduction.
pub fn grow_regression_tree(
    x: Matrix<'_>,
    sorted: &[Vec<usize>],
    r: &[f64],
    h: &[f64],
    max_depth: usize,
    min_samples_leaf: usize,
) -> Tree {
    let n = r.len();
    let mut node_of = vec![0usize; n];
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut frontier = vec![0usize];
    let mut members: Vec<Vec<usize>> = vec![(0..n).collect()];
    for _ in 0..max_depth {
        let mut next = Vec::new();
        for &slot in &frontier {
            let idx = &members[slot];
            let Some((feature, threshold)) = best_regression_split(x, sorted, r, idx, slot, &node_of, min_samples_leaf)
            else {
                continue;
            };
            let (l, rt) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf { value: 0.0 });
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[slot] = Node::Split {
                feature,
                threshold,
                left: l,
                right: rt,
            };
            let (li, ri): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x.get(i, feature) <= threshold);
            for &i in &li {
                node_of[i] = l;
            }
            for &i in &ri {
                node_of[i] = rt;
            }
            members.resize(nodes.len(), Vec::new());
            members[l] = li;
            members[rt] = ri;
            next.extend([l, rt]);
        }
        frontier = next;
    }
    for (slot, node) in nodes.iter_mut().enumerate() {
        if let Node::Leaf { value } = node {
            let idx = &members[slot];
            let num: f64 = idx.iter().map(|&i| r[i]).sum();
            let den: f64 = idx.iter().map(|&i| h[i]).sum();
            *value = if den.abs() < 1e-150 { 0.0 } else { num / den };
        }
    }
    Tree { nodes }
}

fn best_regression_split(
    x: Matrix<'_>,
    sorted: &[Vec<usize>],
    r: &[f64],
    idx: &[usize],
    slot: usize,
    node_of: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = idx.len();
    let min_leaf = min_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let total: f64 = idx.iter().map(|&i| r[i]).sum();
    let total_sq: f64 = idx.iter().map(|&i| r[i] * r[i]).sum();
    let base = total * total / n as f64;
    // residuals already constant: nothing to fit
    if total_sq - base <= 1e-14 * total_sq {
        return None;
    }
    let mut best: Option<(f64, usize, f64)> = None;
    for (f, order) in sorted.iter().enumerate() {
        let mut left_sum = 0.0;
        let mut prev: Option<f64> = None;
        for (nl, &i) in order.iter().filter(|&&i| node_of[i] == slot).enumerate() {
            let v = x.get(i, f);
            if let Some(pv) = prev {
                if v != pv && nl >= min_leaf && n - nl >= min_leaf {
                    let right_sum = total - left_sum;
                    let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / (n - nl) as f64 - base;
                    if best.is_none_or(|b| gain > b.0) {
                        best = Some((gain, f, midpoint(pv, v)));
                    }
                }
            }
            left_sum += r[i];
            prev = Some(v);
        }
    }
    // zero-gain splits are kept: they can set up gains one level down (XOR)
    best.map(|b| (b.1, b.2))
}

/// Per-feature row indices sorted by value (ties by row index).
pub fn presort(x: Matrix<'_>) -> Vec<Vec<usize>> {
    (0..x.cols)
        .map(|f| {
            let mut idx: Vec<usize> = (0..x.rows()).collect();
            idx.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
            idx
        })
        .collect()
}
