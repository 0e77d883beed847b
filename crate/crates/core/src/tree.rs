//! Regression trees, random forests and gradient boosting.
//!
//! A single split kernel serves both tree families. Each row carries a
//! gradient `g` and hessian `h`; a node with sums `G`, `H` has weight
//! `−G/(H+λ)` and a split scores
//!
//! ```text
//! ½·[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)]
//! ```
//!
//! Plain regression uses `g = −y`, `h = 1`, `λ = 0`, which turns the weight
//! into the node mean and the score into half the variance reduction.
//! Boosting with squared loss uses `g = ŷ − y`, `h = 1`.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::predictor::Predictor;
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        /// rows with `x[feature] <= threshold` go left
        threshold: f64,
        left: usize,
        right: usize,
        value: f64,
        cover: f64,
    },
    Leaf {
        value: f64,
        cover: f64,
    },
}

impl TreeNode {
    pub fn value(&self) -> f64 {
        match *self {
            TreeNode::Split { value, .. } | TreeNode::Leaf { value, .. } => value,
        }
    }

    pub fn cover(&self) -> f64 {
        match *self {
            TreeNode::Split { cover, .. } | TreeNode::Leaf { cover, .. } => cover,
        }
    }
}

/// Arena of nodes; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TreeArrays", try_from = "TreeArrays")]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

/// Serialized form: parallel node arrays, `-1` marking absent features and children.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TreeArrays {
    feature: Vec<i64>,
    threshold: Vec<f64>,
    left: Vec<i64>,
    right: Vec<i64>,
    value: Vec<f64>,
    cover: Vec<f64>,
}

impl From<Tree> for TreeArrays {
    fn from(t: Tree) -> Self {
        let n = t.nodes.len();
        let mut a = TreeArrays {
            feature: Vec::with_capacity(n),
            threshold: Vec::with_capacity(n),
            left: Vec::with_capacity(n),
            right: Vec::with_capacity(n),
            value: Vec::with_capacity(n),
            cover: Vec::with_capacity(n),
        };
        for node in &t.nodes {
            match *node {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    value,
                    cover,
                } => {
                    a.feature.push(feature as i64);
                    a.threshold.push(threshold);
                    a.left.push(left as i64);
                    a.right.push(right as i64);
                    a.value.push(value);
                    a.cover.push(cover);
                }
                TreeNode::Leaf { value, cover } => {
                    a.feature.push(-1);
                    a.threshold.push(0.0);
                    a.left.push(-1);
                    a.right.push(-1);
                    a.value.push(value);
                    a.cover.push(cover);
                }
            }
        }
        a
    }
}

impl TryFrom<TreeArrays> for Tree {
    type Error = String;

    fn try_from(a: TreeArrays) -> std::result::Result<Self, String> {
        let n = a.feature.len();
        if n == 0 {
            return Err("tree has no nodes".into());
        }
        if [
            a.threshold.len(),
            a.left.len(),
            a.right.len(),
            a.value.len(),
            a.cover.len(),
        ]
        .iter()
        .any(|&l| l != n)
        {
            return Err("node arrays differ in length".into());
        }
        let mut referenced = vec![0usize; n];
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            if !a.value[i].is_finite() {
                return Err(format!("node {i} has a non-finite value"));
            }
            if a.feature[i] < 0 {
                if a.left[i] != -1 || a.right[i] != -1 {
                    return Err(format!("leaf {i} has children"));
                }
                nodes.push(TreeNode::Leaf {
                    value: a.value[i],
                    cover: a.cover[i],
                });
                continue;
            }
            let child = |c: i64| -> std::result::Result<usize, String> {
                if c <= i as i64 || c >= n as i64 {
                    return Err(format!("node {i} has invalid child {c}"));
                }
                Ok(c as usize)
            };
            let (left, right) = (child(a.left[i])?, child(a.right[i])?);
            if left == right {
                return Err(format!("node {i} has identical children"));
            }
            if !a.threshold[i].is_finite() {
                return Err(format!("node {i} has a non-finite threshold"));
            }
            referenced[left] += 1;
            referenced[right] += 1;
            nodes.push(TreeNode::Split {
                feature: a.feature[i] as usize,
                threshold: a.threshold[i],
                left,
                right,
                value: a.value[i],
                cover: a.cover[i],
            });
        }
        if referenced[0] != 0 || referenced[1..].iter().any(|&r| r != 1) {
            return Err("every non-root node must have exactly one parent".into());
        }
        Ok(Tree { nodes })
    }
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![TreeNode::Leaf { value, cover: 0.0 }],
        }
    }

    /// A depth-1 tree.
    pub fn stump(feature: usize, threshold: f64, left_value: f64, right_value: f64) -> Self {
        Tree {
            nodes: vec![
                TreeNode::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                    value: 0.5 * (left_value + right_value),
                    cover: 0.0,
                },
                TreeNode::Leaf {
                    value: left_value,
                    cover: 0.0,
                },
                TreeNode::Leaf {
                    value: right_value,
                    cover: 0.0,
                },
            ],
        }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { .. } => return i,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if row[feature] <= threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.nodes[self.leaf_index(row)].value()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(*feature),
                _ => None,
            })
            .max()
    }
}

/// Per-row fitting targets.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    /// Variance-reduction splits with mean leaves.
    Plain(&'a [f64]),
    /// Second-order boosting statistics.
    Gradient {
        gradients: &'a [f64],
        hessians: &'a [f64],
    },
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Plain(y) => y.len(),
            Targets::Gradient { gradients, .. } => gradients.len(),
        }
    }

    #[inline]
    fn stats(&self, i: usize) -> (f64, f64) {
        match self {
            Targets::Plain(y) => (-y[i], 1.0),
            Targets::Gradient {
                gradients,
                hessians,
            } => (gradients[i], hessians[i]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features drawn uniformly per split; `None` uses every allowed feature.
    pub max_features: Option<usize>,
    /// L2 penalty on leaf weights. Ignored in plain mode.
    pub reg_lambda: f64,
    pub min_split_gain: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 6,
            min_samples_leaf: 1,
            max_features: None,
            reg_lambda: 1.0,
            min_split_gain: 0.0,
        }
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    targets: Targets<'a>,
    features: &'a [usize],
    params: TreeParams,
    lambda: f64,
    rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<TreeNode>,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn weight(&self, g: f64, h: f64) -> f64 {
        let d = h + self.lambda;
        if d > 0.0 {
            -g / d
        } else {
            0.0
        }
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        let d = h + self.lambda;
        if d > 0.0 {
            g * g / d
        } else {
            0.0
        }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < self.features.len() => {
                let mut picked: Vec<usize> = sample(rng, self.features.len(), k)
                    .into_iter()
                    .map(|i| self.features[i])
                    .collect();
                picked.sort_unstable();
                picked
            }
            _ => self.features.to_vec(),
        }
    }

    fn best_split(&mut self, rows: &[usize], g_total: f64, h_total: f64) -> Option<Candidate> {
        let parent = self.score(g_total, h_total);
        let min_leaf = self.params.min_samples_leaf.max(1);
        let m = rows.len();
        let mut best: Option<Candidate> = None;
        let mut order: Vec<(f64, f64, f64)> = Vec::with_capacity(m);
        for f in self.candidate_features() {
            order.clear();
            order.extend(rows.iter().map(|&i| {
                let (g, h) = self.targets.stats(i);
                (self.x.get(i, f), g, h)
            }));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..m - 1 {
                gl += order[k].1;
                hl += order[k].2;
                let (lo, hi) = (order[k].0, order[k + 1].0);
                if lo == hi || k + 1 < min_leaf || m - k - 1 < min_leaf {
                    continue;
                }
                let gain =
                    0.5 * (self.score(gl, hl) + self.score(g_total - gl, h_total - hl) - parent);
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mid = 0.5 * (lo + hi);
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(Candidate {
                        gain,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        // rounding can leave a tiny positive gain on a pure node
        let floor = self.params.min_split_gain + 1e-10 * (parent.abs() + 1e-300);
        best.filter(|b| b.gain > floor)
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let (g, h) = rows.iter().fold((0.0, 0.0), |(g, h), &i| {
            let (gi, hi) = self.targets.stats(i);
            (g + gi, h + hi)
        });
        let value = self.weight(g, h);
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value, cover: h });
        if depth >= self.params.max_depth || rows.len() < 2 * self.params.min_samples_leaf.max(1) {
            return id;
        }
        let Some(split) = self.best_split(rows, g, h) else {
            return id;
        };
        let f = split.feature;
        let x = self.x;
        let mut cut = 0;
        for k in 0..rows.len() {
            if x.get(rows[k], f) <= split.threshold {
                rows.swap(cut, k);
                cut += 1;
            }
        }
        let (l_rows, r_rows) = rows.split_at_mut(cut);
        let left = self.grow(l_rows, depth + 1);
        let right = self.grow(r_rows, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: f,
            threshold: split.threshold,
            left,
            right,
            value,
            cover: h,
        };
        id
    }
}

fn build_tree(
    x: &Matrix,
    targets: Targets<'_>,
    rows: &mut [usize],
    features: &[usize],
    params: TreeParams,
    rng: Option<&mut ChaCha8Rng>,
) -> Tree {
    let lambda = match targets {
        Targets::Plain(_) => 0.0,
        Targets::Gradient { .. } => params.reg_lambda,
    };
    let mut b = Builder {
        x,
        targets,
        features,
        params,
        lambda,
        rng,
        nodes: Vec::new(),
    };
    b.grow(rows, 0);
    Tree { nodes: b.nodes }
}

/// Greedy exact CART fit on every row and feature of `x`.
///
/// `params.max_features`, if set, is ignored here: per-split sampling needs
/// a random stream and belongs to [`fit_random_forest`].
pub fn fit_regression_tree(x: &Matrix, targets: Targets<'_>, params: &TreeParams) -> Result<Tree> {
    let n = targets.len();
    if n == 0 {
        return Err(Error::invalid("cannot fit a tree on empty input"));
    }
    if x.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: n,
        });
    }
    if let Targets::Gradient { hessians, .. } = targets {
        if hessians.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: hessians.len(),
            });
        }
    }
    let mut rows: Vec<usize> = (0..n).collect();
    let features: Vec<usize> = (0..x.ncols()).collect();
    let params = TreeParams {
        max_features: None,
        ..*params
    };
    Ok(build_tree(x, targets, &mut rows, &features, params, None))
}

/// How tree outputs combine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Aggregation {
    /// `base + mean(tree outputs)`
    Mean,
    /// `base + learning_rate · Σ tree outputs`
    Scaled { learning_rate: f64 },
}

/// Serializable tree ensemble shared by forests and boosted models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub n_features: usize,
    pub base_score: f64,
    pub aggregation: Aggregation,
    pub trees: Vec<Tree>,
}

impl TreeEnsemble {
    /// Factor applied to each tree's output.
    pub fn tree_weight(&self) -> f64 {
        match self.aggregation {
            Aggregation::Mean => 1.0 / self.trees.len().max(1) as f64,
            Aggregation::Scaled { learning_rate } => learning_rate,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let e: TreeEnsemble = serde_json::from_str(s)?;
        if let Some(f) = e.trees.iter().filter_map(Tree::max_feature).max() {
            if f >= e.n_features {
                return Err(Error::invalid(format!(
                    "tree splits on feature {f} but the ensemble has {}",
                    e.n_features
                )));
            }
        }
        Ok(e)
    }
}

impl Predictor for TreeEnsemble {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        match self.aggregation {
            Aggregation::Mean if self.trees.is_empty() => self.base_score,
            Aggregation::Mean => self.base_score + sum / self.trees.len() as f64,
            Aggregation::Scaled { learning_rate } => self.base_score + learning_rate * sum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub max_features: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: 9,
            max_features: 4,
            min_samples_leaf: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub ensemble: TreeEnsemble,
}

impl Predictor for ForestModel {
    fn n_features(&self) -> usize {
        self.ensemble.n_features
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        self.ensemble.predict_row(row)
    }
}

/// Bagged CART forest. Tree `i` draws its bootstrap sample and per-split
/// feature subsets from the stream `derive(seed, "forest", i)`, so the
/// result does not depend on the number of worker threads.
pub fn fit_random_forest(x: &Matrix, y: &[f64], params: &ForestParams) -> Result<ForestModel> {
    let n = y.len();
    let p = x.ncols();
    if n == 0 {
        return Err(Error::invalid("cannot fit a forest on empty input"));
    }
    if x.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: n,
        });
    }
    if params.n_estimators == 0 {
        return Err(Error::invalid("n_estimators must be >= 1"));
    }
    if params.max_features == 0 || params.max_features > p {
        return Err(Error::invalid(format!(
            "max_features must lie in 1..={p}, got {}",
            params.max_features
        )));
    }
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: Some(params.max_features),
        reg_lambda: 0.0,
        min_split_gain: 0.0,
    };
    let features: Vec<usize> = (0..p).collect();
    let trees: Vec<Tree> = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeds::rng(seeds::derive(params.seed, "forest", t as u64));
            let mut rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            build_tree(
                x,
                Targets::Plain(y),
                &mut rows,
                &features,
                tree_params,
                Some(&mut rng),
            )
        })
        .collect();
    Ok(ForestModel {
        params: *params,
        ensemble: TreeEnsemble {
            n_features: p,
            base_score: 0.0,
            aggregation: Aggregation::Mean,
            trees,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub reg_lambda: f64,
    pub min_split_gain: f64,
    /// Defaults to `mean(y)` when absent.
    pub base_score: Option<f64>,
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.3,
            n_estimators: 100,
            max_depth: 6,
            subsample: 1.0,
            colsample_bytree: 1.0,
            reg_lambda: 1.0,
            min_split_gain: 0.0,
            base_score: None,
            seed: 0,
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be > 0"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::invalid("subsample must lie in (0, 1]"));
        }
        if !(self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0) {
            return Err(Error::invalid("colsample_bytree must lie in (0, 1]"));
        }
        if !(self.reg_lambda >= 0.0) {
            return Err(Error::invalid("reg_lambda must be >= 0"));
        }
        if !(self.min_split_gain >= 0.0) {
            return Err(Error::invalid("min_split_gain must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub params: BoostParams,
    pub ensemble: TreeEnsemble,
    /// Mean squared training loss after each round (index 0 = base score only).
    #[serde(skip)]
    pub training_loss: Vec<f64>,
}

impl BoostedModel {
    pub fn base_score(&self) -> f64 {
        self.ensemble.base_score
    }

    pub fn learning_rate(&self) -> f64 {
        self.params.learning_rate
    }

    pub fn trees(&self) -> &[Tree] {
        &self.ensemble.trees
    }
}

impl Predictor for BoostedModel {
    fn n_features(&self) -> usize {
        self.ensemble.n_features
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        self.ensemble.predict_row(row)
    }
}

fn subsample_count(frac: f64, total: usize) -> usize {
    ((frac * total as f64).round() as usize).clamp(1, total)
}

/// Squared-loss gradient boosting. Rounds are sequential; round `t` samples
/// rows and columns from `derive(seed, "boost", t)`.
pub fn fit_gradient_boosting(x: &Matrix, y: &[f64], params: &BoostParams) -> Result<BoostedModel> {
    params.validate()?;
    let n = y.len();
    let p = x.ncols();
    if n == 0 {
        return Err(Error::invalid("cannot boost on empty input"));
    }
    if x.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: n,
        });
    }
    let base = params
        .base_score
        .unwrap_or_else(|| y.iter().sum::<f64>() / n as f64);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: 1,
        max_features: None,
        reg_lambda: params.reg_lambda,
        min_split_gain: params.min_split_gain,
    };
    let mse = |pred: &[f64]| -> f64 {
        pred.iter()
            .zip(y)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / n as f64
    };
    let mut pred = vec![base; n];
    let mut loss = vec![mse(&pred)];
    let hess = vec![1.0; n];
    let mut grad = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.n_estimators);
    let n_rows = subsample_count(params.subsample, n);
    let n_cols = subsample_count(params.colsample_bytree, p.max(1)).min(p);
    for t in 0..params.n_estimators {
        for i in 0..n {
            grad[i] = pred[i] - y[i];
        }
        let mut rng = seeds::rng(seeds::derive(params.seed, "boost", t as u64));
        let mut rows: Vec<usize> = if n_rows < n {
            let mut r = sample(&mut rng, n, n_rows).into_vec();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        let cols: Vec<usize> = if n_cols < p {
            let mut c = sample(&mut rng, p, n_cols).into_vec();
            c.sort_unstable();
            c
        } else {
            (0..p).collect()
        };
        let tree = build_tree(
            x,
            Targets::Gradient {
                gradients: &grad,
                hessians: &hess,
            },
            &mut rows,
            &cols,
            tree_params,
            None,
        );
        for (i, pi) in pred.iter_mut().enumerate() {
            *pi += params.learning_rate * tree.predict_row(x.row(i));
        }
        loss.push(mse(&pred));
        trees.push(tree);
    }
    Ok(BoostedModel {
        params: *params,
        ensemble: TreeEnsemble {
            n_features: p,
            base_score: base,
            aggregation: Aggregation::Scaled {
                learning_rate: params.learning_rate,
            },
            trees,
        },
        training_loss: loss,
    })
}
