//! Multi-class learners with probability outputs: a Gini CART tree, a
//! random forest of such trees, and SAMME AdaBoost over depth-1 trees.
//!
//! Every learner is deterministic for a given seed. Forest trees are grown
//! in parallel, each with its own ChaCha stream keyed by tree index, so the
//! thread schedule never changes the result.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    names: Option<Vec<String>>,
}

impl Matrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Matrix::from_flat(rows.len(), n_cols, data)
    }

    pub fn from_flat(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_cols,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix contains non-finite values"));
        }
        Ok(Matrix {
            n_rows,
            n_cols,
            data,
            names: None,
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                found: names.len(),
            });
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            n_rows: indices.len(),
            n_cols: self.n_cols,
            data,
            names: self.names.clone(),
        }
    }
}

/// Class probabilities in fixed class order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!("invalid probability vector {p:?}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::invalid(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(ProbabilityVector(p))
    }

    /// Scales non-negative weights to sum 1; all-zero weights give uniform.
    pub fn normalized(weights: &[f64]) -> Self {
        let sum: f64 = weights.iter().sum();
        if sum > 0.0 {
            ProbabilityVector(weights.iter().map(|w| w / sum).collect())
        } else {
            Self::uniform(weights.len())
        }
    }

    pub fn uniform(n: usize) -> Self {
        ProbabilityVector(vec![1.0 / n as f64; n])
    }

    pub fn one_hot(n: usize, class: usize) -> Self {
        let mut v = vec![0.0; n];
        v[class] = 1.0;
        ProbabilityVector(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Most probable class; ties go to the lower index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `1 - Σ pᵢ²` over (possibly weighted) class counts.
pub fn gini_impurity(counts: &[f64]) -> Result<f64> {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("gini impurity of an empty node"));
    }
    Ok(gini(counts, total))
}

fn gini(counts: &[f64], total: f64) -> f64 {
    1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>()
}

/// Smallest impurity decrease that counts as an improvement.
pub const MIN_DECREASE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub decrease: f64,
}

/// Best Gini split over `features`, or `None` when no split lowers impurity.
///
/// Thresholds are midpoints between consecutive distinct values; samples
/// with `x <= threshold` go left. Ties keep the lowest feature index, then
/// the lowest threshold.
pub fn best_split(x: &Matrix, y: &[usize], n_classes: usize, features: &[usize]) -> Result<Option<Split>> {
    check_xy(x, y, n_classes)?;
    let samples: Vec<usize> = (0..x.n_rows()).collect();
    let weights = vec![1.0; x.n_rows()];
    let mut sorted: Vec<usize> = features.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    Ok(find_split(x, y, &weights, &samples, n_classes, &sorted, 1))
}

fn find_split(
    x: &Matrix,
    y: &[usize],
    w: &[f64],
    samples: &[usize],
    n_classes: usize,
    features: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    let n = samples.len();
    if n < 2 || n < 2 * min_leaf {
        return None;
    }
    let mut total = vec![0.0; n_classes];
    for &s in samples {
        total[y[s]] += w[s];
    }
    let total_w: f64 = total.iter().sum();
    let parent = gini(&total, total_w);
    let mut best: Option<Split> = None;
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut left = vec![0.0; n_classes];
    let mut right = vec![0.0; n_classes];
    for &f in features {
        order.clear();
        order.extend(samples.iter().map(|&s| (x.get(s, f), s)));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        left.iter_mut().for_each(|c| *c = 0.0);
        for p in 0..n - 1 {
            let (v, s) = order[p];
            left[y[s]] += w[s];
            let next = order[p + 1].0;
            if next <= v || p + 1 < min_leaf || n - p - 1 < min_leaf {
                continue;
            }
            let left_w: f64 = left.iter().sum();
            let right_w = total_w - left_w;
            if left_w <= 0.0 || right_w <= 0.0 {
                continue;
            }
            for c in 0..n_classes {
                right[c] = total[c] - left[c];
            }
            let decrease =
                parent - (left_w / total_w) * gini(&left, left_w) - (right_w / total_w) * gini(&right, right_w);
            if decrease > MIN_DECREASE && best.is_none_or(|b| decrease > b.decrease) {
                best = Some(Split {
                    feature: f,
                    threshold: midpoint(v, next),
                    decrease,
                });
            }
        }
    }
    best
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m < b {
        m
    } else {
        a
    }
}

fn check_xy(x: &Matrix, y: &[usize], n_classes: usize) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            found: y.len(),
        });
    }
    if n_classes == 0 {
        return Err(Error::invalid("n_classes must be >= 1"));
    }
    if let Some(bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::invalid(format!("label {bad} outside {n_classes} classes")));
    }
    Ok(())
}

/// How many features a node may consider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    #[default]
    All,
    /// `ceil(sqrt(d))`
    Sqrt,
    Fixed(usize),
}

impl MaxFeatures {
    fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
            MaxFeatures::Fixed(m) => m,
        }
        .clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        counts: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub n_features: usize,
    pub n_classes: usize,
    pub params: TreeParams,
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

struct Grower<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    w: &'a [f64],
    n_classes: usize,
    params: TreeParams,
    n_candidates: usize,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn grow(&mut self, samples: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let mut counts = vec![0.0; self.n_classes];
        for &s in samples {
            counts[self.y[s]] += self.w[s];
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts: counts.clone() });
        let pure = counts.iter().filter(|c| **c > 0.0).count() <= 1;
        if pure || self.params.max_depth.is_some_and(|m| depth >= m) {
            return id;
        }
        let d = self.x.n_cols();
        let features: Vec<usize> = if self.n_candidates >= d {
            (0..d).collect()
        } else {
            let mut f = sample(rng, d, self.n_candidates).into_vec();
            f.sort_unstable();
            f
        };
        let Some(split) = find_split(
            self.x,
            self.y,
            self.w,
            samples,
            self.n_classes,
            &features,
            self.params.min_samples_leaf,
        ) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&s| self.x.get(s, split.feature) <= split.threshold);
        let left = self.grow(&l, depth + 1, rng);
        let right = self.grow(&r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

fn grow_tree(
    x: &Matrix,
    y: &[usize],
    w: &[f64],
    samples: &[usize],
    n_classes: usize,
    params: TreeParams,
    rng: &mut ChaCha8Rng,
) -> TreeModel {
    let mut g = Grower {
        x,
        y,
        w,
        n_classes,
        params,
        n_candidates: params.max_features.resolve(x.n_cols()),
        nodes: Vec::new(),
    };
    g.grow(samples, 0, rng);
    TreeModel {
        n_features: x.n_cols(),
        n_classes,
        params,
        nodes: g.nodes,
    }
}

pub fn train_decision_tree(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    params: TreeParams,
    seed: u64,
) -> Result<TreeModel> {
    check_xy(x, y, n_classes)?;
    if y.is_empty() {
        return Err(Error::invalid("cannot train on zero samples"));
    }
    let samples: Vec<usize> = (0..y.len()).collect();
    let w = vec![1.0; y.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(grow_tree(x, y, &w, &samples, n_classes, params, &mut rng))
}

impl TreeModel {
    fn leaf_counts(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    fn predict_class(&self, x: &[f64]) -> usize {
        argmax(self.leaf_counts(x))
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
            max_depth: None,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub seed: u64,
    pub trees: Vec<TreeModel>,
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

pub fn train_random_forest(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    params: ForestParams,
    seed: u64,
) -> Result<ForestModel> {
    check_xy(x, y, n_classes)?;
    if y.is_empty() {
        return Err(Error::invalid("cannot train on zero samples"));
    }
    if params.n_trees == 0 {
        return Err(Error::invalid("n_trees must be >= 1"));
    }
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: params.max_features,
    };
    let n = y.len();
    let w = vec![1.0; n];
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(seed, t);
            let samples: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(x, y, &w, &samples, n_classes, tree_params, &mut rng)
        })
        .collect();
    Ok(ForestModel { params, seed, trees })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_stages: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams { n_stages: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostStage {
    pub stump: TreeModel,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub n_classes: usize,
    pub stages: Vec<BoostStage>,
}

/// Floor on the weighted error used in the stage weight, keeping it finite
/// when a stump is perfect.
const MIN_STAGE_ERROR: f64 = 1e-10;

/// SAMME boosting of depth-1 trees.
///
/// Stage weight is `ln((1 - err) / err) + ln(K - 1)`. Training stops early
/// on a perfect stump or when `err >= 1 - 1/K`; in the latter case a first
/// stage is still kept, with weight 0.
pub fn train_adaboost(x: &Matrix, y: &[usize], n_classes: usize, params: BoostParams, seed: u64) -> Result<BoostModel> {
    check_xy(x, y, n_classes)?;
    if n_classes < 2 {
        return Err(Error::invalid("boosting needs at least two classes"));
    }
    if y.is_empty() {
        return Err(Error::invalid("cannot train on zero samples"));
    }
    if params.n_stages == 0 {
        return Err(Error::invalid("n_stages must be >= 1"));
    }
    let n = y.len();
    let samples: Vec<usize> = (0..n).collect();
    let mut w = vec![1.0 / n as f64; n];
    let stump_params = TreeParams {
        max_depth: Some(1),
        min_samples_leaf: 1,
        max_features: MaxFeatures::All,
    };
    let k = n_classes as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stages = Vec::new();
    for _ in 0..params.n_stages {
        let stump = grow_tree(x, y, &w, &samples, n_classes, stump_params, &mut rng);
        let wrong: Vec<bool> = (0..n).map(|i| stump.predict_class(x.row(i)) != y[i]).collect();
        let total: f64 = w.iter().sum();
        let err = wrong.iter().zip(&w).filter(|(m, _)| **m).map(|(_, wi)| wi).sum::<f64>() / total;
        if err >= 1.0 - 1.0 / k {
            if stages.is_empty() {
                stages.push(BoostStage { stump, alpha: 0.0 });
            }
            break;
        }
        let e = err.max(MIN_STAGE_ERROR);
        let alpha = ((1.0 - e) / e).ln() + (k - 1.0).ln();
        stages.push(BoostStage { stump, alpha });
        if err <= 0.0 {
            break;
        }
        let factor = alpha.exp();
        for (wi, m) in w.iter_mut().zip(&wrong) {
            if *m {
                *wi *= factor;
            }
        }
        let sum: f64 = w.iter().sum();
        w.iter_mut().for_each(|wi| *wi /= sum);
    }
    Ok(BoostModel { n_classes, stages })
}

impl BoostModel {
    fn votes(&self, x: &[f64], stages: usize) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for s in &self.stages[..stages] {
            votes[s.stump.predict_class(x)] += s.alpha;
        }
        votes
    }

    /// Class predicted by the first `stages` stages.
    pub fn predict_class_at(&self, x: &[f64], stages: usize) -> usize {
        argmax(&self.votes(x, stages.min(self.stages.len())))
    }
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Tree,
    #[default]
    Forest,
    #[serde(rename = "adaboost")]
    AdaBoost,
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree" => Ok(ClassifierKind::Tree),
            "forest" => Ok(ClassifierKind::Forest),
            "adaboost" => Ok(ClassifierKind::AdaBoost),
            other => Err(Error::invalid(format!(
                "unknown classifier `{other}` (expected tree|forest|adaboost)"
            ))),
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::Tree => "tree",
            ClassifierKind::Forest => "forest",
            ClassifierKind::AdaBoost => "adaboost",
        })
    }
}

/// A learner type together with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Tree(TreeParams),
    Forest(ForestParams),
    #[serde(rename = "adaboost")]
    AdaBoost(BoostParams),
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec::Forest(ForestParams::default())
    }
}

impl From<ClassifierKind> for ClassifierSpec {
    fn from(kind: ClassifierKind) -> Self {
        match kind {
            ClassifierKind::Tree => ClassifierSpec::Tree(TreeParams::default()),
            ClassifierKind::Forest => ClassifierSpec::Forest(ForestParams::default()),
            ClassifierKind::AdaBoost => ClassifierSpec::AdaBoost(BoostParams::default()),
        }
    }
}

impl ClassifierSpec {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierSpec::Tree(_) => ClassifierKind::Tree,
            ClassifierSpec::Forest(_) => ClassifierKind::Forest,
            ClassifierSpec::AdaBoost(_) => ClassifierKind::AdaBoost,
        }
    }

    pub fn fit(&self, x: &Matrix, y: &[usize], n_classes: usize, seed: u64) -> Result<Model> {
        let model = match *self {
            ClassifierSpec::Tree(p) => Model::Tree(train_decision_tree(x, y, n_classes, p, seed)?),
            ClassifierSpec::Forest(p) => Model::Forest(train_random_forest(x, y, n_classes, p, seed)?),
            ClassifierSpec::AdaBoost(p) => Model::Boost(train_adaboost(x, y, n_classes, p, seed)?),
        };
        Ok(model)
    }
}

/// Any trained learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Model {
    Tree(TreeModel),
    Forest(ForestModel),
    Boost(BoostModel),
}

impl Model {
    pub fn n_features(&self) -> usize {
        match self {
            Model::Tree(t) => t.n_features,
            Model::Forest(f) => f.trees[0].n_features,
            Model::Boost(b) => b.stages[0].stump.n_features,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Model::Tree(t) => t.n_classes,
            Model::Forest(f) => f.trees[0].n_classes,
            Model::Boost(b) => b.n_classes,
        }
    }

    /// Tree: normalized leaf counts. Forest: mean of tree outputs. Boost:
    /// softmax of per-class summed stage weights.
    pub fn predict_proba(&self, x: &[f64]) -> Result<ProbabilityVector> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        let p = match self {
            Model::Tree(t) => ProbabilityVector::normalized(t.leaf_counts(x)),
            Model::Forest(f) => {
                let mut acc = vec![0.0; self.n_classes()];
                for t in &f.trees {
                    let p = ProbabilityVector::normalized(t.leaf_counts(x));
                    for (a, v) in acc.iter_mut().zip(p.as_slice()) {
                        *a += v;
                    }
                }
                ProbabilityVector::normalized(&acc)
            }
            Model::Boost(b) => ProbabilityVector::normalized(&softmax(&b.votes(x, b.stages.len()))),
        };
        Ok(p)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(self.predict_proba(x)?.argmax())
    }
}

pub const MODEL_FORMAT: &str = "rolecast.model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelEnvelope<T> {
    format: String,
    version: u32,
    model: T,
}

/// Versioned JSON text. Floats round-trip exactly.
pub fn model_to_json(model: &Model) -> String {
    serde_json::to_string_pretty(&ModelEnvelope {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        model,
    })
    .expect("models always serialize")
}

pub fn model_from_json(text: &str) -> Result<Model> {
    let env: ModelEnvelope<Model> = serde_json::from_str(text)?;
    if env.format != MODEL_FORMAT || env.version != MODEL_VERSION {
        return Err(Error::Format(format!(
            "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
            env.format, env.version
        )));
    }
    Ok(env.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini_impurity(&[5.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((gini_impurity(&[1.0, 1.0, 1.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(gini_impurity(&[2.0, 1.0, 1.0]).unwrap(), 0.625);
        assert!(gini_impurity(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn split_examples() {
        let x = m(&[&[0.0], &[0.0], &[1.0], &[1.0]]);
        let s = best_split(&x, &[0, 0, 1, 1], 2, &[0]).unwrap().unwrap();
        assert_eq!((s.feature, s.threshold, s.decrease), (0, 0.5, 0.5));
        let same = m(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]]);
        assert!(best_split(&same, &[0, 1, 2], 3, &[0, 1]).unwrap().is_none());
    }

    #[test]
    fn tree_examples() {
        let x = m(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        let y = [0, 0, 1, 1];
        let t = train_decision_tree(&x, &y, 2, TreeParams::default(), 0).unwrap();
        assert_eq!(t.depth(), 1);
        let model = Model::Tree(t);
        for (i, &c) in y.iter().enumerate() {
            assert_eq!(model.predict(x.row(i)).unwrap(), c);
        }
        let pure = train_decision_tree(&x, &[1, 1, 1, 1], 3, TreeParams::default(), 0).unwrap();
        assert_eq!(pure.nodes.len(), 1);
        assert_eq!(
            Model::Tree(pure).predict_proba(&[9.0]).unwrap().as_slice(),
            &[0.0, 1.0, 0.0]
        );
        assert!(train_decision_tree(&x, &[0, 1], 2, TreeParams::default(), 0).is_err());
    }

    #[test]
    fn xor_needs_depth_two() {
        let x = m(&[
            &[0.0, 0.0],
            &[0.0, 1.0],
            &[1.0, 0.0],
            &[1.0, 1.0],
            &[0.1, 0.1],
            &[0.1, 0.9],
            &[0.9, 0.1],
            &[0.9, 0.9],
        ]);
        let y = [0, 1, 1, 0, 0, 1, 1, 0];
        // every root split of balanced XOR has zero gain, so greedy growth stops
        let t = train_decision_tree(
            &x,
            &y,
            2,
            TreeParams {
                max_depth: Some(2),
                ..Default::default()
            },
            0,
        )
        .unwrap();
        assert_eq!(t.nodes.len(), 1);
        // one extra point breaks the symmetry; depth 2 then fits exactly
        let x = m(&[&[0.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 0.2]]);
        let y = [0, 1, 1, 0, 0];
        let t = train_decision_tree(
            &x,
            &y,
            2,
            TreeParams {
                max_depth: Some(2),
                ..Default::default()
            },
            0,
        )
        .unwrap();
        assert!((0..5).all(|i| t.predict_class(x.row(i)) == y[i]));
        assert!(t.depth() <= 2);
    }

    #[test]
    fn forest_determinism_and_reduction() {
        let x = m(&[
            &[0.0, 5.0],
            &[1.0, 3.0],
            &[2.0, 1.0],
            &[3.0, 0.0],
            &[4.0, 2.0],
            &[5.0, 4.0],
        ]);
        let y = [0, 0, 1, 1, 2, 2];
        let a = train_random_forest(
            &x,
            &y,
            3,
            ForestParams {
                n_trees: 7,
                ..Default::default()
            },
            11,
        )
        .unwrap();
        let b = train_random_forest(
            &x,
            &y,
            3,
            ForestParams {
                n_trees: 7,
                ..Default::default()
            },
            11,
        )
        .unwrap();
        assert_eq!(a, b);
        let single = train_random_forest(
            &x,
            &y,
            3,
            ForestParams {
                n_trees: 1,
                bootstrap: false,
                max_features: MaxFeatures::All,
                ..Default::default()
            },
            5,
        )
        .unwrap();
        let tree = train_decision_tree(&x, &y, 3, TreeParams::default(), 5).unwrap();
        assert_eq!(single.trees[0].nodes, tree.nodes);
    }

    #[test]
    fn forest_averages_tree_outputs() {
        let leaf = |counts: Vec<f64>| TreeModel {
            n_features: 1,
            n_classes: 3,
            params: TreeParams::default(),
            nodes: vec![Node::Leaf { counts }],
        };
        let f = Model::Forest(ForestModel {
            params: ForestParams {
                n_trees: 2,
                ..Default::default()
            },
            seed: 0,
            trees: vec![leaf(vec![1.0, 0.0, 0.0]), leaf(vec![0.0, 1.0, 0.0])],
        });
        assert_eq!(f.predict_proba(&[0.0]).unwrap().as_slice(), &[0.5, 0.5, 0.0]);
        assert!(f.predict_proba(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn adaboost_perfect_first_stump() {
        let x = m(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        let y = [0, 0, 1, 1];
        let b = train_adaboost(&x, &y, 2, BoostParams::default(), 0).unwrap();
        assert_eq!(b.stages.len(), 1);
        let model = Model::Boost(b);
        assert!((0..4).all(|i| model.predict(x.row(i)).unwrap() == y[i]));
    }

    #[test]
    fn adaboost_two_class_alpha_is_classic() {
        let x = m(&[&[0.0], &[1.0], &[2.0], &[3.0], &[4.0]]);
        let y = [0, 0, 1, 0, 1];
        let b = train_adaboost(&x, &y, 2, BoostParams { n_stages: 1 }, 0).unwrap();
        let err: f64 = 1.0 / 5.0;
        assert!((b.stages[0].alpha - ((1.0 - err) / err).ln()).abs() < 1e-12);
    }

    #[test]
    fn model_json_round_trip_is_bit_exact() {
        let x = m(&[
            &[0.1, 5.3],
            &[1.7, 3.1],
            &[2.2, 1.9],
            &[3.3, 0.7],
            &[4.9, 2.2],
            &[5.1, 4.4],
        ]);
        let y = [0, 0, 1, 1, 2, 2];
        for spec in [ClassifierKind::Tree, ClassifierKind::Forest, ClassifierKind::AdaBoost] {
            let model = ClassifierSpec::from(spec).fit(&x, &y, 3, 3).unwrap();
            let back = model_from_json(&model_to_json(&model)).unwrap();
            assert_eq!(back, model);
            for probe in [[0.0, 0.0], [2.0, 2.0], [9.0, 1.0]] {
                assert_eq!(
                    model.predict_proba(&probe).unwrap(),
                    back.predict_proba(&probe).unwrap()
                );
            }
        }
        assert!(model_from_json(
            r#"{"format":"other","version":1,"model":{"type":"boost","n_classes":2,"stages":[]}}"#
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn monotone_feature_transform_keeps_predictions(
            rows in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0usize..3), 4..30),
        ) {
            let x = Matrix::from_rows(&rows.iter().map(|r| vec![r.0, r.1]).collect::<Vec<_>>()).unwrap();
            let cubed = Matrix::from_rows(&rows.iter().map(|r| vec![r.0.powi(3), r.1]).collect::<Vec<_>>()).unwrap();
            let y: Vec<usize> = rows.iter().map(|r| r.2).collect();
            let a = train_decision_tree(&x, &y, 3, TreeParams::default(), 0).unwrap();
            let b = train_decision_tree(&cubed, &y, 3, TreeParams::default(), 0).unwrap();
            for i in 0..rows.len() {
                prop_assert_eq!(a.predict_class(x.row(i)), b.predict_class(cubed.row(i)));
            }
        }

        #[test]
        fn outputs_are_distributions(
            rows in proptest::collection::vec((-5.0f64..5.0, 0.0f64..1.0, 0usize..3), 3..25),
            probe in (-6.0f64..6.0, -1.0f64..2.0),
            kind in prop_oneof![Just(ClassifierKind::Tree), Just(ClassifierKind::Forest), Just(ClassifierKind::AdaBoost)],
        ) {
            let x = Matrix::from_rows(&rows.iter().map(|r| vec![r.0, r.1]).collect::<Vec<_>>()).unwrap();
            let y: Vec<usize> = rows.iter().map(|r| r.2).collect();
            let spec = match ClassifierSpec::from(kind) {
                ClassifierSpec::Forest(p) => ClassifierSpec::Forest(ForestParams { n_trees: 5, ..p }),
                other => other,
            };
            let model = spec.fit(&x, &y, 3, 1).unwrap();
            let p = model.predict_proba(&[probe.0, probe.1]).unwrap();
            prop_assert!(p.as_slice().iter().all(|v| *v >= 0.0));
            prop_assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
}
