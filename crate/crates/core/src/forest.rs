//! Binary random-forest classifier (bootstrap + Gini CART trees) and
//! classification metrics.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::textfeat::FeatureMatrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "k")]
pub enum FeatureSubset {
    #[default]
    Sqrt,
    All,
    Fixed(usize),
}

impl std::str::FromStr for FeatureSubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(Self::Sqrt),
            "all" => Ok(Self::All),
            k => k.parse::<usize>().map(Self::Fixed).map_err(|_| {
                Error::InvalidArgument(format!(
                    "features per split must be sqrt, all or a count, got `{k}`"
                ))
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub features_per_split: FeatureSubset,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: FeatureSubset::Sqrt,
            seed: 0,
        }
    }
}

impl ForestParams {
    fn validate(&self, n_features: usize) -> Result<usize> {
        if self.n_trees == 0 {
            return Err(Error::InvalidArgument("n_trees must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidArgument(
                "min_samples_split must be at least 2".into(),
            ));
        }
        let m = match self.features_per_split {
            FeatureSubset::Sqrt => ((n_features as f64).sqrt() as usize).max(1),
            FeatureSubset::All => n_features,
            FeatureSubset::Fixed(k) if k == 0 || k > n_features => {
                return Err(Error::InvalidArgument(format!(
                    "features per split {k} must lie in 1..={n_features}"
                )))
            }
            FeatureSubset::Fixed(k) => k,
        };
        Ok(m.min(n_features).max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        /// Index into the model's `class_labels`.
        class: usize,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> usize {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { class } => return *class,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    fn check(&self, n_features: usize, n_classes: usize) -> bool {
        match self {
            TreeNode::Leaf { class } => *class < n_classes,
            TreeNode::Split {
                feature,
                left,
                right,
                ..
            } => {
                *feature < n_features
                    && left.check(n_features, n_classes)
                    && right.check(n_features, n_classes)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    #[serde(default)]
    pub tool_version: String,
    pub format_version: u32,
    /// Sorted ascending; ties in the vote go to index 0.
    pub class_labels: [String; 2],
    pub n_features: usize,
    pub feature_names: Vec<String>,
    pub params: ForestParams,
    pub trees: Vec<TreeNode>,
}

/// SplitMix64 finaliser over `(seed, tree)`.
fn tree_seed(seed: u64, tree: usize) -> u64 {
    let mut z = seed
        ^ (tree as u64)
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    m_try: usize,
    max_depth: Option<usize>,
    min_samples_split: usize,
}

fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = counts[0] as f64 / n;
    2.0 * p * (1.0 - p)
}

fn majority(counts: [usize; 2]) -> usize {
    usize::from(counts[1] > counts[0])
}

impl Grower<'_> {
    fn grow(&self, rows: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> TreeNode {
        let mut counts = [0usize; 2];
        for &r in rows.iter() {
            counts[self.y[r]] += 1;
        }
        let pure = counts[0] == 0 || counts[1] == 0;
        if pure || rows.len() < self.min_samples_split || self.max_depth.is_some_and(|d| depth >= d)
        {
            return TreeNode::Leaf {
                class: majority(counts),
            };
        }
        match self.best_split(rows, counts, rng) {
            None => TreeNode::Leaf {
                class: majority(counts),
            },
            Some((feature, threshold)) => {
                let mut split = 0;
                for i in 0..rows.len() {
                    if self.x[rows[i]][feature] <= threshold {
                        rows.swap(i, split);
                        split += 1;
                    }
                }
                let (l, r) = rows.split_at_mut(split);
                TreeNode::Split {
                    feature,
                    threshold,
                    left: Box::new(self.grow(l, depth + 1, rng)),
                    right: Box::new(self.grow(r, depth + 1, rng)),
                }
            }
        }
    }

    /// Lowest weighted child Gini over a random feature order; keeps
    /// examining features past `m_try` until one admits a split.
    fn best_split(
        &self,
        rows: &[usize],
        total: [usize; 2],
        rng: &mut ChaCha8Rng,
    ) -> Option<(usize, f64)> {
        let n_features = self.x[rows[0]].len();
        let mut order: Vec<usize> = (0..n_features).collect();
        order.shuffle(rng);
        let n = rows.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        for (examined, &f) in order.iter().enumerate() {
            if examined >= self.m_try && best.is_some() {
                break;
            }
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (self.x[r][f], self.y[r])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = [0usize; 2];
            for i in 0..sorted.len() - 1 {
                left[sorted[i].1] += 1;
                if sorted[i].0 == sorted[i + 1].0 {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let nl = (i + 1) as f64;
                let score = (nl * gini(left) + (n - nl) * gini(right)) / n;
                if best.is_none_or(|(s, _, _)| score < s) {
                    let mid = sorted[i].0 + (sorted[i + 1].0 - sorted[i].0) / 2.0;
                    // Adjacent floats can round the midpoint up to the right value.
                    let threshold = if mid < sorted[i + 1].0 {
                        mid
                    } else {
                        sorted[i].0
                    };
                    best = Some((score, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

fn class_pair(labels: &[String]) -> Result<[String; 2]> {
    let mut distinct: Vec<&String> = labels.iter().collect();
    distinct.sort();
    distinct.dedup();
    match distinct.as_slice() {
        [a, b] => Ok([(*a).clone(), (*b).clone()]),
        [_] => Err(Error::InvalidArgument(
            "training data contains a single class".into(),
        )),
        [] => Err(Error::InvalidArgument("training data is empty".into())),
        more => Err(Error::InvalidArgument(format!(
            "binary classification needs exactly 2 classes, found {}",
            more.len()
        ))),
    }
}

/// Trains on a fully labelled matrix with exactly two classes.
pub fn train_forest(
    train: &FeatureMatrix,
    params: &ForestParams,
    execution: Execution,
) -> Result<ForestModel> {
    if train.n_rows() < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 training rows".into(),
        ));
    }
    let labels = train.label_vec()?;
    let class_labels = class_pair(&labels)?;
    let y: Vec<usize> = labels
        .iter()
        .map(|l| usize::from(*l == class_labels[1]))
        .collect();
    let n_features = train.n_cols();
    if n_features == 0 {
        return Err(Error::InvalidArgument(
            "feature matrix has no columns".into(),
        ));
    }
    let m_try = params.validate(n_features)?;
    let grower = Grower {
        x: &train.values,
        y: &y,
        m_try,
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
    };
    let n = train.n_rows();
    let trees = exec::map_range(execution, params.n_trees, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(params.seed, t));
        let mut rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        grower.grow(&mut rows, 0, &mut rng)
    });
    Ok(ForestModel {
        tool_version: crate::TOOL_VERSION.to_string(),
        format_version: MODEL_FORMAT_VERSION,
        class_labels,
        n_features,
        feature_names: train.columns.clone(),
        params: *params,
        trees,
    })
}

impl ForestModel {
    /// Per-row vote counts `[class 0, class 1]`.
    pub fn votes(&self, row: &[f64]) -> [usize; 2] {
        let mut v = [0usize; 2];
        for t in &self.trees {
            v[t.predict(row)] += 1;
        }
        v
    }

    pub fn predict(&self, rows: &FeatureMatrix) -> Result<Vec<String>> {
        if rows.n_cols() != self.n_features {
            return Err(Error::InvalidArgument(format!(
                "model expects {} features, matrix has {}",
                self.n_features,
                rows.n_cols()
            )));
        }
        Ok(rows
            .values
            .iter()
            .map(|r| self.class_labels[majority(self.votes(r))].clone())
            .collect())
    }

    pub fn to_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn from_json<R: Read>(input: R) -> Result<Self> {
        let m: Self = serde_json::from_reader(input)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported model format_version {}",
                m.format_version
            )));
        }
        if !m.trees.iter().all(|t| t.check(m.n_features, 2)) {
            return Err(Error::InvalidArgument(
                "model contains an out-of-range feature or class".into(),
            ));
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub positive_label: String,
}

impl Metrics {
    pub fn from_counts(
        tp: usize,
        fp: usize,
        tn: usize,
        fn_: usize,
        positive_label: String,
    ) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            accuracy: ratio(tp + tn, tp + fp + tn + fn_),
            precision,
            recall,
            f1,
            tp,
            fp,
            tn,
            fn_,
            positive_label,
        }
    }
}

pub fn evaluate(y_true: &[String], y_pred: &[String], positive_label: &str) -> Result<Metrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidArgument(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::InvalidArgument("no labels to evaluate".into()));
    }
    if !y_true.iter().chain(y_pred).any(|l| l == positive_label) {
        return Err(Error::InvalidArgument(format!(
            "positive label `{positive_label}` does not occur"
        )));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (t, p) in y_true.iter().zip(y_pred) {
        match (t == positive_label, p == positive_label) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fn_ += 1,
        }
    }
    Ok(Metrics::from_counts(
        tp,
        fp,
        tn,
        fn_,
        positive_label.to_string(),
    ))
}
