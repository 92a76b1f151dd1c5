//! Random forest of CART classifiers with weighted Gini splits.

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{balance_weights, LearningError, Scaler};
use crate::rng::{derive_seed, rng_from, Rng};

pub const MODEL_FORMAT: &str = "lens-forest";
pub const MODEL_VERSION: u32 = 1;

const TREE_STREAM: u64 = 0x74726565;

/// How the balanced class weights enter training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    /// Bootstrap draws are proportional to the weights; splits count draws.
    Bootstrap,
    /// Uniform bootstrap; the weights scale each draw in the Gini sums.
    SplitWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub tree_count: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Candidate features per split; `None` means the rounded-up square
    /// root of the feature count.
    pub features_per_split: Option<usize>,
    pub balance: BalanceMode,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { tree_count: 100, max_depth: 16, min_leaf: 5, features_per_split: None, balance: BalanceMode::Bootstrap }
    }
}

impl ForestParams {
    pub fn resolved_features_per_split(&self, feature_count: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (feature_count as f64).sqrt().ceil() as usize)
            .clamp(1, feature_count.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    /// Class frequencies `[negative, positive]`, summing to one.
    Leaf { frequencies: [f64; 2] },
}

/// Nodes in creation order; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Positive-class frequency of the leaf reached by `x` (scaled input).
    pub fn leaf_positive(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { frequencies } => return frequencies[1],
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, at: usize) -> usize {
            match &t.nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub sample_count: usize,
    pub positive_count: usize,
    pub threshold: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format: String,
    pub version: u32,
    pub feature_names: Vec<String>,
    pub scaler: Scaler,
    pub params: ForestParams,
    pub trees: Vec<Tree>,
    pub meta: TrainingMeta,
}

impl ForestModel {
    pub fn feature_count(&self) -> usize {
        self.scaler.len()
    }

    /// Mean positive-class leaf frequency over the trees.
    pub fn predict_potential(&self, x: &[f64]) -> Result<f64, LearningError> {
        let z = self.scaler.transform(x)?;
        Ok(self.tree_outputs_scaled(&z).sum::<f64>() / self.trees.len() as f64)
    }

    /// Per-tree positive-class frequencies for a raw input.
    pub fn tree_outputs(&self, x: &[f64]) -> Result<Vec<f64>, LearningError> {
        let z = self.scaler.transform(x)?;
        Ok(self.tree_outputs_scaled(&z).collect())
    }

    fn tree_outputs_scaled<'a>(&'a self, z: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        self.trees.iter().map(move |t| t.leaf_positive(z))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LearningError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| LearningError::CorruptModel(e.to_string()))?;
        if value.get("format").and_then(|f| f.as_str()) != Some(MODEL_FORMAT) {
            return Err(LearningError::CorruptModel("not a forest model file".into()));
        }
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(MODEL_VERSION) => {}
            other => {
                let found = other.map_or_else(|| value.get("version").map_or("none".into(), |v| v.to_string()), |v| v.to_string());
                return Err(LearningError::VersionMismatch { found, expected: MODEL_VERSION });
            }
        }
        let model: ForestModel =
            serde_json::from_value(value).map_err(|e| LearningError::CorruptModel(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), LearningError> {
        let corrupt = |m: &str| Err(LearningError::CorruptModel(m.into()));
        let f = self.scaler.len();
        if self.scaler.std.len() != f || self.feature_names.len() != f {
            return corrupt("manifest and scaler lengths differ");
        }
        if self.trees.is_empty() {
            return corrupt("no trees");
        }
        for t in &self.trees {
            if t.nodes.is_empty() {
                return corrupt("empty tree");
            }
            for (i, n) in t.nodes.iter().enumerate() {
                if let Node::Split { feature, left, right, .. } = n {
                    if *feature >= f || *left <= i || *right <= i || *left >= t.nodes.len() || *right >= t.nodes.len() {
                        return corrupt("dangling split");
                    }
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), LearningError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LearningError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// One bootstrap draw: a training row and the weight it carries in splits.
#[derive(Clone, Copy)]
struct Draw {
    row: u32,
    weight: f64,
}

struct Builder<'a> {
    columns: &'a [Vec<f64>],
    labels: &'a [bool],
    params: &'a ForestParams,
    mtry: usize,
    nodes: Vec<Node>,
    scratch: Vec<(f64, bool, f64)>,
}

fn gini_mass(w0: f64, w1: f64) -> f64 {
    let t = w0 + w1;
    if t <= 0.0 {
        0.0
    } else {
        t - (w0 * w0 + w1 * w1) / t
    }
}

impl Builder<'_> {
    fn leaf(&mut self, w0: f64, w1: f64) -> usize {
        let t = w0 + w1;
        let frequencies = if t > 0.0 { [w0 / t, 1.0 - w0 / t] } else { [0.5, 0.5] };
        self.nodes.push(Node::Leaf { frequencies });
        self.nodes.len() - 1
    }

    fn build(&mut self, draws: &mut [Draw], depth: usize, rng: &mut Rng) -> usize {
        let (mut w0, mut w1) = (0.0, 0.0);
        for d in draws.iter() {
            if self.labels[d.row as usize] {
                w1 += d.weight;
            } else {
                w0 += d.weight;
            }
        }
        let min_leaf = self.params.min_leaf.max(1);
        if depth >= self.params.max_depth || draws.len() < 2 * min_leaf || w0 == 0.0 || w1 == 0.0 {
            return self.leaf(w0, w1);
        }
        let features = index::sample(rng, self.columns.len(), self.mtry);
        let mut best: Option<(f64, usize, f64)> = None;
        for feature in features {
            let column = &self.columns[feature];
            self.scratch.clear();
            self.scratch.extend(
                draws.iter().map(|d| (column[d.row as usize], self.labels[d.row as usize], d.weight)),
            );
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut l0, mut l1) = (0.0, 0.0);
            let n = self.scratch.len();
            for i in 0..n - 1 {
                let (v, pos, w) = self.scratch[i];
                if pos {
                    l1 += w;
                } else {
                    l0 += w;
                }
                let next = self.scratch[i + 1].0;
                if i + 1 < min_leaf || n - i - 1 < min_leaf || next <= v {
                    continue;
                }
                let score = gini_mass(l0, l1) + gini_mass(w0 - l0, w1 - l1);
                if best.is_none_or(|(s, _, _)| score < s) {
                    let mid = v + (next - v) / 2.0;
                    let threshold = if mid < next { mid } else { v };
                    best = Some((score, feature, threshold));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return self.leaf(w0, w1);
        };
        let column = &self.columns[feature];
        let mut cut = 0;
        for i in 0..draws.len() {
            if column[draws[i].row as usize] <= threshold {
                draws.swap(i, cut);
                cut += 1;
            }
        }
        let at = self.nodes.len();
        self.nodes.push(Node::Split { feature, threshold, left: 0, right: 0 });
        let (left_draws, right_draws) = draws.split_at_mut(cut);
        let left = self.build(left_draws, depth + 1, rng);
        let right = self.build(right_draws, depth + 1, rng);
        self.nodes[at] = Node::Split { feature, threshold, left, right };
        at
    }
}

fn grow_tree(
    columns: &[Vec<f64>],
    labels: &[bool],
    weights: &[f64],
    params: &ForestParams,
    seed: u64,
) -> Tree {
    let mut rng = rng_from(seed, &[]);
    let n = labels.len();
    let mut draws: Vec<Draw> = match params.balance {
        BalanceMode::Bootstrap => {
            let dist = WeightedIndex::new(weights).expect("weights are positive");
            (0..n).map(|_| Draw { row: dist.sample(&mut rng) as u32, weight: 1.0 }).collect()
        }
        BalanceMode::SplitWeights => (0..n)
            .map(|_| {
                let row = rng.random_range(0..n);
                Draw { row: row as u32, weight: weights[row] }
            })
            .collect(),
    };
    let mut builder = Builder {
        columns,
        labels,
        params,
        mtry: params.resolved_features_per_split(columns.len()),
        nodes: Vec::new(),
        scratch: Vec::with_capacity(n),
    };
    builder.build(&mut draws, 0, &mut rng);
    Tree { nodes: builder.nodes }
}

/// Fits the scaler and grows `tree_count` trees in parallel. Tree `t` uses
/// its own seed derived from `seed` and `t`, so the result does not depend
/// on scheduling.
pub fn train_forest(
    feature_names: &[String],
    rows: &[Vec<f64>],
    labels: &[bool],
    params: &ForestParams,
    threshold: f64,
    seed: u64,
) -> Result<ForestModel, LearningError> {
    if rows.len() != labels.len() {
        return Err(LearningError::DimensionMismatch { expected: rows.len(), actual: labels.len() });
    }
    if rows.len() < 2 {
        return Err(LearningError::EmptyDataset);
    }
    let weights = balance_weights(labels)?;
    let scaler = Scaler::fit(rows)?;
    if scaler.len() != feature_names.len() {
        return Err(LearningError::DimensionMismatch { expected: feature_names.len(), actual: scaler.len() });
    }
    let mut columns = vec![Vec::with_capacity(rows.len()); scaler.len()];
    for row in rows {
        for (c, v) in columns.iter_mut().zip(scaler.transform(row)?) {
            c.push(v);
        }
    }
    let tree_count = params.tree_count.max(1);
    let trees: Vec<Tree> = (0..tree_count)
        .into_par_iter()
        .map(|t| grow_tree(&columns, labels, &weights, params, derive_seed(seed, &[TREE_STREAM, t as u64])))
        .collect();
    Ok(ForestModel {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        feature_names: feature_names.to_vec(),
        scaler,
        params: ForestParams { tree_count, ..*params },
        trees,
        meta: TrainingMeta {
            sample_count: rows.len(),
            positive_count: labels.iter().filter(|&&l| l).count(),
            threshold,
            seed,
        },
    })
}
