//! Supervised learning of neighborhood potential: datasets, labels,
//! scaling, class balancing and a random-forest classifier.

mod dataset;
mod forest;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{Dataset, Sample};
pub use forest::{train_forest, BalanceMode, ForestModel, ForestParams, Node, TrainingMeta, Tree, MODEL_FORMAT, MODEL_VERSION};

use crate::rng::rng_from;

const SPLIT_STREAM: u64 = 0x73706c74;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearningError {
    #[error("training data contains a single class")]
    SingleClass,
    #[error("expected {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: String, expected: u32 },
    #[error("corrupt model: {0}")]
    CorruptModel(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("feature manifests differ")]
    ManifestMismatch,
    #[error("dataset line {line}: {message}")]
    Format { line: u64, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LearningError {
    fn from(e: std::io::Error) -> Self {
        LearningError::Io(e.to_string())
    }
}

/// `true` iff the improvement is strictly above the threshold.
pub fn label(improvements: &[f64], threshold: f64) -> Vec<bool> {
    improvements.iter().map(|&y| y > threshold).collect()
}

/// Seeded uniform partition of `0..n` into `round(ratio * n)` training
/// indices and the rest, both sorted.
pub fn split(n: usize, ratio: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(seed, &[SPLIT_STREAM]));
    let cut = ((ratio * n as f64).round() as usize).min(n);
    let (mut train, mut valid) = (order[..cut].to_vec(), order[cut..].to_vec());
    train.sort_unstable();
    valid.sort_unstable();
    (train, valid)
}

/// Like [`split`], but partitions whole groups so that samples sharing a
/// key land on the same side.
pub fn split_groups<K: Ord + Clone>(keys: &[K], ratio: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut groups: Vec<K> = keys.to_vec();
    groups.sort();
    groups.dedup();
    let (train_groups, _) = split(groups.len(), ratio, seed);
    let mut in_train = vec![false; groups.len()];
    for g in train_groups {
        in_train[g] = true;
    }
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for (i, k) in keys.iter().enumerate() {
        let g = groups.binary_search(k).expect("key is present");
        if in_train[g] {
            train.push(i);
        } else {
            valid.push(i);
        }
    }
    (train, valid)
}

/// Class weights `N / (2 * count_c)`, one per sample.
pub fn balance_weights(labels: &[bool]) -> Result<Vec<f64>, LearningError> {
    let n = labels.len() as f64;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(LearningError::SingleClass);
    }
    let wp = n / (2.0 * pos as f64);
    let wn = n / (2.0 * neg as f64);
    Ok(labels.iter().map(|&l| if l { wp } else { wn }).collect())
}

/// Per-feature z-score with training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    /// Population standard deviation; zero-variance features store 1.
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, LearningError> {
        let first = rows.first().ok_or(LearningError::EmptyDataset)?;
        let f = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; f];
        for row in rows {
            if row.len() != f {
                return Err(LearningError::DimensionMismatch { expected: f, actual: row.len() });
            }
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; f];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>, LearningError> {
        if x.len() != self.len() {
            return Err(LearningError::DimensionMismatch { expected: self.len(), actual: x.len() });
        }
        Ok(x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect())
    }
}

/// Share of rows whose thresholded prediction (p > 0.5) matches the label.
pub fn accuracy(model: &ForestModel, rows: &[Vec<f64>], labels: &[bool]) -> Result<f64, LearningError> {
    if rows.is_empty() {
        return Err(LearningError::EmptyDataset);
    }
    let mut hits = 0usize;
    for (x, &l) in rows.iter().zip(labels) {
        if (model.predict_potential(x)? > 0.5) == l {
            hits += 1;
        }
    }
    Ok(hits as f64 / rows.len() as f64)
}
