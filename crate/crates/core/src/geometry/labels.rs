use std::collections::HashMap;

use super::index::NeighborIndex;
use crate::cloud::PointCloud;
use crate::{Error, Result};

pub const DEFAULT_LABEL_K: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPointCloud {
    pub cloud: PointCloud,
    pub labels: Vec<i32>,
}

impl LabeledPointCloud {
    pub fn new(cloud: PointCloud, labels: Vec<i32>) -> Result<Self> {
        if labels.len() != cloud.len() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} points",
                labels.len(),
                cloud.len()
            )));
        }
        Ok(Self { cloud, labels })
    }
}

/// Majority vote over the `k` nearest labeled points.
///
/// Vote ties go to whichever tied label appears first in ascending-distance
/// order, which is the nearest point's label whenever that label is tied.
pub fn transfer_labels(
    labeled: &LabeledPointCloud,
    target: &PointCloud,
    k: usize,
) -> Result<LabeledPointCloud> {
    if labeled.cloud.is_empty() {
        return Err(Error::InvalidInput("labeled cloud is empty".into()));
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be >= 1".into()));
    }
    let k = k.min(labeled.cloud.len());
    let index = NeighborIndex::build(&labeled.cloud.points)?;
    let mut votes: HashMap<i32, usize> = HashMap::new();
    let mut labels = Vec::with_capacity(target.len());
    for q in &target.points {
        let nbrs = index.knn(q, k)?;
        votes.clear();
        for n in &nbrs {
            *votes.entry(labeled.labels[n.index]).or_default() += 1;
        }
        let top = votes.values().copied().max().unwrap_or(0);
        let label = nbrs
            .iter()
            .map(|n| labeled.labels[n.index])
            .find(|l| votes[l] == top)
            .expect("at least one neighbor");
        labels.push(label);
    }
    LabeledPointCloud::new(target.clone(), labels)
}

/// Fraction of positions where the two label arrays agree.
pub fn label_accuracy(predicted: &[i32], truth: &[i32]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}
