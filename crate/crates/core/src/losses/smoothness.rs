use super::chamfer::LossValue;
use crate::cloud::{dist2, sub, Point3};
use crate::geometry::NeighborIndex;
use crate::{Error, Result};

pub const DEFAULT_SMOOTH_K: usize = 9;

/// Fixed `k`-nearest-neighbor sets (self excluded) over a reference cloud.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnnGraph {
    k: usize,
    neighbors: Vec<usize>,
}

impl KnnGraph {
    pub fn build(points: &[Point3], k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("smoothness needs k >= 1".into()));
        }
        if points.len() <= k {
            return Err(Error::InvalidInput(format!(
                "smoothness needs more than k = {k} points, got {}",
                points.len()
            )));
        }
        let index = NeighborIndex::build(points)?;
        let mut neighbors = Vec::with_capacity(points.len() * k);
        for (i, p) in points.iter().enumerate() {
            let mut found = index.knn(p, k + 1)?;
            match found.iter().position(|n| n.index == i) {
                Some(pos) => {
                    found.remove(pos);
                }
                None => {
                    found.pop();
                }
            }
            neighbors.extend(found.iter().map(|n| n.index));
        }
        Ok(Self { k, neighbors })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.neighbors.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i * self.k..(i + 1) * self.k]
    }
}

/// Local rigidity penalty `sum_i (1/k) sum_{j in N(i)} |dx_j - dx_i|^2`,
/// gradient w.r.t. the motions.
pub fn smoothness(points: &[Point3], motions: &[Point3], k: usize) -> Result<LossValue> {
    if motions.len() != points.len() {
        return Err(Error::InvalidInput(format!(
            "{} motions for {} points",
            motions.len(),
            points.len()
        )));
    }
    let graph = KnnGraph::build(points, k)?;
    smoothness_with_graph(&graph, motions)
}

pub fn smoothness_with_graph(graph: &KnnGraph, motions: &[Point3]) -> Result<LossValue> {
    if motions.len() != graph.len() {
        return Err(Error::InvalidInput(format!(
            "{} motions for a {}-point neighbor graph",
            motions.len(),
            graph.len()
        )));
    }
    let kf = graph.k() as f64;
    let mut value = 0.0;
    let mut grad = vec![[0.0; 3]; motions.len()];
    for (i, mi) in motions.iter().enumerate() {
        let mut inner = 0.0;
        for &j in graph.neighbors(i) {
            inner += dist2(&motions[j], mi);
            let d = sub(mi, &motions[j]);
            for a in 0..3 {
                let g = 2.0 * d[a] / kf;
                grad[i][a] += g;
                grad[j][a] -= g;
            }
        }
        value += inner / kf;
    }
    Ok(LossValue { value, grad })
}
