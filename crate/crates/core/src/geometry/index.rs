//! Exact nearest-neighbor search over a fixed 3D cloud.
//!
//! A balanced k-d tree: nodes split at the median along the axis of largest
//! spread, leaves hold up to `leaf_size` points. Results are identical to an
//! exhaustive scan, including tie order (equal squared distances resolve to
//! the smaller point index).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cloud::{dist2, Point3};
use crate::{Error, Result};

pub const DEFAULT_LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

impl Neighbor {
    #[inline]
    fn key_lt(&self, other: &Neighbor) -> bool {
        self.dist2 < other.dist2 || (self.dist2 == other.dist2 && self.index < other.index)
    }
}

// Max-heap entry ordered by (dist2, index).
#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry(Neighbor);

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .dist2
            .total_cmp(&other.0.dist2)
            .then(self.0.index.cmp(&other.0.index))
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Vec<Point3>,
    // Point indices permuted so every leaf owns a contiguous range.
    order: Vec<usize>,
    nodes: Vec<Node>,
    lo: Point3,
    hi: Point3,
}

impl NeighborIndex {
    pub fn build(points: &[Point3]) -> Result<Self> {
        Self::with_leaf_size(points, DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(points: &[Point3], leaf_size: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("cannot index an empty cloud".into()));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("indexed cloud".into()));
        }
        let mut index = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
            lo: [0.0; 3],
            hi: [0.0; 3],
        };
        let (lo, hi) = bounds(&index.points, &index.order);
        index.lo = lo;
        index.hi = hi;
        index.build_node(0, points.len(), leaf_size.max(1));
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    fn build_node(&mut self, start: usize, end: usize, leaf_size: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= leaf_size {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let (lo, hi) = bounds(&self.points, &self.order[start..end]);
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
            .unwrap_or(0);
        if hi[axis] - lo[axis] <= 0.0 {
            // All points coincide.
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end }); // placeholder
        let left = self.build_node(start, mid, leaf_size);
        let right = self.build_node(mid, end, leaf_size);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// Single nearest neighbor.
    pub fn nearest(&self, query: &Point3) -> Neighbor {
        let mut best = Neighbor {
            index: usize::MAX,
            dist2: f64::INFINITY,
        };
        self.nearest_rec(0, query, box_dist2(query, &self.lo, &self.hi), &mut best);
        best
    }

    fn nearest_rec(&self, node: usize, q: &Point3, min_d2: f64, best: &mut Neighbor) {
        if min_d2 > best.dist2 {
            return;
        }
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Neighbor {
                        index: i,
                        dist2: dist2(q, &self.points[i]),
                    };
                    if cand.key_lt(best) {
                        *best = cand;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, q, min_d2, best);
                // Points in `far` are at least |diff| away along `axis`; the
                // split plane itself may hold points on the left side, so the
                // bound is not strict.
                let far_d2 = min_d2.max(diff * diff);
                self.nearest_rec(far, q, far_d2, best);
            }
        }
    }

    /// The `k` nearest indexed points, ascending by `(dist2, index)`.
    pub fn knn(&self, query: &Point3, k: usize) -> Result<Vec<Neighbor>> {
        if k > self.points.len() {
            return Err(Error::InvalidInput(format!(
                "k = {k} exceeds indexed cloud size {}",
                self.points.len()
            )));
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(0, query, box_dist2(query, &self.lo, &self.hi), k, &mut heap);
        let mut out: Vec<Neighbor> = heap.into_iter().map(|e| e.0).collect();
        out.sort_by(|a, b| a.dist2.total_cmp(&b.dist2).then(a.index.cmp(&b.index)));
        Ok(out)
    }

    fn knn_rec(
        &self,
        node: usize,
        q: &Point3,
        min_d2: f64,
        k: usize,
        heap: &mut BinaryHeap<HeapEntry>,
    ) {
        if heap.len() == k && min_d2 > heap.peek().map_or(f64::INFINITY, |e| e.0.dist2) {
            return;
        }
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Neighbor {
                        index: i,
                        dist2: dist2(q, &self.points[i]),
                    };
                    if heap.len() < k {
                        heap.push(HeapEntry(cand));
                    } else if cand.key_lt(&heap.peek().expect("heap is full").0) {
                        heap.pop();
                        heap.push(HeapEntry(cand));
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, q, min_d2, k, heap);
                self.knn_rec(far, q, min_d2.max(diff * diff), k, heap);
            }
        }
    }
}

fn bounds(points: &[Point3], idx: &[usize]) -> (Point3, Point3) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in idx {
        for a in 0..3 {
            lo[a] = lo[a].min(points[i][a]);
            hi[a] = hi[a].max(points[i][a]);
        }
    }
    (lo, hi)
}

fn box_dist2(q: &Point3, lo: &Point3, hi: &Point3) -> f64 {
    (0..3)
        .map(|a| {
            let d = if q[a] < lo[a] {
                lo[a] - q[a]
            } else if q[a] > hi[a] {
                q[a] - hi[a]
            } else {
                0.0
            };
            d * d
        })
        .sum()
}

/// Exhaustive kNN with the same ordering contract as [`NeighborIndex::knn`].
pub fn brute_force_knn(points: &[Point3], query: &Point3, k: usize) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = points
        .iter()
        .enumerate()
        .map(|(index, p)| Neighbor {
            index,
            dist2: dist2(query, p),
        })
        .collect();
    all.sort_by(|a, b| a.dist2.total_cmp(&b.dist2).then(a.index.cmp(&b.index)));
    all.truncate(k);
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]
            })
            .collect()
    }

    #[test]
    fn single_point_cloud() {
        let idx = NeighborIndex::build(&[[1.0, 2.0, 3.0]]).unwrap();
        let n = idx.nearest(&[-5.0, 0.0, 9.0]);
        assert_eq!(n.index, 0);
        assert_eq!(idx.knn(&[0.0; 3], 1).unwrap()[0].index, 0);
    }

    #[test]
    fn duplicates_give_zero_distance() {
        let pts = vec![[0.5, 0.5, 0.5]; 20];
        let idx = NeighborIndex::build(&pts).unwrap();
        let n = idx.nearest(&[0.5, 0.5, 0.5]);
        assert_eq!(n.dist2, 0.0);
        assert_eq!(n.index, 0);
        let k = idx.knn(&[0.5, 0.5, 0.5], 5).unwrap();
        assert_eq!(k.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn collinear_example() {
        let pts: Vec<Point3> = (0..4).map(|i| [i as f64, 0.0, 0.0]).collect();
        let idx = NeighborIndex::build(&pts).unwrap();
        let k = idx.knn(&[1.6, 0.0, 0.0], 2).unwrap();
        assert_eq!(k[0].index, 2);
        assert_eq!(k[1].index, 1);
    }

    #[test]
    fn query_on_indexed_point() {
        let pts = random_points(100, 1);
        let idx = NeighborIndex::build(&pts).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let k = idx.knn(p, 1).unwrap();
            assert_eq!(k[0], Neighbor { index: i, dist2: 0.0 });
        }
    }

    #[test]
    fn k_too_large_is_rejected() {
        let idx = NeighborIndex::build(&random_points(5, 2)).unwrap();
        assert!(idx.knn(&[0.0; 3], 6).is_err());
        assert!(NeighborIndex::build(&[]).is_err());
    }

    #[test]
    fn matches_brute_force_on_ten_thousand_points() {
        let pts = random_points(10_000, 3);
        let queries = random_points(1_000, 4);
        let idx = NeighborIndex::build(&pts).unwrap();
        for q in &queries {
            assert_eq!(idx.knn(q, 1).unwrap(), brute_force_knn(&pts, q, 1));
            assert_eq!(vec![idx.nearest(q)], brute_force_knn(&pts, q, 1));
        }
    }

    #[test]
    fn knn_nine_matches_brute_force() {
        let pts = random_points(512, 5);
        let idx = NeighborIndex::build(&pts).unwrap();
        for q in random_points(200, 6).iter().chain(&pts) {
            assert_eq!(idx.knn(q, 9).unwrap(), brute_force_knn(&pts, q, 9));
        }
    }

    #[test]
    fn ties_on_a_grid_resolve_by_index() {
        // Integer lattice: many equal distances.
        let mut pts = Vec::new();
        for x in 0..5 {
            for y in 0..5 {
                for z in 0..3 {
                    pts.push([x as f64, y as f64, z as f64]);
                }
            }
        }
        let idx = NeighborIndex::with_leaf_size(&pts, 2).unwrap();
        for q in &pts {
            assert_eq!(idx.knn(q, 7).unwrap(), brute_force_knn(&pts, q, 7));
            assert_eq!(idx.nearest(q), brute_force_knn(&pts, q, 1)[0]);
        }
        let q = [2.5, 2.5, 1.0];
        assert_eq!(idx.knn(&q, 6).unwrap(), brute_force_knn(&pts, &q, 6));
    }

    proptest! {
        #[test]
        fn knn_is_exact(
            pts in prop::collection::vec(prop::array::uniform3(-3i32..3), 1..60),
            q in prop::array::uniform3(-4i32..4),
            k in 1usize..10,
            leaf in 1usize..6,
        ) {
            // Small integer coordinates force many exact ties.
            let pts: Vec<Point3> = pts.iter().map(|p| p.map(|c| c as f64 * 0.5)).collect();
            let q = q.map(|c| c as f64 * 0.5);
            let k = k.min(pts.len());
            let idx = NeighborIndex::with_leaf_size(&pts, leaf).unwrap();
            prop_assert_eq!(idx.knn(&q, k).unwrap(), brute_force_knn(&pts, &q, k));
            prop_assert_eq!(idx.nearest(&q), brute_force_knn(&pts, &q, 1)[0]);
        }
    }
}
