//! Exact k-nearest-neighbor search over dense `f32` feature rows.
//!
//! Both the linear scan and the k-d tree rank by `(squared distance, row)`
//! and compute distances with the same [`squared_distance`], so they return
//! identical neighbor lists including tie order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Squared Euclidean distance accumulated in `f64`.
pub fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub row: usize,
    pub dist2: f64,
}

impl Eq for Hit {}

impl Ord for Hit {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.row.cmp(&other.row))
    }
}

impl PartialOrd for Hit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Row-major feature matrix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(dim: usize) -> Self {
        FeatureMatrix { dim, data: Vec::new() }
    }

    pub fn push(&mut self, row: &[f32]) {
        assert_eq!(row.len(), self.dim, "feature length");
        self.data.extend_from_slice(row);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn linear_scan(features: &FeatureMatrix, query: &[f32], k: usize) -> Vec<Hit> {
    let mut hits: Vec<Hit> = (0..features.rows())
        .map(|row| Hit { row, dist2: squared_distance(features.row(row), query) })
        .collect();
    let k = k.min(hits.len());
    if k == 0 {
        return Vec::new();
    }
    if k < hits.len() {
        hits.select_nth_unstable(k - 1);
        hits.truncate(k);
    }
    hits.sort_unstable();
    hits
}

enum Node {
    Leaf { rows: Vec<usize> },
    Split { dim: usize, value: f32, left: Box<Node>, right: Box<Node> },
}

pub struct KdTree {
    root: Node,
}

const LEAF_SIZE: usize = 16;

impl KdTree {
    pub fn build(features: &FeatureMatrix) -> Self {
        let rows: Vec<usize> = (0..features.rows()).collect();
        KdTree { root: build_node(features, rows) }
    }

    pub fn search(&self, features: &FeatureMatrix, query: &[f32], k: usize) -> Vec<Hit> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        search_node(&self.root, features, query, k, &mut heap);
        let mut out = heap.into_vec();
        out.sort_unstable();
        out
    }
}

fn build_node(features: &FeatureMatrix, mut rows: Vec<usize>) -> Node {
    if rows.len() <= LEAF_SIZE {
        return Node::Leaf { rows };
    }
    // split on the dimension of largest spread
    let mut best = (0usize, 0.0f32);
    for d in 0..features.dim() {
        let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
        for &r in &rows {
            let v = features.row(r)[d];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo > best.1 {
            best = (d, hi - lo);
        }
    }
    if best.1 <= 0.0 {
        return Node::Leaf { rows };
    }
    let dim = best.0;
    let mid = rows.len() / 2;
    rows.select_nth_unstable_by(mid, |a, b| {
        features.row(*a)[dim].total_cmp(&features.row(*b)[dim]).then(a.cmp(b))
    });
    let value = features.row(rows[mid])[dim];
    let right = rows.split_off(mid);
    Node::Split {
        dim,
        value,
        left: Box::new(build_node(features, rows)),
        right: Box::new(build_node(features, right)),
    }
}

fn search_node(node: &Node, features: &FeatureMatrix, query: &[f32], k: usize, heap: &mut BinaryHeap<Hit>) {
    match node {
        Node::Leaf { rows } => {
            for &row in rows {
                let hit = Hit { row, dist2: squared_distance(features.row(row), query) };
                if heap.len() < k {
                    heap.push(hit);
                } else if hit < *heap.peek().expect("non-empty heap") {
                    heap.pop();
                    heap.push(hit);
                }
            }
        }
        Node::Split { dim, value, left, right } => {
            // left holds values <= split, right values >= split
            let diff = query[*dim] as f64 - *value as f64;
            let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
            search_node(near, features, query, k, heap);
            let bound = diff * diff;
            if heap.len() < k || bound <= heap.peek().expect("non-empty heap").dist2 {
                search_node(far, features, query, k, heap);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, dim: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = FeatureMatrix::new(dim);
        for _ in 0..rows {
            // coarse values so that exact ties occur
            let row: Vec<f32> = (0..dim).map(|_| (rng.random_range(0..8) as f32) * 0.25).collect();
            m.push(&row);
        }
        m
    }

    #[test]
    fn tree_matches_scan_with_ties() {
        let m = random_matrix(500, 6, 7);
        let tree = KdTree::build(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let q: Vec<f32> = (0..6).map(|_| (rng.random_range(0..8) as f32) * 0.25).collect();
            for k in [1, 5, 37, 500, 600] {
                assert_eq!(tree.search(&m, &q, k), linear_scan(&m, &q, k));
            }
        }
    }

    #[test]
    fn self_query_is_first() {
        let m = random_matrix(100, 10, 3);
        let hits = linear_scan(&m, m.row(42), 3);
        assert_eq!(hits[0].dist2, 0.0);
        // the query row or an exact duplicate with a smaller index
        assert!(hits[0].row <= 42);
    }

    #[test]
    fn scan_is_sorted() {
        let m = random_matrix(300, 4, 11);
        let hits = linear_scan(&m, &[0.5, 0.5, 0.5, 0.5], 300);
        assert!(hits.windows(2).all(|w| w[0] <= w[1]));
    }
}
